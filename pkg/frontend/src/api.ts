/**
 * Data sources: the live HTTP service, or a static bundle.json opened
 * from disk (no server at all).  Both expose the same interface; the
 * static source answers every request from the bundle's precomputed
 * payloads, so the explorer works identically offline.
 */
import { AnalysisBundle, BiplotGeometry, GgeMode, StabilityRow, SignificanceRow } from "./types";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface GgeRequest {
  mode: GgeMode;
  centering?: string;
  svp?: number | null;
}

export interface DataSource {
  summary(): Promise<AnalysisBundle["dataset_summary"]>;
  significance(caseId: number): Promise<{ rows: SignificanceRow[] }>;
  stability(): Promise<{ rows: StabilityRow[] }>;
  gge(req: GgeRequest): Promise<BiplotGeometry>;
  ammi(): Promise<AnalysisBundle["ammi"]>;
}

export class ServiceSource implements DataSource {
  private sessionId: string | null = null;

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike,
    private csvBody: string,
    private columns: Record<string, string> = {}
  ) {}

  /** One upload per session; every later call reuses the session id. */
  private async session(): Promise<string> {
    if (this.sessionId) return this.sessionId;
    const params = new URLSearchParams(this.columns).toString();
    const resp = await this.fetchImpl(`${this.baseUrl}/datasets${params ? "?" + params : ""}`, {
      method: "POST",
      body: this.csvBody,
    });
    if (!resp.ok) {
      const body = await resp.json().catch(() => ({ detail: resp.statusText }));
      throw new Error(`upload failed: ${body.detail ?? resp.statusText}`);
    }
    const doc = await resp.json();
    this.sessionId = doc.session_id as string;
    this.summaryDoc = doc.summary;
    return this.sessionId;
  }

  private summaryDoc: AnalysisBundle["dataset_summary"] | null = null;

  async summary() {
    await this.session();
    return this.summaryDoc!;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const sid = await this.session();
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sid}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      const detail = await resp.json().catch(() => ({ detail: resp.statusText }));
      throw new Error(`${detail.error ?? resp.status}: ${detail.detail ?? ""}`);
    }
    return (await resp.json()) as T;
  }

  significance(caseId: number) {
    return this.post<{ rows: SignificanceRow[] }>("/significance", { case: caseId });
  }

  stability() {
    return this.post<{ rows: StabilityRow[] }>("/stability", {});
  }

  gge(req: GgeRequest) {
    return this.post<BiplotGeometry>("/gge", {
      mode: req.mode,
      centering: req.centering ?? "environment_centered",
      svp: req.svp ?? null,
    });
  }

  ammi() {
    return this.post<AnalysisBundle["ammi"]>("/ammi", { seed: 0 });
  }
}

/** Serves every request from a saved bundle.json. */
export class StaticBundleSource implements DataSource {
  constructor(private bundle: AnalysisBundle) {}

  async summary() {
    return this.bundle.dataset_summary;
  }

  async significance(_caseId: number) {
    return { rows: this.bundle.significance.table.rows };
  }

  async stability() {
    return { rows: this.bundle.stability.rows };
  }

  async gge(req: GgeRequest): Promise<BiplotGeometry> {
    const geom = this.bundle.gge.modes[req.mode];
    if (!geom) throw new Error(`bundle has no geometry for mode ${req.mode}`);
    return geom;
  }

  async ammi() {
    return this.bundle.ammi;
  }
}

export function parseBundle(text: string): AnalysisBundle {
  const doc = JSON.parse(text) as AnalysisBundle;
  if (doc.version !== "gxestat-bundle/1") {
    throw new Error(`unsupported bundle version: ${doc.version}`);
  }
  return doc;
}
