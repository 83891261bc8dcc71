/**
 * View state and the request loop.  Statistical content never lives
 * here: the store holds the latest payloads and the user's selections,
 * and a per-view sequence number discards stale responses when the user
 * changes controls faster than the service answers.
 */
import { DataSource, GgeRequest } from "./api";
import { BiplotGeometry, GgeMode, Selection } from "./types";

export type Tab = "upload" | "significance" | "stability" | "biplot";

export interface ViewState {
  tab: Tab;
  mode: GgeMode;
  selection: Selection | null;
  centering: string;
  svp: number | null;
  caseId: number;
  hover: string | null;
  geometry: BiplotGeometry | null;
  pendingRequests: number;
  lastError: string | null;
}

export function initialState(): ViewState {
  return {
    tab: "biplot",
    mode: "pc_scatter",
    selection: null,
    centering: "environment_centered",
    svp: null,
    caseId: 1,
    hover: null,
    geometry: null,
    pendingRequests: 0,
    lastError: null,
  };
}

type Listener = (state: ViewState) => void;

export class Store {
  private state: ViewState = initialState();
  private listeners: Listener[] = [];
  private geometrySeq = 0;
  geometryRequests = 0; // observable request counter

  constructor(private source: DataSource) {}

  get(): ViewState {
    return this.state;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(patch: Partial<ViewState>) {
    this.state = { ...this.state, ...patch };
    for (const l of this.listeners) l(this.state);
  }

  setTab(tab: Tab) {
    this.emit({ tab });
  }

  select(selection: Selection | null) {
    this.emit({ selection });
  }

  hover(name: string | null) {
    this.emit({ hover: name });
  }

  setCase(caseId: number) {
    this.emit({ caseId });
  }

  /** Fetch the geometry for the current controls; stale answers are
   * dropped by sequence number, so the last request always wins. */
  async refreshGeometry(): Promise<void> {
    const seq = ++this.geometrySeq;
    this.geometryRequests += 1;
    this.emit({ pendingRequests: this.state.pendingRequests + 1 });
    const req: GgeRequest = {
      mode: this.state.mode,
      centering: this.state.centering,
      svp: this.state.svp,
    };
    try {
      const geometry = await this.source.gge(req);
      if (seq === this.geometrySeq) {
        this.emit({ geometry, lastError: null });
      }
    } catch (err) {
      if (seq === this.geometrySeq) {
        this.emit({ lastError: err instanceof Error ? err.message : String(err) });
      }
    } finally {
      this.emit({ pendingRequests: this.state.pendingRequests - 1 });
    }
  }

  async setMode(mode: GgeMode): Promise<void> {
    this.emit({ mode });
    await this.refreshGeometry();
  }

  async setSvp(svp: number | null): Promise<void> {
    this.emit({ svp });
    await this.refreshGeometry();
  }

  async setCentering(centering: string): Promise<void> {
    this.emit({ centering });
    await this.refreshGeometry();
  }
}
