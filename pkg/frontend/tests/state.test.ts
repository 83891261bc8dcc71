import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { DataSource, GgeRequest, ServiceSource, StaticBundleSource, parseBundle } from "../src/api";
import { axisLabels } from "../src/render";
import { Store } from "../src/state";
import { AnalysisBundle, BiplotGeometry } from "../src/types";

const bundle: AnalysisBundle = parseBundle(
  readFileSync(new URL("../fixtures/bundle.json", import.meta.url), "utf-8")
);

/** Wraps the static source, rescaling singular values per svp so svp
 * toggles visibly change the geometry (as the live service would). */
class FakeService implements DataSource {
  requests: GgeRequest[] = [];
  private inner = new StaticBundleSource(bundle);
  private gates: Array<() => void> = [];
  holdNext = 0;

  summary() {
    return this.inner.summary();
  }

  significance(caseId: number) {
    return this.inner.significance(caseId);
  }

  stability() {
    return this.inner.stability();
  }

  ammi() {
    return this.inner.ammi();
  }

  releaseAll() {
    for (const gate of this.gates.splice(0)) gate();
  }

  async gge(req: GgeRequest): Promise<BiplotGeometry> {
    this.requests.push({ ...req });
    if (this.holdNext > 0) {
      this.holdNext -= 1;
      await new Promise<void>((resolve) => this.gates.push(resolve));
    }
    const geom = await this.inner.gge(req);
    if (req.svp === null || req.svp === undefined) return geom;
    // mimic a service recomputation: a different partition changes the
    // explained-variance annotation the UI shows
    return {
      ...geom,
      svp: req.svp,
      explained_variance: geom.explained_variance.map((v) => v * (0.5 + req.svp!)),
    };
  }
}

describe("view state", () => {
  it("svp toggle re-fetches and updates the explained-variance labels", async () => {
    const service = new FakeService();
    const store = new Store(service);
    await store.refreshGeometry();
    const before = axisLabels(store.get().geometry!);
    const requestsBefore = service.requests.length;

    await store.setSvp(1.0);
    expect(service.requests.length).toBe(requestsBefore + 1);
    expect(service.requests.at(-1)!.svp).toBe(1.0);
    const after = axisLabels(store.get().geometry!);
    expect(after.pc1).not.toBe(before.pc1);
  });

  it("mode switches request new geometry without re-uploading", async () => {
    const service = new FakeService();
    const store = new Store(service);
    await store.setMode("which_won_where");
    await store.setMode("discrim_vs_repr");
    expect(service.requests.map((r) => r.mode)).toEqual(["which_won_where", "discrim_vs_repr"]);
  });

  it("stale responses are discarded: the last request wins", async () => {
    const service = new FakeService();
    const store = new Store(service);
    service.holdNext = 1; // first request stalls until released
    const first = store.setMode("mean_vs_stability");
    const second = store.setMode("which_won_where");
    await second;
    service.releaseAll();
    await first;
    expect(store.get().geometry!.mode).toBe("which_won_where");
  });

  it("service errors surface verbatim, no silent retries", async () => {
    const failing: DataSource = {
      summary: async () => bundle.dataset_summary,
      significance: async () => ({ rows: [] }),
      stability: async () => ({ rows: [] }),
      ammi: async () => bundle.ammi,
      gge: async () => {
        throw new Error("ZeroVarianceEnvironment: environment TN has zero variance");
      },
    };
    const store = new Store(failing);
    await store.refreshGeometry();
    expect(store.get().lastError).toContain("ZeroVarianceEnvironment");
    expect(store.get().geometry).toBeNull();
  });
});

describe("service source", () => {
  it("uploads once per session and reuses the session id", async () => {
    let uploads = 0;
    let analyses = 0;
    const fetchImpl = async (url: string, init?: RequestInit): Promise<Response> => {
      if (url.endsWith("/datasets")) {
        uploads += 1;
        return new Response(
          JSON.stringify({ session_id: "s1", summary: bundle.dataset_summary }),
          { status: 200 }
        );
      }
      analyses += 1;
      expect(url).toContain("/sessions/s1/");
      const body = JSON.parse(String(init?.body ?? "{}"));
      return new Response(JSON.stringify(bundle.gge.modes[body.mode ?? "pc_scatter"]), { status: 200 });
    };
    const source = new ServiceSource("", fetchImpl, "YR,LC,RP,CLT,MY\n...", {});
    await source.summary();
    await source.gge({ mode: "pc_scatter" });
    await source.gge({ mode: "which_won_where" });
    expect(uploads).toBe(1);
    expect(analyses).toBe(2);
  });

  it("rejects bundles with an unknown schema version", () => {
    expect(() => parseBundle(JSON.stringify({ version: "gxestat-bundle/9" }))).toThrow(/version/);
  });
});
