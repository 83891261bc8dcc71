/**
 * DOM glue: wires the store and renderers to the page.  This is the only
 * module that touches `document`; everything it displays comes from the
 * pure renderers, so the test suite runs without a browser.
 */
import { DataSource, ServiceSource, StaticBundleSource, parseBundle } from "./api";
import {
  renderBiplot,
  renderEnvironmentDetail,
  renderSignificanceTable,
  renderStabilityTable,
  renderSummary,
} from "./render";
import { Store } from "./state";
import { AnalysisBundle, DiscriminationEntry, GGE_MODES, GgeMode } from "./types";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function boot(): void {
  let source: DataSource | null = null;
  let store: Store | null = null;
  let staticBundle: AnalysisBundle | null = null;

  const biplotHost = el<HTMLDivElement>("biplot");
  const detailHost = el<HTMLDivElement>("detail");
  const tablesHost = el<HTMLDivElement>("tables");
  const summaryHost = el<HTMLDivElement>("summary");
  const errorHost = el<HTMLDivElement>("error");

  const modeSelect = el<HTMLSelectElement>("mode");
  for (const mode of GGE_MODES) {
    const opt = document.createElement("option");
    opt.value = mode;
    opt.textContent = mode;
    modeSelect.appendChild(opt);
  }

  async function redraw() {
    if (!store || !source) return;
    const state = store.get();
    errorHost.textContent = state.lastError ?? "";
    if (state.geometry) {
      biplotHost.innerHTML = renderBiplot(state.geometry, state.selection);
      for (const node of biplotHost.querySelectorAll("[data-env]")) {
        node.addEventListener("click", () => {
          store!.select({ kind: "environment", name: (node as HTMLElement).dataset.env! });
          void redraw();
        });
      }
      for (const node of biplotHost.querySelectorAll("[data-geno]")) {
        node.addEventListener("click", () => {
          store!.select({ kind: "genotype", name: (node as HTMLElement).dataset.geno! });
          void redraw();
        });
      }
    }
    if (state.selection?.kind === "environment") {
      const discrim = (await source.gge({ mode: "discrim_vs_repr" })).overlays as unknown as Record<
        string,
        DiscriminationEntry
      >;
      const ranking = (await source.gge({ mode: "ranking_genotypes" })).overlays as { order?: string[] };
      detailHost.innerHTML = renderEnvironmentDetail(
        state.selection.name,
        discrim,
        ranking.order ?? []
      );
    } else {
      detailHost.innerHTML = "";
    }
    const sig = await source.significance(state.caseId);
    const stab = await source.stability();
    tablesHost.innerHTML =
      renderSignificanceTable(sig.rows) +
      renderStabilityTable(stab.rows, state.selection?.kind === "genotype" ? state.selection.name : null);
  }

  async function start(newSource: DataSource) {
    source = newSource;
    store = new Store(newSource);
    store.subscribe(() => void 0);
    summaryHost.innerHTML = "";
    const summary = await newSource.summary();
    summaryHost.innerHTML = renderSummary({ dataset_summary: summary } as AnalysisBundle);
    await store.refreshGeometry();
    await redraw();
  }

  el<HTMLInputElement>("csv-file").addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    const text = await file.text();
    const columns = {
      year_col: el<HTMLInputElement>("col-year").value,
      loc_col: el<HTMLInputElement>("col-loc").value,
      rep_col: el<HTMLInputElement>("col-rep").value,
      geno_col: el<HTMLInputElement>("col-geno").value,
      trait_col: el<HTMLInputElement>("col-trait").value,
    };
    await start(new ServiceSource("", fetch.bind(window), text, columns));
  });

  el<HTMLInputElement>("bundle-file").addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    staticBundle = parseBundle(await file.text());
    await start(new StaticBundleSource(staticBundle));
  });

  modeSelect.addEventListener("change", async () => {
    if (!store) return;
    await store.setMode(modeSelect.value as GgeMode);
    await redraw();
  });

  el<HTMLSelectElement>("svp").addEventListener("change", async (ev) => {
    if (!store) return;
    const raw = (ev.target as HTMLSelectElement).value;
    await store.setSvp(raw === "" ? null : Number(raw));
    await redraw();
  });

  el<HTMLSelectElement>("centering").addEventListener("change", async (ev) => {
    if (!store) return;
    await store.setCentering((ev.target as HTMLSelectElement).value);
    await redraw();
  });

  el<HTMLSelectElement>("model-case").addEventListener("change", async (ev) => {
    if (!store) return;
    store.setCase(Number((ev.target as HTMLSelectElement).value));
    await redraw();
  });
}

if (typeof document !== "undefined" && document.getElementById("biplot")) {
  boot();
}
