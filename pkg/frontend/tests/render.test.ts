import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { StaticBundleSource, parseBundle } from "../src/api";
import {
  axisLabels,
  renderBiplot,
  renderEnvironmentDetail,
  renderSignificanceTable,
  renderStabilityTable,
  winnerLabels,
} from "../src/render";
import { AnalysisBundle, DiscriminationEntry, GGE_MODES } from "../src/types";

const bundle: AnalysisBundle = parseBundle(
  readFileSync(new URL("../fixtures/bundle.json", import.meta.url), "utf-8")
);

describe("static bundle rendering", () => {
  it("renders all seven GGE modes with every point labelled", () => {
    for (const mode of GGE_MODES) {
      const geometry = bundle.gge.modes[mode];
      expect(geometry, `bundle lacks mode ${mode}`).toBeDefined();
      const svg = renderBiplot(geometry);
      expect(svg).toContain(`data-mode="${mode}"`);
      for (const genotype of bundle.dataset_summary.genotypes) {
        expect(svg, `${mode} missing ${genotype}`).toContain(`>${genotype}</text>`);
      }
      for (const location of bundle.dataset_summary.locations) {
        expect(svg).toContain(`>${location}</text>`);
      }
    }
  });

  it("renders winner labels exactly matching the payload assignment", () => {
    const geometry = bundle.gge.modes.which_won_where;
    const payload = geometry.overlays["winner_by_environment"] as Record<string, string>;
    expect(winnerLabels(geometry)).toEqual(payload);
    const svg = renderBiplot(geometry);
    for (const [env, winner] of Object.entries(payload)) {
      expect(svg).toContain(`${env}:${winner}`);
    }
  });

  it("marks the polygon and sector rays in which-won-where", () => {
    const svg = renderBiplot(bundle.gge.modes.which_won_where);
    expect(svg).toContain("<polygon");
    expect(svg).toContain("stroke-dasharray");
  });

  it("shows an acute angle when environment CL is selected", () => {
    const discrim = bundle.gge.modes.discrim_vs_repr.overlays as unknown as Record<
      string,
      DiscriminationEntry
    >;
    const ranking = bundle.gge.modes.ranking_genotypes.overlays as { order: string[] };
    const html = renderEnvironmentDetail("CL", discrim, ranking.order);
    expect(html).toContain('data-angle-kind="acute"');
    expect(discrim["CL"].angle_deg).toBeLessThan(90);
    expect(html).toContain("genotype-ranking");
    // the ranking list carries every genotype in payload order
    for (const genotype of ranking.order) {
      expect(html).toContain(genotype);
    }
  });

  it("draws the projection line for a selected environment", () => {
    const svg = renderBiplot(bundle.gge.modes.pc_scatter, { kind: "environment", name: "CL" });
    expect(svg).toContain('class="selected-env-axis"');
    expect(svg.match(/data-projection=/g)?.length).toBe(bundle.dataset_summary.genotypes.length);
  });

  it("labels axes with explained-variance percentages", () => {
    const labels = axisLabels(bundle.gge.modes.pc_scatter);
    expect(labels.pc1).toMatch(/^PC1 \d+\.\d%$/);
    const svg = renderBiplot(bundle.gge.modes.pc_scatter);
    expect(svg).toContain(labels.pc1);
    expect(svg).toContain(labels.pc2);
  });

  it("renders the significance and stability tables from the payload", () => {
    const sig = renderSignificanceTable(bundle.significance.table.rows);
    expect(sig).toContain("residual");
    const stab = renderStabilityTable(bundle.stability.rows, "StarbriteF1");
    expect(stab).toContain("StarbriteF1");
    expect(stab).toContain('class="kang-selected');
    // the YS column carries the selection plus sign
    const starbrite = bundle.stability.rows.find((r) => r.genotype === "StarbriteF1")!;
    expect(stab).toContain(`${starbrite.kang_ys}+`);
  });

  it("static source answers every mode without a server", async () => {
    const source = new StaticBundleSource(bundle);
    for (const mode of GGE_MODES) {
      const geom = await source.gge({ mode });
      expect(geom.mode).toBe(mode);
    }
    const stab = await source.stability();
    expect(stab.rows).toHaveLength(10);
  });
});
