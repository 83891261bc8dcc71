/**
 * Pure renderers: every view is a function from service payloads to an
 * SVG or HTML string.  Nothing here computes statistics; geometry
 * arrives pre-computed and is only scaled to the viewport.
 */
import {
  AnalysisBundle,
  AmmiBiplot,
  BiplotGeometry,
  DiscriminationEntry,
  GgeMode,
  Point,
  Selection,
  SignificanceRow,
  StabilityRow,
  WhichWonWhereOverlays,
} from "./types";

const SIZE = 760;
const MARGIN = 60;

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

function fmt(x: number): string {
  return Number(x.toFixed(3)).toString();
}

interface Scaler {
  toPx(p: Point): Point;
  scale: number;
}

function makeScaler(points: Point[]): Scaler {
  let span = 0;
  for (const [x, y] of points) {
    span = Math.max(span, Math.abs(x), Math.abs(y));
  }
  if (span <= 0) span = 1;
  span *= 1.15;
  const half = SIZE / 2;
  const scale = (half - MARGIN) / span;
  return {
    toPx: ([x, y]) => [half + x * scale, half - y * scale],
    scale,
  };
}

/** Winner labels exactly as the payload names them, in environment order. */
export function winnerLabels(geometry: BiplotGeometry): Record<string, string> {
  const overlays = geometry.overlays as unknown as WhichWonWhereOverlays;
  return { ...(overlays.winner_by_environment ?? {}) };
}

export function axisLabels(geometry: BiplotGeometry): { pc1: string; pc2: string } {
  const ev = geometry.explained_variance;
  return {
    pc1: `PC1 ${(100 * (ev[0] ?? 0)).toFixed(1)}%`,
    pc2: `PC2 ${(100 * (ev[1] ?? 0)).toFixed(1)}%`,
  };
}

export function renderBiplot(geometry: BiplotGeometry, selection: Selection | null = null): string {
  const pts: Point[] = [
    ...Object.values(geometry.genotype_points),
    ...Object.values(geometry.environment_points),
  ];
  const sc = makeScaler(pts);
  const half = SIZE / 2;
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${SIZE} ${SIZE}" data-mode="${geometry.mode}">`,
    `<line x1="${MARGIN}" y1="${half}" x2="${SIZE - MARGIN}" y2="${half}" stroke="#ccc"/>`,
    `<line x1="${half}" y1="${MARGIN}" x2="${half}" y2="${SIZE - MARGIN}" stroke="#ccc"/>`,
  ];
  const labels = axisLabels(geometry);
  parts.push(
    `<text x="${SIZE - MARGIN}" y="${half - 8}" text-anchor="end" class="axis-label" data-axis="pc1">${labels.pc1}</text>`,
    `<text x="${half + 8}" y="${MARGIN}" class="axis-label" data-axis="pc2">${labels.pc2}</text>`
  );

  const axis = geometry.axes.mean_environment_axis;
  if (axis) {
    const reach = (half - MARGIN) / sc.scale;
    const [x1, y1] = sc.toPx([-axis[0] * reach, -axis[1] * reach]);
    const [x2, y2] = sc.toPx([axis[0] * reach, axis[1] * reach]);
    parts.push(`<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="#c0392b" class="mean-axis"/>`);
  }

  if (geometry.mode === "which_won_where") {
    const overlays = geometry.overlays as unknown as WhichWonWhereOverlays;
    const hull = overlays.hull ?? [];
    if (hull.length >= 3) {
      const ring = hull
        .map((g) => sc.toPx(geometry.genotype_points[g]))
        .map(([x, y]) => `${fmt(x)},${fmt(y)}`)
        .join(" ");
      parts.push(`<polygon points="${ring}" fill="none" stroke="#c0392b"/>`);
    }
    for (const ray of overlays.sector_rays ?? []) {
      const reach = (half - MARGIN) / sc.scale;
      const [x2, y2] = sc.toPx([ray[0] * reach, ray[1] * reach]);
      parts.push(`<line x1="${half}" y1="${half}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="#c0392b" stroke-dasharray="5,4"/>`);
    }
    const winners = winnerLabels(geometry);
    const entries = Object.entries(winners)
      .map(([env, g]) => `${esc(env)}:${esc(g)}`)
      .join(", ");
    parts.push(`<text x="${MARGIN}" y="${SIZE - 16}" class="winners" data-role="winners">winners: ${entries}</text>`);
  }

  if (geometry.mode === "ranking_genotypes" || geometry.mode === "ranking_environments") {
    const overlays = geometry.overlays as { ideal?: Point; circle_radii?: number[] };
    if (overlays.ideal) {
      const [cx, cy] = sc.toPx(overlays.ideal);
      for (const r of overlays.circle_radii ?? []) {
        parts.push(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(Math.max(r * sc.scale, 1))}" fill="none" stroke="#c0392b" stroke-width="0.7"/>`);
      }
    }
  }

  if (geometry.mode === "discrim_vs_repr" || geometry.mode === "env_relationship") {
    for (const [, p] of Object.entries(geometry.environment_points)) {
      const [x, y] = sc.toPx(p);
      parts.push(`<line x1="${half}" y1="${half}" x2="${fmt(x)}" y2="${fmt(y)}" stroke="#1f4f9e"/>`);
    }
  }

  if (geometry.mode === "mean_vs_stability" && axis) {
    const overlays = geometry.overlays as { projection?: Record<string, number> };
    for (const [g, p] of Object.entries(geometry.genotype_points)) {
      const proj = overlays.projection?.[g] ?? 0;
      const [x1, y1] = sc.toPx(p);
      const [x2, y2] = sc.toPx([axis[0] * proj, axis[1] * proj]);
      parts.push(`<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="#2d8659" stroke-dasharray="4,3"/>`);
    }
  }

  // projection line for a selected environment: the genotype-ranking
  // reading along that environment's vector
  if (selection?.kind === "environment" && geometry.environment_points[selection.name]) {
    const env = geometry.environment_points[selection.name];
    const norm = Math.hypot(env[0], env[1]);
    if (norm > 0) {
      const reach = (half - MARGIN) / sc.scale;
      const dir: Point = [env[0] / norm, env[1] / norm];
      const [x1, y1] = sc.toPx([-dir[0] * reach, -dir[1] * reach]);
      const [x2, y2] = sc.toPx([dir[0] * reach, dir[1] * reach]);
      parts.push(`<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="#8e44ad" class="selected-env-axis"/>`);
      for (const [g, p] of Object.entries(geometry.genotype_points)) {
        const proj = p[0] * dir[0] + p[1] * dir[1];
        const [fx, fy] = sc.toPx([dir[0] * proj, dir[1] * proj]);
        const [gx, gy] = sc.toPx(p);
        parts.push(`<line x1="${fmt(gx)}" y1="${fmt(gy)}" x2="${fmt(fx)}" y2="${fmt(fy)}" stroke="#8e44ad" stroke-dasharray="2,3" data-projection="${esc(g)}"/>`);
      }
    }
  }

  for (const [name, p] of Object.entries(geometry.environment_points)) {
    const [x, y] = sc.toPx(p);
    const sel = selection?.kind === "environment" && selection.name === name ? " selected" : "";
    parts.push(
      `<circle cx="${fmt(x)}" cy="${fmt(y)}" r="4" fill="#1f4f9e" class="env-point${sel}" data-env="${esc(name)}"/>`,
      `<text x="${fmt(x + 6)}" y="${fmt(y - 6)}" fill="#1f4f9e">${esc(name)}</text>`
    );
  }
  for (const [name, p] of Object.entries(geometry.genotype_points)) {
    const [x, y] = sc.toPx(p);
    const sel = selection?.kind === "genotype" && selection.name === name ? " selected" : "";
    parts.push(
      `<circle cx="${fmt(x)}" cy="${fmt(y)}" r="4" fill="#1a6e2e" class="geno-point${sel}" data-geno="${esc(name)}"/>`,
      `<text x="${fmt(x + 6)}" y="${fmt(y + 12)}" fill="#1a6e2e">${esc(name)}</text>`
    );
  }
  parts.push("</svg>");
  return parts.join("\n");
}

/** Detail panel for a clicked environment: representativeness reading. */
export function renderEnvironmentDetail(
  name: string,
  discrim: Record<string, DiscriminationEntry>,
  rankingOrder: string[]
): string {
  const entry = discrim[name];
  if (!entry) return `<div class="detail">no data for ${esc(name)}</div>`;
  const angleKind = entry.angle_deg < 90 ? "acute" : entry.angle_deg > 90 ? "obtuse" : "right";
  const rows = rankingOrder.map((g, i) => `<li>${i + 1}. ${esc(g)}</li>`).join("");
  return [
    `<div class="detail" data-env="${esc(name)}">`,
    `<h3>${esc(name)}</h3>`,
    `<p data-role="angle" data-angle-kind="${angleKind}">angle to mean-environment axis: ${entry.angle_deg.toFixed(1)}&#176; (${angleKind})</p>`,
    `<p data-role="length">vector length: ${entry.vector_length.toFixed(3)}</p>`,
    `<p data-role="representative">${entry.representative ? "representative" : "not representative"}</p>`,
    `<ol data-role="genotype-ranking">${rows}</ol>`,
    `</div>`,
  ].join("");
}

export function renderSignificanceTable(rows: SignificanceRow[]): string {
  const cells = rows
    .map((r) => {
      const stat = r.statistic === null ? "-" : r.statistic.toFixed(3);
      const p = r.p_value === null ? "-" : r.p_value.toFixed(3);
      const variance = r.variance === null ? "-" : r.variance.toFixed(2);
      const ms = r.mean_square === null ? "-" : r.mean_square.toFixed(3);
      const sig = r.p_value !== null && r.p_value < 0.05 ? ' class="significant"' : "";
      return `<tr${sig}><td>${esc(r.term)}</td><td>${r.kind}</td><td>${variance}</td><td>${ms}</td><td>${stat}</td><td>${p}</td></tr>`;
    })
    .join("");
  return `<table class="significance"><thead><tr><th>term</th><th>kind</th><th>variance</th><th>MS</th><th>statistic</th><th>p</th></tr></thead><tbody>${cells}</tbody></table>`;
}

export function renderStabilityTable(rows: StabilityRow[], selected: string | null = null): string {
  const cells = rows
    .map((r) => {
      const cls = [r.kang_selected ? "kang-selected" : "", r.genotype === selected ? "selected" : ""]
        .filter(Boolean)
        .join(" ");
      return (
        `<tr${cls ? ` class="${cls}"` : ""} data-geno="${esc(r.genotype)}">` +
        `<td>${esc(r.genotype)}</td><td>${r.slope.toFixed(3)}${r.slope_mark}</td>` +
        `<td>${r.deviation_ms.toFixed(3)}${r.deviation_mark}</td>` +
        `<td>${r.shukla_sigma2.toFixed(3)} ${r.sigma2_mark}</td>` +
        `<td>${r.shukla_ssquares.toFixed(3)} ${r.ssquares_mark}</td>` +
        `<td>${r.wricke_w2.toFixed(3)}</td>` +
        `<td>${r.kang_ys}${r.kang_selected ? "+" : ""}</td></tr>`
      );
    })
    .join("");
  return `<table class="stability"><thead><tr><th>genotype</th><th>slope</th><th>dev MS</th><th>sigma2</th><th>ssquares</th><th>W2</th><th>YS</th></tr></thead><tbody>${cells}</tbody></table>`;
}

export function renderAmmiBiplot(biplot: AmmiBiplot): string {
  const pts: Point[] = [
    ...Object.values(biplot.genotype_points).map((p) => [p[0], p[1]] as Point),
    ...Object.values(biplot.environment_points).map((p) => [p[0], p[1]] as Point),
  ];
  const sc = makeScaler(pts);
  const half = SIZE / 2;
  const parts = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${SIZE} ${SIZE}" data-mode="ammi">`,
    `<line x1="${MARGIN}" y1="${half}" x2="${SIZE - MARGIN}" y2="${half}" stroke="#ccc"/>`,
    `<line x1="${half}" y1="${MARGIN}" x2="${half}" y2="${SIZE - MARGIN}" stroke="#ccc"/>`,
  ];
  const [a0, a1] = biplot.axes;
  const share = biplot.singular_value_share;
  parts.push(
    `<text x="${SIZE - MARGIN}" y="${half - 8}" text-anchor="end" data-axis="pc1">IPC${a0 + 1} ${(100 * (share[a0] ?? 0)).toFixed(1)}%</text>`,
    `<text x="${half + 8}" y="${MARGIN}" data-axis="pc2">IPC${a1 + 1} ${(100 * (share[a1] ?? 0)).toFixed(1)}%</text>`
  );
  for (const [name, p] of Object.entries(biplot.environment_points)) {
    const [x, y] = sc.toPx([p[0], p[1]]);
    parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="4" fill="#1f4f9e"/><text x="${fmt(x + 6)}" y="${fmt(y - 6)}" fill="#1f4f9e">${esc(name)}</text>`);
  }
  for (const [name, p] of Object.entries(biplot.genotype_points)) {
    const [x, y] = sc.toPx([p[0], p[1]]);
    parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="4" fill="#1a6e2e"/><text x="${fmt(x + 6)}" y="${fmt(y + 12)}" fill="#1a6e2e">${esc(name)}</text>`);
  }
  parts.push("</svg>");
  return parts.join("\n");
}

export function renderSummary(bundle: AnalysisBundle): string {
  const s = bundle.dataset_summary;
  return (
    `<div class="summary">` +
    `<span data-role="trait">${esc(s.trait)}</span>: ` +
    `${s.n_genotypes} genotypes, ${s.n_environments} environments, ` +
    `${s.n_records} records${s.balanced ? ", balanced" : ""}</div>`
  );
}
