"""Deterministic SVG rendering for biplots and diagnostic scatters.

SVG documents are emitted by hand (fixed 800x800 viewBox, stable float
formatting) so identical inputs produce byte-identical files on any
platform.
"""
from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .gge import BiplotGeometry

__all__ = ["PlotStyle", "render_svg", "render_residual_scatter", "render_ammi_biplot"]

SIZE = 800.0
MARGIN = 70.0


@dataclass(frozen=True)
class PlotStyle:
    genotype_color: str = "#1a6e2e"
    environment_color: str = "#1f4f9e"
    overlay_color: str = "#c0392b"
    grid_color: str = "#cccccc"
    font: str = "sans-serif"
    font_size: float = 12.0
    point_radius: float = 4.0


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


class _Svg:
    def __init__(self):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {int(SIZE)} {int(SIZE)}" '
            f'width="{int(SIZE)}" height="{int(SIZE)}">'
        ]

    def add(self, piece: str):
        self.parts.append(piece)

    def line(self, x1, y1, x2, y2, color, width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{_fmt(width)}"{d}/>'
        )

    def circle(self, cx, cy, r, fill="none", stroke=None, width=1.0):
        s = f' stroke="{stroke}" stroke-width="{_fmt(width)}"' if stroke else ""
        self.add(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}" fill="{fill}"{s}/>')

    def text(self, x, y, content, color, size, anchor="start"):
        self.add(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" fill="{color}" font-size="{_fmt(size)}" '
            f'text-anchor="{anchor}" font-family="sans-serif">{escape(content)}</text>'
        )

    def polygon(self, pts, stroke, width=1.5):
        joined = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        self.add(f'<polygon points="{joined}" fill="none" stroke="{stroke}" stroke-width="{_fmt(width)}"/>')

    def finish(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _scaler(points):
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        arr = np.zeros((1, 2))
    span = float(np.abs(arr).max())
    if span <= 0:
        span = 1.0
    span *= 1.15
    half = SIZE / 2.0
    scale = (half - MARGIN) / span

    def to_px(p):
        return half + p[0] * scale, half - p[1] * scale

    return to_px, scale


def render_svg(geometry: BiplotGeometry, style: PlotStyle | None = None) -> str:
    """Render one biplot geometry document to an SVG string."""
    style = style or PlotStyle()
    svg = _Svg()
    all_pts = list(geometry.genotype_points.values()) + list(geometry.environment_points.values())
    to_px, scale = _scaler(all_pts)
    half = SIZE / 2.0

    degenerate = all(abs(p[0]) < 1e-12 and abs(p[1]) < 1e-12 for p in all_pts)
    svg.line(MARGIN, half, SIZE - MARGIN, half, style.grid_color)
    svg.line(half, MARGIN, half, SIZE - MARGIN, style.grid_color)
    ev = geometry.explained_variance + [0.0, 0.0]
    svg.text(SIZE - MARGIN, half - 8, f"PC1 {100 * ev[0]:.1f}%", style.grid_color, style.font_size, "end")
    svg.text(half + 8, MARGIN + 4, f"PC2 {100 * ev[1]:.1f}%", style.grid_color, style.font_size)
    svg.text(MARGIN, MARGIN - 30, f"mode: {geometry.mode}", "#333333", style.font_size + 2)
    if degenerate:
        svg.text(half, MARGIN - 10, "degenerate geometry: all points at the origin", style.overlay_color, style.font_size, "middle")

    overlays = geometry.overlays or {}
    axes = geometry.axes or {}
    if "mean_environment_axis" in axes:
        ax = axes["mean_environment_axis"]
        x1, y1 = to_px((-ax[0] * 1e3, -ax[1] * 1e3))
        x2, y2 = to_px((ax[0] * 1e3, ax[1] * 1e3))
        # clip by drawing within the frame box only
        x1, y1 = max(min(x1, SIZE - MARGIN), MARGIN), max(min(y1, SIZE - MARGIN), MARGIN)
        x2, y2 = max(min(x2, SIZE - MARGIN), MARGIN), max(min(y2, SIZE - MARGIN), MARGIN)
        svg.line(x1, y1, x2, y2, style.overlay_color, 1.5)
        tip = to_px((ax[0] * (SIZE / 2 - MARGIN) / max(scale, 1e-9), ax[1] * (SIZE / 2 - MARGIN) / max(scale, 1e-9)))
        svg.circle(tip[0], tip[1], 3.5, fill=style.overlay_color)

    if geometry.mode == "which_won_where" and "hull_points" in overlays:
        hull_px = [to_px(p) for p in overlays["hull_points"].values()]
        if len(hull_px) >= 3:
            svg.polygon(hull_px, style.overlay_color)
        for ray in overlays.get("sector_rays", []):
            end = to_px((ray[0] * (SIZE / 2 - MARGIN) / max(scale, 1e-9), ray[1] * (SIZE / 2 - MARGIN) / max(scale, 1e-9)))
            svg.line(half, half, end[0], end[1], style.overlay_color, 1.0, dash="6,4")
    if geometry.mode in ("ranking_genotypes", "ranking_environments") and "circle_radii" in overlays:
        ideal = overlays.get("ideal", [0.0, 0.0])
        cx, cy = to_px(ideal)
        for radius in overlays["circle_radii"]:
            svg.circle(cx, cy, max(radius * scale, 1.0), stroke=style.overlay_color, width=0.8)
    if geometry.mode == "mean_vs_stability" and "projection" in overlays:
        ax = axes.get("mean_environment_axis", [1.0, 0.0])
        for name, pt in geometry.genotype_points.items():
            proj = overlays["projection"].get(name, 0.0)
            foot = (ax[0] * proj, ax[1] * proj)
            x1, y1 = to_px(pt)
            x2, y2 = to_px(foot)
            svg.line(x1, y1, x2, y2, "#2d8659", 0.8, dash="4,3")
    if geometry.mode in ("discrim_vs_repr", "env_relationship"):
        for name, pt in geometry.environment_points.items():
            x2, y2 = to_px(pt)
            svg.line(half, half, x2, y2, style.environment_color, 1.0)

    for name, pt in geometry.environment_points.items():
        x, y = to_px(pt)
        svg.circle(x, y, style.point_radius, fill=style.environment_color)
        svg.text(x + 6, y - 6, name, style.environment_color, style.font_size)
    for name, pt in geometry.genotype_points.items():
        x, y = to_px(pt)
        svg.circle(x, y, style.point_radius, fill=style.genotype_color)
        svg.text(x + 6, y + 12, name, style.genotype_color, style.font_size)
    if geometry.mode == "which_won_where" and "winner_by_environment" in overlays:
        yline = SIZE - MARGIN + 16
        winners = overlays["winner_by_environment"]
        svg.text(MARGIN, yline, "winners: " + ", ".join(f"{e}:{w}" for e, w in winners.items()), "#333333", style.font_size - 1)
    return svg.finish()


def render_residual_scatter(predictions, residuals, style: PlotStyle | None = None) -> str:
    """Predictions on x, residuals on y, zero line drawn."""
    style = style or PlotStyle()
    predictions = np.asarray(predictions, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    svg = _Svg()
    px_min, px_max = float(predictions.min()), float(predictions.max())
    if px_max <= px_min:
        px_min, px_max = px_min - 1.0, px_max + 1.0
    ry = float(np.abs(residuals).max())
    if ry <= 0:
        ry = 1.0
    ry *= 1.15

    def to_px(p, r):
        x = MARGIN + (p - px_min) / (px_max - px_min) * (SIZE - 2 * MARGIN)
        y = SIZE / 2.0 - r / ry * (SIZE / 2.0 - MARGIN)
        return x, y

    svg.line(MARGIN, SIZE / 2.0, SIZE - MARGIN, SIZE / 2.0, style.overlay_color, 1.2)
    svg.text(SIZE / 2.0, SIZE - MARGIN / 2.0, "prediction", "#333333", style.font_size, "middle")
    svg.text(MARGIN - 40, SIZE / 2.0, "residual", "#333333", style.font_size)
    for p, r in zip(predictions, residuals):
        x, y = to_px(p, r)
        svg.circle(x, y, 2.5, fill=style.environment_color)
    return svg.finish()


def render_ammi_biplot(biplot_data: dict, style: PlotStyle | None = None) -> str:
    """Scatter of symmetric-scaled genotype and environment scores."""
    style = style or PlotStyle()
    svg = _Svg()
    pts = list(biplot_data["genotype_points"].values()) + list(biplot_data["environment_points"].values())
    to_px, _ = _scaler(pts)
    half = SIZE / 2.0
    svg.line(MARGIN, half, SIZE - MARGIN, half, style.grid_color)
    svg.line(half, MARGIN, half, SIZE - MARGIN, style.grid_color)
    shares = biplot_data.get("singular_value_share", [])
    axes = biplot_data.get("axes", [0, 1])
    for i, a in enumerate(axes[:2]):
        share = shares[a] * 100 if a < len(shares) else 0.0
        label = f"IPC{a + 1} {share:.1f}%"
        if i == 0:
            svg.text(SIZE - MARGIN, half - 8, label, style.grid_color, style.font_size, "end")
        else:
            svg.text(half + 8, MARGIN + 4, label, style.grid_color, style.font_size)
    for name, pt in biplot_data["environment_points"].items():
        x, y = to_px(pt)
        svg.circle(x, y, style.point_radius, fill=style.environment_color)
        svg.text(x + 6, y - 6, name, style.environment_color, style.font_size)
    for name, pt in biplot_data["genotype_points"].items():
        x, y = to_px(pt)
        svg.circle(x, y, style.point_radius, fill=style.genotype_color)
        svg.text(x + 6, y + 12, name, style.genotype_color, style.font_size)
    return svg.finish()
