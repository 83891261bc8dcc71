"""Multiplicative interaction models and the biplot readings.

AMMI separates additive main effects from the interaction and compresses
the interaction into a few singular axes; GGE keeps the genotype main
effect inside the decomposition so the biplot answers selection
questions directly.  This script writes every figure as an SVG next to
itself.
"""
from pathlib import Path

import gxestat as gx
from gxestat.ammi import ammi_biplot_data, fit_ammi, select_components
from gxestat.gge import MODES, biplot_geometry, fit_gge, which_won_where
from gxestat.plotting import render_ammi_biplot, render_svg
from gxestat.stability import fit_stability_glm

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

ds = gx.load_watermelon()
table = gx.two_way_means(ds, environments="location")

# --- AMMI -------------------------------------------------------------------

# How many multiplicative axes are real?  The bootstrap test compares each
# leading singular-value share with its pure-noise distribution.
sel = select_components(table, alpha=0.05, n_boot=500, seed=11)
print("component selection p-values:", [round(p, 3) for p in sel.p_values], "-> retained", sel.retained)

glm = fit_stability_glm(ds)
fit = fit_ammi(table, n_components=4, error_ms=glm.error_ms, error_df=glm.residual_df)
print("\nAMMI analysis of variance:")
for row in fit.anova:
    f = f"{row['f']:.2f}" if "f" in row else "    "
    print(f"  {row['source']:22s} df {row['df']:5.0f}  MS {row['ms']:9.2f}  F {f}")

# The score products tell interaction direction: positive means the
# genotype does better than its average in that environment.
biplot = ammi_biplot_data(fit, axes=(0, 1))
sign = biplot["interaction_sign"]
print("\npositive interactions with KN:",
      ", ".join(g for g in ds.genotypes if sign[g]["KN"] > 0))
(OUT / "ammi_watermelon.svg").write_text(render_ammi_biplot(biplot))

# --- GGE --------------------------------------------------------------------

gge = fit_gge(table)
print("\nGGE explained variance (PC1, PC2):",
      [round(float(v), 3) for v in gge.explained_variance[:2]])

# Which genotype wins where: hull + sector construction.
winners, _ = which_won_where(gge)
print("winner by environment:", winners.winner_by_environment)

# All seven readings as SVGs.
for mode in MODES:
    geom = biplot_geometry(gge, mode)
    (OUT / f"gge_{mode}.svg").write_text(render_svg(geom))
print(f"\nwrote {1 + len(MODES)} figures to {OUT}/")

# The oat trial reads the same way.
oats = gx.load_oats()
oat_table = gx.two_way_means(oats, environments="location")
oat_fit = fit_ammi(oat_table, n_components=4)
oat_biplot = ammi_biplot_data(oat_fit, axes=(0, 1))
print("\noat: G03 x B1 interaction sign:", "+" if oat_biplot["interaction_sign"]["G03"]["B1"] > 0 else "-")
(OUT / "ammi_oats.svg").write_text(render_ammi_biplot(oat_biplot))
