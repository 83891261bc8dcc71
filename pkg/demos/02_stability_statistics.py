"""The per-genotype stability battery and how its pieces interlock.

A stable genotype keeps its relative performance as environments change.
Each statistic captures a different facet: the regression slope measures
response to environment quality, the deviation mean square measures
lack-of-fit around that response, the ecovalence and Shukla variance
measure interaction share, and the Kang score trades mean yield against
instability.
"""
import numpy as np

import gxestat as gx
from gxestat.stability import fit_stability_glm, regression_stability, shukla, wricke

ds = gx.load_watermelon()

# The whole battery in one call: Table-style report, one row per genotype.
report = gx.stability_report(ds)
print(report.to_text())

# --- the pieces -------------------------------------------------------------

# Pooled error from the saturated fixed-effects model; every test below
# compares against this.
glm = fit_stability_glm(ds)
print(f"pooled error MS {glm.error_ms:.2f} on {glm.residual_df} df")

# Regression on the replicate-level environment index.  Slopes average
# exactly 1 over genotypes; values far from 1 flag genotypes that
# over- or under-respond to good environments.
slopes = {}
for g in ds.genotypes:
    reg = regression_stability(ds, g, pooled_error_ms=glm.error_ms, pooled_error_df=glm.residual_df)
    slopes[g] = reg.slope
print(f"sum of slopes = {sum(slopes.values()):.3f} (= number of genotypes)")

# The variance battery runs on the genotype x location means table.
table = gx.two_way_means(ds, environments="location")
w2 = wricke(table)
sh = shukla(table, glm.error_ms, glm.residual_df)

# Shukla's variance is an increasing affine function of the ecovalence,
# so both rank genotypes identically.
order_w = sorted(ds.genotypes, key=lambda g: w2[g])
order_s = sorted(ds.genotypes, key=lambda g: sh[g]["sigma2"])
assert order_w == order_s
print("stability ranking (most stable first):", ", ".join(order_w[:3]), "...")

# The ecovalences partition the interaction sum of squares exactly.
print(f"sum W2 = {sum(w2.values()):.1f} vs interaction SS = {table.interaction_ss():.1f}")

# Kang's score: mean rank, +-1/+-2 LSD adjustment, stability penalty.
selected = [r["genotype"] for r in report.rows if r["kang_selected"]]
print("selected by yield-stability score:", ", ".join(selected))
