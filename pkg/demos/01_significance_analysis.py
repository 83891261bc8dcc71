"""Mixed-model significance analysis, step by step.

Fits the all-random model to the bundled melon trial, looks at the
variance components and their likelihood-ratio tests, then runs the
classical F tests on the oat trial where every term except the
replicate is fixed.
"""
import gxestat as gx
from gxestat.mixed_model import ModelCase, build_model, fit_reml, predict, significance_table

# ---------------------------------------------------------------------------
# 1. The melon trial: 2 years x 5 locations x 10 varieties x 4 reps.
ds = gx.load_watermelon()
print(f"{ds.n_genotypes} genotypes, {len(ds.environments())} environments, "
      f"{len(ds.records)} observations\n")

# Case 1 treats every factor as random: the question is "how much of the
# yield variance does each source explain?"
spec = build_model(ds, ModelCase(1))
fit = fit_reml(spec)
print("variance components (case 1):")
for term, comp in fit.variance_components.items():
    print(f"  {term:12s} {comp['variance']:9.2f}  (sd {comp['std_dev']:6.2f})")
print(f"  {'residual':12s} {fit.residual_variance:9.2f}")

# Components driven to the boundary are reported as exactly zero.
print("boundary terms:", fit.boundary_terms or "none")

# 2. Significance of each random term: drop it, refit, compare likelihoods.
print("\nfull significance table:")
print(significance_table(ds, ModelCase(1), fit=fit).to_text())

# 3. BLUPs shrink each level toward zero; big positive values mark
# genotypes that beat the population mean.
print("genotype BLUPs:")
for level, value in sorted(gx.blup(fit, "CLT").items(), key=lambda kv: -kv[1]):
    print(f"  {level:20s} {value:+7.2f}")

# 4. Fitted values vs residuals (the diagnostic scatter the SVG export draws).
pred, resid = predict(fit)
print(f"\nprediction range [{pred.min():.1f}, {pred.max():.1f}], "
      f"residual sd {resid.std():.2f}")

# ---------------------------------------------------------------------------
# 5. The oat trial has no year factor; case 2 makes genotype, location and
# their interaction fixed, so the classical expected-mean-squares ladder
# applies: location is tested against blocks, everything else against the
# residual.
oats = gx.load_oats()
print("\noat trial, case 2 (fixed terms, F tests):")
print(significance_table(oats, ModelCase(2)).to_text())
