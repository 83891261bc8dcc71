"""End-to-end analysis pipeline shared by the CLI, the HTTP service, and
the bundle exporter."""
from __future__ import annotations


from . import ammi as ammi_mod
from . import gge as gge_mod
from .bundle import AnalysisBundle
from .data import TrialDataset, two_way_means
from .mixed_model import ModelCase, build_model, fit_reml, predict, significance_table
from .stability import fit_stability_glm, stability_report

__all__ = ["dataset_summary", "run_all", "ammi_payload", "gge_payload"]


def dataset_summary(ds: TrialDataset) -> dict:
    return {
        "trait": ds.trait_name,
        "n_records": len(ds.records),
        "genotypes": list(ds.genotypes),
        "locations": list(ds.locations),
        "years": list(ds.years) if ds.has_years else [],
        "reps": list(ds.reps),
        "n_genotypes": ds.n_genotypes,
        "n_environments": len(ds.environments()),
        "balanced": ds.is_balanced(),
    }


def ammi_payload(ds: TrialDataset, n_components=None, alpha=0.05, n_boot=1000, seed=0) -> dict:
    table = two_way_means(ds, environments="location").require_complete()
    glm = fit_stability_glm(ds)
    selection = None
    if n_components is None:
        selection = ammi_mod.select_components(table, alpha=alpha, n_boot=n_boot, seed=seed)
        n_components = selection.retained
    max_n = min(table.n_genotypes - 1, table.n_environments - 1)
    n_plot = max(n_components, min(2, max_n))
    fit = ammi_mod.fit_ammi(
        table,
        n_components=n_plot,
        error_ms=glm.error_ms,
        error_df=glm.residual_df,
    )
    payload = {
        "grand_mean": fit.grand_mean,
        "genotype_effects": {g: float(v) for g, v in zip(fit.genotypes, fit.genotype_effects)},
        "environment_effects": {e: float(v) for e, v in zip(fit.environments, fit.environment_effects)},
        "singular_values": [float(v) for v in fit.singular_values],
        "n_components": fit.n_components,
        "anova": fit.anova,
        "biplot": ammi_mod.ammi_biplot_data(fit, axes=(0, 1)) if fit.n_components >= 2 else None,
    }
    if selection is not None:
        payload["selection"] = {
            "tested_k": selection.tested_k,
            "p_values": selection.p_values,
            "retained": selection.retained,
            "method": selection.method,
        }
    return payload


def gge_payload(ds: TrialDataset, centering="environment_centered", svp=None, modes=None) -> dict:
    table = two_way_means(ds, environments="location").require_complete()
    fit = gge_mod.fit_gge(table, centering=centering)
    geoms = {}
    for mode in modes or gge_mod.MODES:
        geoms[mode] = gge_mod.biplot_geometry(fit, mode, svp=svp).to_json_dict()
    return {
        "centering": centering,
        "explained_variance": [float(v) for v in fit.explained_variance],
        "singular_values": [float(v) for v in fit.singular_values],
        "modes": geoms,
    }


def run_all(ds: TrialDataset, case_id: int = 1, alpha=0.05, n_boot=1000, seed=0) -> AnalysisBundle:
    case = ModelCase(case_id)
    fit = fit_reml(build_model(ds, case))
    table = significance_table(ds, case, fit=fit)
    report = stability_report(ds)
    pred, resid = predict(fit)
    return AnalysisBundle(
        dataset_summary=dataset_summary(ds),
        significance={
            "case": case_id,
            "table": table.to_json_dict(),
            "table_text": table.to_text(),
            "variance_components": fit.variance_components,
            "residual_variance": fit.residual_variance,
            "converged": fit.converged,
            "predictions": [float(v) for v in pred],
            "residuals": [float(v) for v in resid],
        },
        stability=report.to_json_dict(),
        ammi=ammi_payload(ds, alpha=alpha, n_boot=n_boot, seed=seed),
        gge=gge_payload(ds),
    )
