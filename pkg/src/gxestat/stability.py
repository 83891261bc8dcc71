"""Per-genotype stability statistics.

Two families: the grouped-regression statistics (response slope against a
replicate-level environment index, plus the deviation mean square of the
genotype's environment means about its own regression line), and the
variance battery (Wricke ecovalence, Shukla stability variance and its
heterogeneity-adjusted form, Kang yield-stability score, coefficient of
variation, Lin-Binns superiority).

The variance battery runs on a genotype x environment cell-mean table; for
datasets with a year factor the pipeline feeds it the location-level table
(years averaged), which is also what the biplot models consume.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import (
    TrialDataset,
    TwoWayTable,
    IncompleteTableError,
    two_way_means,
    environment_index,
    rep_group_index,
)
from .distributions import dist_sf, dist_ppf
from .numerics import ols
from . import mixed_model as mm

__all__ = [
    "TooFewEnvironmentsError",
    "TooFewGenotypesError",
    "CollinearIndexError",
    "ZeroMeanError",
    "RegressionStability",
    "VarianceStability",
    "StabilityReport",
    "StabilityGlm",
    "significance_mark",
    "regression_stability",
    "fit_stability_glm",
    "wricke",
    "shukla",
    "kang_ys",
    "coefficient_of_variation",
    "lin_binns",
    "stability_report",
]


class TooFewEnvironmentsError(ValueError):
    pass


class TooFewGenotypesError(ValueError):
    pass


class CollinearIndexError(ValueError):
    """The environment index has no variation, so no slope is estimable."""


class ZeroMeanError(ValueError):
    pass


def significance_mark(p: float, ns_label: str = "") -> str:
    """Star convention: *** / ** / * at 0.001 / 0.01 / 0.05."""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ns_label


@dataclass
class RegressionStability:
    genotype: str
    slope: float
    slope_se: float
    slope_t_p: float
    deviation_ms: float
    deviation_f_p: float
    slope_mark: str = ""
    deviation_mark: str = ""


@dataclass
class VarianceStability:
    genotype: str
    shukla_sigma2: float
    shukla_f_p: float
    shukla_ssquares: float
    ssquares_f_p: float
    wricke_w2: float
    kang_ys: int
    kang_selected: bool
    cv: float
    lin_binns_p: float
    mean_trait: float


@dataclass
class StabilityGlm:
    """Least-squares fit of the saturated fixed-effect model; its residual
    mean square is the pooled error every stability test uses."""

    term_ss: dict[str, tuple[int, float]]
    residual_ss: float
    residual_df: int

    @property
    def error_ms(self) -> float:
        return self.residual_ss / self.residual_df

    def interaction_ss(self, term="CLT:LC") -> float:
        return self.term_ss[term][1]


def fit_stability_glm(ds: TrialDataset) -> StabilityGlm:
    """Fit trait ~ LC + YR + YR*LC + LC*YR*RP + CLT + CLT*LC + CLT*YR + CLT*LC*YR.

    Year terms drop out of no-year datasets.  Sequential sums of squares
    are computed term by term; the residual is the within-cell error.
    """
    order = ["LC", "YR", "LC:YR", "RP", "CLT", "CLT:LC", "CLT:YR", "CLT:LC:YR"]
    has_year = ds.has_years
    terms = [t for t in order if has_year or "YR" not in mm._term_factors(t) or t == "RP"]
    if ds.n_reps < 2:
        terms = [t for t in terms if t != "RP"]

    y = ds.trait_values()
    cols = [np.ones((len(y), 1))]
    spans = []
    names = []
    for t in terms:
        if t == "RP":
            block, _ = mm._indicator_block(ds, "RP")
            block = block[:, 1:]  # drop one level; intercept plus earlier terms cover it
        else:
            block, _ = mm._treatment_columns(ds, t)
        start = sum(c.shape[1] for c in cols)
        cols.append(block)
        spans.append((t, start, start + block.shape[1]))
        names.append(t)
    x = np.hstack(cols)

    fit = ols(y, x)
    term_ss = {}
    prev_rss = float(((y - y.mean()) ** 2).sum())
    prev_rank = 1
    for t, start, stop in spans:
        sub = ols(y, x[:, :stop])
        df = sub.design_rank - prev_rank
        term_ss[t] = (int(df), float(prev_rss - sub.residual_ss))
        prev_rss = sub.residual_ss
        prev_rank = sub.design_rank
    return StabilityGlm(
        term_ss=term_ss,
        residual_ss=float(fit.residual_ss),
        residual_df=int(fit.df_residual),
    )


def regression_stability(
    ds: TrialDataset,
    genotype: str,
    pooled_error_ms: float | None = None,
    pooled_error_df: int | None = None,
) -> RegressionStability:
    """Grouped regression for one genotype.

    The regressor is the replicate-level environment index (mean trait of
    all genotypes per year-location-rep group); environment and replicate
    indicator blocks use the first observed level as reference.  The
    slope is tested against 1 with the fit's own residual; the deviation
    mean square (environment means about the genotype's regression on the
    index, df E-2) is tested against the pooled error of the saturated
    model.
    """
    recs = [r for r in ds.records if r.genotype == genotype]
    if not recs:
        raise KeyError(genotype)
    envs = []
    for r in recs:
        key = (r.location, r.year)
        if key not in envs:
            envs.append(key)
    n_env = len(envs)
    if n_env < 3:
        raise TooFewEnvironmentsError(f"{genotype} observed in {n_env} environments; need >= 3")
    index = rep_group_index(ds)
    tvals = np.array([index[(r.year, r.location, r.rep)] for r in recs])
    if np.ptp(tvals) <= 1e-12 * max(1.0, abs(tvals).max()):
        raise CollinearIndexError("environment index is constant")

    env_pos = {e: i for i, e in enumerate(envs)}
    reps = []
    for r in recs:
        if r.rep not in reps:
            reps.append(r.rep)
    rep_pos = {v: i for i, v in enumerate(reps)}

    n = len(recs)
    y = np.array([r.trait for r in recs])
    env_block = np.zeros((n, n_env - 1))
    rep_block = np.zeros((n, max(len(reps) - 1, 0)))
    for i, r in enumerate(recs):
        j = env_pos[(r.location, r.year)]
        if j > 0:
            env_block[i, j - 1] = 1.0
        k = rep_pos[r.rep]
        if k > 0:
            rep_block[i, k - 1] = 1.0

    x_full = np.column_stack([np.ones(n), tvals, env_block, rep_block])
    fit = ols(y, x_full)
    slope = float(fit.coefficients[1])
    se = float(fit.coefficient_standard_errors[1])
    t_stat = (slope - 1.0) / se if se > 0 else float("inf")
    slope_p = 2.0 * dist_sf("t", abs(t_stat), float(fit.df_residual))

    # sequential environment-block SS after intercept + index
    base = ols(y, np.column_stack([np.ones(n), tvals]))
    with_env = ols(y, np.column_stack([np.ones(n), tvals, env_block]))
    dev_ss = float(base.residual_ss - with_env.residual_ss)
    reps_per_env = n / n_env
    dev_ms = dev_ss / ((n_env - 2) * reps_per_env)

    if pooled_error_ms is None:
        glm = fit_stability_glm(ds)
        pooled_error_ms, pooled_error_df = glm.error_ms, glm.residual_df
    f_stat = dev_ms / pooled_error_ms
    dev_p = dist_sf("f", f_stat, float(n_env - 2), float(pooled_error_df))
    return RegressionStability(
        genotype=genotype,
        slope=slope,
        slope_se=se,
        slope_t_p=float(slope_p),
        deviation_ms=float(dev_ms),
        deviation_f_p=float(dev_p),
        slope_mark=significance_mark(slope_p),
        deviation_mark=significance_mark(dev_p),
    )


def wricke(table: TwoWayTable) -> dict[str, float]:
    """Ecovalence: each genotype's share of the interaction sum of squares."""
    table.require_complete()
    d = table.interaction()
    return {g: float((d[i] ** 2).sum()) for i, g in enumerate(table.genotypes)}


def shukla(table: TwoWayTable, error_ms: float, error_df: int) -> dict[str, dict[str, float]]:
    """Shukla stability variance, its heterogeneity-adjusted form, and
    F-test p-values against the pooled error mean square.

    sigma2_i = [G(G-1) W_i - sum_j W_j] / [(E-1)(G-1)(G-2)]; the adjusted
    s2_i applies the same combination (with E-2) to the ecovalences of the
    interaction residuals left after removing each genotype's regression
    on the centered environment index.  Negative estimates are reported
    as computed.
    """
    table.require_complete()
    G = table.n_genotypes
    E = table.n_environments
    if G < 3:
        raise TooFewGenotypesError("Shukla's variance needs at least 3 genotypes")
    d = table.interaction()
    w = (d**2).sum(axis=1)
    sw = w.sum()
    sigma2 = (G * (G - 1) * w - sw) / ((E - 1) * (G - 1) * (G - 2))

    idx = table.environment_means - table.values.mean()
    ss_idx = float((idx**2).sum())
    if ss_idx <= 0:
        resid = d
    else:
        slopes = d @ idx / ss_idx
        resid = d - np.outer(slopes, idx)
    wt = (resid**2).sum(axis=1)
    swt = wt.sum()
    if E < 3:
        raise TooFewEnvironmentsError("adjusted stability variance needs >= 3 environments")
    s2 = (G * (G - 1) * wt - swt) / ((E - 2) * (G - 1) * (G - 2))

    out = {}
    for i, g in enumerate(table.genotypes):
        f_sig = sigma2[i] / error_ms
        f_s2 = s2[i] / error_ms
        p_sig = dist_sf("f", f_sig, float(E - 1), float(error_df)) if f_sig > 0 else 1.0
        p_s2 = dist_sf("f", f_s2, float(E - 2), float(error_df)) if f_s2 > 0 else 1.0
        out[g] = {
            "sigma2": float(sigma2[i]),
            "sigma2_p": float(p_sig),
            "ssquares": float(s2[i]),
            "ssquares_p": float(p_s2),
        }
    return out


def kang_ys(
    table: TwoWayTable,
    shukla_out: dict[str, dict[str, float]],
    error_ms: float,
    error_df: int,
    obs_per_genotype: int,
) -> dict[str, dict]:
    """Kang yield-stability score.

    Genotypes are ranked by mean (lowest = 1); the rank is adjusted +-1
    for sitting above/below the grand mean and +-2 when the difference
    exceeds one LSD(5%); a penalty of 0/-2/-4/-8 applies when the Shukla
    variance is significant at none/0.10/0.05/0.01.  A genotype is
    selected when its score exceeds the mean score.
    """
    means = table.genotype_means
    grand = float(means.mean())
    order = np.argsort(means, kind="stable")
    rank = np.empty(len(means), dtype=int)
    pos = 1
    for idx, i in enumerate(order):
        # tied means share the lower rank
        if idx > 0 and means[i] == means[order[idx - 1]]:
            rank[i] = rank[order[idx - 1]]
        else:
            rank[i] = pos
        pos += 1
    t_crit = dist_ppf("t", 0.975, float(error_df))
    lsd = t_crit * math.sqrt(2.0 * error_ms / obs_per_genotype)

    scores = {}
    for i, g in enumerate(table.genotypes):
        diff = means[i] - grand
        adj = 1 if diff >= 0 else -1
        if abs(diff) > lsd:
            adj *= 2
        p_sig = shukla_out[g]["sigma2_p"]
        if p_sig < 0.01:
            penalty = -8
        elif p_sig < 0.05:
            penalty = -4
        elif p_sig < 0.10:
            penalty = -2
        else:
            penalty = 0
        scores[g] = {"ys": int(rank[i] + adj + penalty), "rank": int(rank[i]), "adjustment": adj, "penalty": penalty}
    mean_ys = float(np.mean([s["ys"] for s in scores.values()]))
    for g, s in scores.items():
        s["selected"] = s["ys"] > mean_ys
    return scores


def coefficient_of_variation(ds: TrialDataset) -> dict[str, float]:
    """100 * sd(environment means) / genotype mean, per genotype."""
    table = two_way_means(ds)
    out = {}
    for i, g in enumerate(table.genotypes):
        vals = table.values[i]
        vals = vals[np.isfinite(vals)]
        mean = float(vals.mean())
        if mean == 0.0:
            raise ZeroMeanError(f"{g} has zero mean; CV undefined")
        sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        out[g] = 100.0 * sd / mean
    return out


def lin_binns(table: TwoWayTable) -> dict[str, float]:
    """Superiority measure P_i = sum_e (x_ie - max_e)^2 / (2E)."""
    table.require_complete()
    best = table.values.max(axis=0)
    E = table.n_environments
    return {
        g: float(((table.values[i] - best) ** 2).sum() / (2.0 * E))
        for i, g in enumerate(table.genotypes)
    }


@dataclass
class StabilityReport:
    rows: list[dict]
    error_ms: float
    error_df: int

    COLUMNS = (
        "genotype",
        "slope",
        "slope_mark",
        "deviation_ms",
        "deviation_mark",
        "shukla_sigma2",
        "sigma2_mark",
        "shukla_ssquares",
        "ssquares_mark",
        "wricke_w2",
        "kang_ys",
        "kang_selected",
        "mean_trait",
        "cv",
        "lin_binns_p",
    )

    def to_csv(self) -> str:
        lines = [",".join(self.COLUMNS)]
        for r in self.rows:
            cells = []
            for c in self.COLUMNS:
                v = r[c]
                if isinstance(v, bool):
                    cells.append("+" if v else "")
                elif isinstance(v, float):
                    cells.append(repr(v))
                else:
                    cells.append(str(v))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_json_dict(self):
        return {"error_ms": self.error_ms, "error_df": self.error_df, "rows": self.rows}

    def to_text(self) -> str:
        head = ["CLT", "slope", "dev_ms", "sigma2", "ssquares", "W2", "YS"]
        lines = [head]
        for r in self.rows:
            lines.append(
                [
                    r["genotype"],
                    f"{r['slope']:.3f}{r['slope_mark']}",
                    f"{r['deviation_ms']:.3f}{r['deviation_mark']}",
                    f"{r['shukla_sigma2']:.3f} {r['sigma2_mark']}".rstrip(),
                    f"{r['shukla_ssquares']:.3f} {r['ssquares_mark']}".rstrip(),
                    f"{r['wricke_w2']:.3f}",
                    f"{r['kang_ys']}{'+' if r['kang_selected'] else ''}",
                ]
            )
        widths = [max(len(row[i]) for row in lines) for i in range(len(head))]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in lines) + "\n"

    def row(self, genotype):
        for r in self.rows:
            if r["genotype"] == genotype:
                return r
        raise KeyError(genotype)


def stability_report(ds: TrialDataset) -> StabilityReport:
    """Join every stability statistic into one per-genotype table.

    Rows keep the dataset's genotype order.  The variance battery runs on
    the location-level means table; the regression statistics run on the
    replicate-level records.
    """
    glm = fit_stability_glm(ds)
    err_ms, err_df = glm.error_ms, glm.residual_df
    table = two_way_means(ds, environments="location").require_complete()
    w = wricke(table)
    sh = shukla(table, err_ms, err_df)
    obs_per_genotype = sum(1 for r in ds.records if r.genotype == ds.genotypes[0])
    ys = kang_ys(table, sh, err_ms, err_df, obs_per_genotype)
    cv = coefficient_of_variation(ds)
    pi = lin_binns(table)
    means = {g: float(m) for g, m in zip(table.genotypes, table.genotype_means)}

    rows = []
    for g in ds.genotypes:
        reg = regression_stability(ds, g, pooled_error_ms=err_ms, pooled_error_df=err_df)
        rows.append(
            {
                "genotype": g,
                "slope": reg.slope,
                "slope_se": reg.slope_se,
                "slope_p": reg.slope_t_p,
                "slope_mark": reg.slope_mark,
                "deviation_ms": reg.deviation_ms,
                "deviation_p": reg.deviation_f_p,
                "deviation_mark": reg.deviation_mark,
                "shukla_sigma2": sh[g]["sigma2"],
                "sigma2_p": sh[g]["sigma2_p"],
                "sigma2_mark": significance_mark(sh[g]["sigma2_p"], ns_label="ns"),
                "shukla_ssquares": sh[g]["ssquares"],
                "ssquares_p": sh[g]["ssquares_p"],
                "ssquares_mark": significance_mark(sh[g]["ssquares_p"], ns_label="ns"),
                "wricke_w2": w[g],
                "kang_ys": ys[g]["ys"],
                "kang_selected": ys[g]["selected"],
                "mean_trait": means[g],
                "cv": cv[g],
                "lin_binns_p": pi[g],
            }
        )
    return StabilityReport(rows=rows, error_ms=err_ms, error_df=err_df)
