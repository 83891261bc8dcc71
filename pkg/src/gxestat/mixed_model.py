"""Mixed-effect models for multi-environment trials.

Five predefined effect-role assignments (cases 1-5) over the factors
genotype (CLT), location (LC), year (YR), and replicate-within-
environment (RP).  Variance components are estimated by REML with the
fixed effects and the residual variance profiled out; random terms are
tested by likelihood-ratio against the one-term-deleted model (ML
refits, as linear-mixed-model ANOVA comparisons conventionally do), and
fixed terms by the balanced-ANOVA expected-mean-squares ladder.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .data import TrialDataset, InsufficientLevelsError
from .distributions import dist_sf

__all__ = [
    "UnbalancedDataError",
    "SingularDesignError",
    "UnknownTermError",
    "ModelCase",
    "ModelSpec",
    "MixedModelFit",
    "SignificanceRow",
    "SignificanceTable",
    "degrees_of_freedom",
    "build_model",
    "fit_reml",
    "blup",
    "predict",
    "test_random_terms",
    "test_fixed_terms",
    "significance_table",
]

# Term keys are colon-joined factor names; RP denotes replicate nested in
# the (year, location) environment.
ALL_TERMS = ("CLT", "LC", "YR", "RP", "CLT:YR", "CLT:LC", "LC:YR", "CLT:LC:YR")

DISPLAY_NAMES = {
    "CLT": "CLT",
    "LC": "LC",
    "YR": "YR",
    "RP": "YR * LC * RP",
    "CLT:YR": "YR * CLT",
    "CLT:LC": "LC * CLT",
    "LC:YR": "YR * LC",
    "CLT:LC:YR": "YR * LC * CLT",
}

# Row order used by the report tables: highest-order interaction first,
# then the replicate term, two-ways, mains.
DISPLAY_ORDER = ("CLT:LC:YR", "RP", "CLT:LC", "CLT:YR", "LC:YR", "CLT", "LC", "YR")

_CASE_FIXED = {
    1: frozenset(),
    2: frozenset({"CLT", "LC", "YR", "CLT:YR", "CLT:LC", "LC:YR", "CLT:LC:YR"}),
    3: frozenset({"CLT"}),
    4: frozenset({"LC"}),
    5: frozenset({"CLT", "LC", "CLT:LC"}),
}


class UnbalancedDataError(ValueError):
    """Balanced-ANOVA fixed-term tests refuse unbalanced data."""


class SingularDesignError(ValueError):
    pass


class UnknownTermError(KeyError):
    pass


@dataclass(frozen=True)
class ModelCase:
    """One of the five predefined fixed/random role assignments."""

    case_id: int

    def __post_init__(self):
        if self.case_id not in _CASE_FIXED:
            raise ValueError(f"case_id must be 1..5, got {self.case_id}")

    @property
    def term_roles(self) -> dict[str, str]:
        fixed = _CASE_FIXED[self.case_id]
        return {t: ("fixed" if t in fixed else "random") for t in ALL_TERMS}

    def is_fixed(self, term: str) -> bool:
        return term in _CASE_FIXED[self.case_id]


def degrees_of_freedom(G: int, L: int, Y: int, R: int) -> dict[str, int]:
    """Classical per-term df.  The replicate term uses the full nested
    formula (R-1)*L*Y; published tables sometimes print (R-1)*L, which
    omits the year multiplicity (see ``RP_DF_NOTE``).
    """
    return {
        "CLT": G - 1,
        "LC": L - 1,
        "YR": Y - 1,
        "RP": (R - 1) * L * Y,
        "CLT:YR": (G - 1) * (Y - 1),
        "CLT:LC": (G - 1) * (L - 1),
        "LC:YR": (L - 1) * (Y - 1),
        "CLT:LC:YR": (G - 1) * (L - 1) * (Y - 1),
    }


RP_DF_NOTE = "replicate df uses (R-1)*L*Y; the (R-1)*L variant omits years"


def _term_factors(term: str) -> frozenset:
    if term == "RP":
        return frozenset({"YR", "LC", "RP"})
    return frozenset(term.split(":"))


def _record_key(record, factors):
    parts = []
    if "YR" in factors:
        parts.append(record.year)
    if "LC" in factors:
        parts.append(record.location)
    if "RP" in factors:
        parts.append(record.rep)
    if "CLT" in factors:
        parts.append(record.genotype)
    return tuple(parts)


@dataclass
class ModelSpec:
    ds: TrialDataset
    case: ModelCase
    y: np.ndarray
    x: np.ndarray
    fixed_names: list[str]
    z_blocks: dict[str, np.ndarray]
    z_level_names: dict[str, list[str]]
    dropped_year_terms: bool = False

    def without(self, term: str) -> "ModelSpec":
        if term not in self.z_blocks:
            raise UnknownTermError(term)
        zb = {t: z for t, z in self.z_blocks.items() if t != term}
        zn = {t: n for t, n in self.z_level_names.items() if t != term}
        return ModelSpec(
            ds=self.ds,
            case=self.case,
            y=self.y,
            x=self.x,
            fixed_names=self.fixed_names,
            z_blocks=zb,
            z_level_names=zn,
            dropped_year_terms=self.dropped_year_terms,
        )


def _factor_levels(ds: TrialDataset, factor: str):
    return {
        "CLT": ds.genotypes,
        "LC": ds.locations,
        "YR": ds.years,
        "RP": ds.reps,
    }[factor]


def _record_value(record, factor):
    return {
        "CLT": record.genotype,
        "LC": record.location,
        "YR": record.year,
        "RP": record.rep,
    }[factor]


def _treatment_columns(ds: TrialDataset, term: str):
    """Treatment-contrast columns (first level reference) for a fixed term."""
    factors = sorted(_term_factors(term) - {"RP"}) if term != "RP" else None
    if factors is None:
        raise SingularDesignError("replicate term cannot be fixed")
    combos = [()]
    names = [""]
    for f in factors:
        levels = _factor_levels(ds, f)[1:]  # drop the reference level
        combos = [c + ((f, lv),) for c in combos for lv in levels]
        names = [
            (n + "*" if n else "") + f"{f}={lv}" for n in names for lv in levels
        ]
    cols = np.zeros((len(ds.records), len(combos)))
    for i, rec in enumerate(ds.records):
        for j, combo in enumerate(combos):
            if all(_record_value(rec, f) == lv for f, lv in combo):
                cols[i, j] = 1.0
    return cols, names


def _indicator_block(ds: TrialDataset, term: str):
    factors = _term_factors(term)
    order = [f for f in ("YR", "LC", "RP", "CLT") if f in factors]
    keys = []
    seen = {}
    for rec in ds.records:
        k = tuple(_record_value(rec, f) for f in order)
        if k not in seen:
            seen[k] = len(keys)
            keys.append(k)
    z = np.zeros((len(ds.records), len(keys)))
    for i, rec in enumerate(ds.records):
        z[i, seen[tuple(_record_value(rec, f) for f in order)]] = 1.0
    return z, [":".join(k) for k in keys]


def build_model(ds: TrialDataset, case: ModelCase) -> ModelSpec:
    """Assemble fixed design matrix and random indicator blocks.

    Year-containing terms are dropped (flagged on the returned model) when the
    dataset has a single year level; a single rep level likewise drops
    the replicate term.  Any other single-level factor is an error.
    """
    drop_year = ds.n_years < 2
    drop_rep = ds.n_reps < 2
    if ds.n_genotypes < 2:
        raise InsufficientLevelsError("genotype factor has fewer than 2 levels")
    if ds.n_locations < 2:
        raise InsufficientLevelsError("location factor has fewer than 2 levels")

    terms = []
    for t in ALL_TERMS:
        fs = _term_factors(t)
        if drop_year and "YR" in fs and t != "RP":
            continue
        if drop_rep and t == "RP":
            continue
        terms.append(t)

    x_cols = [np.ones((len(ds.records), 1))]
    fixed_names = ["(intercept)"]
    z_blocks = {}
    z_names = {}
    for t in terms:
        if case.is_fixed(t):
            cols, names = _treatment_columns(ds, t)
            x_cols.append(cols)
            fixed_names.extend(names)
        else:
            z, names = _indicator_block(ds, t)
            z_blocks[t] = z
            z_names[t] = names
    x = np.hstack(x_cols)
    return ModelSpec(
        ds=ds,
        case=case,
        y=ds.trait_values(),
        x=x,
        fixed_names=fixed_names,
        z_blocks=z_blocks,
        z_level_names=z_names,
        dropped_year_terms=drop_year,
    )


# ---------------------------------------------------------------------------
# Profiled (RE)ML machinery


class _Workspace:
    """Cross-product matrices shared by every likelihood evaluation."""

    def __init__(self, spec: ModelSpec):
        self.terms = list(spec.z_blocks)
        self.sizes = [spec.z_blocks[t].shape[1] for t in self.terms]
        z = (
            np.hstack([spec.z_blocks[t] for t in self.terms])
            if self.terms
            else np.zeros((len(spec.y), 0))
        )
        x, y = spec.x, spec.y
        self.n, self.p = x.shape
        self.q = z.shape[1]
        self.ztz = z.T @ z
        self.ztx = z.T @ x
        self.zty = z.T @ y
        self.xtx = x.T @ x
        self.xty = x.T @ y
        self.yty = float(y @ y)
        self.z = z
        self.spec = spec
        xr = np.linalg.matrix_rank(self.xtx)
        if xr < self.p:
            raise SingularDesignError("fixed-effect design is rank deficient")

    def slot(self, term):
        i = self.terms.index(term)
        start = sum(self.sizes[:i])
        return slice(start, start + self.sizes[i])

    def core(self, gammas):
        """Return (logdet V0, xvx, beta_hat, quadform r'V0^-1 r, M, sq)."""
        g = np.zeros(self.q)
        for t, gam in zip(self.terms, gammas):
            g[self.slot(t)] = gam
        sq = np.sqrt(g)
        m = sq[:, None] * self.ztz * sq[None, :]
        m[np.diag_indices_from(m)] += 1.0
        try:
            cf = np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise SingularDesignError("random-effect system is not positive definite")
        logdet_v0 = 2.0 * float(np.log(np.diag(cf)).sum())

        # a' V0^-1 b = a'b - (sq*Z'a)' M^-1 (sq*Z'b); one stacked solve
        rhs = np.column_stack([self.ztx, self.zty]) * sq[:, None]
        sol = np.linalg.solve(m, rhs)
        sa, sy = sol[:, : self.p], sol[:, self.p]
        wa, wy = rhs[:, : self.p], rhs[:, self.p]
        xvx = self.xtx - wa.T @ sa
        xvy = self.xty - wa.T @ sy
        yvy = self.yty - float(wy @ sy)
        try:
            beta = np.linalg.solve(xvx, xvy)
        except np.linalg.LinAlgError:
            raise SingularDesignError("GLS normal equations singular")
        quad = yvy - float(beta @ xvy)
        return logdet_v0, xvx, beta, max(quad, 1e-300), m, sq

    def neg2ll(self, gammas, method="REML"):
        logdet_v0, xvx, _, quad, _, _ = self.core(gammas)
        n, p = self.n, self.p
        if method == "REML":
            sign, logdet_xvx = np.linalg.slogdet(xvx)
            if sign <= 0:
                raise SingularDesignError("X'V^-1X not positive definite")
            df = n - p
            s2 = quad / df
            return logdet_v0 + logdet_xvx + df * (math.log(2 * math.pi * s2) + 1.0)
        s2 = quad / n
        return logdet_v0 + n * (math.log(2 * math.pi * s2) + 1.0)

    def neg2ll_grad(self, gammas, method="REML"):
        """Objective and its gradient in the variance ratios.

        Uses  d ln|V0|/dg_t = tr(Z_t' V0^-1 Z_t),
              d quad/dg_t   = -||Z_t' V0^-1 r||^2   (GLS envelope), and
              d ln|X'V0^-1X|/dg_t = -tr[(X'V0^-1X)^-1 ||X'V0^-1 Z_t||^2].
        """
        g = np.zeros(self.q)
        for t, gam in zip(self.terms, gammas):
            g[self.slot(t)] = gam
        sq = np.sqrt(g)
        m = sq[:, None] * self.ztz * sq[None, :]
        m[np.diag_indices_from(m)] += 1.0
        try:
            cf = np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise SingularDesignError("random-effect system is not positive definite")
        logdet_v0 = 2.0 * float(np.log(np.diag(cf)).sum())

        # K = M^-1 [sq*Z'Z, sq*Z'X, sq*Z'y] in one solve
        wz = sq[:, None] * self.ztz
        rhs = np.column_stack([wz, sq[:, None] * self.ztx, (sq * self.zty)[:, None]])
        sol = np.linalg.solve(m, rhs)
        kz = sol[:, : self.q]
        kx = sol[:, self.q : self.q + self.p]
        ky = sol[:, -1]

        # Z' V0^-1 Z = Z'Z - (Z'Z sq) K_z ; diag blocks give the traces
        zvz = self.ztz - wz.T @ kz
        zvx = self.ztx - wz.T @ kx
        zvy = self.zty - wz.T @ ky
        xvx = self.xtx - (sq[:, None] * self.ztx).T @ kx
        xvy = self.xty - (sq[:, None] * self.ztx).T @ ky
        yvy = self.yty - float((sq * self.zty) @ ky)
        try:
            xvx_inv = np.linalg.inv(xvx)
        except np.linalg.LinAlgError:
            raise SingularDesignError("X'V^-1X singular")
        beta = xvx_inv @ xvy
        quad = max(yvy - float(beta @ xvy), 1e-300)
        zvr = zvy - zvx @ beta

        n, p = self.n, self.p
        sign, logdet_xvx = np.linalg.slogdet(xvx)
        if sign <= 0:
            raise SingularDesignError("X'V^-1X not positive definite")
        if method == "REML":
            df = n - p
            s2 = quad / df
            val = logdet_v0 + logdet_xvx + df * (math.log(2 * math.pi * s2) + 1.0)
        else:
            df = n
            s2 = quad / n
            val = logdet_v0 + n * (math.log(2 * math.pi * s2) + 1.0)

        grad = np.zeros(len(self.terms))
        for i, t in enumerate(self.terms):
            sl = self.slot(t)
            tr_v = float(np.trace(zvz[sl, sl]))
            d_quad = -float((zvr[sl] ** 2).sum())
            d_val = tr_v + df * d_quad / quad
            if method == "REML":
                bt = zvx[sl, :]
                d_val += -float(np.trace(xvx_inv @ (bt.T @ bt)))
            grad[i] = d_val
        return val, grad


@dataclass
class MixedModelFit:
    case: ModelCase
    spec: ModelSpec
    variance_components: dict[str, dict[str, float]]
    residual_variance: float
    fixed_effects: dict[str, dict[str, float]]
    reml_log_likelihood: float
    ml_log_likelihood: float
    blups: dict[str, dict[str, float]]
    converged: bool
    boundary_terms: tuple[str, ...] = ()
    method: str = "REML"

    def variance(self, term):
        if term == "residual":
            return self.residual_variance
        if term not in self.variance_components:
            raise UnknownTermError(term)
        return self.variance_components[term]["variance"]


def _moment_start(ws: _Workspace):
    """Crude per-term variance ratios from group means of OLS residuals."""
    x, y = ws.spec.x, ws.spec.y
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    s2 = max(float(resid @ resid) / max(len(y) - x.shape[1], 1), 1e-12)
    start = []
    for t in ws.terms:
        z = ws.spec.z_blocks[t]
        counts = z.sum(axis=0)
        means = (z.T @ resid) / np.maximum(counts, 1.0)
        between = float(np.var(means)) if means.size > 1 else 0.0
        avg_n = float(counts.mean()) if counts.size else 1.0
        est = max(between - s2 / max(avg_n, 1.0), 0.01 * s2)
        start.append(est / s2)
    return np.array(start)


def _optimize(ws: _Workspace, method="REML", start=None, multistart=True):
    k = len(ws.terms)
    if k == 0:
        crit = ws.neg2ll(np.zeros(0), method)
        return np.zeros(0), crit, True

    floor, ceil = -30.0, 25.0

    def fg(theta):
        gam = np.exp(theta)
        val, grad = ws.neg2ll_grad(gam, method)
        return val, grad * gam  # chain rule to the log scale

    def run(theta0, budget=400):
        return minimize(
            fg,
            np.clip(theta0, floor, ceil),
            jac=True,
            method="L-BFGS-B",
            bounds=[(floor, ceil)] * k,
            options={"maxiter": budget, "ftol": 1e-14, "gtol": 1e-10},
        )

    base = _moment_start(ws) if start is None else np.maximum(np.asarray(start), 1e-10)
    starts = [base]
    if multistart:
        starts += [base * 0.01, base * 10.0]
    best = None
    for s in starts:
        res = run(np.log(np.maximum(s, 1e-10)))
        if best is None or res.fun < best.fun - 1e-12:
            best = res
    gam = np.exp(np.clip(best.x, floor, ceil))
    crit = best.fun
    ok = bool(best.success)

    # Boundary polish: components driven to the floor are numerically zero;
    # accept the exact-zero solution whenever it does not cost likelihood,
    # then re-optimize the remaining coordinates.
    for _ in range(k):
        changed = False
        for i in range(k):
            if 0.0 < gam[i] < 1e-4:
                trial = gam.copy()
                trial[i] = 0.0
                c2 = ws.neg2ll(trial, method)
                if c2 <= crit + 1e-8:
                    gam, crit, changed = trial, min(crit, c2), True
        if not changed:
            break
        free = [i for i in range(k) if gam[i] > 0.0]
        if not free:
            break

        def fg_sub(theta_sub, free=tuple(free)):
            full = gam.copy()
            full[list(free)] = np.exp(theta_sub)
            val, grad = ws.neg2ll_grad(full, method)
            return val, grad[list(free)] * full[list(free)]

        res = minimize(
            fg_sub,
            np.log(gam[free]),
            jac=True,
            method="L-BFGS-B",
            bounds=[(floor, ceil)] * len(free),
            options={"maxiter": 300, "ftol": 1e-14, "gtol": 1e-10},
        )
        if res.fun <= crit + 1e-10:
            gam[free] = np.exp(np.clip(res.x, floor, ceil))
            crit = res.fun
    return gam, crit, ok


def fit_reml(spec: ModelSpec, method: str = "REML", start=None, multistart: bool = True) -> MixedModelFit:
    """Estimate variance components, fixed effects, and BLUPs.

    ``method="ML"`` fits by maximum likelihood (used for the
    likelihood-ratio tests); the reported ``reml_log_likelihood`` always
    refers to the criterion actually optimized.
    """
    ws = _Workspace(spec)
    gammas, crit, ok = _optimize(ws, method=method, start=start, multistart=multistart)
    logdet_v0, xvx, beta, quad, cf, sq = ws.core(gammas)
    df = ws.n - ws.p if method == "REML" else ws.n
    sigma2 = quad / df

    cov = np.linalg.inv(xvx) * sigma2
    fixed = {
        name: {"estimate": float(b), "standard_error": float(math.sqrt(max(c, 0.0)))}
        for name, b, c in zip(spec.fixed_names, beta, np.diag(cov))
    }

    # BLUPs via the Woodbury form of Gamma Z' V0^-1 r.
    r_zt = ws.zty - ws.ztx @ beta
    w = sq * r_zt
    sol = np.linalg.solve(cf.T, np.linalg.solve(cf, w))
    u = np.zeros(ws.q)
    for t, gam in zip(ws.terms, gammas):
        sl = ws.slot(t)
        u[sl] = gam * (r_zt[sl] - (ws.ztz[sl, :] * sq[None, :]) @ sol)

    comps = {}
    blups = {}
    boundary = []
    for t, gam in zip(ws.terms, gammas):
        var = gam * sigma2
        if gam == 0.0:
            var = 0.0
            boundary.append(t)
        comps[t] = {"variance": float(var), "std_dev": float(math.sqrt(max(var, 0.0)))}
        sl = ws.slot(t)
        vals = u[sl] if gam > 0 else np.zeros(sl.stop - sl.start)
        blups[t] = {name: float(v) for name, v in zip(spec.z_level_names[t], vals)}

    ll = -0.5 * crit
    fit = MixedModelFit(
        case=spec.case,
        spec=spec,
        variance_components=comps,
        residual_variance=float(sigma2),
        fixed_effects=fixed,
        reml_log_likelihood=float(ll) if method == "REML" else float("nan"),
        ml_log_likelihood=float(ll) if method == "ML" else float("nan"),
        blups=blups,
        converged=ok,
        boundary_terms=tuple(boundary),
        method=method,
    )
    return fit


def blup(fit: MixedModelFit, term: str) -> dict[str, float]:
    if term not in fit.blups:
        raise UnknownTermError(term)
    return dict(fit.blups[term])


def predict(fit: MixedModelFit, ds: TrialDataset | None = None):
    """Per-record predictions X beta + sum_t Z_t u_t and residuals."""
    spec = fit.spec
    if ds is not None and ds is not spec.ds:
        spec = build_model(ds, fit.case)
    beta = np.array([fit.fixed_effects[n]["estimate"] for n in spec.fixed_names])
    pred = spec.x @ beta
    for t, z in spec.z_blocks.items():
        if t in fit.blups:
            u = np.array([fit.blups[t][name] for name in spec.z_level_names[t]])
            pred = pred + z @ u
    resid = spec.y - pred
    return pred, resid


# ---------------------------------------------------------------------------
# Significance tables


@dataclass
class SignificanceRow:
    term: str
    kind: str  # fixed | random | residual
    statistic: float | None
    df: float | tuple[float, float] | None
    p_value: float | None
    variance: float | None = None
    std_dev: float | None = None
    mean_square: float | None = None


@dataclass
class SignificanceTable:
    rows: list[SignificanceRow]

    def to_json_dict(self):
        out = []
        for r in self.rows:
            out.append(
                {
                    "term": r.term,
                    "kind": r.kind,
                    "statistic": r.statistic,
                    "df": list(r.df) if isinstance(r.df, tuple) else r.df,
                    "p_value": r.p_value,
                    "variance": r.variance,
                    "std_dev": r.std_dev,
                    "mean_square": r.mean_square,
                }
            )
        return {"rows": out}

    def to_text(self) -> str:
        headers = ["Source of variance", "Variance", "Std.dev", "Mean square", "Statistic", "df", "p value"]
        lines = [headers]
        for r in self.rows:
            def fmt(v, nd=2):
                if v is None:
                    return "-"
                return f"{v:.{nd}f}"

            dfs = "-"
            if isinstance(r.df, tuple):
                dfs = f"({r.df[0]:g}, {r.df[1]:g})"
            elif r.df is not None:
                dfs = f"{r.df:g}"
            lines.append(
                [
                    r.term,
                    fmt(r.variance),
                    fmt(r.std_dev),
                    fmt(r.mean_square, 3),
                    fmt(r.statistic, 3),
                    dfs,
                    fmt(r.p_value, 3),
                ]
            )
        widths = [max(len(row[i]) for row in lines) for i in range(len(headers))]
        rendered = []
        for row in lines:
            rendered.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        return "\n".join(rendered) + "\n"

    def row(self, term):
        for r in self.rows:
            if r.term == term:
                return r
        raise UnknownTermError(term)


def _display(term):
    return DISPLAY_NAMES.get(term, term)


def test_random_terms(
    ds: TrialDataset,
    case: ModelCase,
    full_fit: MixedModelFit | None = None,
    boundary_mixture: bool = False,
):
    """Likelihood-ratio test of each random term (chi-square, 1 df).

    The statistic compares ML fits of the full model and the model with
    the term deleted, clamped at zero; variance columns carry the full
    REML fit's estimates.  ``boundary_mixture=True`` halves the tail
    probability (the 50:50 mixture accounting for the variance sitting on
    the boundary of its parameter space); the default is the plain
    chi-square reference.
    """
    spec = build_model(ds, case)
    if not spec.z_blocks:
        return []
    if full_fit is None:
        full_fit = fit_reml(spec)
    start = np.array(
        [
            full_fit.variance_components[t]["variance"] / max(full_fit.residual_variance, 1e-12)
            for t in spec.z_blocks
        ]
    )
    ml_full = fit_reml(spec, method="ML", start=np.maximum(start, 1e-8), multistart=False)
    rows = []
    for t in spec.z_blocks:
        reduced = spec.without(t)
        sub_start = np.array(
            [
                ml_full.variance_components[u]["variance"] / max(ml_full.residual_variance, 1e-12)
                for u in reduced.z_blocks
            ]
        )
        ml_red = fit_reml(reduced, method="ML", start=np.maximum(sub_start, 1e-8), multistart=False)
        stat = max(0.0, 2.0 * (ml_full.ml_log_likelihood - ml_red.ml_log_likelihood))
        p = 1.0 if stat == 0.0 else dist_sf("chisq", stat, 1.0)
        if boundary_mixture and stat > 0.0:
            p = 0.5 * p
        rows.append(
            SignificanceRow(
                term=_display(t),
                kind="random",
                statistic=stat,
                df=1.0,
                p_value=min(p, 1.0),
                variance=full_fit.variance_components[t]["variance"],
                std_dev=full_fit.variance_components[t]["std_dev"],
            )
        )
    order = {(_display(t)): i for i, t in enumerate(DISPLAY_ORDER)}
    rows.sort(key=lambda r: order.get(r.term, 99))
    return rows


# --- balanced ANOVA ---------------------------------------------------------


def balanced_anova(ds: TrialDataset):
    """Classical sums of squares for the full factorial plus replicate term.

    Requires a complete balanced layout.  Returns ({term: (df, ss, ms)},
    (df_res, ss_res, ms_res)).
    """
    if not ds.is_balanced():
        raise UnbalancedDataError("classical ANOVA requires balanced, complete data")
    years = ds.years
    locs = ds.locations
    genos = ds.genotypes
    reps = ds.reps
    Y, L, G, R = len(years), len(locs), len(genos), len(reps)
    iy = {v: i for i, v in enumerate(years)}
    il = {v: i for i, v in enumerate(locs)}
    ig = {v: i for i, v in enumerate(genos)}
    ir = {v: i for i, v in enumerate(reps)}
    cube = np.zeros((Y, L, G, R))
    for r in ds.records:
        cube[iy[r.year], il[r.location], ig[r.genotype], ir[r.rep]] = r.trait
    grand = cube.mean()
    n = cube.size

    axis_of = {"YR": 0, "LC": 1, "CLT": 2}

    def marginal(factors):
        keep = sorted(axis_of[f] for f in factors)
        drop = tuple(a for a in (0, 1, 2, 3) if a not in keep)
        return cube.mean(axis=drop)

    terms = {}
    factorial = [t for t in ALL_TERMS if t != "RP"]
    effects = {}
    for t in sorted(factorial, key=lambda t: len(_term_factors(t))):
        fs = sorted(_term_factors(t), key=lambda f: axis_of[f])
        m = marginal(fs) - grand
        # subtract lower-order effects broadcast onto this margin
        for s, eff in effects.items():
            sf_ = sorted(_term_factors(s), key=lambda f: axis_of[f])
            if set(sf_) <= set(fs):
                shape = [1] * len(fs)
                for i, f in enumerate(fs):
                    if f in sf_:
                        shape[i] = eff.shape[sf_.index(f)]
                m = m - eff.reshape(shape)
        effects[t] = m
        mult = n / m.size
        ss = float(mult * (m * m).sum())
        df = int(np.prod([d - 1 for d in m.shape]))
        if df > 0:
            terms[t] = (df, ss, ss / df)

    # replicate within (year, location): group means over genotypes
    g_ylr = cube.mean(axis=2)
    g_yl = cube.mean(axis=(2, 3))
    rp_eff = g_ylr - g_yl[:, :, None]
    ss_rp = float(G * (rp_eff * rp_eff).sum())
    df_rp = Y * L * (R - 1)
    if df_rp > 0:
        terms["RP"] = (df_rp, ss_rp, ss_rp / df_rp)

    ss_total = float(((cube - grand) ** 2).sum())
    ss_used = sum(v[1] for v in terms.values())
    df_used = sum(v[0] for v in terms.values())
    df_res = n - 1 - df_used
    ss_res = max(ss_total - ss_used, 0.0)
    ms_res = ss_res / df_res if df_res > 0 else float("nan")
    return terms, (df_res, ss_res, ms_res)


def _ems_coefficients(ds: TrialDataset, random_terms):
    """Coefficient of each random component in E[MS_T], unrestricted rules."""
    n = len(ds.records)
    coeffs = {}
    level_count = {
        "YR": ds.n_years,
        "LC": ds.n_locations,
        "CLT": ds.n_genotypes,
        "RP": ds.n_reps,
    }
    for t in list(random_terms):
        c = n / np.prod([level_count[f] for f in _term_factors(t)])
        coeffs[t] = float(c)
    return coeffs


def test_fixed_terms(ds: TrialDataset, case: ModelCase):
    """F tests for the fixed terms from the expected-mean-squares ladder.

    Each fixed term is tested against the mean square (or Satterthwaite
    combination) whose expectation matches its own under the null.
    Balanced data only.
    """
    terms, (df_res, ss_res, ms_res) = balanced_anova(ds)
    random_terms = [t for t in terms if t not in _CASE_FIXED[case.case_id]]
    fixed_terms = [t for t in terms if t in _CASE_FIXED[case.case_id]]
    if not fixed_terms:
        return [], (df_res, ss_res, ms_res)
    coeff = _ems_coefficients(ds, random_terms)

    def containers(t):
        fs = _term_factors(t)
        return frozenset(u for u in random_terms if fs <= _term_factors(u))

    rows = []
    for t in fixed_terms:
        df_t, ss_t, ms_t = terms[t]
        # Random components present in E[MS_t] under H0 (beyond sigma^2).
        target = containers(t)
        # E[MS_u] for a random term u carries exactly containers(u), which
        # includes u itself; an exact denominator has the same component set.
        match = next((u for u in random_terms if containers(u) == target), None)
        if target == frozenset():
            denom_ms, denom_df = ms_res, float(df_res)
        elif match is not None:
            denom_df, _, denom_ms = terms[match]
            denom_df = float(denom_df)
        else:
            # Satterthwaite: weight the random-term and residual mean squares
            # so the combination's expectation matches the target EMS.
            basis = list(random_terms) + ["__res__"]
            comps = list(random_terms) + ["__sigma2__"]
            mat = np.zeros((len(comps), len(basis)))
            for j, u in enumerate(basis):
                cu = containers(u) if u != "__res__" else frozenset()
                for i, comp in enumerate(comps):
                    if comp == "__sigma2__":
                        mat[i, j] = 1.0
                    elif comp in cu:
                        mat[i, j] = coeff[comp]
            rhs = np.zeros(len(comps))
            rhs[-1] = 1.0
            for i, comp in enumerate(comps[:-1]):
                if comp in target:
                    rhs[i] = coeff[comp]
            weights, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
            ms_list = [terms[u][2] for u in random_terms] + [ms_res]
            df_list = [terms[u][0] for u in random_terms] + [df_res]
            denom_ms = float(np.dot(weights, ms_list))
            denom_sq = sum(
                (w * m) ** 2 / d for w, m, d in zip(weights, ms_list, df_list) if w != 0.0
            )
            denom_df = denom_ms**2 / denom_sq if denom_sq > 0 else float(df_res)
        f_stat = ms_t / denom_ms if denom_ms > 0 else (0.0 if ms_t == 0 else float("inf"))
        p = dist_sf("f", f_stat, float(df_t), float(denom_df)) if np.isfinite(f_stat) else 0.0
        rows.append(
            SignificanceRow(
                term=_display(t),
                kind="fixed",
                statistic=float(f_stat),
                df=(float(df_t), float(denom_df)),
                p_value=float(min(max(p, 0.0), 1.0)),
                mean_square=float(ms_t),
            )
        )
    order = {(_display(t)): i for i, t in enumerate(DISPLAY_ORDER)}
    rows.sort(key=lambda r: order.get(r.term, 99))
    return rows, (df_res, ss_res, ms_res)


def significance_table(ds: TrialDataset, case: ModelCase, fit: MixedModelFit | None = None) -> SignificanceTable:
    """Full significance report: random-term LRT rows, fixed-term F rows,
    and a residual line.
    """
    spec = build_model(ds, case)
    if fit is None:
        fit = fit_reml(spec)
    rows = list(test_random_terms(ds, case, full_fit=fit))
    ms_res = None
    if _CASE_FIXED[case.case_id]:
        fixed_rows, (df_res, ss_res, ms_res) = test_fixed_terms(ds, case)
        rows.extend(fixed_rows)
    order = {_display(t): i for i, t in enumerate(DISPLAY_ORDER)}
    rows.sort(key=lambda r: order.get(r.term, 99))
    rows.append(
        SignificanceRow(
            term="residual",
            kind="residual",
            statistic=None,
            df=None,
            p_value=None,
            variance=fit.residual_variance,
            std_dev=math.sqrt(fit.residual_variance),
            mean_square=ms_res,
        )
    )
    return SignificanceTable(rows=rows)
