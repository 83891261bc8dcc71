"""Additive main effects and multiplicative interaction model.

Row/column/grand means give the additive part; the double-centered
interaction is decomposed by SVD into interaction principal components
(IPCs).  Component count selection follows the sequential parametric
bootstrap test of the first-singular-value share.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TwoWayTable, IncompleteTableError
from .numerics import svd
from .distributions import dist_sf

__all__ = [
    "TooSmallError",
    "AxisOutOfRangeError",
    "AmmiFit",
    "IpcSelection",
    "fit_ammi",
    "select_components",
    "ammi_biplot_data",
]


class TooSmallError(ValueError):
    pass


class AxisOutOfRangeError(IndexError):
    pass


@dataclass
class AmmiFit:
    grand_mean: float
    genotype_effects: np.ndarray
    environment_effects: np.ndarray
    singular_values: np.ndarray
    genotype_scores: np.ndarray  # G x N, orthonormal columns
    environment_scores: np.ndarray  # E x N, orthonormal columns
    residual: np.ndarray
    n_components: int
    genotypes: tuple[str, ...]
    environments: tuple[str, ...]
    anova: list[dict]

    def reconstruct(self) -> np.ndarray:
        inter = (self.genotype_scores * self.singular_values) @ self.environment_scores.T
        return (
            self.grand_mean
            + self.genotype_effects[:, None]
            + self.environment_effects[None, :]
            + inter
            + self.residual
        )

    def interaction_products(self, axes=(0, 1)) -> np.ndarray:
        """Per (genotype, environment) sum of score products over the given
        axes; its sign indicates interaction direction in the biplot."""
        for a in axes:
            if a >= self.n_components:
                raise AxisOutOfRangeError(f"axis {a} >= retained components {self.n_components}")
        axes = list(axes)
        g = self.genotype_scores[:, axes] * self.singular_values[axes]
        e = self.environment_scores[:, axes]
        return g @ e.T


def fit_ammi(
    table: TwoWayTable,
    n_components: int | None = None,
    alpha: float = 0.05,
    n_boot: int = 1000,
    seed: int | None = None,
    error_ms: float | None = None,
    error_df: float | None = None,
) -> AmmiFit:
    """Fit the additive + multiplicative model on a complete table.

    Without an explicit ``n_components`` the bootstrap selection picks the
    count (which then needs a ``seed``).  The ANOVA block lists genotype,
    environment, each retained IPC with Gollob df, and the multiplicative
    residual; F/p columns appear when an error mean square is supplied.
    """
    table.require_complete()
    g_n, e_n = table.n_genotypes, table.n_environments
    if g_n < 3 or e_n < 3:
        raise TooSmallError("AMMI needs at least a 3x3 table")
    max_n = min(g_n - 1, e_n - 1)
    values = table.values
    grand = values.mean()
    g_eff = values.mean(axis=1) - grand
    e_eff = values.mean(axis=0) - grand
    inter = table.interaction()

    dec = svd(inter)
    if n_components is None:
        sel = select_components(table, alpha=alpha, n_boot=n_boot, seed=seed)
        n_components = sel.retained
    if not 0 <= n_components <= max_n:
        raise TooSmallError(f"n_components must be in 0..{max_n}")

    lam = dec.sigma[:n_components]
    gs = dec.u[:, :n_components]
    es = dec.v[:, :n_components]
    resid = inter - (gs * lam) @ es.T

    # cell means carry no replicate error here; df follow Gollob's count
    anova = []
    reps = int(table.cell_counts.max()) if table.cell_counts.size else 1
    scale = reps  # SS on the observation scale when cells average `reps` obs

    def add_row(source, df, ss):
        row = {"source": source, "df": float(df), "ss": float(ss), "ms": float(ss / df) if df > 0 else float("nan")}
        if error_ms is not None and df > 0:
            row["f"] = row["ms"] / error_ms
            row["p"] = dist_sf("f", row["f"], float(df), float(error_df if error_df else 1e6))
        anova.append(row)

    add_row("genotype", g_n - 1, scale * e_n * (g_eff**2).sum())
    add_row("environment", e_n - 1, scale * g_n * (e_eff**2).sum())
    full_sigma = dec.sigma
    for k in range(n_components):
        add_row(f"IPC{k + 1}", g_n + e_n - 1 - 2 * (k + 1), scale * full_sigma[k] ** 2)
    resid_ss = float((full_sigma[n_components:] ** 2).sum())
    resid_df = (g_n - 1) * (e_n - 1) - sum(
        g_n + e_n - 1 - 2 * (k + 1) for k in range(n_components)
    )
    if resid_df > 0:
        add_row("interaction residual", resid_df, scale * resid_ss)

    return AmmiFit(
        grand_mean=float(grand),
        genotype_effects=g_eff,
        environment_effects=e_eff,
        singular_values=lam,
        genotype_scores=gs,
        environment_scores=es,
        residual=resid,
        n_components=int(n_components),
        genotypes=table.genotypes,
        environments=table.env_labels(),
        anova=anova,
    )


@dataclass
class IpcSelection:
    tested_k: list[int]
    p_values: list[float]
    retained: int
    method: str = "bootstrap"


def select_components(
    table: TwoWayTable,
    alpha: float = 0.05,
    n_boot: int = 1000,
    seed: int | None = None,
) -> IpcSelection:
    """Sequential parametric bootstrap test for the number of IPCs.

    For k = 0, 1, ... the share of the (k+1)-th squared singular value in
    the remaining interaction is compared with its null distribution from
    pure-noise (G-k) x (E-k) double-centered tables; selection stops at
    the first non-rejection.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be inside (0, 1)")
    if seed is None:
        raise ValueError("a seed is required for reproducible selection")
    table.require_complete()
    g_n, e_n = table.n_genotypes, table.n_environments
    max_n = min(g_n - 1, e_n - 1)
    sigma = svd(table.interaction()).sigma
    sq = sigma**2
    root = np.random.default_rng(seed)

    tested, pvals = [], []
    retained = max_n
    for k in range(max_n):
        remaining = sq[k:].sum()
        if remaining <= 0:
            retained = k
            break
        stat = sq[k] / remaining
        rows, cols = g_n - k, e_n - k
        rng = np.random.default_rng(root.integers(0, 2**63 - 1))
        count = 0
        for _ in range(n_boot):
            noise = rng.standard_normal((rows, cols))
            noise -= noise.mean(axis=0, keepdims=True)
            noise -= noise.mean(axis=1, keepdims=True)
            s = np.linalg.svd(noise, compute_uv=False)
            s2 = s**2
            if s2[0] / s2.sum() >= stat:
                count += 1
        p = (count + 1) / (n_boot + 1)
        tested.append(k)
        pvals.append(float(p))
        if p >= alpha:
            retained = k
            break
    else:
        retained = max_n
    return IpcSelection(tested_k=tested, p_values=pvals, retained=int(retained))


def ammi_biplot_data(fit: AmmiFit, axes=(0, 1)) -> dict:
    """Symmetrically scaled scores for the requested component axes.

    Both sides carry sqrt(singular value), so genotype-environment dot
    products over the plotted axes approximate interaction cells; each
    pair's product sign is reported as the interaction direction.
    """
    for a in axes:
        if a < 0 or a >= fit.n_components:
            raise AxisOutOfRangeError(f"axis {a} out of range (retained {fit.n_components})")
    axes = list(axes)
    lam = fit.singular_values[axes]
    scale = np.sqrt(lam)
    g_pts = fit.genotype_scores[:, axes] * scale
    e_pts = fit.environment_scores[:, axes] * scale
    products = g_pts @ e_pts.T
    total = fit.singular_values.sum()
    share = [float(l / total) if total > 0 else 0.0 for l in fit.singular_values]
    return {
        "axes": axes,
        "genotype_points": {g: [float(v) for v in row] for g, row in zip(fit.genotypes, g_pts)},
        "environment_points": {e: [float(v) for v in row] for e, row in zip(fit.environments, e_pts)},
        "interaction_sign": {
            g: {e: float(products[i, j]) for j, e in enumerate(fit.environments)}
            for i, g in enumerate(fit.genotypes)
        },
        "singular_value_share": share,
    }
