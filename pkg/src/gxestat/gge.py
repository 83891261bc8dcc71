"""Genotype main effect plus genotype-by-environment interaction model.

Environment-centered (optionally standardized) SVD of the two-way table,
with the six biplot readings: mean-vs-stability, genotype/environment
ranking, which-won-where sectors, discrimination vs representativeness,
and pairwise environment relationships.  Every mode emits a
BiplotGeometry payload whose overlays are fully derivable from the
points, so renderers and UIs never recompute statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import TwoWayTable
from .numerics import svd

__all__ = [
    "ZeroVarianceEnvironmentError",
    "DegenerateAxisError",
    "DegenerateHullError",
    "ZeroVectorError",
    "GgeFit",
    "BiplotGeometry",
    "WinnerAssignment",
    "MODES",
    "DEFAULT_SVP",
    "fit_gge",
    "mean_environment_axis",
    "mean_vs_stability",
    "which_won_where",
    "discrimination_representativeness",
    "environment_relationship",
    "ranking",
    "biplot_geometry",
]

MODES = (
    "pc_scatter",
    "mean_vs_stability",
    "ranking_genotypes",
    "ranking_environments",
    "which_won_where",
    "discrim_vs_repr",
    "env_relationship",
)

# Partition conventions per mode: symmetric for scatter/sectors,
# environment-focused for environment readings, genotype-focused for
# genotype readings.
DEFAULT_SVP = {
    "pc_scatter": 0.5,
    "which_won_where": 0.5,
    "discrim_vs_repr": 0.0,
    "env_relationship": 0.0,
    "ranking_environments": 0.0,
    "mean_vs_stability": 1.0,
    "ranking_genotypes": 1.0,
}


class ZeroVarianceEnvironmentError(ValueError):
    pass


class DegenerateAxisError(ValueError):
    pass


class DegenerateHullError(ValueError):
    pass


class ZeroVectorError(ValueError):
    pass


@dataclass
class GgeFit:
    centering: str
    svp: float
    singular_values: np.ndarray
    genotype_basis: np.ndarray  # G x t left singular vectors
    environment_basis: np.ndarray  # E x t right singular vectors
    explained_variance: np.ndarray
    genotypes: tuple[str, ...]
    environments: tuple[str, ...]

    @property
    def rank(self):
        return len(self.singular_values)

    def coords(self, svp: float | None = None, n_axes: int = 2):
        """(genotype coords, environment coords) under a partition f:
        genotype side scaled by sigma^f, environment side by sigma^(1-f)."""
        f = self.svp if svp is None else svp
        lam = self.singular_values[:n_axes]
        g = self.genotype_basis[:, :n_axes] * lam**f
        e = self.environment_basis[:, :n_axes] * lam ** (1.0 - f)
        return g, e


def fit_gge(table: TwoWayTable, centering: str = "environment_centered", svp: float = 0.5) -> GgeFit:
    """SVD of the environment-centered (optionally standardized) table."""
    table.require_complete()
    if table.n_genotypes < 3 or table.n_environments < 2:
        raise ValueError("GGE needs at least 3 genotypes and 2 environments")
    if centering not in ("environment_centered", "env_standardized"):
        raise ValueError(f"unknown centering {centering!r}")
    y = table.values - table.values.mean(axis=0, keepdims=True)
    if centering == "env_standardized":
        sd = table.values.std(axis=0, ddof=1)
        if np.any(sd <= 0):
            bad = table.env_labels()[int(np.argmin(sd))]
            raise ZeroVarianceEnvironmentError(f"environment {bad} has zero variance")
        y = y / sd
    dec = svd(y)
    t = min(table.n_genotypes - 1, table.n_environments)
    lam = dec.sigma[:t]
    total = float((y**2).sum())
    explained = lam**2 / total if total > 0 else np.zeros(t)
    return GgeFit(
        centering=centering,
        svp=svp,
        singular_values=lam,
        genotype_basis=dec.u[:, :t],
        environment_basis=dec.v[:, :t],
        explained_variance=explained,
        genotypes=table.genotypes,
        environments=table.env_labels(),
    )


def mean_environment_axis(fit: GgeFit, svp: float | None = None):
    """Unit direction of the average environment in PC1/PC2 plus the point."""
    if fit.rank < 2:
        raise DegenerateAxisError("need at least 2 principal components")
    _, env = fit.coords(svp=svp, n_axes=2)
    mean_env = env.mean(axis=0)
    norm = np.linalg.norm(mean_env)
    if norm <= 1e-12:
        raise DegenerateAxisError("average environment sits at the origin")
    return mean_env / norm, mean_env


def mean_vs_stability(fit: GgeFit, svp: float | None = None):
    """Projection on the mean-environment axis (performance proxy) and
    perpendicular distance (instability proxy) per genotype."""
    f = DEFAULT_SVP["mean_vs_stability"] if svp is None else svp
    axis, mean_pt = mean_environment_axis(fit, svp=f)
    geno, _ = fit.coords(svp=f, n_axes=2)
    proj = geno @ axis
    perp = geno - np.outer(proj, axis)
    dist = np.linalg.norm(perp, axis=1)
    order = np.argsort(-proj, kind="stable")
    return {
        "axis": axis,
        "mean_environment": mean_pt,
        "projection": {g: float(p) for g, p in zip(fit.genotypes, proj)},
        "distance": {g: float(d) for g, d in zip(fit.genotypes, dist)},
        "ranking_by_projection": [fit.genotypes[i] for i in order],
    }


@dataclass
class WinnerAssignment:
    winner_by_environment: dict[str, str]
    sector_of_environment: dict[str, int]
    sector_vertices: list[str]
    hull: list[str] = field(default_factory=list)


def _convex_hull(points):
    """Andrew monotone chain; returns hull vertex indices counterclockwise."""
    idx = sorted(range(len(points)), key=lambda i: (points[i][0], points[i][1]))
    if len(idx) < 3:
        return idx

    def cross(o, a, b):
        return (points[a][0] - points[o][0]) * (points[b][1] - points[o][1]) - (
            points[a][1] - points[o][1]
        ) * (points[b][0] - points[o][0])

    lower = []
    for i in idx:
        while len(lower) > 1 and cross(lower[-2], lower[-1], i) <= 0:
            lower.pop()
        lower.append(i)
    upper = []
    for i in reversed(idx):
        while len(upper) > 1 and cross(upper[-2], upper[-1], i) <= 0:
            upper.pop()
        upper.append(i)
    return lower[:-1] + upper[:-1]


def which_won_where(fit: GgeFit, svp: float | None = None):
    """Convex hull of genotype points, origin rays perpendicular to hull
    edges, environment-to-sector assignment, and the sector winners."""
    f = DEFAULT_SVP["which_won_where"] if svp is None else svp
    geno, env = fit.coords(svp=f, n_axes=2)
    if np.linalg.matrix_rank(geno - geno.mean(axis=0), tol=1e-10) < 2:
        raise DegenerateHullError("genotype points are collinear")
    hull = _convex_hull([tuple(p) for p in geno])
    hull_pts = geno[hull]
    m = len(hull)

    # Sector boundary k sits between hull vertices k and k+1: the ray from
    # the origin perpendicular to that edge.  A direction belongs to the
    # sector of the vertex whose angular interval contains it.
    def edge_normal(a, b):
        mid = 0.5 * (a + b)
        edge = b - a
        n = np.array([-edge[1], edge[0]])
        if n @ mid < 0:
            n = -n
        return n / np.linalg.norm(n)

    boundaries = []
    for k in range(m):
        a, b = hull_pts[k], hull_pts[(k + 1) % m]
        boundaries.append(edge_normal(a, b))

    # Within a sector the corresponding hull vertex maximizes the projection
    # on every direction of that sector, so assignment-by-argmax is the
    # sector assignment; argmax takes the first (counterclockwise-earlier)
    # vertex on an exact boundary tie.
    winners = {}
    sector_of = {}
    for j, label in enumerate(fit.environments):
        v = env[j]
        norm = np.linalg.norm(v)
        if norm <= 1e-14:
            best_vertex = hull[int(np.argmax(hull_pts[:, 0]))]
            winners[label] = fit.genotypes[best_vertex]
            sector_of[label] = hull.index(best_vertex)
            continue
        proj = hull_pts @ (v / norm)
        best_vertex = hull[int(np.argmax(proj))]
        winners[label] = fit.genotypes[best_vertex]
        sector_of[label] = hull.index(best_vertex)
    return WinnerAssignment(
        winner_by_environment=winners,
        sector_of_environment=sector_of,
        sector_vertices=[fit.genotypes[i] for i in hull],
        hull=[fit.genotypes[i] for i in hull],
    ), {
        "hull_points": {fit.genotypes[i]: [float(v) for v in geno[i]] for i in hull},
        "sector_rays": [[float(x) for x in b] for b in boundaries],
    }


def discrimination_representativeness(fit: GgeFit, svp: float | None = None):
    """Vector length (discrimination) and angle to the mean-environment
    axis (representativeness; acute = representative) per environment."""
    f = DEFAULT_SVP["discrim_vs_repr"] if svp is None else svp
    axis, mean_pt = mean_environment_axis(fit, svp=f)
    _, env = fit.coords(svp=f, n_axes=2)
    out = {}
    for j, label in enumerate(fit.environments):
        v = env[j]
        length = float(np.linalg.norm(v))
        if length <= 1e-14:
            out[label] = {"vector_length": 0.0, "angle_deg": 90.0, "representative": False}
            continue
        cosv = float(np.clip(v @ axis / length, -1.0, 1.0))
        ang = math.degrees(math.acos(cosv))
        out[label] = {
            "vector_length": length,
            "angle_deg": ang,
            "representative": ang < 90.0,
        }
    return {"axis": axis, "mean_environment": mean_pt, "environments": out}


def environment_relationship(fit: GgeFit, svp: float | None = None):
    """Pairwise angles and cosines between environment vectors in PC1/PC2."""
    f = DEFAULT_SVP["env_relationship"] if svp is None else svp
    if fit.rank < 2:
        raise DegenerateAxisError("need at least 2 principal components")
    _, env = fit.coords(svp=f, n_axes=2)
    labels = fit.environments
    pairs = {}
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            a, b = env[i], env[j]
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            if na <= 1e-14 or nb <= 1e-14:
                raise ZeroVectorError(f"environment vector at origin: {labels[i if na <= 1e-14 else j]}")
            cosv = float(np.clip((a @ b) / (na * nb), -1.0, 1.0))
            pairs[f"{labels[i]}|{labels[j]}"] = {
                "cosine": cosv,
                "angle_deg": math.degrees(math.acos(cosv)),
            }
    return pairs


def ranking(fit: GgeFit, target: str = "genotypes", svp: float | None = None):
    """Distance-to-ideal ranking with concentric-circle overlay radii.

    The ideal point sits on the mean-environment axis at the largest
    projection among the ranked entries.
    """
    if target not in ("genotypes", "environments"):
        raise ValueError("target must be genotypes or environments")
    f = (
        DEFAULT_SVP["ranking_genotypes" if target == "genotypes" else "ranking_environments"]
        if svp is None
        else svp
    )
    axis, mean_pt = mean_environment_axis(fit, svp=f)
    geno, env = fit.coords(svp=f, n_axes=2)
    pts = geno if target == "genotypes" else env
    labels = fit.genotypes if target == "genotypes" else fit.environments
    proj = pts @ axis
    ideal = axis * proj.max()
    dist = np.linalg.norm(pts - ideal, axis=1)
    order = np.argsort(dist, kind="stable")
    radii = sorted(set(float(np.quantile(dist, q)) for q in (0.25, 0.5, 0.75, 1.0)))
    return {
        "axis": axis,
        "ideal": ideal,
        "distance": {labels[i]: float(dist[i]) for i in range(len(labels))},
        "order": [labels[i] for i in order],
        "circle_radii": radii,
    }


@dataclass
class BiplotGeometry:
    mode: str
    genotype_points: dict[str, list[float]]
    environment_points: dict[str, list[float]]
    axes: dict
    overlays: dict
    explained_variance: list[float]
    svp: float
    centering: str

    def to_json_dict(self):
        return {
            "mode": self.mode,
            "genotype_points": self.genotype_points,
            "environment_points": self.environment_points,
            "axes": self.axes,
            "overlays": self.overlays,
            "explained_variance": self.explained_variance,
            "svp": self.svp,
            "centering": self.centering,
        }


def biplot_geometry(fit: GgeFit, mode: str, svp: float | None = None) -> BiplotGeometry:
    """One BiplotGeometry document for any of the seven modes."""
    if mode not in MODES:
        raise ValueError(f"unknown biplot mode {mode!r}")
    f = DEFAULT_SVP[mode] if svp is None else svp
    geno, env = fit.coords(svp=f, n_axes=2)
    g_pts = {g: [float(v) for v in row] for g, row in zip(fit.genotypes, geno)}
    e_pts = {e: [float(v) for v in row] for e, row in zip(fit.environments, env)}
    axes = {}
    overlays = {}
    if mode != "pc_scatter":
        try:
            axis, mean_pt = mean_environment_axis(fit, svp=f)
            axes = {
                "mean_environment_axis": [float(v) for v in axis],
                "mean_environment_point": [float(v) for v in mean_pt],
            }
        except DegenerateAxisError:
            axes = {}
    if mode == "mean_vs_stability":
        ms = mean_vs_stability(fit, svp=f)
        overlays = {
            "projection": ms["projection"],
            "distance": ms["distance"],
            "ranking_by_projection": ms["ranking_by_projection"],
        }
    elif mode == "which_won_where":
        assignment, overlay = which_won_where(fit, svp=f)
        overlays = {
            "hull": assignment.hull,
            "hull_points": overlay["hull_points"],
            "sector_rays": overlay["sector_rays"],
            "winner_by_environment": assignment.winner_by_environment,
            "sector_of_environment": assignment.sector_of_environment,
        }
    elif mode == "discrim_vs_repr":
        overlays = discrimination_representativeness(fit, svp=f)["environments"]
    elif mode == "env_relationship":
        overlays = {"pairs": environment_relationship(fit, svp=f)}
    elif mode in ("ranking_genotypes", "ranking_environments"):
        target = "genotypes" if mode == "ranking_genotypes" else "environments"
        rk = ranking(fit, target=target, svp=f)
        overlays = {
            "ideal": [float(v) for v in rk["ideal"]],
            "distance": rk["distance"],
            "order": rk["order"],
            "circle_radii": rk["circle_radii"],
        }
    return BiplotGeometry(
        mode=mode,
        genotype_points=g_pts,
        environment_points=e_pts,
        axes=axes,
        overlays=overlays,
        explained_variance=[float(v) for v in fit.explained_variance[:2]],
        svp=f,
        centering=fit.centering,
    )
