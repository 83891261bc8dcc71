"""Construct the bundled demonstration datasets.

Both fixtures are synthetic multi-environment trials assembled from exact
orthogonal ANOVA strata, so every analysis the package performs lands on
prescribed values: variance components and likelihood-ratio p-values for
the melon trial, classical mean squares and F tests for the oat trial,
and the full per-genotype stability table (slopes, deviation mean
squares, stability variances, ecovalences, yield-stability scores).

Run from the repository root:  python scripts/build_fixture_datasets.py
"""
from __future__ import annotations

import io
import sys
import math
import json
from pathlib import Path

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize
from scipy import stats as sps

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "gxestat" / "datasets"

# ---------------------------------------------------------------------------
# Melon trial targets

GENOTYPES = [
    "CalhounGray",
    "CrimsonSweet",
    "EarlyCanada",
    "FiestaF1",
    "GeorgiaRattlesnake",
    "Legacy",
    "Mickylee",
    "Quetzali",
    "StarbriteF1",
    "SugarBaby",
]
LOCATIONS = ["KN", "TN", "FL", "TX", "CL"]
YEARS = ["2009", "2010"]
REPS = ["1", "2", "3", "4"]

# Per-genotype stability targets (slope, deviation MS, ecovalence W2,
# adjusted stability variance column) in GENOTYPES order.
SLOPE = np.array([1.301, 1.341, 0.249, 1.639, 0.945, 1.056, 0.618, 0.965, 1.388, 0.498])
DEV_MS = np.array([124.670, 1450.035, 686.251, 657.873, 220.063, 428.070, 705.481, 96.532, 221.137, 332.181])
W2 = np.array([279.747, 1488.636, 893.772, 1044.349, 250.518, 1003.097, 685.374, 348.425, 586.607, 928.836])
SSQUARES = np.array([15.761, 567.988, 285.370, 385.997, 44.863, 262.488, 195.126, 86.103, 78.371, 308.430])

# Case-1 variance component targets (residual-scale).
SIG = {
    "res": 327.53,
    "abc": 49.74,   # year x location x genotype
    "rp": 73.91,    # replicate within environment
    "yrlc": 57.81,  # year x location
    "clt": 111.68,  # genotype
    "lc": 699.36,   # location
}

G, L, Y, R = 10, 5, 2, 4
N = G * L * Y * R
MU = 140.0

# genotype main effects: strict mean order and LSD tier structure
CLT_BASE = np.array([10.5, -2.0, -6.5, 17.0, 5.0, 2.0, -4.5, -7.5, 31.0, -45.0])
# location effects pattern (KN, TN, FL, TX, CL), scaled later
LOC_BASE = np.array([28.0, -35.0, -20.0, 25.0, 2.0])

# +1 means the genotype's location-table regression deviates upward with
# location quality; signs chosen so the set sums to ~zero (exact balance
# comes from the ecovalence adjustment below).
B_SIGN = np.array([-1, -1, 1, 1, -1, -1, 1, 1, 1, -1], dtype=float)
#        Calhoun Crims Early Fiesta GaR Legacy Micky Quetz Starb Sugar


def derive_wtilde(ssq):
    """Invert the adjusted-stability-variance column to residual ecovalences."""
    e_, g_ = 5, 10
    denom = (g_ - 1) * (g_ - 2) * (e_ - 2)
    total = ssq.sum() * denom / (g_ * (g_ - 1) - g_)
    return (ssq + total / denom) * ((g_ - 2) * (e_ - 2)) / g_


def balance_b(w2, wt, l2, sign):
    """Nudge (W2, Wtilde) targets inside their tolerance so the slope
    deviations b_i = sign * sqrt((W2-Wt)/L2) sum exactly to zero."""
    x = w2 - wt
    b = sign * np.sqrt(x / l2)
    gap = b.sum()
    # capacity per genotype: how much x may move inside 0.05% statistic drift
    cap_w = np.minimum(0.001 * w2, 0.001 * (0.3125 * w2) / 0.3125) * 0.5
    cap_wt = 0.5 * 0.001 * np.minimum(wt, 2.4 * SSQUARES)
    cap_x = cap_w + cap_wt
    db_cap = cap_x / (2.0 * np.abs(b) * l2)
    need = -gap  # signed sum change wanted
    direction = np.sign(need) * sign  # +1: increase |b| on matching signs
    total_cap = db_cap.sum()
    if abs(need) > total_cap:
        raise RuntimeError(f"cannot balance slope deviations: need {need}, cap {total_cap}")
    frac = abs(need) / total_cap
    dx = direction * frac * cap_x
    x2 = x + dx
    b2 = sign * np.sqrt(x2 / l2)
    # final exact trim on the largest-capacity genotype
    k = int(np.argmax(db_cap))
    resid = b2.sum() - b2[k]
    b2[k] = -resid
    x2[k] = (b2[k] ** 2) * l2
    dw = (x2 - x) * cap_w / np.maximum(cap_x, 1e-12)
    w2_use = w2 + dw
    wt_use = w2_use - x2
    assert abs((np.sign(b2) * np.sqrt((w2_use - wt_use) / l2)).sum()) < 1e-12
    return w2_use, wt_use, b2


def orthonormal_complement(l_vec):
    """Orthonormal basis of {v in R^5 : sum v = 0, v . L = 0}."""
    a = np.vstack([np.ones(5), l_vec])
    return null_space(a)  # 5 x 3


def solve_t_matrix(wt_use, l_vec, bias, seed, iters=4000):
    """Rows in the 3-space orthogonal to {1, L}, exact row norms, zero
    column sums; initialized toward per-genotype bias directions."""
    basis = orthonormal_complement(l_vec)  # 5x3
    rng = np.random.default_rng(seed)
    coef = bias @ basis + 0.35 * rng.standard_normal((G, 3))
    t = coef @ basis.T
    norms = np.sqrt(wt_use)
    for _ in range(iters):
        t = t - t.mean(axis=0, keepdims=True)  # zero column sums
        t = t @ basis @ basis.T                # stay inside the row space
        rn = np.linalg.norm(t, axis=1)
        t = t * (norms / np.maximum(rn, 1e-12))[:, None]
        if np.abs(t.mean(axis=0)).max() < 1e-13:
            break
    t = t - t.mean(axis=0, keepdims=True)
    t = t @ basis @ basis.T
    # final exact norm restore keeps column sums within float noise
    rn = np.linalg.norm(t, axis=1)
    t = t * (norms / np.maximum(rn, 1e-12))[:, None]
    if np.abs(t.mean(axis=0)).max() > 1e-9:
        raise RuntimeError("T matrix projections did not converge")
    return t


def rp_effects(ms_rp, seed):
    """Replicate wobble: zero sum within every environment, zero overall
    rep-main pattern, exact total energy 3*MS_rp."""
    rng = np.random.default_rng(seed)
    p = rng.standard_normal((Y, L, R))
    p -= p.mean(axis=2, keepdims=True)
    rep_main = p.mean(axis=(0, 1))
    p -= rep_main[None, None, :]
    p -= p.mean(axis=2, keepdims=True)
    total = 3.0 * ms_rp
    p *= math.sqrt(total / (p**2).sum())
    return p


def genotype_noise_space(rp):
    """Basis of the per-genotype noise space: zero sums in every
    environment cell, orthogonal to the replicate wobble and to the three
    rep-main contrasts.  40 observations -> 26 dimensions."""
    rows = []
    for y in range(Y):
        for l in range(L):
            v = np.zeros((Y, L, R))
            v[y, l, :] = 1.0
            rows.append(v.ravel())
    rows.append(rp.ravel())
    for r in range(1, R):
        v = np.zeros((Y, L, R))
        v[:, :, 0] = 1.0
        v[:, :, r] = -1.0
        rows.append(v.ravel())
    return null_space(np.vstack(rows))  # 40 x 26


def eta_matrix(sigma2, basis, seed):
    """Per-genotype noise with exact residual mean squares, genotype sum zero."""
    rng = np.random.default_rng(seed)
    dim = basis.shape[1]
    v = rng.standard_normal((G, dim))
    target = np.sqrt(26.0 * sigma2)
    for _ in range(500):
        v -= v.mean(axis=0, keepdims=True)
        v *= (target / np.maximum(np.linalg.norm(v, axis=1), 1e-12))[:, None]
        if np.abs(v.sum(axis=0)).max() < 1e-11 * target.max():
            break
    v -= v.mean(axis=0, keepdims=True)
    return v @ basis.T  # G x 40


def solve_sigma_allocation(s_wobble, ss_res, c_off):
    """Per-genotype Eq-4.1 residual variances meeting the slope-mark
    constraints; remainder absorbed by the least constrained genotype."""
    t95, t99, t999 = 2.0555294, 2.7787145, 3.7066274
    lo = np.zeros(G)
    hi = np.full(G, np.inf)
    absc = np.abs(c_off)
    for i in range(G):
        if GENOTYPES[i] in ("EarlyCanada", "SugarBaby"):
            lo[i] = s_wobble * (absc[i] / t999) ** 2 * 1.12
            hi[i] = s_wobble * (absc[i] / t99) ** 2 * 0.88
        else:
            lo[i] = s_wobble * (absc[i] / t95) ** 2 * 1.15
    total = (ss_res - s_wobble * (c_off**2).sum()) / 26.0
    sig = np.where(np.isfinite(hi), 0.5 * (lo + hi), np.maximum(lo * 1.6, 150.0))
    free = [i for i in range(G) if not np.isfinite(hi[i])]
    spare = total - sig.sum()
    # distribute the remainder over free genotypes, keeping every bound
    add = spare / len(free)
    for i in free:
        sig[i] += add
    if np.any(sig < lo) or np.any(sig > hi):
        raise RuntimeError("variance allocation violates slope-mark bounds")
    assert abs(sig.sum() - total) < 1e-8
    return sig


def measure_genotype(yj, tvals, env_idx, rep_idx):
    """Slope, its SE, and the deviation mean square from the grouped fit."""
    n = len(yj)
    env_block = np.zeros((n, Y * L - 1))
    rep_block = np.zeros((n, R - 1))
    for i in range(n):
        if env_idx[i] > 0:
            env_block[i, env_idx[i] - 1] = 1.0
        if rep_idx[i] > 0:
            rep_block[i, rep_idx[i] - 1] = 1.0
    x_full = np.column_stack([np.ones(n), tvals, env_block, rep_block])
    x_base = np.column_stack([np.ones(n), tvals])
    x_env = np.column_stack([x_base, env_block])

    def rss(x):
        beta, res, *_ = np.linalg.lstsq(x, yj, rcond=None)
        r = yj - x @ beta
        return float(r @ r), beta

    rss_base, _ = rss(x_base)
    rss_env, _ = rss(x_env)
    rss_full, beta_full = rss(x_full)
    dev_ms = (rss_base - rss_env) / ((Y * L - 2) * R)
    sigma2 = rss_full / (n - x_full.shape[1])
    xtx_inv = np.linalg.inv(x_full.T @ x_full)
    se = math.sqrt(sigma2 * xtx_inv[1, 1])
    return float(beta_full[1]), se, float(dev_ms), sigma2


# ---------------------------------------------------------------------------
# Balanced-strata likelihood (independent check of the package REML)

W_STRATA = {
    # name: (df, lambda contributions as {term: coeff}), coeff = N / levels(term)
    "yr": (1, {"yr": 200, "yrlc": 40, "yrclt": 20, "abc": 4, "rp": 10}),
    "lc": (4, {"lc": 80, "yrlc": 40, "lcclt": 8, "abc": 4, "rp": 10}),
    "clt": (9, {"clt": 40, "yrclt": 20, "lcclt": 8, "abc": 4}),
    "yrlc": (4, {"yrlc": 40, "abc": 4, "rp": 10}),
    "yrclt": (9, {"yrclt": 20, "abc": 4}),
    "lcclt": (36, {"lcclt": 8, "abc": 4}),
    "abc": (36, {"abc": 4}),
    "rp": (30, {"rp": 10}),
    "res": (270, {}),
}
W_TERMS = ["yr", "lc", "clt", "yrlc", "yrclt", "lcclt", "abc", "rp"]
GRAND_COEF = {"yr": 200, "lc": 80, "clt": 40, "yrlc": 40, "yrclt": 20, "lcclt": 8, "abc": 4, "rp": 10}


def strata_neg2ll(params, ss, terms, method):
    sig2 = params[0]
    comp = dict(zip(terms, params[1:]))
    val = 0.0
    for name, (df, contrib) in W_STRATA.items():
        lam = sig2 + sum(c * comp.get(t, 0.0) for t, c in contrib.items())
        if lam <= 0:
            return 1e12
        val += df * math.log(lam) + ss[name] / lam
    if method == "ML":
        lam_g = sig2 + sum(c * comp.get(t, 0.0) for t, c in GRAND_COEF.items())
        if lam_g <= 0:
            return 1e12
        val += math.log(lam_g)
    return val


def strata_fit(ss, terms, method="REML", start=None):
    k = len(terms)
    x0 = np.array([ss["res"] / 270] + [50.0] * k) if start is None else np.asarray(start)
    res = minimize(
        strata_neg2ll,
        x0,
        args=(ss, terms, method),
        method="L-BFGS-B",
        bounds=[(1e-8, None)] + [(0.0, None)] * k,
        options={"maxiter": 20000, "ftol": 1e-16, "gtol": 1e-14},
    )
    best = res
    for mult in (0.5, 2.0):
        res2 = minimize(
            strata_neg2ll,
            np.maximum(res.x * mult, 1e-6),
            args=(ss, terms, method),
            method="L-BFGS-B",
            bounds=[(1e-8, None)] + [(0.0, None)] * k,
            options={"maxiter": 20000, "ftol": 1e-16, "gtol": 1e-14},
        )
        if res2.fun < best.fun:
            best = res2
    x = np.maximum(best.x, 0.0)
    return x, strata_neg2ll(x, ss, terms, method)


def lrt_pvalues(ss):
    """Maximum-likelihood LRT p-value per random term plus REML components."""
    full_reml, _ = strata_fit(ss, W_TERMS, "REML")
    start_ml = full_reml.copy()
    _, crit_full = strata_fit(ss, W_TERMS, "ML", start=start_ml)
    pvals = {}
    for i, t in enumerate(W_TERMS):
        terms_red = [u for u in W_TERMS if u != t]
        start = np.delete(start_ml, i + 1)
        _, crit_red = strata_fit(ss, terms_red, "ML", start=start)
        stat = max(0.0, crit_red - crit_full)
        pvals[t] = 1.0 if stat <= 1e-10 else float(sps.chi2.sf(stat, 1))
    comps = dict(zip(["res"] + W_TERMS, full_reml))
    return comps, pvals


# ---------------------------------------------------------------------------


def build_melon(seed_t=11, seed_d=7, seed_rp=3, seed_eta=19, m_yrlc=0.981, m_rp=0.981, m_lc=1.019):
    sig = dict(SIG)
    sig["yrlc"] = SIG["yrlc"] * m_yrlc
    sig["rp"] = SIG["rp"] * m_rp
    sig["lc"] = SIG["lc"] * m_lc
    ms_res = sig["res"]
    ms_abc = ms_res + 4 * sig["abc"]
    ms_rp = ms_res + 10 * sig["rp"]
    ms_yrlc = ms_res + 4 * sig["abc"] + 10 * sig["rp"] + 40 * sig["yrlc"]

    wt = derive_wtilde(SSQUARES)
    sum_w = W2.sum()
    ms_lcclt = 8.0 * sum_w / 36.0
    ms_lc = 80 * sig["lc"] + ms_lcclt + ms_yrlc - ms_abc
    l2 = ms_lc / 20.0
    w2_use, wt_use, b = balance_b(W2, wt, l2, B_SIGN)
    # one refinement: sum W changed a whisker, recompute the location scale
    ms_lcclt = 8.0 * w2_use.sum() / 36.0
    ms_lc = 80 * sig["lc"] + ms_lcclt + ms_yrlc - ms_abc
    l2 = ms_lc / 20.0
    w2_use, wt_use, b = balance_b(W2, wt, l2, B_SIGN)

    loc = LOC_BASE * math.sqrt(l2 / (LOC_BASE**2).sum())

    # direction bias for the interaction rows (which-won-where and
    # interaction-sign choreography)
    bias = np.zeros((G, 5))
    bias[GENOTYPES.index("Mickylee"), LOCATIONS.index("KN")] = 9.0
    bias[GENOTYPES.index("Legacy"), LOCATIONS.index("TX")] = 11.0
    bias[GENOTYPES.index("StarbriteF1"), LOCATIONS.index("FL")] = 4.0
    bias[GENOTYPES.index("StarbriteF1"), LOCATIONS.index("CL")] = 3.0
    bias[GENOTYPES.index("FiestaF1"), LOCATIONS.index("FL")] = -5.0
    bias[GENOTYPES.index("CalhounGray"), LOCATIONS.index("TN")] = 8.0
    t_mat = solve_t_matrix(wt_use, loc, bias, seed_t)
    gamma = np.outer(b, loc) + t_mat

    rp = rp_effects(ms_rp, seed_rp)
    s_wobble = float((rp**2).sum())
    c_off = SLOPE - 1.0

    # year and year-location structure (rebuilt once the 3-way energy is known)
    rng_v = np.random.default_rng(seed_d + 100)
    v_raw = rng_v.standard_normal(L)
    v_raw -= v_raw.mean()
    v = v_raw * math.sqrt((ms_yrlc / 20.0) / (v_raw**2).sum())

    # initial antisymmetric per-genotype patterns: each row mixes a
    # location-constant channel and a location-centered channel with a
    # global mix fraction phi; the raw rows are never centered directly,
    # so scaling them cannot leak energy between the channels.
    rng_d = np.random.default_rng(seed_d)
    dev_target = DEV_MS.copy()
    d_energy = np.maximum(4.0 * dev_target - wt_use - 40.0, 15.0)
    a_dirs = rng_d.standard_normal((G, 5))
    a_dirs -= a_dirs.mean(axis=1, keepdims=True)
    a_dirs /= np.linalg.norm(a_dirs, axis=1, keepdims=True)
    s_signs = np.where(rng_d.standard_normal(G) >= 0, 1.0, -1.0)

    sum_dtilde_target = 4.5 * ms_abc

    env_idx = np.zeros(N // G, dtype=int)
    rep_idx = np.zeros(N // G, dtype=int)
    pos = 0
    for y in range(Y):
        for l in range(L):
            for r in range(R):
                env_idx[pos] = y * L + l
                rep_idx[pos] = r
                pos += 1

    def assemble_structure(d_cur, e_yr):
        # per-genotype 40-vector in (y, l, r) order; noise excluded
        base = np.zeros((G, Y, L, R))
        for y in range(Y):
            ysign = 1.0 if y == 0 else -1.0
            for l in range(L):
                cell = (
                    MU
                    + e_yr * ysign
                    + loc[l]
                    + v[l] * ysign
                    + CLT_BASE_SCALED[:, 0]
                    + gamma[:, l]
                    + ysign * d_cur[:, l]
                )
                base[:, y, l, :] = cell[:, None]
        wob = np.broadcast_to(rp[None, :, :, :], (G, Y, L, R))
        return base + wob  # slope offsets added separately

    # genotype main effects need the 3-way/2-way energies for their scale;
    # placeholder, rescaled inside the loop
    CLT_BASE_SCALED = CLT_BASE.reshape(-1, 1).copy()

    def rows_from(e_vec, phi):
        raw = (
            np.sqrt((1.0 - phi) * e_vec / 5.0)[:, None] * s_signs[:, None]
            + np.sqrt(phi * e_vec)[:, None] * a_dirs
        )
        return raw - raw.mean(axis=0, keepdims=True)

    def measure_devs(d_eff):
        ms_yrclt_cur = 40.0 * (d_eff.mean(axis=1) ** 2).sum() / 9.0
        e_yr = math.sqrt(max(ms_yrclt_cur + ms_yrlc - ms_abc, 1.0) / 400.0)
        struct = assemble_structure(d_eff, e_yr)
        flat = struct.reshape(G, -1)
        tvals = flat.mean(axis=0)
        yfit = flat + np.outer(c_off, rp.ravel())
        return np.array(
            [measure_genotype(yfit[j], tvals, env_idx, rep_idx)[2] for j in range(G)]
        )

    e_vec = d_energy.copy()
    phi = 0.2
    converged = False
    for sweep in range(400):
        d_mat = rows_from(e_vec, phi)
        err = measure_devs(d_mat) - dev_target
        dtilde = d_mat - d_mat.mean(axis=1, keepdims=True)
        split_gap = (dtilde**2).sum() / sum_dtilde_target - 1.0
        if np.abs(err).max() < 1e-9 and abs(split_gap) < 1e-6:
            converged = True
            break
        e_vec = np.maximum(e_vec - 4.5 * err, 0.5)
        phi = min(max(phi * (1.0 + split_gap) ** -0.5, 0.02), 0.95)
    if not converged:
        raise RuntimeError(
            f"deviation targets did not converge: err {np.abs(err).max():.3e}, split {split_gap:.3e}"
        )

    dbar = d_mat.mean(axis=1)
    ms_yrclt = 40.0 * (dbar**2).sum() / 9.0
    ms_clt = 40 * sig["clt"] + ms_lcclt + ms_yrclt - ms_abc
    target_c2 = 9.0 * ms_clt / 40.0
    base = CLT_BASE.copy()
    lo_, hi_ = -6.0, 60.0
    for _ in range(100):
        dmid = 0.5 * (lo_ + hi_)
        trial = base.copy()
        trial[8] += dmid  # StarbriteF1
        trial[9] -= dmid  # SugarBaby
        if (trial**2).sum() < target_c2:
            lo_ = dmid
        else:
            hi_ = dmid
    base[8] += 0.5 * (lo_ + hi_)
    base[9] -= 0.5 * (lo_ + hi_)
    CLT_BASE_SCALED = base.reshape(-1, 1)
    clt = base
    ss_res_target = 270.0 * ms_res
    sigma2 = solve_sigma_allocation(s_wobble, ss_res_target, c_off)
    basis = genotype_noise_space(rp)
    eta = eta_matrix(sigma2, basis, seed_eta)

    cube = np.zeros((Y, L, G, R))
    struct = assemble_structure(d_mat, math.sqrt((ms_yrclt + ms_yrlc - ms_abc) / 400.0))
    for j in range(G):
        yj = struct[j].ravel() + c_off[j] * rp.ravel() + eta[j]
        cube[:, :, j, :] = yj.reshape(Y, L, R)
    return {
        "cube": cube,
        "loc": loc,
        "clt": clt,
        "gamma": gamma,
        "b": b,
        "w2_use": w2_use,
        "wt_use": wt_use,
        "sigma2": sigma2,
        "ms": {
            "res": ms_res,
            "abc": ms_abc,
            "rp": ms_rp,
            "yrlc": ms_yrlc,
            "lcclt": ms_lcclt,
            "yrclt": ms_yrclt,
            "lc": ms_lc,
        },
    }


def melon_strata_ss(cube):
    """Exact stratum sums of squares of the assembled (Y, L, G, R) cube."""
    grand = cube.mean()

    def eff(axes_keep):
        m = cube.mean(axis=tuple(a for a in range(4) if a not in axes_keep))
        return m

    m_y = eff([0]) - grand
    m_l = eff([1]) - grand
    m_c = eff([2]) - grand
    m_yl = eff([0, 1]) - grand - m_y[:, None] - m_l[None, :]
    m_yc = eff([0, 2]) - grand - m_y[:, None] - m_c[None, :]
    m_lc = eff([1, 2]) - grand - m_l[:, None] - m_c[None, :]
    m_ylc = (
        eff([0, 1, 2])
        - grand
        - m_y[:, None, None]
        - m_l[None, :, None]
        - m_c[None, None, :]
        - m_yl[:, :, None]
        - m_yc[:, None, :]
        - m_lc[None, :, :]
    )
    g_ylr = cube.mean(axis=2)
    g_yl = cube.mean(axis=(2, 3))
    rp_eff = g_ylr - g_yl[:, :, None]
    ss = {
        "yr": float(L * G * R * (m_y**2).sum()),
        "lc": float(Y * G * R * (m_l**2).sum()),
        "clt": float(Y * L * R * (m_c**2).sum()),
        "yrlc": float(G * R * (m_yl**2).sum()),
        "yrclt": float(L * R * (m_yc**2).sum()),
        "lcclt": float(Y * R * (m_lc**2).sum()),
        "abc": float(R * (m_ylc**2).sum()),
        "rp": float(G * (rp_eff**2).sum()),
    }
    total = float(((cube - grand) ** 2).sum())
    ss["res"] = total - sum(ss.values())
    return ss


def verify_melon(built):
    cube = built["cube"]
    ss = melon_strata_ss(cube)
    report = {"strata_ms": {k: ss[k] / W_STRATA[k][0] for k in ss}}

    # location-table statistics
    table = cube.mean(axis=(0, 3)).T  # G x L
    inter = table - table.mean(axis=1, keepdims=True) - table.mean(axis=0, keepdims=True) + table.mean()
    w2 = (inter**2).sum(axis=1)
    sw = w2.sum()
    sigma2 = (G * (G - 1) * w2 - sw) / ((5 - 1) * (G - 1) * (G - 2))
    idx = table.mean(axis=0) - table.mean()
    slopes_loc = inter @ idx / (idx**2).sum()
    resid = inter - np.outer(slopes_loc, idx)
    wtil = (resid**2).sum(axis=1)
    swt = wtil.sum()
    ssq = (G * (G - 1) * wtil - swt) / ((5 - 2) * (G - 1) * (G - 2))
    report["w2_rel_err"] = float(np.abs(w2 - W2).max() / W2.min())
    report["w2_max_rel"] = float(np.max(np.abs(w2 - W2) / W2))
    report["sigma2_max_rel"] = float(
        np.max(np.abs(sigma2 - (G * (G - 1) * W2 - W2.sum()) / 288.0) / np.abs(sigma2))
    )
    report["ssq_max_rel"] = float(np.max(np.abs(ssq - SSQUARES) / SSQUARES))

    # per-genotype regression statistics
    flat = np.transpose(cube, (2, 0, 1, 3)).reshape(G, -1)
    tvals = flat.mean(axis=0)
    env_idx = np.zeros(N // G, dtype=int)
    rep_idx = np.zeros(N // G, dtype=int)
    pos = 0
    for y in range(Y):
        for l in range(L):
            for r in range(R):
                env_idx[pos] = y * L + l
                rep_idx[pos] = r
                pos += 1
    slopes = np.zeros(G)
    devs = np.zeros(G)
    tstats = np.zeros(G)
    for j in range(G):
        sl, se, dev, _ = measure_genotype(flat[j], tvals, env_idx, rep_idx)
        slopes[j] = sl
        devs[j] = dev
        tstats[j] = (sl - 1.0) / se
    report["slope_err"] = float(np.abs(slopes - SLOPE).max())
    report["dev_err"] = float(np.abs(devs - DEV_MS).max())
    report["tstats"] = {g: float(t) for g, t in zip(GENOTYPES, tstats)}

    comps, pvals = lrt_pvalues(ss)
    report["reml"] = comps
    report["lrt_p"] = pvals

    # biplot geometry checks on the location table
    yc = table - table.mean(axis=0, keepdims=True)
    u, s, vt = np.linalg.svd(yc, full_matrices=False)
    g2 = u[:, :2] * np.sqrt(s[:2])
    e2 = vt[:2].T * np.sqrt(s[:2])
    winners = {}
    for l, name in enumerate(LOCATIONS):
        winners[name] = GENOTYPES[int(np.argmax((u[:, :2] * s[:2]) @ vt[:2, l]))]
    report["gge_winners"] = winners

    ui, si, vti = np.linalg.svd(inter, full_matrices=False)
    p2 = (ui[:, :2] * si[:2]) @ vti[:2]
    report["ammi_sign_micky_kn"] = float(p2[GENOTYPES.index("Mickylee"), LOCATIONS.index("KN")])
    report["ammi_sign_legacy_tx"] = float(p2[GENOTYPES.index("Legacy"), LOCATIONS.index("TX")])
    report["min_value"] = float(cube.min())
    return report


# ---------------------------------------------------------------------------
# Oat trial

OAT_ENVS = [f"B{i}" for i in range(1, 7)]
OAT_GENS = [f"G{i:02d}" for i in range(1, 25)]
OG, OL, OR = 24, 6, 5
OAT_MS = {"lcclt": 0.411, "clt": 0.554, "lc": 0.334}
OAT_MS_RES = 0.554 / 3.547
OAT_MS_RP = 0.334 / 2.856
OAT_MU = 2.5


def build_oats(seed=23):
    rng = np.random.default_rng(seed)
    ss_lc = 5 * OAT_MS["lc"]
    ss_clt = 23 * OAT_MS["clt"]
    ss_lcclt = 115 * OAT_MS["lcclt"]
    ss_rp = 24 * OAT_MS_RP
    ss_res = 552 * OAT_MS_RES

    l_eff = rng.standard_normal(OL)
    l_eff -= l_eff.mean()
    l_eff *= math.sqrt((ss_lc / (OG * OR)) / (l_eff**2).sum())

    c_eff = rng.standard_normal(OG)
    c_eff -= c_eff.mean()
    c_eff *= math.sqrt((ss_clt / (OL * OR)) / (c_eff**2).sum())

    # interaction with planted leading structure
    def centered_unit(v):
        v = v - v.mean()
        return v / np.linalg.norm(v)

    u1 = np.full(OG, -0.12)
    u1[OAT_GENS.index("G03")] = 0.55
    u1[OAT_GENS.index("G05")] = 0.80
    u1 = centered_unit(u1 + 0.05 * rng.standard_normal(OG))
    v1 = np.array([0.65, 0.35, -0.3, -0.45, 0.42, -0.35])  # B1..B6
    v1 = centered_unit(v1)
    u2 = np.full(OG, -0.05)
    u2[OAT_GENS.index("G13")] = 0.85
    u2 = u2 - (u2 @ u1) * u1
    u2 = centered_unit(u2 + 0.03 * rng.standard_normal(OG))
    u2 = u2 - (u2 @ u1) * u1
    u2 /= np.linalg.norm(u2)
    v2 = np.array([0.1, 0.8, -0.3, -0.2, -0.05, -0.35])
    v2 = v2 - (v2 @ v1) * v1
    v2 = centered_unit(v2)
    v2 = v2 - (v2 @ v1) * v1
    v2 /= np.linalg.norm(v2)

    total_inter = ss_lcclt / OR
    r1 = math.sqrt(0.52 * total_inter)
    r2 = math.sqrt(0.34 * total_inter)
    tail = rng.standard_normal((OG, OL))
    tail -= tail.mean(axis=0, keepdims=True)
    tail -= tail.mean(axis=1, keepdims=True)
    for uu, vv in ((u1, v1), (u2, v2)):
        tail -= np.outer(uu, uu @ tail)
        tail -= np.outer((tail @ vv), vv)
    tail *= math.sqrt((total_inter - r1**2 - r2**2) / (tail**2).sum())
    gamma = r1 * np.outer(u1, v1) + r2 * np.outer(u2, v2) + tail

    blocks = rng.standard_normal((OL, OR))
    blocks -= blocks.mean(axis=1, keepdims=True)
    blocks *= math.sqrt((ss_rp / OG) / (blocks**2).sum())

    eps = rng.standard_normal((OL, OG, OR))
    eps -= eps.mean(axis=1, keepdims=True)
    eps -= eps.mean(axis=2, keepdims=True)
    eps *= math.sqrt(ss_res / (eps**2).sum())

    cube = np.zeros((OL, OG, OR))
    for l in range(OL):
        for c in range(OG):
            cube[l, c, :] = OAT_MU + l_eff[l] + c_eff[c] + gamma[c, l] + blocks[l] + eps[l, c]
    return {"cube": cube, "gamma": gamma, "l_eff": l_eff, "c_eff": c_eff}


def verify_oats(built):
    cube = built["cube"]
    grand = cube.mean()
    m_l = cube.mean(axis=(1, 2)) - grand
    m_c = cube.mean(axis=(0, 2)) - grand
    m_lc = cube.mean(axis=2) - grand - m_l[:, None] - m_c[None, :]
    blocks = cube.mean(axis=1) - cube.mean(axis=(1, 2))[:, None]
    ss_lc = OG * OR * (m_l**2).sum()
    ss_clt = OL * OR * (m_c**2).sum()
    ss_lcclt = OR * (m_lc**2).sum()
    ss_rp = OG * (blocks**2).sum()
    total = ((cube - grand) ** 2).sum()
    ss_res = total - ss_lc - ss_clt - ss_lcclt - ss_rp
    ms = {
        "lc": ss_lc / 5,
        "clt": ss_clt / 23,
        "lcclt": ss_lcclt / 115,
        "rp": ss_rp / 24,
        "res": ss_res / 552,
    }
    f_lc = ms["lc"] / ms["rp"]
    f_clt = ms["clt"] / ms["res"]
    f_lcclt = ms["lcclt"] / ms["res"]
    inter = m_lc.T  # G x L orientation
    u, s, vt = np.linalg.svd(inter, full_matrices=False)
    p2 = (u[:, :2] * s[:2]) @ vt[:2]
    checks = {
        "ms": ms,
        "f": {"lc": f_lc, "clt": f_clt, "lcclt": f_lcclt},
        "p_lc": float(sps.f.sf(f_lc, 5, 24)),
        "signs": {
            "G03_B1": float(p2[OAT_GENS.index("G03"), OAT_ENVS.index("B1")]),
            "G13_B2": float(p2[OAT_GENS.index("G13"), OAT_ENVS.index("B2")]),
            "G05_B1": float(p2[OAT_GENS.index("G05"), OAT_ENVS.index("B1")]),
            "G05_B5": float(p2[OAT_GENS.index("G05"), OAT_ENVS.index("B5")]),
            "G05_B2": float(p2[OAT_GENS.index("G05"), OAT_ENVS.index("B2")]),
        },
        "min_value": float(cube.min()),
    }
    return checks


# ---------------------------------------------------------------------------


def write_melon_csv(cube, path):
    lines = ["YR,LC,RP,CLT,MY"]
    for y, year in enumerate(YEARS):
        for l, loc in enumerate(LOCATIONS):
            for r, rep in enumerate(REPS):
                for c, gen in enumerate(GENOTYPES):
                    lines.append(f"{year},{loc},{rep},{gen},{cube[y, l, c, r]:.6f}")
    path.write_text("\n".join(lines) + "\n")


def write_oats_csv(cube, path):
    lines = ["LC,RP,CLT,MY"]
    for l, env in enumerate(OAT_ENVS):
        for r in range(OR):
            for c, gen in enumerate(OAT_GENS):
                lines.append(f"{env},{r + 1},{gen},{cube[l, c, r]:.6f}")
    path.write_text("\n".join(lines) + "\n")


def main():
    best = None
    for seed_t in (11, 13, 17, 29, 41, 57, 71, 93):
        built = build_melon(seed_t=seed_t)
        rep = verify_melon(built)
        ok_geo = (
            all(rep["gge_winners"][e] == "StarbriteF1" for e in ("FL", "TX", "CL", "KN"))
            and rep["ammi_sign_micky_kn"] > 0
            and rep["ammi_sign_legacy_tx"] > 0
        )
        print(f"seed_t={seed_t} winners={rep['gge_winners']} "
              f"micky_kn={rep['ammi_sign_micky_kn']:.2f} legacy_tx={rep['ammi_sign_legacy_tx']:.2f} "
              f"dev_err={rep['dev_err']:.2e} slope_err={rep['slope_err']:.2e} min={rep['min_value']:.1f}")
        if ok_geo:
            best = (built, rep)
            break
    if best is None:
        raise SystemExit("no seed satisfied the geometry requirements")
    built, rep = best
    print(json.dumps({k: v for k, v in rep.items() if k not in ("tstats",)}, indent=2, default=str))

    oats = build_oats()
    orep = verify_oats(oats)
    print(json.dumps(orep, indent=2))

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    write_melon_csv(built["cube"], OUT_DIR / "watermelon.csv")
    write_oats_csv(oats["cube"], OUT_DIR / "oats.csv")
    print("fixtures written to", OUT_DIR)


if __name__ == "__main__":
    main()
