import numpy as np
import pytest

from gxestat.data import (
    ColumnSchema,
    Environment,
    TrialDataset,
    TrialRecord,
    TwoWayTable,
    parse_csv,
    two_way_means,
)
from gxestat.stability import (
    CollinearIndexError,
    TooFewEnvironmentsError,
    TooFewGenotypesError,
    coefficient_of_variation,
    fit_stability_glm,
    kang_ys,
    lin_binns,
    regression_stability,
    shukla,
    stability_report,
    wricke,
)

SCHEMA = ColumnSchema(genotype="CLT", location="LC", trait="MY", year="YR", rep="RP")


def make_table(values, counts=None):
    values = np.asarray(values, dtype=float)
    g, e = values.shape
    return TwoWayTable(
        values=values,
        genotypes=tuple(f"g{i}" for i in range(g)),
        environments=tuple(Environment(f"e{j}") for j in range(e)),
        cell_counts=np.ones((g, e), dtype=int) if counts is None else counts,
    )


def additive_table(g=4, e=5, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=g)
    b = rng.normal(size=e)
    return make_table(10.0 + a[:, None] + b[None, :])


# --- Wricke ------------------------------------------------------------------


def test_wricke_additive_table_is_zero():
    w = wricke(additive_table())
    assert all(abs(v) < 1e-18 for v in w.values())


def test_wricke_matches_double_loop(rng):
    values = rng.normal(10, 3, size=(3, 3))
    table = make_table(values)
    w = wricke(table)
    gm = values.mean()
    rm = values.mean(axis=1)
    cm = values.mean(axis=0)
    for i, g in enumerate(table.genotypes):
        acc = 0.0
        for j in range(3):
            acc += (values[i, j] - rm[i] - cm[j] + gm) ** 2
        assert w[g] == pytest.approx(acc, rel=1e-12)


def test_wricke_sums_to_interaction_ss(rng):
    table = make_table(rng.normal(size=(6, 4)))
    w = wricke(table)
    assert sum(w.values()) == pytest.approx(table.interaction_ss(), rel=1e-12)


# --- Shukla ------------------------------------------------------------------


def test_shukla_matches_direct_formula(rng):
    values = rng.normal(20, 4, size=(4, 3))
    table = make_table(values)
    out = shukla(table, error_ms=1.0, error_df=30)
    w = wricke(table)
    sw = sum(w.values())
    G, E = 4, 3
    for g in table.genotypes:
        direct = (G * (G - 1) * w[g] - sw) / ((E - 1) * (G - 1) * (G - 2))
        assert out[g]["sigma2"] == pytest.approx(direct, rel=1e-10)


def test_shukla_additive_table_nonpositive():
    out = shukla(additive_table(), error_ms=1.0, error_df=10)
    # all ecovalences are zero, so every estimate collapses to the same
    # nonpositive value and nothing is clamped
    assert all(v["sigma2"] <= 1e-12 for v in out.values())


def test_shukla_rank_correlation_with_wricke(rng):
    table = make_table(rng.normal(size=(7, 5)))
    w = wricke(table)
    s = shukla(table, error_ms=1.0, error_df=50)
    worder = sorted(table.genotypes, key=lambda g: w[g])
    sorder = sorted(table.genotypes, key=lambda g: s[g]["sigma2"])
    assert worder == sorder


def test_shukla_needs_three_genotypes():
    with pytest.raises(TooFewGenotypesError):
        shukla(make_table(np.ones((2, 4))), error_ms=1.0, error_df=5)


def test_shukla_recombination_identity(rng):
    # sum of sigma2 equals the affine recombination of the ecovalences
    values = rng.normal(size=(6, 5))
    table = make_table(values)
    w = wricke(table)
    s = shukla(table, error_ms=1.0, error_df=50)
    G, E = 6, 5
    sw = sum(w.values())
    lhs = sum(v["sigma2"] for v in s.values())
    rhs = sw * G / ((G - 2) * (E - 1)) - G * sw / ((G - 1) * (G - 2) * (E - 1))
    assert lhs == pytest.approx(rhs, rel=1e-9)


# --- Kang --------------------------------------------------------------------


def test_kang_identical_genotypes_none_selected():
    table = make_table(np.full((4, 4), 7.0))
    sh = {g: {"sigma2": 0.0, "sigma2_p": 1.0} for g in table.genotypes}
    ys = kang_ys(table, sh, error_ms=1.0, error_df=40, obs_per_genotype=8)
    scores = [v["ys"] for v in ys.values()]
    assert len(set(scores)) == 1
    assert not any(v["selected"] for v in ys.values())


def test_kang_hand_executed_toy():
    # five genotypes, means 10/12/14/16/30, last one towers above the rest
    values = np.array([[10.0] * 4, [12.0] * 4, [14.0] * 4, [16.0] * 4, [30.0] * 4])
    table = make_table(values)
    sh = {g: {"sigma2": 0.0, "sigma2_p": 1.0} for g in table.genotypes}
    ys = kang_ys(table, sh, error_ms=8.0, error_df=40, obs_per_genotype=8)
    # grand mean 16.4; LSD = t(.975,40)*sqrt(2*8/8) = 2.021*2 = 4.04
    # hand ranks: g0..g4 -> 1..5; adjustments: -2,-2,-1,-1,+2
    assert ys["g0"]["ys"] == 1 - 2
    assert ys["g1"]["ys"] == 2 - 2
    assert ys["g2"]["ys"] == 3 - 1
    assert ys["g3"]["ys"] == 4 - 1
    assert ys["g4"]["ys"] == 5 + 2
    assert ys["g4"]["selected"]
    assert not ys["g0"]["selected"]


def test_kang_sigma_penalty():
    values = np.array([[10.0] * 4, [12.0] * 4, [14.0] * 4, [16.0] * 4, [30.0] * 4])
    table = make_table(values)
    sh = {g: {"sigma2": 0.0, "sigma2_p": 1.0} for g in table.genotypes}
    sh["g4"] = {"sigma2": 50.0, "sigma2_p": 0.004}  # significant at 0.01
    ys = kang_ys(table, sh, error_ms=8.0, error_df=40, obs_per_genotype=8)
    assert ys["g4"]["ys"] == 5 + 2 - 8


# --- CV and Lin-Binns ---------------------------------------------------------


def test_cv_constant_genotype_zero():
    csv = "YR,LC,RP,CLT,MY\n" + "".join(
        f"2009,{l},1,{g},{5.0 if g == 'a' else v}\n"
        for l, v in (("l1", 4.0), ("l2", 8.0))
        for g in ("a", "b")
    )
    ds = parse_csv(csv, SCHEMA)
    cv = coefficient_of_variation(ds)
    assert cv["a"] == pytest.approx(0.0, abs=1e-12)


def test_cv_two_point_arithmetic():
    csv = (
        "YR,LC,RP,CLT,MY\n"
        "2009,l1,1,a,8.0\n2009,l2,1,a,12.0\n"
        "2009,l1,1,b,1.0\n2009,l2,1,b,2.0\n"
    )
    cv = coefficient_of_variation(parse_csv(csv, SCHEMA))
    assert cv["a"] == pytest.approx(28.284, abs=1e-3)


def test_cv_matches_direct(watermelon):
    cv = coefficient_of_variation(watermelon)
    table = two_way_means(watermelon)
    for i, g in enumerate(table.genotypes):
        vals = table.values[i]
        direct = 100.0 * np.std(vals, ddof=1) / np.mean(vals)
        assert cv[g] == pytest.approx(direct, rel=1e-12)


def test_lin_binns_winner_is_zero():
    values = np.array([[9.0, 9.0], [5.0, 6.0]])
    p = lin_binns(make_table(values))
    assert p["g0"] == 0.0
    # trailing by d everywhere gives d^2/2
    assert p["g1"] == pytest.approx(((4.0**2) + (3.0**2)) / 4.0)


def test_lin_binns_constant_gap():
    values = np.array([[9.0, 9.0], [7.0, 7.0]])
    p = lin_binns(make_table(values))
    assert p["g1"] == pytest.approx(4.0 / 2.0)


def test_lin_binns_matches_brute_force(watermelon):
    table = two_way_means(watermelon, environments="location")
    p = lin_binns(table)
    best = table.values.max(axis=0)
    for i, g in enumerate(table.genotypes):
        acc = float(((table.values[i] - best) ** 2).sum()) / (2 * table.n_environments)
        assert p[g] == pytest.approx(acc, rel=1e-12)


# --- regression -----------------------------------------------------------


def test_regression_genotype_tracking_index():
    # one genotype's values equal the group means exactly -> slope 1, no deviation
    rng = np.random.default_rng(4)
    records = []
    envs = [("2009", f"l{j}") for j in range(5)]
    base = {e: 10.0 + 3.0 * j for j, e in enumerate(envs)}
    for j, (y, l) in enumerate(envs):
        for r in ("1", "2"):
            wob = rng.normal(0, 0.5)
            for g in ("a", "b", "c"):
                off = {"a": 0.0, "b": 1.0, "c": -1.0}[g]
                records.append(TrialRecord(y, l, r, g, base[(y, l)] + wob + off))
    ds = TrialDataset(records=tuple(records), trait_name="MY")
    reg = regression_stability(ds, "a", pooled_error_ms=1.0, pooled_error_df=20)
    assert reg.slope == pytest.approx(1.0, abs=1e-9)
    assert reg.deviation_ms == pytest.approx(0.0, abs=1e-16)


def test_regression_too_few_environments():
    csv = (
        "YR,LC,RP,CLT,MY\n"
        "2009,l1,1,a,1.0\n2009,l2,1,a,2.0\n"
        "2009,l1,1,b,2.0\n2009,l2,1,b,3.0\n"
        "2009,l1,1,c,3.0\n2009,l2,1,c,4.0\n"
    )
    ds = parse_csv(csv, SCHEMA)
    with pytest.raises(TooFewEnvironmentsError):
        regression_stability(ds, "a", pooled_error_ms=1.0, pooled_error_df=5)


def test_regression_collinear_index():
    records = []
    for l in ("l1", "l2", "l3"):
        for r in ("1", "2"):
            for g in ("a", "b"):
                records.append(TrialRecord("2009", l, r, g, 5.0 if g == "a" else -5.0 + 10.0))
    ds = TrialDataset(records=tuple(records), trait_name="MY")
    with pytest.raises(CollinearIndexError):
        regression_stability(ds, "a", pooled_error_ms=1.0, pooled_error_df=5)


def test_slope_sum_equals_genotype_count(watermelon):
    glm = fit_stability_glm(watermelon)
    total = 0.0
    for g in watermelon.genotypes:
        total += regression_stability(
            watermelon, g, pooled_error_ms=glm.error_ms, pooled_error_df=glm.residual_df
        ).slope
    assert total == pytest.approx(watermelon.n_genotypes, abs=1e-9)


# --- stability GLM ----------------------------------------------------------


def test_glm_no_year_reduction(oats):
    glm = fit_stability_glm(oats)
    assert set(glm.term_ss) == {"LC", "RP", "CLT", "CLT:LC"}


def test_glm_residual_matches_classical_anova():
    from gxestat.mixed_model import balanced_anova

    rng = np.random.default_rng(11)
    records = []
    for y in ("y0", "y1"):
        for l in ("l0", "l1", "l2"):
            for r in ("r0", "r1"):
                for g in ("g0", "g1", "g2"):
                    records.append(TrialRecord(y, l, r, g, float(rng.normal(10, 2))))
    ds = TrialDataset(records=tuple(records), trait_name="MY")
    glm = fit_stability_glm(ds)
    df_res, ss_res, _ = balanced_anova(ds)[1]
    assert glm.residual_df == df_res
    assert glm.residual_ss == pytest.approx(ss_res, rel=1e-9)


def test_glm_interaction_matches_wricke_sum(watermelon):
    glm = fit_stability_glm(watermelon)
    table = two_way_means(watermelon, environments="location")
    w = wricke(table)
    # cell means average the years and reps, so the record-level
    # interaction SS is (years * reps) times the ecovalence total
    assert glm.interaction_ss("CLT:LC") == pytest.approx(8.0 * sum(w.values()), rel=1e-9)


# --- report -----------------------------------------------------------------


def test_report_rows_and_order(watermelon):
    rep = stability_report(watermelon)
    assert [r["genotype"] for r in rep.rows] == list(watermelon.genotypes)
    assert len(rep.rows) == 10


def test_report_csv_round_trip(watermelon):
    import csv as csvmod
    import io

    rep = stability_report(watermelon)
    parsed = list(csvmod.DictReader(io.StringIO(rep.to_csv())))
    assert len(parsed) == len(rep.rows)
    for row, orig in zip(parsed, rep.rows):
        assert row["genotype"] == orig["genotype"]
        assert float(row["slope"]) == pytest.approx(orig["slope"], rel=1e-15)
        assert float(row["wricke_w2"]) == pytest.approx(orig["wricke_w2"], rel=1e-15)
        assert int(row["kang_ys"]) == orig["kang_ys"]


def test_report_additive_toy_all_stable():
    rng = np.random.default_rng(8)
    records = []
    a = {"g0": -1.0, "g1": 0.0, "g2": 1.0}
    b = {"l0": -2.0, "l1": 0.0, "l2": 2.0, "l3": 4.0}
    for l, belf in b.items():
        for r in ("r0", "r1", "r2"):
            wob = rng.normal(0, 0.01)
            for g, aeff in a.items():
                records.append(TrialRecord("y0", l, r, g, 20.0 + aeff + belf + wob + rng.normal(0, 0.05)))
    ds = TrialDataset(records=tuple(records), trait_name="MY")
    rep = stability_report(ds)
    for row in rep.rows:
        assert row["wricke_w2"] < 0.05
        assert row["sigma2_mark"] == "ns"
