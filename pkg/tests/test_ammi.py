import numpy as np
import pytest

from gxestat.ammi import (
    AxisOutOfRangeError,
    TooSmallError,
    ammi_biplot_data,
    fit_ammi,
    select_components,
)
from gxestat.data import Environment, TwoWayTable, two_way_means
from gxestat.stability import wricke


def make_table(values):
    values = np.asarray(values, dtype=float)
    g, e = values.shape
    return TwoWayTable(
        values=values,
        genotypes=tuple(f"g{i}" for i in range(g)),
        environments=tuple(Environment(f"e{j}") for j in range(e)),
        cell_counts=np.ones((g, e), dtype=int),
    )


def additive_table(g=5, e=4, seed=2):
    rng = np.random.default_rng(seed)
    return make_table(10.0 + rng.normal(size=g)[:, None] + rng.normal(size=e)[None, :])


def test_additive_table_all_zero():
    fit = fit_ammi(additive_table(), n_components=3)
    assert np.all(fit.singular_values < 1e-10)
    assert np.abs(fit.residual).max() < 1e-10


def test_full_rank_reconstruction(rng):
    values = rng.normal(50, 5, size=(5, 4))
    table = make_table(values)
    fit = fit_ammi(table, n_components=3)
    assert np.linalg.norm(fit.reconstruct() - values) <= 1e-9 * np.linalg.norm(values)
    assert np.abs(fit.residual).max() < 1e-9


def test_main_effects_centered(rng):
    fit = fit_ammi(make_table(rng.normal(size=(6, 5))), n_components=2)
    scale = max(1.0, abs(fit.grand_mean))
    assert abs(fit.genotype_effects.sum()) < 1e-9 * scale
    assert abs(fit.environment_effects.sum()) < 1e-9 * scale


def test_scores_orthonormal_and_centered(rng):
    fit = fit_ammi(make_table(rng.normal(size=(8, 6))), n_components=4)
    n = fit.n_components
    assert np.abs(fit.genotype_scores.T @ fit.genotype_scores - np.eye(n)).max() < 1e-10
    assert np.abs(fit.environment_scores.T @ fit.environment_scores - np.eye(n)).max() < 1e-10
    # singular vectors are orthogonal to the constant vector
    assert np.abs(fit.genotype_scores.sum(axis=0)).max() < 1e-9
    assert np.abs(fit.environment_scores.sum(axis=0)).max() < 1e-9


def test_singular_values_recover_interaction_ss(rng):
    table = make_table(rng.normal(size=(7, 5)))
    fit = fit_ammi(table, n_components=4)
    w = wricke(table)
    assert (fit.singular_values**2).sum() == pytest.approx(table.interaction_ss(), rel=1e-10)
    assert (fit.singular_values**2).sum() == pytest.approx(sum(w.values()), rel=1e-10)


def test_score_distance_equals_ecovalence_at_full_rank(rng):
    table = make_table(rng.normal(size=(6, 5)))
    fit = fit_ammi(table, n_components=4)
    w = wricke(table)
    scaled = fit.genotype_scores * fit.singular_values
    for i, g in enumerate(table.genotypes):
        assert (scaled[i] ** 2).sum() == pytest.approx(w[g], rel=1e-9)


def test_permutation_invariance(rng):
    values = rng.normal(size=(5, 4))
    fit = fit_ammi(make_table(values), n_components=2)
    perm = [3, 1, 0, 2, 4]
    table2 = make_table(values[perm])
    fit2 = fit_ammi(table2, n_components=2)
    assert np.allclose(np.abs(fit2.genotype_scores), np.abs(fit.genotype_scores[perm]), atol=1e-9)
    assert np.allclose(fit2.singular_values, fit.singular_values)


def test_gollob_df_in_anova(rng):
    table = make_table(rng.normal(size=(7, 5)))
    fit = fit_ammi(table, n_components=2, error_ms=1.0, error_df=100)
    rows = {r["source"]: r for r in fit.anova}
    assert rows["IPC1"]["df"] == 7 + 5 - 1 - 2
    assert rows["IPC2"]["df"] == 7 + 5 - 1 - 4
    assert "f" in rows["IPC1"] and 0 <= rows["IPC1"]["p"] <= 1


def test_too_small_table():
    with pytest.raises(TooSmallError):
        fit_ammi(make_table(np.ones((2, 5))), n_components=1)


def test_select_components_pure_noise_retains_zero(rng):
    noise = rng.normal(size=(8, 6))
    table = make_table(10.0 + noise)
    sel = select_components(table, alpha=0.05, n_boot=300, seed=99)
    assert sel.retained == 0


def test_select_components_planted_rank_one(rng):
    u = np.array([3.0, -1.0, -1.0, -1.0, 2.0, -2.0, 1.0, -1.0])
    v = np.array([2.0, -1.0, 1.5, -1.0, -1.0, -0.5])
    interaction = np.outer(u, v)
    table = make_table(20.0 + interaction + 0.02 * rng.normal(size=(8, 6)))
    sel = select_components(table, alpha=0.05, n_boot=300, seed=17)
    assert sel.retained == 1


def test_select_components_alpha_validation(rng):
    table = make_table(rng.normal(size=(5, 4)))
    for alpha in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ValueError):
            select_components(table, alpha=alpha, n_boot=10, seed=1)
    with pytest.raises(ValueError):
        select_components(table, alpha=0.05, n_boot=10, seed=None)


def test_selection_deterministic(rng):
    table = make_table(rng.normal(size=(6, 5)))
    a = select_components(table, alpha=0.05, n_boot=200, seed=5)
    b = select_components(table, alpha=0.05, n_boot=200, seed=5)
    assert a.p_values == b.p_values and a.retained == b.retained


def test_biplot_data_products_and_errors(rng):
    values = rng.normal(size=(6, 5))
    table = make_table(values)
    fit = fit_ammi(table, n_components=3)
    data = ammi_biplot_data(fit, axes=(0, 1))
    # symmetric scaling: dot products over the axes equal lambda-weighted score products
    for i, g in enumerate(table.genotypes):
        for j, e in enumerate(fit.environments):
            direct = sum(
                fit.singular_values[n] * fit.genotype_scores[i, n] * fit.environment_scores[j, n]
                for n in (0, 1)
            )
            assert data["interaction_sign"][g][e] == pytest.approx(direct, rel=1e-9, abs=1e-12)
    with pytest.raises(AxisOutOfRangeError):
        ammi_biplot_data(fit, axes=(0, 3))


def test_biplot_additive_all_origin():
    fit = fit_ammi(additive_table(), n_components=2)
    data = ammi_biplot_data(fit, axes=(0, 1))
    for pt in data["genotype_points"].values():
        assert abs(pt[0]) < 1e-6 and abs(pt[1]) < 1e-6


def test_oat_interaction_signs(oats):
    table = two_way_means(oats, environments="location")
    fit = fit_ammi(table, n_components=4)
    data = ammi_biplot_data(fit, axes=(0, 1))
    assert data["interaction_sign"]["G03"]["B1"] > 0
    assert data["interaction_sign"]["G13"]["B2"] > 0
    for env in ("B1", "B5", "B2"):
        assert data["interaction_sign"]["G05"][env] > 0


def test_watermelon_interaction_signs(watermelon):
    table = two_way_means(watermelon, environments="location")
    fit = fit_ammi(table, n_components=4)
    data = ammi_biplot_data(fit, axes=(0, 1))
    assert data["interaction_sign"]["Mickylee"]["KN"] > 0
    assert data["interaction_sign"]["Legacy"]["TX"] > 0
