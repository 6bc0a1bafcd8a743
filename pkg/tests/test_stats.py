import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from guessbench import stats
from guessbench.agents import Cell

samples = st.lists(st.integers(0, 100), min_size=1, max_size=40)


def _pair(seed, n1=40, n2=55, scale=(10, 20)):
    rng = np.random.default_rng(seed)
    return rng.normal(30, scale[0], n1).round(), rng.normal(25, scale[1], n2).round()


@pytest.mark.parametrize("seed", range(5))
def test_skewness_matches_scipy(seed):
    a, _ = _pair(seed)
    assert stats.skewness(a) == pytest.approx(sps.skew(a, bias=False), rel=1e-12)


@pytest.mark.parametrize("center", ["mean", "median"])
@pytest.mark.parametrize("seed", range(5))
def test_levene_matches_scipy(seed, center):
    a, b = _pair(seed)
    ours = stats.levene(a, b, center=center)
    ref = sps.levene(a, b, center=center)
    assert ours.statistic == pytest.approx(ref.statistic, rel=1e-10)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_levene_degenerate_groups():
    res = stats.levene([3, 3, 3], [5, 5])
    assert res.degenerate and res.p_value == 1.0


@pytest.mark.parametrize("equal_var", [True, False])
@pytest.mark.parametrize("seed", range(5))
def test_t_tests_match_scipy(seed, equal_var):
    a, b = _pair(seed)
    ours = stats.t_test(a, b, equal_var=equal_var)
    ref = sps.ttest_ind(a, b, equal_var=equal_var)
    assert ours.statistic == pytest.approx(ref.statistic, rel=1e-10)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)
    assert ours.test_kind == ("t_equal_var" if equal_var else "welch")


def test_t_test_identical_constant_samples():
    res = stats.t_test([4, 4, 4], [4, 4])
    assert res.statistic == 0.0 and res.p_value == 1.0 and res.degenerate


@pytest.mark.parametrize("seed", range(5))
def test_mann_whitney_asymptotic_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.integers(0, 20, 30), rng.integers(3, 25, 37)  # heavy ties
    ours = stats.mann_whitney_u(a, b)
    ref = sps.mannwhitneyu(a, b, alternative="two-sided", use_continuity=True, method="asymptotic")
    assert ours.statistic == pytest.approx(ref.statistic)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_mann_whitney_exact_matches_scipy_without_ties(seed):
    rng = np.random.default_rng(seed)
    values = rng.permutation(30)[:13]
    a, b = values[:6], values[6:]
    ours = stats.mann_whitney_u(a, b, method="exact")
    ref = sps.mannwhitneyu(a, b, alternative="two-sided", method="exact")
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-12)


def test_rankdata_matches_scipy():
    x = [3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5]
    np.testing.assert_array_equal(stats.rankdata(x), sps.rankdata(x))


def test_choose_test_branches():
    rng = np.random.default_rng(0)
    skewed = np.concatenate([np.zeros(5), rng.exponential(1, 5) ** 4 * 100])
    assert stats.skewness(skewed) > 2
    assert stats.choose_test(skewed, rng.normal(size=20)).test_kind == "mann_whitney_u"
    a, b = rng.normal(0, 1, 50), rng.normal(0, 1.1, 50)
    assert stats.choose_test(a, b).test_kind == "t_equal_var"
    assert stats.choose_test(a, rng.normal(0, 8, 50)).test_kind == "welch"
    assert "levene_p" in stats.choose_test(a, b).extra


@pytest.mark.parametrize("seed", range(5))
def test_spearman_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 5, 40)
    y = x + rng.integers(0, 4, 40)
    ours = stats.spearman(x, y)
    ref = sps.spearmanr(x, y)
    assert ours.statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_spearman_constant_is_degenerate():
    res = stats.spearman([1, 2, 3, 4], [7, 7, 7, 7])
    assert res.degenerate and math.isnan(res.statistic)


def test_stars_boundaries():
    assert [stats.stars(p) for p in (0.0009, 0.001, 0.009, 0.01, 0.049, 0.05, float("nan"))] == \
        ["***", "**", "**", "*", "*", "", ""]


def test_ols_rank_deficiency_names_column():
    X = np.column_stack([np.arange(10), np.arange(10) * 2.0])
    with pytest.raises(stats.RankDeficiencyError) as err:
        stats.ols(X, np.arange(10.0), names=["agent", "model"])
    assert err.value.column == "model"


def test_ols_lattice_design_is_full_rank():
    from guessbench.agents import build_lattice

    cells = [c for c in build_lattice([("haiku", 0), ("sonnet", 1)]) if c.agent_kind != "ewa"]
    X = [list(stats.sophistication_factors(c).values()) for c in cells]
    assert len(cells) == 24
    assert np.linalg.matrix_rank(np.column_stack([np.ones(24), X])) == 5
    fit = stats.ols(X, np.random.default_rng(1).normal(size=24), names=["agent", "model", "context", "inst"])
    assert fit.df_resid == 19


def test_ols_matches_scipy_linregress_single_factor():
    rng = np.random.default_rng(3)
    x = rng.normal(size=50)
    y = 2 * x + rng.normal(size=50)
    fit = stats.ols(x, y, names=["x"])
    ref = sps.linregress(x, y)
    assert fit["x"]["coef"] == pytest.approx(ref.slope, rel=1e-12)
    assert fit["x"]["se"] == pytest.approx(ref.stderr, rel=1e-10)
    assert fit["x"]["p_value"] == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-300)


@given(samples, samples)
def test_wasserstein_matches_scipy(a, b):
    assert stats.wasserstein_1d(a, b) == pytest.approx(sps.wasserstein_distance(a, b), abs=1e-9)


@given(samples, samples, samples)
@settings(max_examples=200)
def test_wasserstein_metric_axioms(a, b, c):
    ab = stats.wasserstein_1d(a, b)
    assert ab >= 0
    assert ab == pytest.approx(stats.wasserstein_1d(b, a), abs=1e-9)
    assert ab <= stats.wasserstein_1d(a, c) + stats.wasserstein_1d(c, b) + 1e-9
    assert stats.wasserstein_1d(a, a) == 0.0


@given(samples, samples, st.integers(-500, 500))
def test_wasserstein_shift_equivariance(a, b, shift):
    assert stats.wasserstein_1d(np.add(a, shift), np.add(b, shift)) == stats.wasserstein_1d(a, b)


@given(samples, st.integers(-30, 30))
def test_wasserstein_of_a_translate_is_the_shift(a, shift):
    assert stats.wasserstein_1d(a, np.add(a, shift)) == pytest.approx(abs(shift), abs=1e-9)


def test_kde_integrates_to_about_one_and_kde_distance_behaves():
    rng = np.random.default_rng(0)
    a = rng.normal(40, 8, 200)
    curve = stats.kde(a, low=-20, high=120, points=2001)
    assert np.trapezoid(curve.density, curve.grid) == pytest.approx(1.0, abs=1e-3)
    assert curve.bandwidth == pytest.approx(stats.silverman_bandwidth(a))
    b = a + 10
    assert stats.wasserstein_kde(a, a) == pytest.approx(0.0, abs=1e-12)
    assert stats.wasserstein_kde(a, b) == pytest.approx(10.0, abs=0.2)


def test_k_levels_zero_policies():
    assert stats.to_k_level(50) == 0.0
    assert stats.to_k_level(0) == pytest.approx(stats.ZERO_K_CAP)
    assert stats.ZERO_K_CAP == pytest.approx(stats.to_k_level(1))
    np.testing.assert_allclose(stats.to_k_levels([0, 50]), [stats.ZERO_K_CAP, 0.0])
    np.testing.assert_allclose(stats.to_k_levels([0, 50], zeros="exclude"), [0.0])
    with pytest.raises(ValueError):
        stats.to_k_level(-1)


def test_ame_and_delta():
    assert stats.ame([1, 2, 3], [2, 2, 2]) == 0.0
    assert stats.ame([1, 1], [3, 3]) == 2.0
    assert stats.delta_subpop([1], [2], [1], [4]) == -2.0


def test_sophistication_factors():
    cell = Cell("reasoner", "sonnet", 1, "biography", True)
    assert stats.sophistication_factors(cell) == {"agent": 2, "model": 1, "context": 2, "instruction": 1}
    assert stats.sophistication_score(cell.agent_config("student")) == 6
    assert stats.sophistication_score(Cell("ewa")) == 0
