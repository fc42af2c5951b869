import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from procyclicality.data import LossSeries
from procyclicality.quantiles import empirical_quantile
from procyclicality.stats import (acf, acf_band, bin_ratios_by_volatility,
                                  correlate_ratio_volatility, fisher_ci,
                                  iid_logratio_volatility_correlation,
                                  iid_quantile_volatility_correlation, lookforward_ratios,
                                  overlap_effective_size, pearson, regress_logratio_on_volatility,
                                  rmse, spearman)
from procyclicality.volatility import annualize, sample_volatility


def test_rmse_examples():
    assert rmse([1.0, 1.0, 1.0]) == 0
    assert rmse([1.5, 0.5]) == pytest.approx(0.5, abs=1e-12)
    assert rmse([2.0]) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        rmse([])


def test_pearson_examples():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert pearson(x, 2 * x + 1) == pytest.approx(1.0, abs=1e-12)
    assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-12)
    assert pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-12)
    for bad in (([1, 2], [1, 2]), ([1, 2, 3], [1, 2]), ([1, 1, 1], [1, 2, 3])):
        with pytest.raises(ValueError):
            pearson(*bad)


def test_spearman_examples():
    x = np.array([0.3, 1.2, 2.5, 7.0])
    assert spearman(x, x ** 3) == pytest.approx(1.0, abs=1e-12)
    assert spearman(x, -np.exp(x)) == pytest.approx(-1.0, abs=1e-12)
    # ties take average ranks
    assert spearman([1, 2, 2, 3], [1, 2, 3, 4]) == pytest.approx(
        pearson([1, 2.5, 2.5, 4], [1, 2, 3, 4]), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-500, 500), st.integers(-500, 500)), min_size=3, max_size=40))
def test_spearman_monotone_invariance_and_bounds(pairs):
    # grid values keep exp(x) and y**3 free of rounding ties
    x = np.array([a for a, _ in pairs]) / 100
    y = np.array([b for _, b in pairs]) / 100
    assume(np.ptp(x) > 0 and np.ptp(y) > 0)
    s = spearman(x, y)
    assert s == pytest.approx(spearman(np.exp(x), y ** 3), abs=1e-12)
    assert -1 - 1e-12 <= s <= 1 + 1e-12
    assert -1 - 1e-12 <= pearson(x, y) <= 1 + 1e-12


def test_fisher_ci_examples():
    lo, hi = fisher_ci(0.0, 103)
    assert hi == pytest.approx(math.tanh(1.959963984540054 / 10), abs=1e-12)
    assert hi == pytest.approx(0.193525, abs=1e-6)
    assert lo == pytest.approx(-hi, abs=1e-15)
    for N in (4, 10, 1000):
        a, b = fisher_ci(0.0, N)
        assert a == pytest.approx(-b, abs=1e-15)
    with pytest.raises(ValueError):
        fisher_ci(1.0, 10)
    with pytest.raises(ValueError):
        fisher_ci(0.1, 3)


@settings(max_examples=100, deadline=None)
@given(st.floats(-0.99, 0.99), st.integers(4, 10_000))
def test_fisher_contains_r(r, N):
    lo, hi = fisher_ci(r, N)
    assert lo < r < hi


def test_bins_hand_example():
    v = np.arange(1, 11, dtype=float)
    b = bin_ratios_by_volatility(v, v, 5)
    np.testing.assert_allclose(b.means, [1.5, 3.5, 5.5, 7.5, 9.5], atol=1e-12)
    assert b.counts.tolist() == [2, 2, 2, 2, 2]
    ones = bin_ratios_by_volatility(np.ones(10), v, 5)
    assert np.all(ones.means == 1)


def test_bins_empty_and_degenerate():
    b = bin_ratios_by_volatility([1, 2, 3, 4, 5], [0, 0.1, 0.2, 0.3, 10], 5)
    assert b.counts[1] == 0 and np.isnan(b.means[1])
    assert b.as_rows()[1]["mean_ratio"] is None
    with pytest.raises(ValueError):
        bin_ratios_by_volatility([1, 2, 3], [1, 1, 1], 2)


def test_regression_exact_line():
    v = np.linspace(0.1, 0.5, 30)
    res = regress_logratio_on_volatility(3 - 5 * v, v)
    assert res.slope == pytest.approx(-5, abs=1e-12)
    assert res.intercept == pytest.approx(3, abs=1e-12)
    assert np.max(np.abs(res.residuals)) < 1e-12
    assert res.indicative_only


def test_regression_size(rng):
    # under independence, one-sided rejections at 5% happen about 5% of the time
    rej = 0
    n_sims = 10_000
    for _ in range(n_sims):
        x, y = rng.standard_normal(30), rng.standard_normal(30)
        rej += regress_logratio_on_volatility(y, x).p_value < 0.05
    assert abs(rej / n_sims - 0.05) < 0.01


def test_acf_examples(rng):
    n = 10_000
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    for i in range(1, n):
        x[i] = 0.5 * x[i - 1] + e[i]
    assert acf(x, 1)[0] == pytest.approx(0.5, abs=0.05)
    white = acf(rng.standard_normal(5000), 50)
    assert np.mean(np.abs(white) <= acf_band(5000)) >= 0.9
    with pytest.raises(ValueError):
        acf(np.ones(50), 5)
    with pytest.raises(ValueError):
        acf(np.arange(5.0), 10)


def test_ratios_identical_windows(rng):
    block = rng.standard_normal(252)
    loss = np.tile(block, 4)
    pts = lookforward_ratios(LossSeries(loss), 0, 0.99, 1)
    assert pts and all(p.ratio == pytest.approx(1.0, abs=1e-15) for p in pts)


def test_ratio_two_blocks(rng):
    past = rng.uniform(0.1, 1, 252)
    loss = np.concatenate([past, 2 * past])
    (pt,) = lookforward_ratios(LossSeries(loss), 0, 0.95, 1)
    assert pt.denominator == empirical_quantile(past, 0.95)
    assert pt.ratio == pytest.approx(2.0, abs=1e-15)
    assert pt.log_ratio == pytest.approx(math.log(2), abs=1e-15)
    assert pt.under_estimation and not pt.over_estimation
    assert pt.past_window == (0, 252) and pt.future_window == (252, 504)


def test_ratio_dates_worked_example():
    # anchor on the first 2014 date: past covers 2013, future covers 2014
    def trading_days(year):
        d = np.arange(np.datetime64(f"{year}-01-01"), np.datetime64(f"{year + 1}-01-01"))
        return d[np.is_busday(d)]
    # 252 sessions per year: drop a few 2013 days at the start, 2014 days at the end
    dates = np.concatenate([trading_days(2013)[-252:], trading_days(2014)[:252]])
    loss = LossSeries(np.linspace(0.1, 1, 504), dates)
    (pt,) = lookforward_ratios(loss, 0, 0.9, 1)
    assert str(dates[pt.past_window[0]]).startswith("2013-01")
    assert str(dates[pt.past_window[1] - 1]).startswith("2013-12")
    assert str(pt.anchor_date).startswith("2014-01")
    assert str(dates[pt.future_window[1] - 1]).startswith("2014-12")


def test_ratio_flags_semantics(rng):
    for pt in lookforward_ratios(LossSeries(rng.standard_t(4, 3000)), 1, 0.95, 1):
        assert pt.under_estimation == (pt.ratio > 1) == (pt.log_ratio > 0)
        assert pt.over_estimation == (pt.ratio < 1)


def test_nonpositive_denominator_excluded():
    loss = np.concatenate([-np.ones(252), np.ones(252) * 0.5, np.ones(300)])
    rep = correlate_ratio_volatility(LossSeries(loss + np.linspace(0, 1e-3, loss.size)),
                                     n_bins=None)
    assert rep.excluded > 0
    assert np.all(np.isfinite(rep.log_ratio))
    with pytest.raises(ValueError):
        lookforward_ratios(LossSeries(np.ones(300)), 0, 0.99, 1)


def test_anchor_alignment(rng):
    x = rng.standard_normal(1500) * 0.01
    rep = correlate_ratio_volatility(LossSeries(-x), x, 0, 0.95, 1, 1, n_bins=None)
    for t, v in zip(rep.anchors, rep.volatility):
        assert v == pytest.approx(annualize(sample_volatility(x[t - 252:t], 1), 252), rel=1e-12)


def test_affine_antidependence_gives_minus_one():
    # a constructed report path: pearson on an exact decreasing affine relation
    v = np.linspace(0.1, 0.4, 40)
    assert pearson(2.0 - 3.0 * v, v) == pytest.approx(-1, abs=1e-12)


def test_scale_invariance(rng):
    x = rng.standard_t(5, 3000) * 0.01
    a = correlate_ratio_volatility(LossSeries(-x), x, 0, 0.99, 1, 1)
    b = correlate_ratio_volatility(LossSeries(-7 * x), 7 * x, 0, 0.99, 1, 1)
    np.testing.assert_allclose(a.ratio, b.ratio, rtol=1e-12)
    assert a.pearson == pytest.approx(b.pearson, abs=1e-12)
    assert a.spearman == pytest.approx(b.spearman, abs=1e-12)


def test_iid_asymptotic_against_simulation(rng):
    # Monte Carlo oracle for corr(quantile of losses, MAD) on iid Gaussian samples
    n, reps = 1000, 4000
    q, v = np.empty(reps), np.empty(reps)
    for i in range(reps):
        s = rng.standard_normal(n)
        q[i] = np.sort(-s)[int(math.ceil(0.95 * n)) - 1]
        v[i] = np.mean(np.abs(s - s.mean()))
    assert pearson(q, v) == pytest.approx(iid_quantile_volatility_correlation(0.95, 1), abs=0.05)
    assert iid_logratio_volatility_correlation(0.95, 1) == pytest.approx(
        -iid_quantile_volatility_correlation(0.95, 1) / math.sqrt(2))
    assert math.isnan(iid_quantile_volatility_correlation(0.99, 2, "student", 3))


def test_effective_size_bounds():
    n_eff = overlap_effective_size(345)
    assert 20 < n_eff < 345
    # without overlap every pair is independent
    assert overlap_effective_size(100, 21, 21, 21) == pytest.approx(100)
