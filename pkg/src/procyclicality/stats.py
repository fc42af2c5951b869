"""Look-forward SQP ratios and the statistics that condition them on volatility.

The ratio at anchor ``t`` compares the one-year VaR realized on ``[t, t+1y)``
with the SQP estimated on ``[t-T, t)``:

    R(t) = Q_{p=0, alpha, 1y}(t + 1y) / Q_{p, alpha, T}(t)

R > 1 means next year's risk was under-estimated, R < 1 over-estimated.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, stats as sps

from .data import DAYS_PER_MONTH, DAYS_PER_YEAR, LossSeries, ReturnSeries, anchor_dates
from .quantiles import rolling_quantiles
from .volatility import annualize, rolling_volatility


@dataclass(frozen=True)
class RatioPoint:
    anchor: int
    numerator: float
    denominator: float
    ratio: float
    log_ratio: float
    anchor_date: np.datetime64 | None = None
    past_window: tuple[int, int] = (0, 0)
    future_window: tuple[int, int] = (0, 0)

    @property
    def valid(self) -> bool:
        return not math.isnan(self.log_ratio)

    @property
    def under_estimation(self) -> bool:
        return self.ratio > 1

    @property
    def over_estimation(self) -> bool:
        return self.ratio < 1


@dataclass(frozen=True)
class RegressionResult:
    intercept: float
    slope: float
    slope_se: float
    p_value: float
    residuals: np.ndarray = field(repr=False)
    n: int = 0
    # classical iid-normal errors are assumed; serially dependent ratios
    # violate this, so p-values are indicative only
    indicative_only: bool = True


@dataclass(frozen=True)
class BinReport:
    n_bins: int
    edges: np.ndarray
    counts: np.ndarray
    means: np.ndarray

    def as_rows(self) -> list[dict]:
        return [
            {
                "bin": i + 1,
                "lo": float(self.edges[i]),
                "hi": float(self.edges[i + 1]),
                "count": int(self.counts[i]),
                "mean_ratio": None if np.isnan(self.means[i]) else float(self.means[i]),
            }
            for i in range(self.n_bins)
        ]


@dataclass(frozen=True)
class AnalysisReport:
    p: float
    alpha: float
    T_years: float
    k: int
    anchors: np.ndarray
    ratio: np.ndarray
    log_ratio: np.ndarray
    volatility: np.ndarray
    pearson: float
    spearman: float
    rmse: float
    regression: RegressionResult | None
    bins: BinReport | None
    excluded: int = 0
    anchor_dates: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        out = {
            "p": self.p,
            "alpha": self.alpha,
            "T_years": self.T_years,
            "k": self.k,
            "n_pairs": int(len(self.ratio)),
            "excluded": self.excluded,
            "mean_ratio": float(np.mean(self.ratio)),
            "pearson": self.pearson,
            "spearman": self.spearman,
            "rmse": self.rmse,
        }
        if self.regression is not None:
            out.update(gamma_hat=self.regression.slope, gamma_se=self.regression.slope_se,
                       gamma_p_value=self.regression.p_value)
        if self.bins is not None:
            out["bin_means"] = [None if np.isnan(m) else float(m) for m in self.bins.means]
            out["bin_counts"] = [int(c) for c in self.bins.counts]
        return out


def ratio_anchors(size: int, past: int, future: int = DAYS_PER_YEAR,
                  step: int = DAYS_PER_MONTH) -> np.ndarray:
    """Anchors ``t`` with a full past window ``[t-past, t)`` and future window ``[t, t+future)``."""
    if size < past + future:
        return np.empty(0, dtype=int)
    return np.arange(past, size - future + 1, step)


def _ratio_arrays(loss_values: np.ndarray, p: float, alpha: float, past: int, future: int,
                  step: int):
    anchors = ratio_anchors(len(loss_values), past, future, step)
    if anchors.size == 0:
        raise ValueError(
            f"series of {len(loss_values)} points cannot hold a past window of {past} "
            f"and a future window of {future}")
    den = rolling_quantiles(loss_values, past, anchors - past, alpha, p)
    num = rolling_quantiles(loss_values, future, anchors, alpha, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = num / den
        log_ratio = np.where((num > 0) & (den > 0), np.log(np.where(ratio > 0, ratio, 1.0)), np.nan)
    return anchors, num, den, ratio, log_ratio


def lookforward_ratios(losses, p: float = 0.0, alpha: float = 0.99, T_years: float = 1,
                       step: int = DAYS_PER_MONTH,
                       periods_per_year: int = DAYS_PER_YEAR) -> list[RatioPoint]:
    """Monthly look-forward ratios; points with a non-positive quantile get ``log_ratio = nan``."""
    values = np.asarray(getattr(losses, "values", losses), dtype=float)
    past = _years_to_obs(T_years, periods_per_year)
    future = periods_per_year
    anchors, num, den, ratio, log_ratio = _ratio_arrays(values, p, alpha, past, future, step)
    labels = anchor_dates(getattr(losses, "dates", None), anchors)
    return [
        RatioPoint(int(t), float(a), float(b), float(r), float(lr), d,
                   (int(t - past), int(t)), (int(t), int(t + future)))
        for t, a, b, r, lr, d in zip(anchors, num, den, ratio, log_ratio, labels)
    ]


def _years_to_obs(T_years: float, periods_per_year: int) -> int:
    n = T_years * periods_per_year
    if n < 2 or abs(n - round(n)) > 1e-9:
        raise ValueError(f"T={T_years} years is not a whole number (>= 2) of observations")
    return int(round(n))


def rmse(ratios) -> float:
    r = np.array([getattr(x, "ratio", x) for x in ratios], dtype=float)
    if r.size == 0:
        raise ValueError("rmse of an empty sequence")
    return float(np.sqrt(np.mean((r - 1.0) ** 2)))


def _paired(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise ValueError("correlation needs at least 3 pairs")
    return x, y


def pearson(x, y) -> float:
    x, y = _paired(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ValueError("correlation undefined for a constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def spearman(x, y) -> float:
    x, y = _paired(x, y)
    return pearson(sps.rankdata(x), sps.rankdata(y))


def regress_logratio_on_volatility(log_ratio, volatility) -> RegressionResult:
    """OLS of log-ratio on volatility with intercept; one-sided p-value for slope < 0."""
    y, x = _paired(log_ratio, volatility)
    n = x.size
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0:
        raise ValueError("regressor is constant")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    s2 = float(resid @ resid) / (n - 2)
    se = math.sqrt(s2 / sxx)
    if se > 0:
        p_value = float(sps.t.cdf(slope / se, df=n - 2))
    else:
        p_value = 0.0 if slope < 0 else 1.0
    return RegressionResult(intercept, slope, se, p_value, resid, n)


def bin_ratios_by_volatility(ratio, volatility, n_bins: int = 5) -> BinReport:
    """Mean ratio in ``n_bins`` uniform volatility bins; last bin is right-closed."""
    r, v = np.asarray(ratio, dtype=float), np.asarray(volatility, dtype=float)
    if r.size != v.size:
        raise ValueError("length mismatch")
    if n_bins < 1 or r.size < n_bins:
        raise ValueError(f"need at least n_bins={n_bins} points")
    lo, hi = float(v.min()), float(v.max())
    if not lo < hi:
        raise ValueError("degenerate volatility range")
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, v, side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=r, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return BinReport(n_bins, edges, counts, means)


def correlate_ratio_volatility(losses, returns=None, p: float = 0.0, alpha: float = 0.99,
                               T_years: float = 1, k: int = 1, step: int = DAYS_PER_MONTH,
                               n_bins: int | None = 5,
                               periods_per_year: int = DAYS_PER_YEAR) -> AnalysisReport:
    """Pair log look-forward ratios with the volatility of the same past window.

    ``returns`` defaults to ``-losses``. The volatility at anchor ``t`` uses the
    identical index range ``[t-T, t)`` as the ratio's denominator.
    """
    loss_values = np.asarray(getattr(losses, "values", losses), dtype=float)
    if returns is None:
        ret_values = -loss_values
    else:
        ret_values = np.asarray(getattr(returns, "values", returns), dtype=float)
        if ret_values.size != loss_values.size:
            raise ValueError("losses and returns differ in length")
    past = _years_to_obs(T_years, periods_per_year)
    anchors, num, den, ratio, log_ratio = _ratio_arrays(
        loss_values, p, alpha, past, periods_per_year, step)
    vol = annualize(rolling_volatility(ret_values, past, anchors - past, k), past)

    ok = ~np.isnan(log_ratio)
    excluded = int((~ok).sum())
    anchors, ratio, log_ratio, vol = anchors[ok], ratio[ok], log_ratio[ok], vol[ok]
    if anchors.size < 3:
        raise ValueError(f"only {anchors.size} usable ratio/volatility pairs (need 3)")

    regression = None
    if np.ptp(vol) > 0:
        regression = regress_logratio_on_volatility(log_ratio, vol)
    bins = None
    if n_bins and anchors.size >= n_bins and np.ptp(vol) > 0:
        bins = bin_ratios_by_volatility(ratio, vol, n_bins)
    return AnalysisReport(
        p=p, alpha=alpha, T_years=T_years, k=k, anchors=anchors, ratio=ratio,
        log_ratio=log_ratio, volatility=vol,
        pearson=_safe_corr(pearson, log_ratio, vol),
        spearman=_safe_corr(spearman, ratio, vol),
        rmse=rmse(ratio), regression=regression, bins=bins, excluded=excluded,
        anchor_dates=anchor_dates(getattr(losses, "dates", None), anchors),
    )


def _safe_corr(fn, x, y) -> float:
    try:
        return fn(x, y)
    except ValueError:
        return float("nan")


def fisher_ci(r: float, N: float, level: float = 0.95) -> tuple[float, float]:
    if not abs(r) < 1:
        raise ValueError("|r| must be < 1")
    if N < 4:
        raise ValueError("Fisher interval needs N >= 4")
    z = sps.norm.ppf(0.5 + level / 2)
    h = z / math.sqrt(N - 3)
    c = math.atanh(r)
    return math.tanh(c - h), math.tanh(c + h)


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 1..max_lag, normalized by the lag-0 autocovariance."""
    x = np.asarray(series, dtype=float).ravel()
    if max_lag < 1:
        raise ValueError("max_lag must be positive")
    if x.size <= max_lag + 1:
        raise ValueError(f"series of {x.size} points too short for lag {max_lag}")
    d = x - x.mean()
    c0 = float(d @ d)
    if c0 == 0:
        raise ValueError("autocorrelation undefined for a constant series")
    return np.array([float(d[:-h] @ d[h:]) / c0 for h in range(1, max_lag + 1)])


def acf_band(N: int, level: float = 0.95) -> float:
    return float(sps.norm.ppf(0.5 + level / 2) / math.sqrt(N))


# iid reference values for the residual check


def _standard_law(dist: str, nu: float | None):
    if dist == "normal":
        return sps.norm()
    if dist == "student":
        if nu is None or nu <= 2:
            raise ValueError("Student law needs nu > 2")
        return sps.t(nu)
    raise ValueError(f"unknown distribution {dist!r}")


@lru_cache(maxsize=256)
def iid_quantile_volatility_correlation(alpha: float, k: int = 1, dist: str = "normal",
                                        nu: float | None = None) -> float:
    """Asymptotic correlation of the sample quantile of losses with the sample volatility.

    Uses the linear (Bahadur) representation of both estimators for a
    symmetric law, where centring by the sample mean has no first-order
    effect. Returns nan when the required moment is infinite.
    """
    law = _standard_law(dist, nu)
    if dist == "student" and ((k == 1 and nu <= 2) or (k == 2 and nu <= 4)):
        return float("nan")
    q = law.ppf(alpha)
    g = (lambda x: abs(x)) if k == 1 else (lambda x: x * x)
    pdf = law.pdf
    m1 = 2 * integrate.quad(lambda x: g(x) * pdf(x), 0, np.inf)[0]
    m2 = 2 * integrate.quad(lambda x: g(x) ** 2 * pdf(x), 0, np.inf)[0]
    tail = integrate.quad(lambda x: g(x) * pdf(x), q, np.inf)[0]
    cov = tail - (1 - alpha) * m1
    return float(cov / math.sqrt(alpha * (1 - alpha) * (m2 - m1 * m1)))


def iid_logratio_volatility_correlation(alpha: float, k: int = 1, dist: str = "normal",
                                        nu: float | None = None, T_years: float = 1) -> float:
    """Asymptotic iid correlation of the log look-forward ratio with past volatility.

    The future quantile is independent of the past window, which dilutes the
    quantile/volatility correlation by ``1 / sqrt(1 + T)``.
    """
    rho = iid_quantile_volatility_correlation(alpha, k, dist, nu)
    return -rho / math.sqrt(1 + T_years)


def overlap_effective_size(n_pairs: int, past: int = DAYS_PER_YEAR, future: int = DAYS_PER_YEAR,
                           step: int = DAYS_PER_MONTH) -> float:
    """Bartlett effective sample size of a correlation between overlapping-window series.

    Autocorrelations of the log-ratio and volatility series are those implied
    by window overlap when each estimator is a window average of iid terms.
    """
    var_lr = 1 / future + 1 / past
    total = 0.0
    j = 1
    while True:
        h = j * step
        rho_v = max(0, past - h) / past
        if rho_v == 0:
            break
        cov_ff = max(0, future - h) / future**2
        cov_pp = max(0, past - h) / past**2
        # future window at t vs past window at t + h
        overlap = max(0, min(future, h) - max(0, h - past))
        cov_fp = overlap / (future * past)
        rho_lr = (cov_ff + cov_pp - cov_fp) / var_lr
        total += rho_lr * rho_v
        j += 1
    return n_pairs / (1 + 2 * total)


def iid_reference_intervals(alpha: float, n_eff: float, k: int = 1, level: float = 0.95,
                            nus=(4, 5, 6, 7), T_years: float = 1) -> dict[str, tuple[float, float, float]]:
    """Fisher intervals around the asymptotic iid correlation, Gaussian and Student laws."""
    out = {}
    for name, dist, nu in [("gaussian", "normal", None)] + [(f"student{n}", "student", n) for n in nus]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            c = iid_logratio_volatility_correlation(alpha, k, dist, nu, T_years)
        if math.isnan(c):
            continue
        lo, hi = fisher_ci(c, n_eff, level)
        out[name] = (c, lo, hi)
    return out
