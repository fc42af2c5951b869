"""GARCH residual diagnostics: are the filtered residuals iid-like?

For a fitted model, the residuals' mean/sd and |residual| autocorrelations are
checked, then the log-ratio/volatility correlation is recomputed on the
residual series and compared with Fisher intervals around the asymptotic iid
correlation for Gaussian and Student laws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DAYS_PER_MONTH, DAYS_PER_YEAR
from .garch import BURN_IN, GarchParams, fit_gaussian, residuals
from .stats import (acf, acf_band, correlate_ratio_volatility, iid_reference_intervals,
                    overlap_effective_size)

RESIDUAL_ALPHAS = (0.95, 0.975, 0.99, 0.995)


@dataclass
class CorrelationCheck:
    alpha: float
    data_correlation: float
    residual_correlation: float
    n_pairs: int
    n_effective: float
    intervals: dict[str, tuple[float, float, float]]

    @property
    def contained_in(self) -> list[str]:
        r = self.residual_correlation
        return [name for name, (_, lo, hi) in self.intervals.items() if lo <= r <= hi]

    @property
    def contained(self) -> bool:
        return bool(self.contained_in)

    @property
    def data_contained(self) -> bool:
        r = self.data_correlation
        return any(lo <= r <= hi for _, lo, hi in self.intervals.values())


@dataclass
class ResidualReport:
    params: GarchParams
    mean: float
    sd: float
    n: int
    abs_acf: np.ndarray
    acf_band: float
    checks: list[CorrelationCheck] = field(default_factory=list)

    @property
    def acf_inside_fraction(self) -> float:
        return float(np.mean(np.abs(self.abs_acf) <= self.acf_band))

    @property
    def containment_rate(self) -> float:
        return float(np.mean([c.contained for c in self.checks])) if self.checks else float("nan")


def residual_check(returns, params: GarchParams | None = None, alphas=RESIDUAL_ALPHAS,
                   max_lag: int = 100, burn_in: int = BURN_IN, step: int = DAYS_PER_MONTH,
                   k: int = 1, level: float = 0.95, nus=(4, 5, 6, 7)) -> ResidualReport:
    """Run the residual suite; fits a Gaussian GARCH when ``params`` is not given."""
    x = np.asarray(getattr(returns, "values", returns), dtype=float)
    if params is None:
        params = fit_gaussian(x, burn_in)
    eps = residuals(x, params, burn_in).values
    lags = acf(np.abs(eps), max_lag)
    checks = []
    for a in alphas:
        data = correlate_ratio_volatility(-x, x, 0.0, a, 1, k, step, n_bins=None)
        resid = correlate_ratio_volatility(-eps, eps, 0.0, a, 1, k, step, n_bins=None)
        n_pairs = len(resid.ratio)
        n_eff = overlap_effective_size(n_pairs, DAYS_PER_YEAR, DAYS_PER_YEAR, step)
        checks.append(CorrelationCheck(
            a, data.pearson, resid.pearson, n_pairs, n_eff,
            iid_reference_intervals(a, n_eff, k, level, nus)))
    return ResidualReport(params, float(np.mean(eps)), float(np.std(eps, ddof=1)), eps.size,
                          lags, acf_band(eps.size), checks)
