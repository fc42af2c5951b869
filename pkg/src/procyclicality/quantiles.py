"""Empirical quantile (VaR) and the weighted sample quantile process.

The weighted estimator uses weights ``|L|**p`` on each loss of the window:

    Q = inf{ x : sum_{L_i <= x} |L_i|^p / sum_i |L_i|^p >= alpha }

so ``p = 0`` is the plain rolling-window VaR. Every returned value is an order
statistic of the window, never an interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import DAYS_PER_MONTH, DAYS_PER_YEAR, LossSeries, WindowSpec, anchor_dates


@dataclass(frozen=True)
class SqpConfig:
    p: float = 0.0
    alpha: float = 0.99
    window: WindowSpec = WindowSpec(DAYS_PER_YEAR, DAYS_PER_MONTH)

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not self.p >= 0:
            raise ValueError(f"p must be non-negative, got {self.p}")


@dataclass(frozen=True)
class QuantileEstimate:
    anchor: int
    value: float
    config: SqpConfig
    anchor_date: np.datetime64 | None = None


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def order_index(n: int, alpha: float) -> int:
    """Smallest ``k`` with ``k / n >= alpha`` (1-based order statistic).

    Evaluated on the same floating-point comparison as the cumulative
    indicator, so ``n=5, alpha=0.6`` gives 3 even though ``5 * 0.6`` rounds up.
    """
    _check_alpha(alpha)
    k = max(1, math.ceil(n * alpha))
    while k > 1 and (k - 1) / n >= alpha:
        k -= 1
    while k / n < alpha:
        k += 1
    return k


def empirical_quantile(sample, alpha: float) -> float:
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    k = order_index(x.size, alpha)
    return float(np.partition(x, k - 1)[k - 1])


def weighted_quantile(sample, alpha: float, p: float) -> float:
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    return float(_window_quantiles(x[None, :], alpha, p)[0])


def _window_quantiles(windows: np.ndarray, alpha: float, p: float) -> np.ndarray:
    """Quantile of each row of ``windows`` (shape ``(m, n)``)."""
    _check_alpha(alpha)
    if p < 0:
        raise ValueError(f"p must be non-negative, got {p}")
    n = windows.shape[1]
    if p == 0:
        k = order_index(n, alpha)
        return np.partition(windows, k - 1, axis=1)[:, k - 1]
    s = np.sort(windows, axis=1)
    cum = np.cumsum(np.abs(s) ** p, axis=1)
    total = cum[:, -1]
    if np.any(total <= 0):
        raise ValueError("weight mass is zero: all observations are 0 with p > 0")
    # ties need no special care: the first row index reaching alpha carries
    # the same value as every tied neighbour
    idx = np.argmax(cum / total[:, None] >= alpha, axis=1)
    return s[np.arange(len(s)), idx]


def rolling_quantiles(values, length: int, starts, alpha: float, p: float = 0.0) -> np.ndarray:
    """Quantiles on windows ``values[s:s + length]`` for each ``s`` in ``starts``."""
    values = np.asarray(values, dtype=float)
    starts = np.asarray(starts, dtype=int)
    if starts.size == 0:
        return np.empty(0)
    if starts.min() < 0 or starts.max() + length > len(values):
        raise ValueError("window extends beyond the series")
    windows = sliding_window_view(values, length)[starts]
    return _window_quantiles(windows, alpha, p)


def sqp_series(losses: LossSeries, config: SqpConfig) -> list[QuantileEstimate]:
    """Rolling SQP on windows ``[t - n, t)`` for anchors ``t = n, n + step, ...``."""
    values = np.asarray(losses.values, dtype=float)
    n, step = config.window.length_days, config.window.step_days
    if len(values) < n:
        raise ValueError(f"series of {len(values)} points is shorter than one window of {n}")
    anchors = np.arange(n, len(values) + 1, step)
    q = rolling_quantiles(values, n, anchors - n, config.alpha, config.p)
    labels = anchor_dates(losses.dates, anchors)
    return [QuantileEstimate(int(t), float(v), config, d) for t, v, d in zip(anchors, q, labels)]


def unconditional_var(losses, alpha: float) -> float:
    values = losses.values if hasattr(losses, "values") else losses
    return empirical_quantile(values, alpha)
