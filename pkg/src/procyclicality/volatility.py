"""Realized volatility: MAD (k=1) and standard deviation (k=2).

    V_{k,n} = ( 1/(n-1) * sum |X_i - mean(X)|^k )^(1/k)

The 1/(n-1) outer normalization is kept for k=1 as well. Annualization is
``sqrt(n) * V_{k,n}`` with ``n`` the window length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import DAYS_PER_YEAR, ReturnSeries, WindowSpec, anchor_dates


@dataclass(frozen=True)
class VolatilityEstimate:
    anchor: int
    k: int
    raw: float
    annualized: float
    n: int
    anchor_date: np.datetime64 | None = None


def _check_k(k: int) -> None:
    if k not in (1, 2):
        raise ValueError(f"k must be 1 or 2, got {k}")


def _window_volatility(windows: np.ndarray, k: int) -> np.ndarray:
    _check_k(k)
    n = windows.shape[1]
    if n < 2:
        raise ValueError("volatility needs at least 2 observations")
    d = windows - windows.mean(axis=1, keepdims=True)
    if k == 1:
        return np.abs(d).sum(axis=1) / (n - 1)
    return np.sqrt((d * d).sum(axis=1) / (n - 1))


def sample_volatility(window, k: int = 1) -> float:
    x = np.asarray(window, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("volatility needs at least 2 observations")
    return float(_window_volatility(x[None, :], k)[0])


def annualize(raw, n: int):
    if np.any(np.asarray(raw) < 0):
        raise ValueError("volatility must be non-negative")
    if n < 1:
        raise ValueError("n must be positive")
    return np.sqrt(n) * raw


def rolling_volatility(values, length: int, starts, k: int = 1) -> np.ndarray:
    """Raw V_{k,n} on windows ``values[s:s + length]``."""
    values = np.asarray(values, dtype=float)
    starts = np.asarray(starts, dtype=int)
    if starts.size == 0:
        return np.empty(0)
    if starts.min() < 0 or starts.max() + length > len(values):
        raise ValueError("window extends beyond the series")
    return _window_volatility(sliding_window_view(values, length)[starts], k)


def volatility_series(returns: ReturnSeries, k: int, spec: WindowSpec) -> list[VolatilityEstimate]:
    values = np.asarray(returns.values, dtype=float)
    n, step = spec.length_days, spec.step_days
    if len(values) < n:
        raise ValueError(f"series of {len(values)} points is shorter than one window of {n}")
    anchors = np.arange(n, len(values) + 1, step)
    raw = rolling_volatility(values, n, anchors - n, k)
    ann = annualize(raw, n)
    labels = anchor_dates(returns.dates, anchors)
    return [
        VolatilityEstimate(int(t), k, float(r), float(a), n, d)
        for t, r, a, d in zip(anchors, raw, ann, labels)
    ]


def mean_annualized_volatility(values, k: int = 2, length: int = 252, step: int = 21) -> float:
    """Average of the rolling annualized volatility over the whole sample."""
    values = np.asarray(values, dtype=float)
    anchors = np.arange(length, len(values) + 1, step)
    if anchors.size == 0:
        raise ValueError("series shorter than one window")
    return float(np.mean(annualize(rolling_volatility(values, length, anchors - length, k), length)))


def whole_sample_volatility(values, k: int = 2, periods_per_year: int = DAYS_PER_YEAR) -> float:
    """Annual realized volatility of the full sample: one window, scaled to a year."""
    return float(np.sqrt(periods_per_year) * sample_volatility(values, k))
