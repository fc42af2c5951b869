"""Price ingestion, log-returns, losses and the business-time rolling calendar.

All estimators work on index positions: one year is 252 observations and one
month is 21. Calendar dates are carried along as labels only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

DAYS_PER_YEAR = 252
DAYS_PER_MONTH = 21
WEEKS_PER_YEAR = 52

_DATE_FORMATS = ("%Y-%m-%d", "%d/%m/%Y")


class DataError(ValueError):
    """Raised for malformed or inconsistent input series."""


def _as_dates(dates) -> np.ndarray:
    if dates is None:
        return None
    return np.asarray(dates, dtype="datetime64[D]")


@dataclass(frozen=True)
class PriceSeries:
    dates: np.ndarray
    close: np.ndarray
    frequency: str = "daily"

    def __post_init__(self):
        close = np.asarray(self.close, dtype=float)
        dates = _as_dates(self.dates)
        if dates is None or len(dates) != len(close):
            raise DataError("dates and closes must have the same length")
        if len(dates) > 1 and np.any(np.diff(dates.astype("int64")) <= 0):
            raise DataError("non-monotone dates")
        bad = np.flatnonzero(~(close > 0))
        if bad.size:
            raise DataError(f"non-positive price at row {int(bad[0]) + 1}")
        if self.frequency not in ("daily", "weekly"):
            raise DataError(f"unknown frequency {self.frequency!r}")
        object.__setattr__(self, "close", close)
        object.__setattr__(self, "dates", dates)

    def __len__(self) -> int:
        return len(self.close)


@dataclass(frozen=True)
class ReturnSeries:
    values: np.ndarray
    dates: np.ndarray | None = None
    frequency: str = "daily"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "dates", _as_dates(self.dates))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class LossSeries:
    values: np.ndarray
    dates: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "dates", _as_dates(self.dates))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class WindowSpec:
    """Rolling window of ``length_days`` observations moved by ``step_days``."""

    length_days: int = DAYS_PER_YEAR
    step_days: int = DAYS_PER_MONTH

    def __post_init__(self):
        if int(self.length_days) != self.length_days or self.length_days < 2:
            raise DataError("window length must be an integer >= 2")
        if int(self.step_days) != self.step_days or self.step_days < 1:
            raise DataError("window step must be an integer >= 1")

    @classmethod
    def years(cls, T: float, step_days: int = DAYS_PER_MONTH,
              periods_per_year: int = DAYS_PER_YEAR) -> "WindowSpec":
        n = periods_per_year * T
        if abs(n - round(n)) > 1e-9:
            raise DataError(f"T={T} years is not a whole number of observations")
        return cls(int(round(n)), step_days)


@dataclass(frozen=True)
class Window:
    anchor: int
    start: int
    stop: int
    anchor_date: np.datetime64 | None = field(default=None, compare=False)


def _parse_date(text: str, row: int) -> date:
    text = text.strip()
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            pass
    raise DataError(f"unparseable date {text!r} at row {row}")


def load_price_series(path, date_column: str = "date", close_column: str = "close",
                      frequency: str = "daily") -> PriceSeries:
    """Read a delimited (comma or tab) price file with a header row.

    Row numbers in error messages count data rows from 1, header excluded.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise DataError(f"{path} is empty")
    delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.DictReader(lines, delimiter=delimiter)
    fields = [f.strip() for f in (reader.fieldnames or [])]
    reader.fieldnames = fields
    for col in (date_column, close_column):
        if col not in fields:
            raise DataError(f"column {col!r} not found in {path} (have {fields})")

    dates, closes = [], []
    for row_no, row in enumerate(reader, start=1):
        raw_close = (row.get(close_column) or "").strip()
        if not raw_close:
            raise DataError(f"missing close at row {row_no}")
        try:
            close = float(raw_close)
        except ValueError:
            raise DataError(f"unparseable close {raw_close!r} at row {row_no}") from None
        if not close > 0:
            raise DataError(f"non-positive price at row {row_no}")
        d = _parse_date(row[date_column], row_no)
        if dates and d <= dates[-1]:
            raise DataError(f"non-monotone dates at row {row_no}")
        dates.append(d)
        closes.append(close)
    return PriceSeries(np.array(dates, dtype="datetime64[D]"), np.array(closes), frequency)


def resample_weekly(prices: PriceSeries, every: int = 5) -> PriceSeries:
    """Keep every ``every``-th observation (business-week sampling)."""
    idx = np.arange(0, len(prices), every)
    return PriceSeries(prices.dates[idx], prices.close[idx], "weekly")


def log_returns(prices: PriceSeries) -> ReturnSeries:
    if len(prices) < 2:
        raise DataError("need at least two prices to form a return")
    x = np.diff(np.log(prices.close))
    return ReturnSeries(x, prices.dates[1:], prices.frequency)


def losses(returns: ReturnSeries | LossSeries) -> LossSeries:
    return LossSeries(-np.asarray(returns.values), returns.dates)


def window_count(size: int, length: int, step: int) -> int:
    if size < length:
        return 0
    return 1 + (size - length) // step


def rolling_windows(series, spec: WindowSpec) -> Iterator[Window]:
    """Yield windows ``[t - n, t)`` with anchors ``t = n, n + step, ...``.

    The anchor observation itself is never inside its window. The last anchor
    may equal ``len(series)``, in which case it has no date label.
    """
    values = series.values if hasattr(series, "values") else series
    size = len(values)
    n, step = spec.length_days, spec.step_days
    if size < n:
        raise DataError(f"series of {size} points is shorter than one window of {n}")
    dates = getattr(series, "dates", None)
    for t in range(n, size + 1, step):
        label = dates[t] if dates is not None and t < size else None
        yield Window(t, t - n, t, label)


def anchor_dates(dates: np.ndarray | None, anchors: Sequence[int]) -> list:
    if dates is None:
        return [None] * len(anchors)
    return [dates[t] if t < len(dates) else None for t in anchors]
