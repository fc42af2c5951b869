import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from procyclicality.data import (DataError, LossSeries, PriceSeries, ReturnSeries, WindowSpec,
                                 load_price_series, log_returns, losses, resample_weekly,
                                 rolling_windows, window_count)


def _write(tmp_path, text, name="prices.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_two_rows(tmp_path):
    p = _write(tmp_path, "date,close\n2020-01-02,100\n2020-01-03,101\n")
    s = load_price_series(p)
    assert len(s) == 2
    assert s.close.tolist() == [100.0, 101.0]
    assert str(s.dates[0]) == "2020-01-02"


def test_load_tab_and_day_first(tmp_path):
    p = _write(tmp_path, "Date\tPx\n02/01/2020\t100\n03/01/2020\t101\n", "p.tsv")
    s = load_price_series(p, "Date", "Px")
    assert str(s.dates[1]) == "2020-01-03"


def test_non_monotone_dates(tmp_path):
    p = _write(tmp_path, "date,close\n2020-01-03,100\n2020-01-02,101\n")
    with pytest.raises(DataError, match="non-monotone dates"):
        load_price_series(p)


def test_zero_close_names_row(tmp_path):
    rows = [f"2020-01-{d:02d},{100 + d}" for d in range(1, 11)]
    rows[6] = "2020-01-07,0"
    p = _write(tmp_path, "date,close\n" + "\n".join(rows) + "\n")
    with pytest.raises(DataError, match="row 7"):
        load_price_series(p)


def test_missing_file_and_column(tmp_path):
    with pytest.raises(DataError):
        load_price_series(tmp_path / "nope.csv")
    p = _write(tmp_path, "date,price\n2020-01-02,1\n")
    with pytest.raises(DataError, match="close"):
        load_price_series(p)


def test_bad_date(tmp_path):
    p = _write(tmp_path, "date,close\nyesterday,1\n")
    with pytest.raises(DataError, match="row 1"):
        load_price_series(p)


def _prices(closes):
    d = np.arange(np.datetime64("2020-01-01"), np.datetime64("2020-01-01") + len(closes))
    return PriceSeries(d, np.array(closes, dtype=float))


def test_log_returns_examples():
    assert log_returns(_prices([100, 100])).values.tolist() == [0.0]
    x = log_returns(_prices([100, 100 * math.exp(0.01)])).values
    assert x[0] == pytest.approx(0.01, abs=1e-15)
    # ln(0.9) to 15 digits, from an arbitrary-precision evaluation
    assert log_returns(_prices([100, 90])).values[0] == pytest.approx(-0.105360515657826, abs=1e-15)


def test_log_returns_dates_and_short():
    r = log_returns(_prices([1, 2, 3]))
    assert str(r.dates[0]) == "2020-01-02"
    with pytest.raises(DataError):
        log_returns(_prices([1]))


def test_losses_examples():
    assert losses(ReturnSeries([0.01, -0.02])).values.tolist() == [-0.01, 0.02]
    assert losses(ReturnSeries([0.0])).values.tolist() == [0.0]
    x = ReturnSeries([0.3, -0.1, 0.2])
    assert losses(losses(x)).values.tolist() == x.values.tolist()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2), min_size=1, max_size=200), st.floats(1, 1e4))
def test_price_round_trip(x, s0):
    closes = s0 * np.exp(np.concatenate([[0.0], np.cumsum(x)]))
    r = log_returns(_prices(closes)).values
    rebuilt = closes[0] * np.exp(np.concatenate([[0.0], np.cumsum(r)]))
    np.testing.assert_allclose(rebuilt, closes, rtol=1e-12)


def test_window_examples():
    spec = WindowSpec(252, 21)
    w = list(rolling_windows(np.zeros(504), spec))
    assert len(w) == 13 and w[0].anchor == 252 and (w[0].start, w[0].stop) == (0, 252)
    assert len(list(rolling_windows(np.zeros(252), spec))) == 1
    with pytest.raises(DataError):
        list(rolling_windows(np.zeros(251), spec))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 60), st.integers(1, 30), st.integers(0, 300))
def test_window_count_and_no_overlap(n, step, extra):
    size = n + extra
    wins = list(rolling_windows(np.arange(size, dtype=float), WindowSpec(n, step)))
    assert len(wins) == 1 + (size - n) // step == window_count(size, n, step)
    for w in wins:
        assert w.stop - w.start == n
        assert w.stop - 1 < w.anchor
    assert all(b.anchor - a.anchor == step for a, b in zip(wins, wins[1:]))


def test_window_spec_years():
    assert WindowSpec.years(2).length_days == 504
    assert WindowSpec.years(1, 4, 52).length_days == 52
    with pytest.raises(DataError):
        WindowSpec.years(0.001)


def test_resample_weekly():
    w = resample_weekly(_prices(np.arange(1, 12)))
    assert w.close.tolist() == [1, 6, 11] and w.frequency == "weekly"


def test_loss_series_keeps_dates():
    r = log_returns(_prices([1, 2, 4]))
    assert np.array_equal(losses(r).dates, r.dates)
    assert isinstance(losses(r), LossSeries)
