import numpy as np
import pytest

from procyclicality.garch import GarchParams

USA = GarchParams(1.70e-6, 0.099, 0.888)


@pytest.fixture
def usa_params():
    return USA


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_prices(path, closes, start="2000-01-03"):
    dates = np.arange(np.datetime64(start), np.datetime64(start) + len(closes))
    with open(path, "w") as fh:
        fh.write("date,close\n")
        for d, c in zip(dates, closes):
            fh.write(f"{d},{float(c)!r}\n")
    return path
