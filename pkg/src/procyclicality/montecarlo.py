"""Monte Carlo correlation experiments on iid and GARCH(1,1) paths.

Each replication draws one path, rolls the look-forward ratio and the past
volatility monthly along it, and records the Pearson (log-ratio) and Spearman
(ratio) correlations. Results are averaged across replications. Replication
``i`` always uses the generator seeded by ``(master_seed, i)``, and the
reduction runs in index order, so the output does not depend on how many
workers ran the replications.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import DAYS_PER_MONTH, DAYS_PER_YEAR
from .garch import GarchError, GarchParams, simulate
from .quantiles import order_index
from .rng import replication_rng, standardized_student, standardized_student_sampler  # noqa: F401
from .stats import pearson, spearman
from .volatility import _window_volatility

logger = logging.getLogger(__name__)

SIGNIFICANCE_LEVELS = (0.99, 0.95, 0.90, 0.85)
SIGNIFICANCE_MARKS = {0.99: "**", 0.95: "*", 0.90: "", 0.85: "†", None: "n.s."}


@dataclass(frozen=True)
class Generator:
    """Path generator: ``normal``, ``student`` (iid) or ``garch``."""

    kind: str = "normal"
    mu: float = 0.0
    sigma: float = 1.0
    nu: float | None = None
    garch: GarchParams | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind not in ("normal", "student", "garch"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.kind in ("normal", "student") and not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.kind == "student" and (self.nu is None or not self.nu > 2):
            raise ValueError(f"Student generator needs nu > 2, got {self.nu}")
        if self.kind == "garch":
            if self.garch is None:
                raise ValueError("garch generator needs parameters")
            if not self.garch.stationary:
                raise GarchError(
                    f"non-stationary parameters (alpha + beta = {self.garch.persistence})")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind == "normal":
            return "normal"
        if self.kind == "student":
            return f"student{self.nu:g}"
        return f"garch-{self.garch.innovation}"

    def draw(self, rng: np.random.Generator, n: int, burn_in: int = 1000) -> np.ndarray:
        if self.kind == "normal":
            return self.mu + self.sigma * rng.standard_normal(n)
        if self.kind == "student":
            return self.mu + self.sigma * rng.standard_t(self.nu, n)
        return simulate(self.garch, n, rng, burn_in).values

    def no_theoretical_counterpart(self, k: int) -> bool:
        """True when the volatility estimator's variance needs an infinite moment."""
        return self.kind == "student" and k == 2 and self.nu <= 4


@dataclass(frozen=True)
class McConfig:
    generator: Generator = Generator()
    path_length: int = 8000
    replications: int = 1000
    window: int = DAYS_PER_YEAR
    step: int = DAYS_PER_MONTH
    alphas: tuple[float, ...] = (0.95, 0.99)
    p_values: tuple[float, ...] = (0.0,)
    k_values: tuple[int, ...] = (1, 2)
    T_years: tuple[float, ...] = (1,)
    master_seed: int = 0
    pairing: str = "rolling"
    sim_burn_in: int = 1000
    workers: int = 1

    def __post_init__(self):
        for name in ("alphas", "p_values", "k_values", "T_years"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.pairing not in ("rolling", "disjoint"):
            raise ValueError(f"unknown pairing {self.pairing!r}")
        if any(not 0 < a < 1 for a in self.alphas):
            raise ValueError("alphas must lie in (0, 1)")
        if any(p < 0 for p in self.p_values):
            raise ValueError("p values must be non-negative")
        if any(k not in (1, 2) for k in self.k_values):
            raise ValueError("k values must be 1 or 2")
        if self.pairing == "rolling":
            need = self.past_length(max(self.T_years)) + self.window + self.step
            if self.path_length < need:
                raise ValueError(f"path_length {self.path_length} < {need} (two windows plus a step)")

    def past_length(self, T: float) -> int:
        n = T * self.window
        if abs(n - round(n)) > 1e-9 or n < 2:
            raise ValueError(f"T={T} is not a whole number of observations")
        return int(round(n))

    def cells(self) -> list[tuple[float, float, int, float]]:
        return [(a, p, k, T) for T in self.T_years for k in self.k_values
                for p in self.p_values for a in self.alphas]


@dataclass
class McCell:
    generator: str
    alpha: float
    p: float
    k: int
    T_years: float
    pearson: np.ndarray
    spearman: np.ndarray
    bracketed: bool = False
    pooled_pearson: float | None = None
    pooled_spearman: float | None = None
    pooled_n: int | None = None

    @property
    def replications(self) -> int:
        return self.pooled_n if self.pooled_n is not None else int(self.pearson.size)

    def _mean(self, a, pooled):
        if pooled is not None:
            return pooled
        return float(np.mean(a)) if a.size else float("nan")

    @staticmethod
    def _sd(a):
        return float(np.std(a, ddof=1)) if a.size > 1 else float("nan")

    @property
    def pearson_mean(self) -> float:
        return self._mean(self.pearson, self.pooled_pearson)

    @property
    def spearman_mean(self) -> float:
        return self._mean(self.spearman, self.pooled_spearman)

    @property
    def pearson_sd(self) -> float:
        return self._sd(self.pearson)

    @property
    def spearman_sd(self) -> float:
        return self._sd(self.spearman)

    def significance(self, which: str = "pearson") -> float | None:
        return negative_significance(getattr(self, which))

    def to_dict(self) -> dict:
        def clean(v):
            return None if v is None or (isinstance(v, float) and math.isnan(v)) else v

        return {
            "generator": self.generator,
            "alpha": self.alpha,
            "p": self.p,
            "k": self.k,
            "T_years": self.T_years,
            "replications": self.replications,
            "pearson_mean": clean(self.pearson_mean),
            "pearson_sd": clean(self.pearson_sd),
            "pearson_significance": self.significance("pearson"),
            "spearman_mean": clean(self.spearman_mean),
            "spearman_sd": clean(self.spearman_sd),
            "spearman_significance": self.significance("spearman"),
            "bracketed": self.bracketed,
        }


@dataclass
class McResult:
    config: McConfig
    cells: list[McCell] = field(default_factory=list)

    def cell(self, alpha: float, p: float = 0.0, k: int = 1, T_years: float = 1,
             generator: str | None = None) -> McCell:
        for c in self.cells:
            if (math.isclose(c.alpha, alpha) and math.isclose(c.p, p) and c.k == k
                    and math.isclose(c.T_years, T_years)
                    and (generator is None or c.generator == generator)):
                return c
        raise KeyError((alpha, p, k, T_years, generator))

    def to_dict(self) -> dict:
        return {"cells": [c.to_dict() for c in self.cells]}


def negative_significance(values, levels: Sequence[float] = SIGNIFICANCE_LEVELS) -> float | None:
    """Highest level at which the replication distribution is negative.

    Two-sided percentile test: negative at level ``c`` when the ``(1 + c) / 2``
    percentile of the replications is below zero.
    """
    a = np.asarray(values, dtype=float)
    a = a[~np.isnan(a)]
    if a.size < 2:
        return None
    for c in sorted(levels, reverse=True):
        if np.quantile(a, (1 + c) / 2) < 0:
            return c
    return None


def _quantiles_from_sorted(s: np.ndarray, alpha: float, p: float) -> np.ndarray:
    if p == 0:
        return s[:, order_index(s.shape[1], alpha) - 1]
    cum = np.cumsum(np.abs(s) ** p, axis=1)
    idx = np.argmax(cum / cum[:, -1:] >= alpha, axis=1)
    return s[np.arange(len(s)), idx]


def _nan_corr(fn, x, y) -> float:
    ok = ~np.isnan(x)
    if ok.sum() < 3:
        return float("nan")
    try:
        return fn(x[ok], y[ok])
    except ValueError:
        return float("nan")


def rolling_path_correlations(x: np.ndarray, config: McConfig) -> dict:
    """Pearson/Spearman per grid cell for one return path ``x``."""
    losses = -x
    n = config.window
    out = {}
    for T in config.T_years:
        past = config.past_length(T)
        anchors = np.arange(past, len(x) - n + 1, config.step)
        past_sorted = np.sort(sliding_window_view(losses, past)[anchors - past], axis=1)
        fut_sorted = np.sort(sliding_window_view(losses, n)[anchors], axis=1)
        past_windows = sliding_window_view(x, past)[anchors - past]
        vols = {k: _window_volatility(past_windows, k) for k in config.k_values}
        for alpha in config.alphas:
            num = _quantiles_from_sorted(fut_sorted, alpha, 0.0)
            for p in config.p_values:
                den = _quantiles_from_sorted(past_sorted, alpha, p)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = num / den
                    lr = np.where((num > 0) & (den > 0), np.log(np.abs(ratio)), np.nan)
                for k in config.k_values:
                    out[(alpha, p, k, T)] = (_nan_corr(pearson, lr, vols[k]),
                                             _nan_corr(spearman, np.where(np.isnan(lr), np.nan, ratio), vols[k]))
    return out


def _disjoint_triple(x: np.ndarray, config: McConfig) -> dict:
    losses = -x
    n = config.window
    out = {}
    for T in config.T_years:
        past = config.past_length(T)
        ps = np.sort(losses[:past])[None, :]
        fs = np.sort(losses[past:past + n])[None, :]
        vols = {k: float(_window_volatility(x[None, :past], k)[0]) for k in config.k_values}
        for alpha in config.alphas:
            num = float(_quantiles_from_sorted(fs, alpha, 0.0)[0])
            for p in config.p_values:
                den = float(_quantiles_from_sorted(ps, alpha, p)[0])
                for k in config.k_values:
                    out[(alpha, p, k, T)] = (num, den, vols[k])
    return out


def _run_replication(args) -> dict:
    config, index = args
    rng = replication_rng(config.master_seed, index)
    if config.pairing == "disjoint":
        length = config.past_length(max(config.T_years)) + config.window
        x = config.generator.draw(rng, length, config.sim_burn_in)
        return _disjoint_triple(x, config)
    x = config.generator.draw(rng, config.path_length, config.sim_burn_in)
    return rolling_path_correlations(x, config)


def _map_replications(config: McConfig) -> list[dict]:
    tasks = [(config, i) for i in range(config.replications)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_run_replication, tasks, chunksize=max(1, len(tasks) // (4 * config.workers))))
    return [_run_replication(t) for t in tasks]


def run_experiment(config: McConfig) -> McResult:
    per_rep = _map_replications(config)
    result = McResult(config)
    gen = config.generator
    for key in config.cells():
        alpha, p, k, T = key
        bracketed = gen.no_theoretical_counterpart(k)
        if config.pairing == "disjoint":
            num, den, vol = (np.array(v) for v in zip(*(r[key] for r in per_rep)))
            ok = (num > 0) & (den > 0)
            lr, ratio, vol = np.log(num[ok] / den[ok]), num[ok] / den[ok], vol[ok]
            cell = McCell(gen.name, alpha, p, k, T, np.empty(0), np.empty(0), bracketed,
                          _nan_corr(pearson, lr, vol), _nan_corr(spearman, ratio, vol),
                          int(ok.sum()))
        else:
            pr = np.array([r[key][0] for r in per_rep])
            sr = np.array([r[key][1] for r in per_rep])
            cell = McCell(gen.name, alpha, p, k, T, pr, sr, bracketed)
        result.cells.append(cell)
    return result


def run_iid_experiment(config: McConfig) -> McResult:
    if config.generator.kind == "garch":
        raise ValueError("run_iid_experiment needs an iid generator")
    return run_experiment(config)


@dataclass
class GarchExperimentResult:
    """Per-parameter-set results plus the across-set average of the means."""

    results: list[McResult]
    labels: list[str]

    def average(self, alpha: float, p: float = 0.0, k: int = 1, T_years: float = 1,
                which: str = "pearson") -> tuple[float, float]:
        means = [getattr(r.cell(alpha, p, k, T_years), f"{which}_mean") for r in self.results]
        sd = float(np.std(means, ddof=1)) if len(means) > 1 else float("nan")
        return float(np.mean(means)), sd

    def replication_sd(self, alpha: float, p: float = 0.0, k: int = 1, T_years: float = 1,
                       which: str = "pearson") -> float:
        vals = np.concatenate([getattr(r.cell(alpha, p, k, T_years), which) for r in self.results])
        return float(np.std(vals, ddof=1)) if vals.size > 1 else float("nan")

    def to_dict(self) -> dict:
        cfg = self.results[0].config
        avg = []
        for alpha, p, k, T in cfg.cells():
            row = {"alpha": alpha, "p": p, "k": k, "T_years": T}
            for which in ("pearson", "spearman"):
                m, s = self.average(alpha, p, k, T, which)
                row[f"{which}_mean"] = m
                row[f"{which}_sd_across_sets"] = None if math.isnan(s) else s
                rs = self.replication_sd(alpha, p, k, T, which)
                row[f"{which}_sd_across_replications"] = None if math.isnan(rs) else rs
            avg.append(row)
        return {
            "parameter_sets": [
                {"label": lab, **r.to_dict()} for lab, r in zip(self.labels, self.results)
            ],
            "average": avg,
        }


def run_garch_experiment(params: Sequence[GarchParams] | GarchParams, config: McConfig,
                         labels: Sequence[str] | None = None,
                         path_lengths: Sequence[int] | None = None) -> GarchExperimentResult:
    """GARCH correlation study, one :class:`McResult` per parameter set.

    Parameter set ``j`` uses master seed ``config.master_seed + j``.
    """
    if isinstance(params, GarchParams):
        params = [params]
    params = list(params)
    labels = list(labels) if labels else [f"set{j}" for j in range(len(params))]
    results = []
    for j, prm in enumerate(params):
        if not prm.stationary:
            raise GarchError(f"non-stationary parameters for {labels[j]}")
        length = path_lengths[j] if path_lengths else config.path_length
        cfg = McConfig(
            generator=Generator("garch", garch=prm, label=labels[j]),
            path_length=length, replications=config.replications, window=config.window,
            step=config.step, alphas=config.alphas, p_values=config.p_values,
            k_values=config.k_values, T_years=config.T_years,
            master_seed=config.master_seed + j, pairing="rolling",
            sim_burn_in=config.sim_burn_in, workers=config.workers)
        logger.info("GARCH experiment %s: %d replications", labels[j], cfg.replications)
        results.append(run_experiment(cfg))
    return GarchExperimentResult(results, labels)
