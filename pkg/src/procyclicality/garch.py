"""GARCH(1,1) simulation, calibration and residual filtering.

Model, with unit-variance innovations ``eps`` (Gaussian or standardized Student)::

    X[t+1] = eps[t] * sigma[t]
    sigma[t]^2 = omega + alpha * X[t]^2 + beta * sigma[t-1]^2

Calibration is Gaussian quasi-maximum likelihood with the stationarity
constraint ``alpha + beta <= 1 - 1e-6`` built into the parametrization. The
"optimized" model keeps the Gaussian (omega, alpha, beta) and fits the Student
degrees of freedom on the negative residuals only.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import optimize, special
from scipy.signal import lfilter

from .data import DAYS_PER_YEAR, ReturnSeries
from .rng import as_rng, replication_rng, standardized_student
from .volatility import whole_sample_volatility

logger = logging.getLogger(__name__)

BURN_IN = DAYS_PER_YEAR
MAX_PERSISTENCE = 1 - 1e-6
NU_BOUNDS = (2.5, 50.0)
_START_ALPHAS = (0.02, 0.05, 0.1, 0.15, 0.2)
_START_BETAS = (0.7, 0.8, 0.9, 0.95, 0.97)


class GarchError(ValueError):
    """Invalid parameters or a failed calibration."""


class BoundaryWarning(UserWarning):
    """A fitted parameter ended on its search bound."""


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float
    nu: float | None = None  # None: Gaussian innovations
    delta_t: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise GarchError(f"omega must be positive, got {self.omega}")
        if not (self.alpha >= 0 and self.beta >= 0):
            raise GarchError("alpha and beta must be non-negative")
        if self.nu is not None and not self.nu > 2:
            raise GarchError(f"Student innovations need nu > 2, got {self.nu}")

    @property
    def innovation(self) -> str:
        return "gaussian" if self.nu is None else "student"

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    @property
    def stationary(self) -> bool:
        return self.persistence < 1

    @property
    def long_run_variance(self) -> float:
        if not self.stationary:
            raise GarchError("long-run variance is infinite for alpha + beta >= 1")
        return self.omega / (1 - self.persistence)

    @property
    def tau_cor(self) -> float:
        return tau_cor(self)

    def with_nu(self, nu: float | None) -> "GarchParams":
        return replace(self, nu=nu)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ResidualSeries:
    values: np.ndarray
    burn_in: int = BURN_IN

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class GarchFitReport:
    params: GarchParams
    student_params: GarchParams | None
    tau_cor_days: float
    normalized_log_likelihood: float
    student_normalized_log_likelihood: float | None
    mean_sim_volatility_pct: float | None
    student_mean_sim_volatility_pct: float | None
    historical_volatility_pct: float
    n_observations: int
    replications: int

    def to_dict(self) -> dict:
        return {
            "gaussian": self.params.to_dict(),
            "student": None if self.student_params is None else self.student_params.to_dict(),
            "alpha_plus_beta": self.params.persistence,
            "tau_cor_days": self.tau_cor_days,
            "normalized_log_likelihood": self.normalized_log_likelihood,
            "student_normalized_log_likelihood": self.student_normalized_log_likelihood,
            "mean_sim_volatility_pct": self.mean_sim_volatility_pct,
            "student_mean_sim_volatility_pct": self.student_mean_sim_volatility_pct,
            "historical_volatility_pct": self.historical_volatility_pct,
            "n_observations": self.n_observations,
            "replications": self.replications,
        }


def tau_cor(params: GarchParams, delta_t: float | None = None) -> float:
    """Decay time ``delta_t / |ln(alpha + beta)|`` of the squared-return autocorrelation."""
    s = params.persistence
    if not 0 < s < 1:
        raise GarchError(f"tau_cor needs 0 < alpha + beta < 1, got {s}")
    dt = params.delta_t if delta_t is None else delta_t
    return dt / abs(math.log(s))


def _innovations(rng: np.random.Generator, nu: float | None, size: int) -> np.ndarray:
    if nu is None:
        return rng.standard_normal(size)
    return standardized_student(rng, nu, size)


def simulate(params: GarchParams, n: int, seed=None, burn_in: int = 0,
             allow_nonstationary: bool = False) -> ReturnSeries:
    """Simulate ``n`` returns after discarding ``burn_in`` draws.

    The variance recursion starts at the long-run variance (at ``omega`` when
    a non-stationary path is explicitly allowed).
    """
    if not params.stationary and not allow_nonstationary:
        raise GarchError(f"non-stationary parameters (alpha + beta = {params.persistence})")
    if n < 1 or burn_in < 0:
        raise GarchError("n must be positive and burn_in non-negative")
    rng = as_rng(seed)
    z = _innovations(rng, params.nu, n + burn_in).tolist()
    omega, a, b = float(params.omega), float(params.alpha), float(params.beta)
    h = params.long_run_variance if params.stationary else omega
    out = [0.0] * len(z)
    sqrt = math.sqrt
    for i, e in enumerate(z):
        x = e * sqrt(h)
        out[i] = x
        h = omega + a * x * x + b * h
    return ReturnSeries(np.array(out[burn_in:]))


def _values(returns) -> np.ndarray:
    return np.asarray(getattr(returns, "values", returns), dtype=float)


def _seed_variance(x: np.ndarray, burn_in: int) -> float:
    # second moment about zero: the model has no drift term
    head = x[:burn_in] if burn_in >= 2 else x
    return float(np.mean(head * head))


def conditional_variance(returns, params: GarchParams, burn_in: int = BURN_IN) -> np.ndarray:
    """Filtered variance ``h[i]`` of ``returns[i]``; ``h[0]`` is the burn-in seed."""
    x = _values(returns)
    if x.size < burn_in + 2:
        raise GarchError(f"series of {x.size} points too short for burn-in {burn_in}")
    s0 = _seed_variance(x, burn_in)
    return _filter(x, params.omega, params.alpha, params.beta, s0)


def _filter(x: np.ndarray, omega: float, alpha: float, beta: float, s0: float) -> np.ndarray:
    u = omega + alpha * x[:-1] ** 2
    h = np.empty_like(x)
    h[0] = s0
    h[1:] = lfilter([1.0], [1.0, -beta], u, zi=[beta * s0])[0]
    return h


def residuals(returns, params: GarchParams, burn_in: int = BURN_IN) -> ResidualSeries:
    """Standardized residuals ``X / sigma`` after a one-year variance warm-up."""
    x = _values(returns)
    h = conditional_variance(x, params, burn_in)
    sl = slice(burn_in + 1, None)
    return ResidualSeries(x[sl] / np.sqrt(h[sl]), burn_in)


def _student_log_constant(nu: float) -> float:
    return (special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
            - 0.5 * math.log(math.pi * (nu - 2)))


def _student_logpdf(eps: np.ndarray, nu: float) -> np.ndarray:
    return _student_log_constant(nu) - (nu + 1) / 2 * np.log1p(eps * eps / (nu - 2))


def _log_densities(x: np.ndarray, h: np.ndarray, nu: float | None) -> np.ndarray:
    if nu is None:
        return -0.5 * (math.log(2 * math.pi) + np.log(h) + x * x / h)
    return _student_logpdf(x / np.sqrt(h), nu) - 0.5 * np.log(h)


def _check_nondegenerate(x: np.ndarray) -> None:
    if x.size == 0 or not np.any(x != x[0]) or float(np.mean(x * x)) == 0:
        raise GarchError("degenerate likelihood: constant return series")


def normalized_log_likelihood(returns, params: GarchParams, burn_in: int = BURN_IN) -> float:
    """Per-observation log-likelihood after the burn-in, under ``params.nu``'s law."""
    x = _values(returns)
    _check_nondegenerate(x)
    h = conditional_variance(x, params, burn_in)
    sl = slice(burn_in + 1, None)
    return float(np.mean(_log_densities(x[sl], h[sl], params.nu)))


def _unpack(theta, scale: float) -> tuple[float, float, float]:
    w, persistence, share = theta
    return float(w * scale), float(share * persistence), float((1 - share) * persistence)


def fit_gaussian(returns, burn_in: int = BURN_IN, min_obs: int = 2 * DAYS_PER_YEAR,
                 n_refine: int = 3) -> GarchParams:
    """Gaussian QMLE of (omega, alpha, beta) with a fixed multi-start grid.

    Optimizes over ``(omega / s, alpha + beta, alpha / (alpha + beta))`` on a
    box, so the stationarity constraint can never be violated.
    """
    x = _values(returns)
    if x.size < max(min_obs, burn_in + 2):
        raise GarchError(f"need at least {max(min_obs, burn_in + 2)} returns, got {x.size}")
    _check_nondegenerate(x)
    scale = float(np.mean(x * x))
    s0 = _seed_variance(x, burn_in)
    xs, sl = x, slice(burn_in + 1, None)
    log2pi = math.log(2 * math.pi)

    def objective(theta):
        omega, a, b = _unpack(theta, scale)
        h = _filter(xs, omega, a, b, s0)[sl]
        if not np.all(h > 0):
            return 1e10
        return 0.5 * float(np.mean(log2pi + np.log(h) + xs[sl] ** 2 / h))

    bounds = [(1e-8, 100.0), (1e-6, MAX_PERSISTENCE), (1e-8, 1 - 1e-8)]
    starts = []
    for a0 in _START_ALPHAS:
        for b0 in _START_BETAS:
            if a0 + b0 < 1 - 1e-3:
                theta = np.array([1 - a0 - b0, a0 + b0, a0 / (a0 + b0)])
                starts.append((objective(theta), len(starts), theta))
    starts.sort(key=lambda s: (s[0], s[1]))

    best = None
    for _, _, theta0 in starts[:n_refine]:
        res = optimize.minimize(objective, theta0, method="L-BFGS-B", bounds=bounds,
                                options={"ftol": 1e-12, "gtol": 1e-8, "maxiter": 500})
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None or best.fun >= 1e10:
        raise GarchError("GARCH optimization failed from every start")
    omega, a, b = _unpack(best.x, scale)
    return GarchParams(omega, a, b)


def fit_student_nu(eps, bounds: tuple[float, float] = NU_BOUNDS) -> float:
    """Degrees of freedom maximizing the standardized-Student likelihood of ``eps``."""
    eps = np.asarray(eps, dtype=float)

    def nll(nu):
        return -float(np.sum(_student_logpdf(eps, nu)))

    res = optimize.minimize_scalar(nll, bounds=bounds, method="bounded",
                                   options={"xatol": 1e-6})
    nu = float(res.x)
    if nu > bounds[1] - 1e-3 or nu < bounds[0] + 1e-3:
        warnings.warn(f"nu = {nu:.3f} is on the search bound {bounds}: flat likelihood",
                      BoundaryWarning, stacklevel=2)
    return nu


def fit_student_nu_on_losses(returns, gaussian_params: GarchParams, burn_in: int = BURN_IN,
                             min_losses: int = 100,
                             bounds: tuple[float, float] = NU_BOUNDS) -> float:
    """Fit ``nu`` on residuals of negative returns, holding (omega, alpha, beta) fixed."""
    eps = residuals(returns, gaussian_params.with_nu(None), burn_in).values
    neg = eps[eps < 0]
    if neg.size < min_losses:
        raise GarchError(f"only {neg.size} losses, need at least {min_losses}")
    return fit_student_nu(neg, bounds)


def fit_optimized_model(returns, burn_in: int = BURN_IN) -> GarchParams:
    """Gaussian-fitted (omega, alpha, beta) combined with a Student nu fitted on losses."""
    g = fit_gaussian(returns, burn_in)
    return g.with_nu(fit_student_nu_on_losses(returns, g, burn_in))


def mean_simulated_volatility(params: GarchParams, n: int, replications: int, master_seed: int,
                              k: int = 2, burn_in: int = 1000) -> float:
    """Average over replications of the whole-path annual realized volatility, in %."""
    vols = []
    for i in range(replications):
        path = simulate(params, n, replication_rng(master_seed, i), burn_in).values
        vols.append(whole_sample_volatility(path, k))
    return 100.0 * float(np.mean(vols))


def garch_fit_report(returns, replications: int = 100, master_seed: int = 0,
                     innovation_policy: str = "both", burn_in: int = BURN_IN) -> GarchFitReport:
    """Fit the Gaussian model and, unless ``innovation_policy == 'gaussian'``, the composite model."""
    if innovation_policy not in ("gaussian", "both"):
        raise ValueError(f"unknown innovation policy {innovation_policy!r}")
    x = _values(returns)
    g = fit_gaussian(x, burn_in)
    student = None
    if innovation_policy == "both":
        with warnings.catch_warnings():
            warnings.simplefilter("always", BoundaryWarning)
            student = g.with_nu(fit_student_nu_on_losses(x, g, burn_in))
    n = x.size
    sim_g = sim_s = None
    if replications > 0:
        sim_g = mean_simulated_volatility(g, n, replications, master_seed)
        if student is not None:
            sim_s = mean_simulated_volatility(student, n, replications, master_seed)
    return GarchFitReport(
        params=g,
        student_params=student,
        tau_cor_days=tau_cor(g),
        normalized_log_likelihood=normalized_log_likelihood(x, g, burn_in),
        student_normalized_log_likelihood=(
            None if student is None else normalized_log_likelihood(x, student, burn_in)),
        mean_sim_volatility_pct=sim_g,
        student_mean_sim_volatility_pct=sim_s,
        historical_volatility_pct=100.0 * whole_sample_volatility(x, 2),
        n_observations=n,
        replications=replications,
    )
