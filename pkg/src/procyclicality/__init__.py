"""Pro-cyclicality of rolling-window quantile risk measures.

Loads price series, estimates sample quantile processes, compares next-year
realized VaR with today's estimate, and relates the ratio to realized
volatility on data, iid samples and GARCH(1,1) simulations.
"""

from .data import (DataError, LossSeries, PriceSeries, ReturnSeries, WindowSpec,
                   load_price_series, log_returns, losses, resample_weekly, rolling_windows)
from .garch import (BoundaryWarning, GarchError, GarchParams, fit_gaussian, fit_student_nu,
                    garch_fit_report, residuals, simulate, tau_cor)
from .montecarlo import (Generator, McConfig, McResult, run_experiment, run_garch_experiment,
                         run_iid_experiment)
from .quantiles import SqpConfig, empirical_quantile, sqp_series, weighted_quantile
from .stats import (bin_ratios_by_volatility, correlate_ratio_volatility, fisher_ci,
                    lookforward_ratios, pearson, regress_logratio_on_volatility, rmse, spearman)
from .volatility import annualize, sample_volatility, volatility_series

__all__ = [
    "BoundaryWarning", "DataError", "GarchError", "GarchParams", "Generator", "LossSeries",
    "McConfig", "McResult", "PriceSeries", "ReturnSeries", "SqpConfig", "WindowSpec",
    "annualize", "bin_ratios_by_volatility", "correlate_ratio_volatility", "empirical_quantile",
    "fisher_ci", "fit_gaussian", "fit_student_nu", "garch_fit_report", "load_price_series",
    "log_returns", "lookforward_ratios", "losses", "pearson", "regress_logratio_on_volatility",
    "resample_weekly", "residuals", "rmse", "rolling_windows", "run_experiment",
    "run_garch_experiment", "run_iid_experiment", "sample_volatility", "simulate", "spearman",
    "sqp_series", "tau_cor", "volatility_series", "weighted_quantile",
]
