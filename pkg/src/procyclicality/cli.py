"""Command-line front end: ingest, analyze, report.

Exit status is 0 on success, 2 for input errors (bad files, flags or spec)
and 3 for numerical failures (degenerate data, failed fits).
"""

from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import report
from .config import SpecError, load_spec
from .data import (DAYS_PER_MONTH, DAYS_PER_YEAR, WEEKS_PER_YEAR, DataError, WindowSpec,
                   load_price_series, log_returns, losses, resample_weekly)
from .diagnostics import RESIDUAL_ALPHAS, residual_check
from .garch import GarchError, garch_fit_report
from .montecarlo import run_experiment, run_garch_experiment
from .quantiles import SqpConfig, sqp_series
from .stats import correlate_ratio_volatility

logger = logging.getLogger("procyclicality")

EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _load_config(ctx, param, value):
    # option defaults from a YAML mapping; explicit flags still win
    if value:
        try:
            data = yaml.safe_load(Path(value).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as err:
            raise click.BadParameter(str(err), ctx, param)
        if not isinstance(data, dict):
            raise click.BadParameter("config must be a mapping", ctx, param)
        ctx.default_map = {k.replace("-", "_"): v for k, v in data.items()}
    return value


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DataError, SpecError, FileNotFoundError, IsADirectoryError) as err:
            click.echo(f"input error: {err}", err=True)
            sys.exit(EXIT_INPUT)
        except (GarchError, ValueError, ArithmeticError, np.linalg.LinAlgError) as err:
            click.echo(f"numerical failure: {err}", err=True)
            sys.exit(EXIT_NUMERIC)
    return wrapper


def input_option(f):
    return click.option("--input", "inputs", multiple=True, required=True,
                        type=click.Path(exists=True, dir_okay=False),
                        help="Price file (date, close); repeat for several indices.")(f)


def common_options(f):
    f = click.option("--config", type=click.Path(exists=True, dir_okay=False),
                     callback=_load_config, is_eager=True, expose_value=False,
                     help="YAML file of option defaults.")(f)
    f = click.option("--out-dir", type=click.Path(file_okay=False), default="out",
                     show_default=True)(f)
    f = click.option("--frequency", type=click.Choice(["daily", "weekly"]), default="daily",
                     show_default=True, help="Weekly resamples every 5th close.")(f)
    f = click.option("--step-days", type=int, default=None,
                     help="Anchor step in observations [default: 21 daily, 4 weekly].")(f)
    f = click.option("--date-column", default="date", show_default=True)(f)
    f = click.option("--close-column", default="close", show_default=True)(f)
    return f


def grid_options(f):
    f = click.option("--alpha", "alphas", type=float, multiple=True, default=(0.95, 0.99),
                     show_default=True)(f)
    f = click.option("--p", "p_values", type=float, multiple=True, default=(0.0,),
                     show_default=True)(f)
    f = click.option("--T-years", "T_years", type=float, multiple=True, default=(1.0,),
                     show_default=True)(f)
    return f


def k_option(f):
    return click.option("--k", "k_values", type=click.IntRange(1, 2), multiple=True,
                        default=(1,), show_default=True,
                        help="Volatility estimator: 1 = MAD, 2 = std.")(f)


def seed_option(f):
    return click.option("--seed", type=int, default=0, show_default=True)(f)


def _periods(frequency: str) -> int:
    return WEEKS_PER_YEAR if frequency == "weekly" else DAYS_PER_YEAR


def _step(step_days, frequency: str) -> int:
    if step_days is None:
        return 4 if frequency == "weekly" else DAYS_PER_MONTH
    if step_days < 1:
        raise DataError("--step-days must be >= 1")
    return step_days


def _read_returns(path, frequency, date_column, close_column):
    prices = load_price_series(path, date_column, close_column)
    if frequency == "weekly":
        prices = resample_weekly(prices)
    return log_returns(prices)


def _label(path) -> str:
    return Path(path).stem


def _finish(out_dir, command, config, inputs, seed, written):
    manifest = report.RunManifest.for_inputs(command, config, inputs, seed)
    manifest.outputs = sorted(Path(p).name for p in written)
    report.write_manifest(out_dir, manifest)
    click.echo(f"wrote {len(written)} files and {report.MANIFEST_NAME} to {out_dir}")


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    """Pro-cyclicality analysis of rolling-window risk measures."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("sqp")
@input_option
@common_options
@grid_options
@_handle_errors
def cmd_sqp(inputs, out_dir, frequency, step_days, date_column, close_column, alphas,
            p_values, T_years):
    """Rolling SQP series and their whole-sample means."""
    step = _step(step_days, frequency)
    periods = _periods(frequency)
    series_rows, summary = [], []
    for path in inputs:
        ret = _read_returns(path, frequency, date_column, close_column)
        loss = losses(ret)
        for T in T_years:
            spec = WindowSpec.years(T, step, periods)
            for p in p_values:
                for a in alphas:
                    est = sqp_series(loss, SqpConfig(p, a, spec))
                    for e in est:
                        series_rows.append({
                            "input": _label(path), "p": p, "alpha": a, "T_years": T,
                            "anchor": e.anchor,
                            "date": "" if e.anchor_date is None else str(e.anchor_date),
                            "sqp": e.value})
                    summary.append({"input": _label(path), "p": p, "alpha": a, "T_years": T,
                                    "n_windows": len(est),
                                    "mean_sqp": float(np.mean([e.value for e in est]))})
    out = Path(out_dir)
    written = [
        report.write_tsv(out / "sqp_series.tsv", series_rows),
        report.write_tsv(out / "sqp_summary.tsv", summary),
        report.write_tsv(out / "table_sqp_means.tsv", _sqp_table(summary, alphas)),
    ]
    _finish(out, "sqp", {"alphas": alphas, "p_values": p_values, "T_years": T_years,
                         "step": step, "frequency": frequency}, inputs, None, written)


def _sqp_table(summary, alphas):
    """Mean SQP in % per (input, T, p) with the high/low threshold ratio."""
    rows = {}
    for s in summary:
        key = (s["input"], s["T_years"], s["p"])
        rows.setdefault(key, {})[s["alpha"]] = s["mean_sqp"]
    lo, hi = min(alphas), max(alphas)
    out = []
    for (name, T, p), vals in rows.items():
        row = {"input": name, "T_years": T, "p": p}
        for a in sorted(vals):
            row[f"SQP({100 * a:g}%)"] = report.fmt_pct(vals[a])
        if lo != hi and vals.get(lo):
            row[f"Ratio SQP({100 * hi:g}%)/SQP({100 * lo:g}%)"] = report.fmt_num(vals[hi] / vals[lo])
        out.append(row)
    return out


def _analyses(inputs, frequency, step, date_column, close_column, alphas, p_values, T_years,
              k_values, n_bins):
    periods = _periods(frequency)
    for path in inputs:
        ret = _read_returns(path, frequency, date_column, close_column)
        loss = losses(ret)
        for T in T_years:
            for k in k_values:
                for p in p_values:
                    for a in alphas:
                        yield path, correlate_ratio_volatility(
                            loss, ret, p, a, T, k, step, n_bins, periods)


@main.command("procyclicality")
@input_option
@common_options
@grid_options
@k_option
@_handle_errors
def cmd_procyclicality(inputs, out_dir, frequency, step_days, date_column, close_column, alphas,
                       p_values, T_years, k_values):
    """Correlation of look-forward SQP ratios with realized volatility."""
    step = _step(step_days, frequency)
    ratio_rows, summaries = [], []
    for path, rep in _analyses(inputs, frequency, step, date_column, close_column, alphas,
                               p_values, T_years, k_values, n_bins=5):
        name = _label(path)
        for i in range(len(rep.ratio)):
            ratio_rows.append({
                "input": name, "p": rep.p, "alpha": rep.alpha, "T_years": rep.T_years,
                "k": rep.k, "anchor": int(rep.anchors[i]),
                "date": str(rep.anchor_dates[i]) if rep.anchor_dates[i] is not None else "",
                "ratio": float(rep.ratio[i]), "log_ratio": float(rep.log_ratio[i]),
                "volatility": float(rep.volatility[i])})
        summaries.append({"input": name, **rep.summary()})
    out = Path(out_dir)
    scalar = [{k: v for k, v in s.items() if not isinstance(v, list)} for s in summaries]
    tidy = [{**{k: s[k] for k in ("input", "p", "alpha", "T_years", "k")},
             "statistic": stat, "value": s[stat]}
            for s in summaries for stat in ("pearson", "spearman", "rmse", "mean_ratio")]
    names = list(dict.fromkeys(_label(p) for p in inputs))
    written = [
        report.write_tsv(out / "ratios.tsv", ratio_rows),
        report.write_tsv(out / "summary.tsv", scalar),
        report.write_json(out / "summary.json", summaries),
        report.write_tsv(out / "table_correlations.tsv", report.wide_table(
            tidy, ("statistic", "p", "alpha", "T_years", "k"), "input", "value", names)),
    ]
    _finish(out, "procyclicality", {"alphas": alphas, "p_values": p_values,
                                    "T_years": T_years, "k_values": k_values, "step": step,
                                    "frequency": frequency}, inputs, None, written)


@main.command("bins")
@input_option
@common_options
@grid_options
@k_option
@click.option("--n-bins", type=click.IntRange(1), default=5, show_default=True)
@_handle_errors
def cmd_bins(inputs, out_dir, frequency, step_days, date_column, close_column, alphas,
             p_values, T_years, k_values, n_bins):
    """Mean look-forward ratio within uniform volatility bins."""
    step = _step(step_days, frequency)
    rows = []
    for path, rep in _analyses(inputs, frequency, step, date_column, close_column, alphas,
                               p_values, T_years, k_values, n_bins):
        if rep.bins is None:
            raise ValueError(f"{path}: too few pairs or constant volatility for {n_bins} bins")
        for b in rep.bins.as_rows():
            rows.append({"input": _label(path), "p": rep.p, "alpha": rep.alpha,
                         "T_years": rep.T_years, "k": rep.k, **b})
    out = Path(out_dir)
    names = list(dict.fromkeys(_label(p) for p in inputs))
    written = [
        report.write_tsv(out / "bins.tsv", rows),
        report.write_tsv(out / "table_bins.tsv", report.wide_table(
            rows, ("p", "alpha", "T_years", "k", "bin"), "input", "mean_ratio", names)),
    ]
    _finish(out, "bins", {"alphas": alphas, "p_values": p_values, "T_years": T_years,
                          "k_values": k_values, "n_bins": n_bins, "step": step,
                          "frequency": frequency}, inputs, None, written)


@main.command("fit-garch")
@input_option
@common_options
@seed_option
@click.option("--innovation-policy", type=click.Choice(["both", "gaussian"]), default="both",
              show_default=True,
              help="'both' adds Student innovations fitted on the losses.")
@click.option("--replications", type=click.IntRange(0), default=100, show_default=True,
              help="Simulated paths for the mean-volatility check (0 skips it).")
@_handle_errors
def cmd_fit_garch(inputs, out_dir, frequency, step_days, date_column, close_column, seed,
                  innovation_policy, replications):
    """Fit GARCH(1,1) and report tau_cor, likelihoods and simulated volatility."""
    fits, rows = {}, []
    for path in inputs:
        ret = _read_returns(path, frequency, date_column, close_column)
        rep = garch_fit_report(ret, replications, seed, innovation_policy)
        d = rep.to_dict()
        fits[_label(path)] = d
        g = rep.params
        rows.append({
            "input": _label(path),
            "omega_e6": report.fmt_num(g.omega * 1e6),
            "alpha": report.fmt_num(g.alpha, 3), "beta": report.fmt_num(g.beta, 3),
            "alpha_plus_beta": report.fmt_num(g.persistence, 3),
            "tau_cor_days": report.fmt_num(rep.tau_cor_days, 0),
            "nll_gaussian": report.fmt_num(rep.normalized_log_likelihood, 3),
            "nu": report.fmt_num(d["student"]["nu"]) if d["student"] else "",
            "nll_student": report.fmt_num(rep.student_normalized_log_likelihood, 3),
            "vol_sim_gaussian_pct": report.fmt_num(rep.mean_sim_volatility_pct),
            "vol_sim_student_pct": report.fmt_num(rep.student_mean_sim_volatility_pct),
            "vol_hist_pct": report.fmt_num(rep.historical_volatility_pct),
        })
    out = Path(out_dir)
    written = [report.write_json(out / "garch_fit.json", fits),
               report.write_tsv(out / "table_garch_fit.tsv", rows)]
    _finish(out, "fit-garch", {"innovation_policy": innovation_policy,
                               "replications": replications, "frequency": frequency},
            inputs, seed, written)


@main.command("residual-check")
@input_option
@common_options
@click.option("--alpha", "alphas", type=float, multiple=True, default=RESIDUAL_ALPHAS,
              show_default=True)
@k_option
@click.option("--max-lag", type=click.IntRange(1), default=100, show_default=True)
@_handle_errors
def cmd_residual_check(inputs, out_dir, frequency, step_days, date_column, close_column,
                       alphas, k_values, max_lag):
    """Residual diagnostics of a Gaussian GARCH fit against iid references."""
    step = _step(step_days, frequency)
    stats_rows, acf_rows, corr_rows = [], [], []
    for path in inputs:
        name = _label(path)
        ret = _read_returns(path, frequency, date_column, close_column)
        for k in k_values:
            rep = residual_check(ret, alphas=alphas, max_lag=max_lag, step=step, k=k)
            if k == k_values[0]:
                stats_rows.append({"input": name, "mean": report.fmt_num(rep.mean, 3),
                                   "sd": report.fmt_num(rep.sd, 3), "n": rep.n,
                                   "acf_inside_band": report.fmt_num(rep.acf_inside_fraction)})
                acf_rows += [{"input": name, "lag": lag + 1, "acf_abs_residual": float(v),
                              "band": rep.acf_band} for lag, v in enumerate(rep.abs_acf)]
            for c in rep.checks:
                for law, (center, lo, hi) in c.intervals.items():
                    corr_rows.append({
                        "input": name, "k": k, "alpha": c.alpha,
                        "data_correlation": c.data_correlation,
                        "residual_correlation": c.residual_correlation,
                        "n_pairs": c.n_pairs, "n_effective": c.n_effective, "law": law,
                        "iid_center": center, "ci_lo": lo, "ci_hi": hi,
                        "residual_inside": int(lo <= c.residual_correlation <= hi)})
    out = Path(out_dir)
    written = [report.write_tsv(out / "residual_stats.tsv", stats_rows),
               report.write_tsv(out / "residual_acf.tsv", acf_rows),
               report.write_tsv(out / "residual_correlations.tsv", corr_rows)]
    _finish(out, "residual-check", {"alphas": alphas, "k_values": k_values,
                                    "max_lag": max_lag, "step": step, "frequency": frequency},
            inputs, None, written)


@main.command("experiment")
@click.argument("spec_file", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="Experiment spec (alternative to SPEC_FILE).")
@click.option("--out-dir", type=click.Path(file_okay=False), default="out", show_default=True)
@click.option("--seed", type=int, default=None, help="Override the spec's master seed.")
@click.option("--replications", type=click.IntRange(1), default=None,
              help="Override the spec's replication count.")
@click.option("--workers", type=click.IntRange(1), default=None)
@_handle_errors
def cmd_experiment(spec_file, config_file, out_dir, seed, replications, workers):
    """Run a Monte Carlo study described by a YAML spec."""
    path = spec_file or config_file
    if path is None:
        raise SpecError("give a spec file (argument or --config)")
    spec = load_spec(path)
    overrides = {k: v for k, v in (("master_seed", seed), ("replications", replications),
                                   ("workers", workers)) if v is not None}
    if overrides:
        spec = spec.model_copy(update=overrides)
    out = Path(out_dir)
    if spec.kind == "iid":
        cells = []
        for j, g in enumerate(spec.generators):
            cells += run_experiment(spec.mc_config(g.build(), seed_offset=j)).to_dict()["cells"]
        result = {"cells": cells}
        table = report.mc_table(result)
    else:
        params = [g.build(spec.innovation) for g in spec.garch_params]
        lengths = [g.path_length or spec.path_length for g in spec.garch_params]
        res = run_garch_experiment(params, spec.mc_config(), [g.label for g in spec.garch_params],
                                   lengths)
        result = res.to_dict()
        table = _garch_table(result)
    written = [report.write_json(out / "result.json", result),
               report.write_tsv(out / "table_experiment.tsv", table)]
    # workers never changes results, so it stays out of the recorded config
    cfg = spec.model_dump(exclude={"workers"})
    _finish(out, "experiment", cfg, [path], spec.master_seed, written)


def _garch_table(result):
    rows = []
    for s in result["parameter_sets"]:
        for c in s["cells"]:
            rows.append({"set": s["label"], "alpha": c["alpha"], "p": c["p"], "k": c["k"],
                         "T_years": c["T_years"], "replications": c["replications"],
                         "pearson": report.fmt_num(c["pearson_mean"]),
                         "spearman": report.fmt_num(c["spearman_mean"])})
    for a in result["average"]:
        def avg(which):
            m, s = a[f"{which}_mean"], a[f"{which}_sd_across_sets"]
            return report.fmt_num(m) + ("" if s is None else f" ± {s:.2f}")
        rows.append({"set": "AVG (± σ)", "alpha": a["alpha"], "p": a["p"], "k": a["k"],
                     "T_years": a["T_years"], "replications": "",
                     "pearson": avg("pearson"), "spearman": avg("spearman")})
    return rows


if __name__ == "__main__":
    main()
