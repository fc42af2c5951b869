import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from procyclicality.cli import main
from procyclicality.config import SpecError, load_spec, parse_spec
from procyclicality.garch import GarchParams, simulate
from procyclicality.report import RunManifest, read_tsv, write_tsv

from conftest import write_prices

CONFIGS = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="module")
def garch_file(tmp_path_factory):
    x = simulate(GarchParams(1.70e-6, 0.099, 0.888), 8000, 31, 1000).values
    closes = 100 * np.exp(np.concatenate([[0.0], np.cumsum(x)]))
    return write_prices(tmp_path_factory.mktemp("data") / "usa.csv", closes)


def run(*args):
    res = CliRunner().invoke(main, [str(a) for a in args])
    return res


def test_sqp_command(garch_file, tmp_path):
    res = run("sqp", "--input", garch_file, "--p", 0, "--p", 2, "--out-dir", tmp_path)
    assert res.exit_code == 0, res.output
    summary = read_tsv(tmp_path / "sqp_summary.tsv")
    means = {(float(r["p"]), float(r["alpha"])): float(r["mean_sqp"]) for r in summary}
    assert means[(2.0, 0.95)] > means[(0.0, 0.95)]
    table = read_tsv(tmp_path / "table_sqp_means.tsv")
    assert "Ratio SQP(99%)/SQP(95%)" in table[0]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "sqp" and len(manifest["inputs"]) == 1


def test_procyclicality_command(garch_file, tmp_path):
    res = run("procyclicality", "--input", garch_file, "--alpha", 0.99, "--out-dir", tmp_path)
    assert res.exit_code == 0, res.output
    rows = read_tsv(tmp_path / "summary.tsv")
    assert -0.85 < float(rows[0]["pearson"]) < -0.3
    ratios = read_tsv(tmp_path / "ratios.tsv")
    assert len(ratios) == int(rows[0]["n_pairs"])


def test_multiple_inputs_average_column(garch_file, tmp_path):
    other = tmp_path / "other.csv"
    other.write_text(garch_file.read_text())
    res = run("procyclicality", "--input", garch_file, "--input", other, "--out-dir",
              tmp_path / "o")
    assert res.exit_code == 0, res.output
    table = read_tsv(tmp_path / "o" / "table_correlations.tsv")
    assert {"usa", "other", "AVG (± σ)"} <= set(table[0])
    assert table[0]["AVG (± σ)"].endswith("± 0.00")


def test_bins_command(garch_file, tmp_path):
    res = run("bins", "--input", garch_file, "--alpha", 0.99, "--out-dir", tmp_path)
    assert res.exit_code == 0, res.output
    rows = read_tsv(tmp_path / "bins.tsv")
    assert [int(r["bin"]) for r in rows] == [1, 2, 3, 4, 5]
    assert sum(int(r["count"]) for r in rows) > 300


def test_fit_garch_command(garch_file, tmp_path):
    res = run("fit-garch", "--input", garch_file, "--replications", 5, "--out-dir", tmp_path)
    assert res.exit_code == 0, res.output
    (row,) = read_tsv(tmp_path / "table_garch_fit.tsv")
    a, b = float(row["alpha"]), float(row["beta"])
    assert a + b < 1
    fit = json.loads((tmp_path / "garch_fit.json").read_text())["usa"]
    s = fit["gaussian"]["alpha"] + fit["gaussian"]["beta"]
    assert fit["tau_cor_days"] == pytest.approx(1 / abs(math.log(s)), rel=1e-12)
    # printed columns agree with the printed parameters within rounding
    assert float(row["tau_cor_days"]) == pytest.approx(1 / abs(math.log(a + b)), rel=0.1)


def test_residual_check_command(garch_file, tmp_path):
    res = run("residual-check", "--input", garch_file, "--out-dir", tmp_path)
    assert res.exit_code == 0, res.output
    (stats,) = read_tsv(tmp_path / "residual_stats.tsv")
    assert abs(float(stats["mean"])) < 0.05 and 0.95 <= float(stats["sd"]) <= 1.05
    assert len(read_tsv(tmp_path / "residual_acf.tsv")) == 100
    corr = read_tsv(tmp_path / "residual_correlations.tsv")
    assert {r["alpha"] for r in corr} == {"0.95", "0.975", "0.99", "0.995"}


def test_input_error_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("date,close\n2020-01-01,1\n2020-01-02,0\n")
    res = run("sqp", "--input", bad, "--out-dir", tmp_path / "o")
    assert res.exit_code == 2
    assert "row 2" in res.output


def test_numerical_error_exit_code(tmp_path):
    flat = write_prices(tmp_path / "flat.csv", [100.0] * 800)
    res = run("fit-garch", "--input", flat, "--out-dir", tmp_path / "o")
    assert res.exit_code == 3
    assert "degenerate" in res.output


def test_config_defaults_and_override(garch_file, tmp_path):
    cfg = tmp_path / "opts.yaml"
    cfg.write_text("alphas: [0.975]\np_values: [1]\n")
    res = run("sqp", "--config", cfg, "--input", garch_file, "--out-dir", tmp_path / "a")
    assert res.exit_code == 0, res.output
    rows = read_tsv(tmp_path / "a" / "sqp_summary.tsv")
    assert {(r["p"], r["alpha"]) for r in rows} == {("1.0", "0.975")}
    res = run("sqp", "--config", cfg, "--alpha", 0.9, "--input", garch_file,
              "--out-dir", tmp_path / "b")
    rows = read_tsv(tmp_path / "b" / "sqp_summary.tsv")
    assert {r["alpha"] for r in rows} == {"0.9"}


def test_inputs_not_mutated(garch_file, tmp_path):
    before = garch_file.read_bytes()
    run("procyclicality", "--input", garch_file, "--out-dir", tmp_path)
    assert garch_file.read_bytes() == before


def test_rerun_byte_identical(garch_file, tmp_path):
    for d in ("a", "b"):
        assert run("procyclicality", "--input", garch_file, "--k", 2,
                   "--out-dir", tmp_path / d).exit_code == 0
    for name in ("ratios.tsv", "summary.tsv", "summary.json", "table_correlations.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_experiment_command(tmp_path):
    args = ("experiment", CONFIGS / "iid_study.yaml", "--replications", 2, "--out-dir")
    assert run(*args, tmp_path / "a").exit_code == 0
    assert run(*args, tmp_path / "b", "--workers", 2).exit_code == 0
    for name in ("result.json", "table_experiment.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    table = read_tsv(tmp_path / "a" / "table_experiment.tsv")
    laws = {r["law"] for r in table}
    assert laws == {"normal", "student3", "student5"}
    bracketed = [r for r in table if r["law"] == "student3" and r["k"] == "2"]
    assert all(r["pearson"].startswith("(") for r in bracketed)
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 20240601


def test_experiment_single_replication(tmp_path):
    spec = tmp_path / "one.yaml"
    spec.write_text("replications: 1\npath_length: 1200\ngenerators: [{kind: normal}]\n")
    res = run("experiment", "--config", spec, "--out-dir", tmp_path / "o")
    assert res.exit_code == 0, res.output
    rows = read_tsv(tmp_path / "o" / "table_experiment.tsv")
    assert all(r["pearson_sd"] == "undefined" for r in rows)


def test_experiment_spec_errors(tmp_path):
    spec = tmp_path / "bad.yaml"
    spec.write_text("garch_params:\n  - {label: A, omega: 1.0e-6, alpha: 0.1, beta: 0.8}\n"
                    "  - {label: B, omega: 1.0e-6, alpha: 0.1, beta: 1.5}\n")
    res = run("experiment", spec)
    assert res.exit_code == 2
    assert "garch_params.1.beta" in res.output
    with pytest.raises(SpecError, match="replications"):
        parse_spec({"replications": 0, "generators": [{"kind": "normal"}]})
    with pytest.raises(SpecError, match="exactly one"):
        parse_spec({})
    with pytest.raises(SpecError, match="generators.0"):
        parse_spec({"generators": [{"kind": "student"}]})


def test_shipped_specs_parse():
    t6 = load_spec(CONFIGS / "iid_study.yaml")
    assert t6.kind == "iid" and t6.alphas == [0.95, 0.99, 0.995]
    t10 = load_spec(CONFIGS / "garch_study.yaml")
    assert len(t10.garch_params) == 11
    usa = [g for g in t10.garch_params if g.label == "USA"][0].build("gaussian")
    assert usa.nu is None and usa.persistence == pytest.approx(0.987)


def test_manifest_source_date_epoch(monkeypatch, tmp_path):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    m = RunManifest("x", {})
    assert m.timestamp == "1970-01-01T00:00:00Z"


def test_write_tsv_roundtrip(tmp_path):
    p = write_tsv(tmp_path / "t.tsv", [{"a": 1, "b": float("nan")}, {"a": 2, "b": 0.5}])
    assert read_tsv(p) == [{"a": "1", "b": ""}, {"a": "2", "b": "0.5"}]
    assert not [f for f in tmp_path.iterdir() if f.name.endswith(".tmp")]
