"""Output writers, run manifests and the table layouts used by the CLI.

Every file is written atomically (temp file in the target directory, then
rename). Result files carry no timestamps so that re-running a command with
the same inputs and seed gives byte-identical results; the timestamp lives
only in the manifest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MANIFEST_NAME = "manifest.json"


def _version() -> str:
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:
        return "0.0.0"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    version: str = field(default_factory=_version)
    timestamp: str = field(default_factory=_timestamp)
    outputs: list[str] = field(default_factory=list)

    @classmethod
    def for_inputs(cls, command: str, config: dict, paths: Iterable, seed=None) -> "RunManifest":
        return cls(command, config, {str(p): file_digest(p) for p in paths}, seed)

    def to_dict(self) -> dict:
        return asdict(self)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, (np.datetime64,)):
        return str(obj)
    return obj


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_tsv(path, rows: Sequence[dict], columns: Sequence[str] | None = None) -> Path:
    """Tidy tab-separated file, one row per dict; missing values are blank."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return atomic_write_text(path, buf.getvalue())


def read_tsv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def write_manifest(out_dir, manifest: RunManifest) -> Path:
    return write_json(Path(out_dir) / MANIFEST_NAME, manifest.to_dict())


# formatting used in the table layouts

def fmt_pct(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{100 * x:.2f}"


def fmt_num(x, digits: int = 2) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.{digits}f}"


def mean_sd(values) -> tuple[float, float]:
    """Mean and sample sd of the finite values; sd is nan with fewer than two."""
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else float("nan")


def fmt_avg(values, scale: float = 1.0, digits: int = 2) -> str:
    m, s = mean_sd(values)
    if math.isnan(m):
        return ""
    if math.isnan(s):
        return f"{scale * m:.{digits}f}"
    return f"{scale * m:.{digits}f} ± {scale * s:.{digits}f}"


def wide_table(rows: Sequence[dict], row_keys: Sequence[str], column_key: str, value_key: str,
               columns: Sequence[str], formatter=fmt_num, avg: bool = True,
               avg_scale: float = 1.0) -> list[dict]:
    """Pivot tidy rows into a wide publication table with an optional ``AVG (± σ)`` column."""
    grouped: dict[tuple, dict] = {}
    for r in rows:
        key = tuple(r[k] for k in row_keys)
        grouped.setdefault(key, {})[r[column_key]] = r[value_key]
    out = []
    for key, vals in grouped.items():
        row = dict(zip(row_keys, key))
        for c in columns:
            row[c] = formatter(vals.get(c))
        if avg and len(columns) > 1:
            row["AVG (± σ)"] = fmt_avg([vals.get(c) for c in columns], avg_scale)
        out.append(row)
    return out


def significance_mark(level) -> str:
    from .montecarlo import SIGNIFICANCE_MARKS
    return SIGNIFICANCE_MARKS.get(level, "n.s.")


def mc_table(result_dict: dict) -> list[dict]:
    """Rows of the iid Monte Carlo table: one per (law, alpha, k) with marks."""
    rows = []
    for c in result_dict["cells"]:
        def show(which):
            m = c[f"{which}_mean"]
            if m is None:
                return ""
            text = f"{m:.2f}{significance_mark(c[f'{which}_significance'])}"
            return f"({text})" if c.get("bracketed") else text
        sd = c["pearson_sd"]
        rows.append({
            "law": c["generator"], "alpha": c["alpha"], "p": c["p"], "k": c["k"],
            "T_years": c["T_years"], "replications": c["replications"],
            "pearson": show("pearson"), "pearson_sd": "undefined" if sd is None else f"{sd:.2f}",
            "spearman": show("spearman"),
        })
    return rows
