"""Reading price data and writing run outputs.

Output formats
--------------
``results.txt``
    One ``key=value`` per line, floats in ``repr`` form so they parse back
    exactly, keys in insertion order.  Missing values are written ``nan``.
``report.txt``
    Human-readable tables.
``stockout.csv``, ``storage.csv``
    ``date,value`` per observation: filtered stock-out probability and
    filtered median implied storage.
``config.txt``
    The resolved run configuration, ``key = value`` per line.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
import os
import warnings
from pathlib import Path

import numpy as np

from .model import PARAM_NAMES, PriceSeries


class DataError(ValueError):
    """Malformed or unusable input data."""


def _parse_date(text: str):
    text = text.strip()
    if len(text) == 7:  # YYYY-MM
        text += "-01"
    elif len(text) == 4:  # YYYY
        text += "-01-01"
    return dt.date.fromisoformat(text)


def _parse_period(text: str) -> int:
    return int(text.strip())


def _gap(d0: dt.date, d1: dt.date, periods_per_year: int) -> bool:
    if periods_per_year == 12:
        return (d1.year - d0.year) * 12 + d1.month - d0.month != 1
    if periods_per_year == 52:
        return (d1 - d0).days != 7
    if periods_per_year == 1:
        return d1.year - d0.year != 1
    return False


def load_prices(path, periods_per_year: int = 12, normalize: bool = True) -> PriceSeries:
    """Read a ``date,price`` CSV into a :class:`PriceSeries`.

    Dates are ISO (``YYYY-MM-DD``; ``YYYY-MM`` and ``YYYY`` are also
    accepted) and must increase.  A ``period,price`` header instead takes
    integer period numbers, as written for simulated series.  Irregular
    spacing and non-positive prices give warnings.  With ``normalize`` the series is scaled to unit mean and
    the divisor recorded.

    Raises
    ------
    DataError
        On an empty file, a bad header or a malformed row; the message names
        the line number.
    """
    path = Path(path)
    dates, values = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if header is None:
                header = [c.strip().lower() for c in row]
                if header[:2] not in (["date", "price"], ["period", "price"]):
                    raise DataError(f"{path}:{line}: expected header 'date,price', got {row!r}")
                parse = _parse_date if header[0] == "date" else _parse_period
                gap = (lambda d0, d1: _gap(d0, d1, periods_per_year)) if header[0] == "date" \
                    else (lambda d0, d1: d1 - d0 != 1)
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{line}: expected two fields, got {row!r}")
            try:
                d = parse(row[0])
            except ValueError:
                raise DataError(f"{path}:{line}: bad date {row[0]!r}") from None
            try:
                v = float(row[1])
            except ValueError:
                raise DataError(f"{path}:{line}: non-numeric price {row[1]!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}:{line}: non-finite price {row[1]!r}")
            if dates and d <= dates[-1]:
                raise DataError(f"{path}:{line}: date {row[0]} is not after the previous row")
            if dates and gap(dates[-1], d):
                warnings.warn(f"{path}:{line}: irregular spacing between {dates[-1]} and {d}")
            if v <= 0.0:
                warnings.warn(f"{path}:{line}: non-positive price {v}")
            dates.append(d)
            values.append(v)
    if not values:
        raise DataError(f"{path}: no data rows")
    if len(values) < 2:
        raise DataError(f"{path}: need at least two prices, found {len(values)}")
    s = PriceSeries(np.array(values), periods_per_year,
                    dates=tuple(str(d) if isinstance(d, int) else d.isoformat() for d in dates))
    if not normalize:
        return s
    try:
        return s.normalized()
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_prices(path, series: PriceSeries, raw: bool = False) -> None:
    values = series.raw() if raw else series.values
    key = "date" if series.dates is not None else "period"
    write_series_csv(path, series_dates(series), values, header=(key, "price"))


def series_dates(series: PriceSeries) -> list:
    """The series' dates, or period numbers ``1..T`` when it has none."""
    if series.dates is not None:
        return list(series.dates)
    return [str(i + 1) for i in range(len(series))]


def write_series_csv(path, dates, values, header=("date", "value")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for d, v in zip(dates, values):
            w.writerow([d, repr(float(v))])


# --- key/value files -------------------------------------------------------

def parse_config(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment.

    Raises
    ------
    DataError
        For a line without ``=``, naming the line number.
    """
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{n}: expected 'key = value', got {line!r}")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def write_config(path, cfg: dict) -> None:
    with open(path, "w") as fh:
        for k in sorted(cfg):
            v = cfg[k]
            fh.write(f"{k} = {'' if v is None else _fmt(v)}\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return "nan"
    return str(v)


def write_results(path, items: dict) -> None:
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k}={_fmt(v)}\n")


def read_results(path) -> dict:
    """Parse a results file; numeric values come back as ``int`` or ``float``."""
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or "=" not in line:
                continue
            k, v = line.split("=", 1)
            out[k] = _parse_value(v)
    return out


def _parse_value(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    if v in ("true", "false"):
        return v == "true"
    return v


# --- estimation report -------------------------------------------------------

def report_items(report) -> dict:
    """Flatten an :class:`~storagesml.estimation.EstimationReport` to key/value pairs."""
    items = {"method": report.method, "seed": report.seed}
    for name in PARAM_NAMES:
        items[name] = float(getattr(report.params, name))
    items["r"] = report.params.r
    items["loglik"] = report.loglik
    for name, v in (report.fixed or {}).items():
        items[f"fixed.{name}"] = float(v)
    opt = report.optimizer
    if opt is not None:
        items.update({"optimizer.converged": opt.converged, "optimizer.n_evals": opt.n_evals,
                      "optimizer.n_iter": opt.n_iter, "optimizer.diameter": opt.diameter})
    for label, d in (("mc_std", report.mc_std), ("bootstrap_se", report.bootstrap_se)):
        for name in PARAM_NAMES + (("loglik",) if label == "mc_std" else ()):
            items[f"{label}.{name}"] = float("nan") if d is None else d.get(name, float("nan"))
    diag = report.diagnostics
    keys = ("mean", "sd", "skewness", "excess_kurtosis", "ac1", "jarque_bera_p", "ks_p",
            "ljung_box_p", "arch_p")
    for k in keys:
        items[f"residuals.{k}"] = float("nan") if diag is None else getattr(diag, k)
    items["residuals.degenerate"] = False if diag is None else diag.degenerate
    if report.series is not None:
        items["T"] = len(report.series)
        items["normalization_factor"] = report.series.normalization_factor
    return items


def _num(v, fmt="{:.4f}"):
    try:
        v = float(v)
    except (TypeError, ValueError):
        return str(v)
    return "-" if math.isnan(v) else fmt.format(v)


def format_report(report) -> str:
    rows = [f"Storage model, {report.method.upper()} estimates", ""]
    head = f"{'':<18}" + "".join(f"{n:>12}" for n in PARAM_NAMES) + f"{'loglik':>12}"
    rows.append(head)
    rows.append(f"{'Estimate':<18}" + "".join(
        f"{_num(getattr(report.params, n)):>12}" for n in PARAM_NAMES) + f"{_num(report.loglik, '{:.2f}'):>12}")
    for label, d in (("MC Std.Dev", report.mc_std), ("Statistical S.E.", report.bootstrap_se)):
        vals = [d.get(n) if d else None for n in PARAM_NAMES]
        ll = d.get("loglik") if (d and label == "MC Std.Dev") else None
        rows.append(f"{label:<18}" + "".join(f"{_num(v):>12}" for v in vals)
                    + f"{_num(ll):>12}")
    if report.fixed:
        rows.append("")
        rows.append("fixed: " + ", ".join(f"{k}={v}" for k, v in report.fixed.items()))
    opt = report.optimizer
    if opt is not None:
        rows += ["", f"optimizer: {opt.n_evals} evaluations, converged={opt.converged}, "
                     f"simplex diameter {opt.diameter:.2e}"]
    rows += ["", "Generalized residual diagnostics"]
    diag = report.diagnostics
    if diag is None:
        rows.append("  (not available)")
    else:
        for k in ("mean", "sd", "skewness", "excess_kurtosis", "ac1"):
            rows.append(f"  {k:<22}{_num(getattr(diag, k)):>10}")
        for k, lab in (("jarque_bera_p", "Jarque-Bera p"), ("ks_p", "Kolmogorov-Smirnov p"),
                       ("ljung_box_p", "Ljung-Box(20) p"), ("arch_p", "ARCH p")):
            rows.append(f"  {lab:<22}{_num(getattr(diag, k)):>10}")
    return "\n".join(rows) + "\n"


def emit_report(report, directory, extra: dict | None = None) -> list:
    """Write results, report and figure-data files for an estimation.

    Returns the written paths.  Without filter output the figure CSVs hold
    ``nan`` values, one row per observation.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    items = report_items(report)
    if extra:
        items.update(extra)
    paths = [d / "results.txt", d / "report.txt", d / "stockout.csv", d / "storage.csv"]
    write_results(paths[0], items)
    paths[1].write_text(format_report(report))
    if report.series is not None:
        dates = series_dates(report.series)
        out = report.filter_output
        T = len(report.series)
        so = out.stockout_prob if out is not None and out.stockout_prob is not None else np.full(T, np.nan)
        st = out.storage if out is not None and out.storage is not None else np.full(T, np.nan)
        write_series_csv(paths[2], dates, so)
        write_series_csv(paths[3], dates, st)
    else:
        paths = paths[:2]
    return [str(p) for p in paths]


def ensure_dir(path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {p}: {exc}") from exc
    if not os.access(p, os.W_OK):
        raise OSError(f"output directory {p} is not writable")
    return p
