"""Command-line interface.

Usage::

    storagesml COMMAND [--config FILE] [options]

Commands: ``solve``, ``simulate``, ``estimate``, ``bootstrap``,
``experiment``, ``compare``, ``diagnose``.  Settings come from built-in
defaults, then the ``key = value`` config file, then command-line flags.
Every run writes the resolved settings to ``<out>/config.txt``; passing that
file back with ``--config`` repeats the run.

Exit status: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import io as sio
from .benchmarks import FITTERS
from .cml import CmlConfig
from .estimation import (ExperimentSpec, estimate, lr_bootstrap_compare, monte_carlo_std,
                         parametric_bootstrap, run_experiment)
from .filter import FilterConfig, pf_loglik
from .diagnostics import residual_diagnostics
from .model import PARAM_NAMES, PRESETS, ShockDistribution, StructuralParams, period_rate
from .simulate import price_stats, simulate_dgp
from .solver import GridConfig, dump_table, solve_price_function, threshold_price

log = logging.getLogger("storagesml")

COMMANDS = ("solve", "simulate", "estimate", "bootstrap", "experiment", "compare", "diagnose")
EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 2, 3, 4
DEFAULT_PRESET = {12: "monthly", 52: "weekly", 1: "yearly"}


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_float(v):
    return None if v in (None, "", "none") else float(v)


def _opt_str(v):
    return None if v in (None, "", "none") else str(v)


# name: (type, default, help)
SETTINGS = {
    "command": (str, None, "command to run (also accepted positionally)"),
    "seed": (int, 0, "root random seed"),
    "out": (str, "out", "output directory"),
    "input": (_opt_str, None, "price CSV with header 'date,price'"),
    "frequency": (int, 12, "periods per year: 1, 12 or 52"),
    "normalize": (_bool, True, "scale input prices to unit mean"),
    "annual_rate": (float, 0.05, "annual real interest rate"),
    "preset": (_opt_str, None, "parameter preset: monthly, weekly or yearly"),
    "rho": (_opt_float, None, "shock autocorrelation (overrides the preset)"),
    "a": (_opt_float, None, "demand intercept (overrides the preset)"),
    "b": (_opt_float, None, "demand slope (overrides the preset)"),
    "delta": (_opt_float, None, "depreciation rate (overrides the preset)"),
    "mz": (int, 64, "shock grid points"),
    "mx1": (int, 128, "fine stock grid points"),
    "mx2": (int, 128, "coarse stock grid points"),
    "iterations": (int, 400, "price-function iterations"),
    "particles": (int, 4096, "particle count"),
    "n_grid": (int, 1024, "resampling grid size"),
    "quad_order": (int, 16, "Gauss-Hermite order"),
    "cml_ni": (int, 50000, "composite likelihood: retained simulated draws"),
    "cml_nt": (int, 32, "composite likelihood: thinning interval"),
    "cml_ng": (int, 128, "composite likelihood: shock grid size"),
    "method": (str, "sml", "estimator: sml or cml"),
    "methods": (str, "sml", "experiment estimators, comma separated"),
    "fix": (str, "", "fixed parameters, e.g. 'rho=0'"),
    "max_evals": (int, 2000, "optimizer evaluation budget"),
    "T": (int, 500, "simulated series length"),
    "replicas": (int, 5, "bootstrap / experiment replicas"),
    "mc_repeats": (int, 0, "repeated estimations for Monte Carlo standard deviations"),
    "shocks": (str, "gaussian", "price innovation law: gaussian or tN"),
    "competitors": (str, "ar1,garch,msar1", "benchmark models, comma separated"),
    "grid_factor": (int, 1, "diagnose: also evaluate with grid sizes multiplied by this"),
    "reestimate": (_bool, False, "diagnose: re-estimate on the scaled grid"),
    "threads": (int, 1, "worker cap (computation is single-threaded)"),
}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="storagesml", description=__doc__.split("\n\n")[0])
    ap.add_argument("cmd", nargs="?", choices=COMMANDS, help="command")
    ap.add_argument("--config", help="key = value settings file")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    for name, (_, default, hlp) in SETTINGS.items():
        if name == "command":
            continue
        ap.add_argument("--" + name.replace("_", "-"), dest=name, default=None,
                        help=f"{hlp} (default: {default})")
    return ap


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags."""
    raw = {k: d for k, (_, d, _) in SETTINGS.items()}
    if args.config:
        filecfg = sio.parse_config(args.config)
        unknown = set(filecfg) - set(SETTINGS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        raw.update(filecfg)
    for k in SETTINGS:
        v = getattr(args, k, None)
        if v is not None:
            raw[k] = v
    if args.cmd:
        raw["command"] = args.cmd
    cfg = {}
    for k, (conv, _, _) in SETTINGS.items():
        v = raw[k]
        try:
            cfg[k] = v if v is None else conv(v)
        except ValueError as exc:
            raise UsageError(f"bad value for {k}: {exc}") from None
    if cfg["command"] not in COMMANDS:
        raise UsageError(f"unknown or missing command {cfg['command']!r}; choose from {COMMANDS}")
    if cfg["frequency"] not in DEFAULT_PRESET:
        raise UsageError("frequency must be 1, 12 or 52")
    if cfg["method"] not in ("sml", "cml"):
        raise UsageError("method must be sml or cml")
    if cfg["preset"] is None:
        cfg["preset"] = DEFAULT_PRESET[cfg["frequency"]]
    if cfg["preset"] not in PRESETS:
        raise UsageError(f"unknown preset {cfg['preset']!r}")
    return cfg


def params_from(cfg: dict) -> StructuralParams:
    base = dict(zip(PARAM_NAMES, PRESETS[cfg["preset"]][:4]))
    for k in PARAM_NAMES:
        if cfg[k] is not None:
            base[k] = cfg[k]
    try:
        prm = StructuralParams(r=period_rate(cfg["annual_rate"], cfg["frequency"]), **base)
    except ValueError as exc:
        raise UsageError(f"invalid parameters: {exc}") from None
    if prm.delta <= 0.0:
        raise UsageError("delta must be positive: the stock grid is unbounded at delta = 0")
    return prm


def parse_fixed(text: str) -> dict:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise UsageError(f"bad fixed-parameter spec {part!r}; use name=value")
        k, v = (s.strip() for s in part.split("=", 1))
        if k not in PARAM_NAMES:
            raise UsageError(f"cannot fix unknown parameter {k!r}")
        out[k] = float(v)
    return out


def filter_config(cfg: dict, factor: int = 1) -> FilterConfig:
    grid = GridConfig(cfg["mz"], cfg["mx1"], cfg["mx2"]).scaled(factor)
    return FilterConfig(cfg["particles"], cfg["n_grid"], 8.0, cfg["quad_order"], grid,
                        cfg["iterations"])


def cml_config(cfg: dict) -> CmlConfig:
    return CmlConfig(cfg["cml_ni"], cfg["cml_nt"], cfg["cml_ng"], quad_order=cfg["quad_order"],
                     solver=GridConfig(cfg["mz"], cfg["mx1"], cfg["mx2"]),
                     iterations=cfg["iterations"])


def _load(cfg):
    if not cfg["input"]:
        raise UsageError(f"command {cfg['command']!r} needs --input")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        s = sio.load_prices(cfg["input"], cfg["frequency"], cfg["normalize"])
    for w in caught:
        log.warning("%s", w.message)
    return s


def _est_kwargs(cfg):
    return dict(n_particles=cfg["particles"], filter_config=filter_config(cfg),
                cml_config=cml_config(cfg), max_evals=cfg["max_evals"])


# --- commands -------------------------------------------------------------

def cmd_solve(cfg, out: Path):
    prm = params_from(cfg)
    pf = solve_price_function(prm, filter_config(cfg).solver, cfg["iterations"])
    log.info("final_sup_change=%r after %d iterations", pf.final_sup_change, pf.iterations)
    dump_table(pf, out / "price_function.txt")
    z = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) / math.sqrt(1.0 - prm.rho ** 2)
    items = {k: float(getattr(prm, k)) for k in PARAM_NAMES}
    items.update({"r": prm.r, "beta": prm.beta, "iterations": pf.iterations,
                  "final_sup_change": pf.final_sup_change})
    for zi, ps in zip((-2, -1, 0, 1, 2), threshold_price(pf, z)):
        items[f"threshold_price.z_{zi:+d}sd"] = float(ps)
    sio.write_results(out / "results.txt", items)


def cmd_simulate(cfg, out: Path):
    prm = params_from(cfg)
    pf = solve_price_function(prm, filter_config(cfg).solver, cfg["iterations"])
    try:
        shocks = ShockDistribution.parse(cfg["shocks"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    s, z = simulate_dgp(prm, pf, cfg["T"], cfg["seed"], shocks, cfg["quad_order"],
                        cfg["frequency"])
    sio.write_prices(out / "prices.csv", s)
    sio.write_series_csv(out / "shocks.csv", sio.series_dates(s), z)
    st = price_stats(s, pf, z)
    sio.write_results(out / "results.txt", {f"stats.{k}": v for k, v in st.as_dict().items()})


def _fit(cfg, series):
    prm = params_from(cfg)
    fixed = parse_fixed(cfg["fix"])
    rep = estimate(series, cfg["method"], prm, seed=cfg["seed"], fixed=fixed or None,
                   **_est_kwargs(cfg))
    if rep.failed:
        raise FloatingPointError(f"estimation failed: {rep.optimizer.message if rep.optimizer else ''}")
    if cfg["mc_repeats"] > 1:
        rep.mc_std, _ = monte_carlo_std(series, rep.params, cfg["mc_repeats"], cfg["seed"],
                                        cfg["method"], fixed=fixed or None, **_est_kwargs(cfg))
    return rep


def cmd_estimate(cfg, out: Path):
    rep = _fit(cfg, _load(cfg))
    sio.emit_report(rep, out)


def cmd_bootstrap(cfg, out: Path):
    series = _load(cfg)
    rep = _fit(cfg, series)
    boot = parametric_bootstrap(rep.params, len(series), cfg["replicas"], cfg["method"],
                                cfg["seed"], fixed=rep.fixed or None,
                                periods_per_year=series.periods_per_year, **_est_kwargs(cfg))
    rep.bootstrap_se = boot.se
    sio.emit_report(rep, out, {"bootstrap.replicas": cfg["replicas"],
                               "bootstrap.failed": boot.n_failed})
    rows = np.column_stack([boot.replica_ids, boot.estimates, boot.logliks]) \
        if boot.estimates.shape[0] else np.empty((0, 6))
    with open(out / "bootstrap.csv", "w") as fh:
        fh.write("replica," + ",".join(PARAM_NAMES) + ",loglik\n")
        for r in rows:
            fh.write(f"{int(r[0])}," + ",".join(repr(float(v)) for v in r[1:]) + "\n")


def cmd_experiment(cfg, out: Path):
    prm = params_from(cfg)
    methods = tuple(m.strip() for m in cfg["methods"].split(",") if m.strip())
    try:
        spec = ExperimentSpec(prm, cfg["T"], cfg["replicas"], methods, cfg["frequency"],
                              ShockDistribution.parse(cfg["shocks"]), cfg["seed"],
                              cfg["particles"], cfg["mc_repeats"], filter_config(cfg),
                              cml_config(cfg))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = run_experiment(spec, progress=lambda m, i, r: log.info(
        "%s replica %d: loglik=%.4f evals=%d", m, i, r.loglik,
        r.optimizer.n_evals if r.optimizer else 0))
    items = {f"true.{k}": float(getattr(prm, k)) for k in PARAM_NAMES}
    items.update({"T": cfg["T"], "replicas": cfg["replicas"]})
    lines = [f"Simulation experiment: T={cfg['T']}, {cfg['replicas']} replicas, "
             f"shocks={spec.shocks.label()}", "",
             f"{'':<14}" + "".join(f"{n:>12}" for n in PARAM_NAMES)]
    for m, summ in res.items():
        items[f"{m}.failed"] = summ.n_failed
        lines.append(f"{m.upper()}  (failed {summ.n_failed}, "
                     f"tau={summ.eval_seconds:.2f}s per evaluation)")
        for label, d in (("bias", summ.bias), ("sd", summ.sd), ("rmse", summ.rmse),
                         ("mc_std", summ.mc_std)):
            if d is None:
                continue
            for k in PARAM_NAMES + (("loglik",) if label == "mc_std" else ()):
                items[f"{m}.{label}.{k}"] = d.get(k, float("nan"))
            lines.append(f"  {label:<12}" + "".join(f"{sio._num(d.get(k)):>12}" for k in PARAM_NAMES))
    sio.write_results(out / "results.txt", items)
    (out / "report.txt").write_text("\n".join(lines) + "\n")


def cmd_compare(cfg, out: Path):
    series = _load(cfg)
    rep = _fit(cfg, series)
    comps = [c.strip() for c in cfg["competitors"].split(",") if c.strip()]
    bad = [c for c in comps if c not in FITTERS]
    if bad:
        raise UsageError(f"unknown competitors: {bad}")
    items = {"storage.loglik": rep.loglik}
    lines = [f"Storage model ({rep.method.upper()}): loglik {rep.loglik:.2f}", ""]
    for c in comps:
        fit = FITTERS[c](series)
        items[f"{c}.loglik"] = fit.loglik
        items[f"{c}.converged"] = fit.converged
        for k, v in fit.param_dict().items():
            items[f"{c}.{k}"] = float(v)
            items[f"{c}.se.{k}"] = fit.se.get(k, float("nan"))
        items[f"{c}.lr"] = 2.0 * (rep.loglik - fit.loglik)
        line = (f"{c:<8} loglik {fit.loglik:10.2f}   LR {2.0 * (rep.loglik - fit.loglik):8.2f}   "
                + ", ".join(f"{k}={float(v):.4g}" for k, v in fit.param_dict().items()))
        if cfg["replicas"] > 0:
            lr = lr_bootstrap_compare(rep, c, cfg["replicas"], cfg["seed"], competitor_fit=fit,
                                      **_est_kwargs(cfg))
            items[f"{c}.lr_rank"] = lr.rank
            items[f"{c}.lr_replicas"] = int(lr.simulated_lr.shape[0])
            items[f"{c}.lr_failed"] = lr.n_failed
            line += f"   rank {lr.rank:g} of {lr.simulated_lr.shape[0]}"
        if fit.filtered is not None:
            sio.write_series_csv(out / f"{c}_regime1.csv", sio.series_dates(series)[1:],
                                 fit.filtered[:, 0])
        lines.append(line)
    sio.write_results(out / "results.txt", items)
    (out / "report.txt").write_text("\n".join(lines) + "\n")


def cmd_diagnose(cfg, out: Path):
    series = _load(cfg)
    prm = params_from(cfg)
    fc = filter_config(cfg)
    res = pf_loglik(prm, series, cfg["particles"], cfg["seed"], fc, diagnostics=True)
    if not res.ok:
        raise FloatingPointError(res.message)
    items = {k: float(getattr(prm, k)) for k in PARAM_NAMES}
    items["loglik"] = res.loglik
    if res.u.shape[0] >= 30:
        for k, v in residual_diagnostics(res.residuals).as_dict().items():
            items[f"residuals.{k}"] = v
    dates = sio.series_dates(series)
    sio.write_series_csv(out / "stockout.csv", dates, res.stockout_prob)
    sio.write_series_csv(out / "storage.csv", dates, res.storage)
    sio.write_series_csv(out / "residuals.csv", dates[1:], res.residuals)
    lines = [f"loglik at the given parameters: {res.loglik:.4f}"]
    k = cfg["grid_factor"]
    if k > 1:
        fk = filter_config(cfg, k)
        fine = pf_loglik(prm, series, cfg["particles"], cfg["seed"], fk)
        items[f"grid_x{k}.loglik"] = fine.loglik
        lines.append(f"loglik with grid sizes x{k}: {fine.loglik:.4f}")
        if cfg["reestimate"]:
            kw = _est_kwargs(cfg)
            kw["filter_config"] = fk
            rep = estimate(series, "sml", prm, seed=cfg["seed"], diagnostics=False, **kw)
            for n in PARAM_NAMES:
                items[f"grid_x{k}.{n}"] = float(getattr(rep.params, n))
            items[f"grid_x{k}.reestimated_loglik"] = rep.loglik
            lines.append("re-estimated: " + ", ".join(
                f"{n}={getattr(rep.params, n):.4f}" for n in PARAM_NAMES))
    sio.write_results(out / "results.txt", items)
    (out / "report.txt").write_text("\n".join(lines) + "\n")


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def run_command(cfg: dict) -> int:
    """Run a resolved configuration; returns the exit status."""
    try:
        out = sio.ensure_dir(cfg["out"])
        sio.write_config(out / "config.txt", cfg)
        HANDLERS[cfg["command"]](cfg, out)
    except UsageError as exc:
        log.error("usage: %s", exc)
        return EXIT_USAGE
    except sio.DataError as exc:
        log.error("input: %s", exc)
        return EXIT_IO
    except OSError as exc:
        log.error("i/o: %s", exc)
        return EXIT_IO
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except ValueError as exc:
        log.error("invalid settings: %s", exc)
        return EXIT_USAGE
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
    except UsageError as exc:
        log.error("usage: %s", exc)
        return EXIT_USAGE
    except sio.DataError as exc:
        log.error("config: %s", exc)
        return EXIT_USAGE
    except OSError as exc:
        log.error("i/o: %s", exc)
        return EXIT_IO
    if cfg["command"] == "solve":
        log.setLevel(logging.INFO)
    return run_command(cfg)


if __name__ == "__main__":
    sys.exit(main())
