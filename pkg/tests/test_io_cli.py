import logging
import math

import numpy as np
import pytest

from storagesml import io as sio
from storagesml.cli import main
from storagesml.estimation import EstimationReport
from storagesml.model import PARAM_NAMES, PriceSeries, preset_params

SMALL = ["--mz", "16", "--mx1", "32", "--mx2", "32", "--iterations", "150",
         "--particles", "256", "--n-grid", "256"]


def write_csv(path, rows, header="date,price"):
    path.write_text(header + "\n" + "".join(f"{d},{p}\n" for d, p in rows))
    return path


def monthly_dates(n, y0=1991):
    return [f"{y0 + i // 12}-{i % 12 + 1:02d}-01" for i in range(n)]


def test_load_normalizes(tmp_path):
    s = sio.load_prices(write_csv(tmp_path / "p.csv", [("2000-01", 2.0), ("2000-02", 4.0)]))
    assert np.allclose(s.values, [2 / 3, 4 / 3])
    assert s.normalization_factor == 3.0
    assert np.allclose(s.raw(), [2.0, 4.0])
    assert s.dates == ("2000-01-01", "2000-02-01")


def test_load_bad_price_names_line(tmp_path):
    rows = [(d, 1.0) for d in monthly_dates(8)]
    rows[5] = (rows[5][0], "n/a")  # header is line 1, so this is line 7
    with pytest.raises(sio.DataError, match=r":7:"):
        sio.load_prices(write_csv(tmp_path / "p.csv", rows))


def test_load_full_sample_length(tmp_path):
    rows = [(d, 2.0 + math.sin(i)) for i, d in enumerate(monthly_dates(258))]
    s = sio.load_prices(write_csv(tmp_path / "p.csv", rows))
    assert len(s) == 258 and s.dates[-1] == "2012-06-01"
    assert s.values.mean() == pytest.approx(1.0)


def test_load_errors_and_warnings(tmp_path):
    with pytest.raises(sio.DataError, match="no data"):
        sio.load_prices(write_csv(tmp_path / "e.csv", []))
    with pytest.raises(sio.DataError, match="header"):
        sio.load_prices(write_csv(tmp_path / "h.csv", [("2000-01", 1.0)], header="when,value"))
    with pytest.raises(sio.DataError, match=":3:"):
        sio.load_prices(write_csv(tmp_path / "o.csv", [("2000-02", 1.0), ("2000-01", 1.0)]))
    with pytest.warns(UserWarning, match="irregular"):
        sio.load_prices(write_csv(tmp_path / "g.csv", [("2000-01", 1.0), ("2000-04", 1.0)]))
    with pytest.warns(UserWarning, match="non-positive"):
        sio.load_prices(write_csv(tmp_path / "n.csv", [("2000-01", 2.0), ("2000-02", -0.5)]))
    with pytest.raises(sio.DataError, match="non-positive mean"), pytest.warns(UserWarning):
        sio.load_prices(write_csv(tmp_path / "z.csv", [("2000-01", 1.0), ("2000-02", -1.0)]))


def test_results_roundtrip(tmp_path):
    items = {"rho": 0.9687654321987654, "a": 1.0 / 3.0, "n": 7, "flag": True, "x": float("nan")}
    sio.write_results(tmp_path / "r.txt", items)
    back = sio.read_results(tmp_path / "r.txt")
    assert back["rho"] == items["rho"] and back["a"] == items["a"]
    assert back["n"] == 7 and back["flag"] is True and math.isnan(back["x"])


def test_emit_report_partial(tmp_path):
    prm = preset_params("monthly")
    s = PriceSeries(np.linspace(0.5, 1.5, 40), dates=tuple(monthly_dates(40)))
    rep = EstimationReport("sml", prm, 123.456, prm, 0, series=s)
    paths = sio.emit_report(rep, tmp_path)
    assert len(paths) == 4
    back = sio.read_results(tmp_path / "results.txt")
    for k in PARAM_NAMES:
        assert back[k] == getattr(prm, k)
    assert math.isnan(back["residuals.ks_p"]) and math.isnan(back["bootstrap_se.rho"])
    lines = (tmp_path / "stockout.csv").read_text().splitlines()
    assert lines[0] == "date,value" and len(lines) == 41
    assert "(not available)" in (tmp_path / "report.txt").read_text()


def test_config_parse(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("# comment\nseed = 4  # trailing\n\nmethod=cml\n")
    assert sio.parse_config(f) == {"seed": "4", "method": "cml"}
    f.write_text("seed 4\n")
    with pytest.raises(sio.DataError, match=":1:"):
        sio.parse_config(f)


# --- command line -------------------------------------------------------

def run(args):
    return main([str(a) for a in args])


def test_solve_command(tmp_path, caplog):
    caplog.set_level(logging.INFO, logger="storagesml")
    assert run(["solve", "--out", tmp_path, *SMALL]) == 0
    assert (tmp_path / "price_function.txt").exists()
    res = sio.read_results(tmp_path / "results.txt")
    assert res["final_sup_change"] >= 0 and res["rho"] == 0.97
    assert "final_sup_change" in caplog.text
    cfg = sio.parse_config(tmp_path / "config.txt")
    assert cfg["seed"] == "0" and cfg["command"] == "solve"


def test_simulate_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["simulate", "--out", d, "--T", 80, "--seed", 9, *SMALL]) == 0
    for name in ("prices.csv", "shocks.csv", "results.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    # the persisted config alone reproduces the run
    c = tmp_path / "c"
    assert run(["--config", a / "config.txt", "--out", c]) == 0
    assert (a / "prices.csv").read_bytes() == (c / "prices.csv").read_bytes()


def test_flags_override_config(tmp_path):
    cfgfile = tmp_path / "run.txt"
    cfgfile.write_text("command = simulate\nT = 40\nseed = 1\nmz = 16\nmx1 = 32\nmx2 = 32\n"
                       "iterations = 100\n")
    out = tmp_path / "o"
    assert run(["--config", cfgfile, "--T", 50, "--out", out]) == 0
    cfg = sio.parse_config(out / "config.txt")
    assert cfg["T"] == "50" and cfg["seed"] == "1"
    assert len((out / "prices.csv").read_text().splitlines()) == 51


def test_exit_codes(tmp_path):
    assert run(["solve", "--delta", 0, "--out", tmp_path / "d", *SMALL]) == 2
    assert run(["estimate", "--out", tmp_path / "e"]) == 2  # no input
    assert run(["estimate", "--input", tmp_path / "missing.csv", "--out", tmp_path / "m"]) == 4
    bad = write_csv(tmp_path / "bad.csv", [("2000-01", 1.0), ("2000-02", "x")])
    assert run(["estimate", "--input", bad, "--out", tmp_path / "b"]) == 4
    assert run(["solve", "--method", "gmm", "--out", tmp_path / "g"]) == 2
    (tmp_path / "k.txt").write_text("command = solve\nbogus = 1\n")
    assert run(["--config", tmp_path / "k.txt"]) == 2
    with pytest.raises(SystemExit) as exc:
        run(["fly"])
    assert exc.value.code == 2


@pytest.fixture(scope="module")
def sim_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert run(["simulate", "--out", d, "--T", 60, "--seed", 2, *SMALL]) == 0
    return d / "prices.csv"


@pytest.mark.slow
def test_estimate_command(tmp_path, sim_csv):
    args = ["estimate", "--input", sim_csv, "--fix", "rho=0.97,a=1.5,b=-0.4",
            "--max-evals", 200, *SMALL]
    assert run([*args, "--out", tmp_path / "a"]) == 0
    assert run([*args, "--out", tmp_path / "b"]) == 0
    res = sio.read_results(tmp_path / "a" / "results.txt")
    assert res["fixed.rho"] == 0.97 and res["rho"] == 0.97 and res["T"] == 60
    for name in ("results.txt", "stockout.csv", "storage.csv", "report.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len((tmp_path / "a" / "stockout.csv").read_text().splitlines()) == 61


@pytest.mark.slow
def test_experiment_command(tmp_path):
    assert run(["experiment", "--out", tmp_path, "--T", 60, "--replicas", 2,
                "--max-evals", 40, *SMALL]) == 0
    res = sio.read_results(tmp_path / "results.txt")
    assert "sml.bias.rho" in res and "sml.rmse.rho" in res
    assert "rmse" in (tmp_path / "report.txt").read_text()


@pytest.mark.slow
def test_compare_and_diagnose_commands(tmp_path, sim_csv):
    assert run(["compare", "--input", sim_csv, "--out", tmp_path / "c", "--replicas", 0,
                "--competitors", "ar1", "--fix", "rho=0.97,a=1.5,b=-0.4,delta=0.02",
                *SMALL]) == 0
    res = sio.read_results(tmp_path / "c" / "results.txt")
    assert res["ar1.lr"] == pytest.approx(2 * (res["storage.loglik"] - res["ar1.loglik"]))
    assert run(["diagnose", "--input", sim_csv, "--out", tmp_path / "d", "--grid-factor", 2,
                *SMALL]) == 0
    res = sio.read_results(tmp_path / "d" / "results.txt")
    assert math.isfinite(res["loglik"]) and math.isfinite(res["grid_x2.loglik"])
    assert len((tmp_path / "d" / "residuals.csv").read_text().splitlines()) == 60
