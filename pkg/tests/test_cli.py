import csv
from pathlib import Path

import numpy as np
import pytest

from subapsnap import cli
from subapsnap.errors import ConfigError

SMALL_CONFIG = """\
[problem]
kind = tridiag
n = 80

[snapshot]
r = 5
layout = equispaced
mode = qr

[selector]
strategy = lupp
seed = 0

[test]
count = 15

[methods]
names = full, apsnap, subapsnap-lupp

[bounds]
enabled = true
lipschitz = 1.0

[output]
repeats = 1
plots = false
"""


@pytest.fixture()
def small_config(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL_CONFIG)
    return path


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        return next(reader), list(reader)


def test_load_config_fields(small_config):
    cfg = cli.load_config(small_config)
    assert cfg.problem.kind == "tridiag"
    assert cfg.snapshot_r == 5
    assert cfg.selector.strategy == "lupp"
    assert cfg.test_count == 15
    assert cfg.methods == ("full", "apsnap", "subapsnap-lupp")
    assert cfg.compute_bounds and cfg.lipschitz == 1.0
    assert cfg.repeats == 1 and not cfg.plots
    assert cfg.name == "small"


def test_load_config_defaults(tmp_path):
    path = tmp_path / "min.ini"
    path.write_text("[problem]\nkind = tridiag\nn = 50\n")
    cfg = cli.load_config(path)
    assert cfg.methods == ("full", "apsnap", "subapsnap-leverage")
    assert cfg.snapshot_r == 7 and cfg.repeats == 3 and cfg.plots


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        cli.load_config(tmp_path / "nope.ini")
    bad = tmp_path / "bad.ini"
    bad.write_text("[problem]\nkind = tridiag\nn = 50\n[frogs]\nx = 1\n")
    with pytest.raises(ConfigError, match="frogs"):
        cli.load_config(bad)
    bad.write_text("[snapshot]\nr = 5\n")
    with pytest.raises(ConfigError, match="problem"):
        cli.load_config(bad)
    bad.write_text("[problem]\nkind = tridiag\nn = 50\n"
                   "[methods]\nnames = subapsnap-bogus\n")
    with pytest.raises(ConfigError, match="bogus"):
        cli.load_config(bad)
    bad.write_text("[problem]\nkind = tridiag\nn = 50\n"
                   "[test]\ncount = frog\n")
    with pytest.raises(ConfigError, match="count"):
        cli.load_config(bad)


def test_resolve_config_presets(small_config):
    assert cli.resolve_config(small_config) == small_config
    for preset in ("fig1-tridiag", "heat2d", "convdiff-mor",
                   "delay-scaling", "krr-grid"):
        path = cli.resolve_config(preset)
        assert path.exists() and path.suffix == ".ini"
    with pytest.raises(ConfigError):
        cli.resolve_config("no-such-preset")


def test_presets_all_load():
    for preset in ("fig1-tridiag", "heat2d", "convdiff-mor",
                   "delay-scaling", "krr-grid"):
        cfg = cli.load_config(cli.resolve_config(preset))
        assert cfg.name == preset


def test_format_param_roundtrip():
    for p in (-9.5, 0.1 + 0.0j, 1j * 3.25e4, (1e-3, 2.5)):
        text = cli.format_param(p)
        back = cli.parse_param(text)
        if isinstance(p, tuple):
            assert back == p
        else:
            assert complex(back) == complex(p)
    with pytest.raises(ConfigError):
        cli.parse_param("frog")


def test_test_parameters_respects_subinterval(small_config):
    cfg = cli.load_config(small_config)
    system = cli.systems.build_problem(cfg.problem)
    from dataclasses import replace
    pts = cli.test_parameters(system, replace(cfg, test_lo=-9.5, test_hi=-9.2))
    assert min(pts) >= -9.5 and max(pts) <= -9.2
    with pytest.raises(ConfigError):
        cli.test_parameters(system, replace(cfg, test_hi=-8.0))


def test_run_experiment_outputs(small_config, tmp_path):
    cfg = cli.load_config(small_config)
    out = tmp_path / "out"
    paths = cli.run_experiment(cfg, out)
    header, rows = _read_csv(paths["results"])
    assert tuple(header) == cli.RESULT_HEADER
    assert len(rows) == 3 * 15
    for method, p, resid, _err, wall in rows:
        assert method in cfg.methods
        assert float(resid) <= 1e-6
        assert float(wall) >= 0.0
    header, brows = _read_csv(paths["bounds"])
    assert tuple(header) == cli.BOUNDS_HEADER
    assert len(brows) == 15
    for row in brows:
        ratio, bound_a = float(row[1]), float(row[2])
        if np.isfinite(ratio) and "A" in row[7].split("|"):
            assert ratio <= bound_a * (1 + 1e-8)
    header, _ = _read_csv(paths["sigma"])
    assert tuple(header) == ("index", "sigma")
    assert paths["summary"].exists()


def test_run_determinism(small_config, tmp_path):
    cfg = cli.load_config(small_config)
    a = cli.run_experiment(cfg, tmp_path / "a", seed=1)
    b = cli.run_experiment(cfg, tmp_path / "b", seed=1)
    ha, ra = _read_csv(a["results"])
    hb, rb = _read_csv(b["results"])
    assert ha == hb
    # byte-identical except the wall-time column
    wall = ha.index("wall_time_s")
    for x, y in zip(ra, rb):
        assert x[:wall] == y[:wall]
    assert a["bounds"].read_bytes() == b["bounds"].read_bytes()
    assert a["sigma"].read_bytes() == b["sigma"].read_bytes()


def test_results_csv_is_rfc4180(small_config, tmp_path):
    cfg = cli.load_config(small_config)
    paths = cli.run_experiment(cfg, tmp_path / "out")
    raw = paths["results"].read_bytes()
    assert b"\r\n" in raw and not raw.rstrip(b"\r\n").endswith(b"\r")


def test_offline_online_split(small_config, tmp_path):
    cfg = cli.load_config(small_config)
    art_dir = tmp_path / "art"
    off = cli.run_offline(cfg, art_dir)
    assert off["basis"].exists()
    assert off["selector_lupp"].exists() and off["plan_lupp"].exists()
    on = cli.run_online(cfg, art_dir, tmp_path / "out")
    header, rows = _read_csv(on["results"])
    assert tuple(header) == cli.RESULT_HEADER
    assert len(rows) == 15
    assert all(float(r[2]) <= 1e-6 for r in rows)


def test_online_without_artifacts_is_config_error(small_config, tmp_path):
    cfg = cli.load_config(small_config)
    with pytest.raises(ConfigError):
        cli.run_online(cfg, tmp_path / "empty", tmp_path / "out")


def test_emit_plots(small_config, tmp_path):
    cfg = cli.load_config(small_config)
    out = tmp_path / "out"
    paths = cli.run_experiment(cfg, out)
    plots = cli.emit_plots(paths["results"], tmp_path / "plots")
    for key in ("residuals_plot", "sigma_plot", "bounds_plot", "timings_plot"):
        svg = plots[key]
        assert svg.exists() and svg.read_bytes().lstrip().startswith(b"<?xml")


def test_emit_plots_deterministic(small_config, tmp_path):
    cfg = cli.load_config(small_config)
    paths = cli.run_experiment(cfg, tmp_path / "out")
    a = cli.emit_plots(paths["results"], tmp_path / "p1")
    b = cli.emit_plots(paths["results"], tmp_path / "p2")
    assert a["residuals_plot"].read_bytes() == b["residuals_plot"].read_bytes()


def test_emit_plots_single_point(tmp_path):
    path = tmp_path / "results.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cli.RESULT_HEADER)
        writer.writerow(("full", "-9.5", "1e-12", "", "0.01"))
    plots = cli.emit_plots(path, tmp_path / "plots")
    assert plots["residuals_plot"].exists()
    with pytest.raises(ConfigError):
        empty = tmp_path / "empty.csv"
        empty.write_text("method,p,relative_residual,output_error,wall_time_s\n")
        cli.emit_plots(empty, tmp_path / "plots2")


def test_main_exit_codes(small_config, tmp_path, capsys):
    rc = cli.main(["run", str(small_config), "--out", str(tmp_path / "o")])
    assert rc == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "results:" in out

    rc = cli.main(["run", "no-such-preset", "--out", str(tmp_path / "o2")])
    assert rc == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_main_offline_online(small_config, tmp_path):
    art = tmp_path / "art"
    assert cli.main(["offline", str(small_config),
                     "--artifacts", str(art)]) == cli.EXIT_OK
    assert cli.main(["online", str(small_config), "--artifacts", str(art),
                     "--out", str(tmp_path / "o")]) == cli.EXIT_OK
    assert (tmp_path / "o" / "results.csv").exists()
    assert cli.main(["online", str(small_config),
                     "--artifacts", str(tmp_path / "missing"),
                     "--out", str(tmp_path / "o3")]) == cli.EXIT_CONFIG
