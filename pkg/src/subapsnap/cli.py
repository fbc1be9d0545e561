"""Benchmark command line.

Subcommands: ``run`` (whole pipeline from a config file), ``offline`` /
``online`` (split phases through serialized artifacts), ``plot`` (SVG
plots from result CSVs). Config files are INI; preset names resolve to
files shipped under ``subapsnap/configs``.

Exit codes: 0 success, 2 config error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import ast
import configparser
import csv
import statistics
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import bounds as bounds_mod
from . import krr as krr_mod
from . import online, snapshot, subsample, systems
from .errors import ConfigError, NumericalError, SubapsnapError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

RESULT_HEADER = ("method", "p", "relative_residual", "output_error",
                 "wall_time_s")
BOUNDS_HEADER = ("p", "actual_ratio", "bound_A", "bound_Ab", "thm",
                 "cor_closest", "cor_global", "flags")
KRR_HEADER = ("lambda", "sigma", "rmse_full", "rmse_sub", "rel_residual_sub")

_KNOWN_SECTIONS = ("problem", "snapshot", "selector", "test", "methods",
                   "bounds", "output", "krr_grid")


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    problem: systems.ProblemSpec
    snapshot_r: int = 7
    snapshot_layout: str = "equispaced"
    snapshot_mode: str = "qr"
    selector: subsample.SelectorConfig = subsample.SelectorConfig()
    samples: Optional[int] = None     # explicit s, overrides oversample
    test_count: int = 100
    test_layout: str = "equispaced"
    test_lo: Optional[float] = None   # optional sub-interval of the domain
    test_hi: Optional[float] = None
    methods: tuple = ("full", "apsnap", "subapsnap-leverage")
    compute_bounds: bool = False
    lipschitz: Optional[float] = None  # None = estimate
    repeats: int = 3
    plots: bool = True
    krr_grid: Optional[dict] = None
    name: str = "experiment"


def _get_typed(section, key, cast, default):
    if key not in section:
        return default
    raw = section[key]
    try:
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes")
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    for sec in parser.sections():
        if sec not in _KNOWN_SECTIONS:
            raise ConfigError(f"unknown config section [{sec}]")
    if "problem" not in parser:
        raise ConfigError("config needs a [problem] section")
    problem = systems.problem_spec_from_section(parser["problem"])

    snap = parser["snapshot"] if "snapshot" in parser else {}
    sel_sec = parser["selector"] if "selector" in parser else {}
    selector = subsample.SelectorConfig(
        strategy=sel_sec.get("strategy", "leverage"),
        oversample=_get_typed(sel_sec, "oversample", float, 4.0),
        augment_rhs=_get_typed(sel_sec, "augment_rhs", bool, True),
        anchor=sel_sec.get("anchor", "median-point"),
        seed=_get_typed(sel_sec, "seed", int, 0),
    )
    test = parser["test"] if "test" in parser else {}
    methods_raw = parser["methods"].get("names", "") if "methods" in parser else ""
    methods = tuple(tok.strip() for tok in methods_raw.split(",") if tok.strip())
    if not methods:
        methods = ("full", "apsnap", f"subapsnap-{selector.strategy}")
    for m in methods:
        if m in ("full", "apsnap"):
            continue
        if not m.startswith("subapsnap-") or \
                m[len("subapsnap-"):] not in subsample.STRATEGIES:
            raise ConfigError(f"unknown method {m!r}")

    bounds_sec = parser["bounds"] if "bounds" in parser else {}
    out_sec = parser["output"] if "output" in parser else {}
    lipschitz = None
    if "lipschitz" in bounds_sec and bounds_sec["lipschitz"].strip() != "auto":
        lipschitz = _get_typed(bounds_sec, "lipschitz", float, None)

    krr_grid = None
    if "krr_grid" in parser:
        kg = parser["krr_grid"]
        krr_grid = {
            "lambda_count": _get_typed(kg, "lambda_count", int, 30),
            "sigma_count": _get_typed(kg, "sigma_count", int, 30),
            "r": _get_typed(kg, "r", int, 16),
            "oversample": _get_typed(kg, "oversample", float, 4.0),
            "timing_samples": _get_typed(kg, "timing_samples", int, 5),
        }

    return ExperimentConfig(
        problem=problem,
        snapshot_r=_get_typed(snap, "r", int, 7),
        snapshot_layout=snap.get("layout", "equispaced") if snap else "equispaced",
        snapshot_mode=snap.get("mode", "qr") if snap else "qr",
        selector=selector,
        samples=_get_typed(sel_sec, "samples", int, None),
        test_count=_get_typed(test, "count", int, 100),
        test_layout=test.get("layout", "equispaced") if test else "equispaced",
        test_lo=_get_typed(test, "lo", float, None),
        test_hi=_get_typed(test, "hi", float, None),
        methods=methods,
        compute_bounds=_get_typed(bounds_sec, "enabled", bool, False),
        lipschitz=lipschitz,
        repeats=_get_typed(out_sec, "repeats", int, 3),
        plots=_get_typed(out_sec, "plots", bool, True),
        krr_grid=krr_grid,
        name=path.stem,
    )


def resolve_config(name_or_path) -> Path:
    """A filesystem path, or the name of a preset under configs/."""
    p = Path(name_or_path)
    if p.exists():
        return p
    preset = Path(__file__).parent / "configs" / f"{p.name}.ini"
    if preset.exists():
        return preset
    raise ConfigError(f"config {name_or_path!r} not found "
                      f"(no such file, no such preset)")


# --------------------------------------------------------------------------
# Sweep and formatting helpers
# --------------------------------------------------------------------------

def test_parameters(system: systems.ParametricSystem, cfg: ExperimentConfig):
    """The test sweep: cfg.test_count points over (a sub-interval of) the
    1-d parameter domain."""
    if system.dim != 1:
        raise ConfigError("test sweeps require a 1-d parameter domain")
    axis = system.domain.axes[0]
    lo = axis.lo if cfg.test_lo is None else cfg.test_lo
    hi = axis.hi if cfg.test_hi is None else cfg.test_hi
    if lo < axis.lo - 1e-12 * max(1.0, abs(axis.lo)) or \
            hi > axis.hi + 1e-12 * max(1.0, abs(axis.hi)):
        raise ConfigError(f"test interval [{lo}, {hi}] is outside the "
                          f"parameter domain [{axis.lo}, {axis.hi}]")
    pts = snapshot._axis_points(systems.Axis(lo, hi, axis.imag),
                                cfg.test_count, cfg.test_layout)
    return [complex(p) if axis.imag else float(p) for p in pts]


def format_param(p) -> str:
    """Round-trippable parameter text (ast.literal_eval inverts it)."""
    if isinstance(p, tuple):
        return "(" + ", ".join(repr(float(v)) for v in p) + ")"
    p = complex(p)
    if p.imag == 0:
        return repr(p.real)
    return repr(p)


def parse_param(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"cannot parse parameter {text!r}") from exc


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return repr(x)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# --------------------------------------------------------------------------
# Offline phase
# --------------------------------------------------------------------------

@dataclass
class OfflineArtifacts:
    system: systems.ParametricSystem
    basis: snapshot.SnapshotBasis
    anchor: object
    selectors: dict          # strategy -> RowSelector
    plans: dict              # strategy -> OnlinePlan
    seconds: float


def _strategies(methods) -> list:
    return [m[len("subapsnap-"):] for m in methods if m.startswith("subapsnap-")]


def build_offline(cfg: ExperimentConfig, seed=None, workers: int = 1) -> OfflineArtifacts:
    t0 = time.perf_counter()
    system = systems.build_problem(cfg.problem)
    points = snapshot.default_snapshot_points(system.domain, cfg.snapshot_r,
                                              cfg.snapshot_layout)
    basis = snapshot.build_snapshot(system, points, mode=cfg.snapshot_mode,
                                    workers=workers)
    anchor = subsample.choose_anchor(points)
    b_anchor = np.asarray(system.matrix(anchor) @ basis.basis)
    rhs_anchor = system.full_rhs(anchor)

    sel_cfg = cfg.selector
    if seed is not None:
        sel_cfg = replace(sel_cfg, seed=int(seed))
    selectors, plans = {}, {}
    for strat in _strategies(cfg.methods):
        this_cfg = replace(sel_cfg, strategy=strat)
        if cfg.samples is not None and strat in ("random", "leverage"):
            width = basis.rank + (1 if this_cfg.augment_rhs else 0)
            this_cfg = replace(this_cfg, oversample=cfg.samples / width)
        sel = subsample.select_rows(b_anchor, rhs_anchor, this_cfg,
                                    anchors=(anchor,))
        selectors[strat] = sel
        plans[strat] = online.precompute_online(system, basis, sel)
    return OfflineArtifacts(system=system, basis=basis, anchor=anchor,
                            selectors=selectors, plans=plans,
                            seconds=time.perf_counter() - t0)


# --------------------------------------------------------------------------
# run_experiment
# --------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, outdir, seed=None,
                   workers: int = 1) -> dict:
    """Offline then online phases; returns a dict of emitted file paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if cfg.krr_grid is not None or cfg.problem.kind == "krr":
        return run_krr_experiment(cfg, outdir, seed=seed)

    art = build_offline(cfg, seed=seed, workers=workers)
    system, basis = art.system, art.basis
    params = test_parameters(system, cfg)
    repeats = max(int(cfg.repeats), 1)

    bnorms = [max(np.linalg.norm(system.full_rhs(p)), 1e-300) for p in params]
    need_reference = system.output_functional is not None and "full" in cfg.methods
    reference_outputs = None

    rows = []                       # (method, p, rel_resid, out_err, wall)
    phase_seconds = {"offline": art.seconds}

    for method in cfg.methods:
        if method == "full":
            totals, best = [], None
            for _ in range(repeats):
                t0 = time.perf_counter()
                sols, times = [], []
                for p in params:
                    t1 = time.perf_counter()
                    x = system.full_solve(p)
                    times.append(time.perf_counter() - t1)
                    sols.append(x)
                totals.append(time.perf_counter() - t0)
                best = (sols, times)
            sols, times = best
            if need_reference:
                c = system.output_functional.conj()
                reference_outputs = [complex(c @ x) for x in sols]
            for p, x, dt, bn in zip(params, sols, times, bnorms):
                res = np.linalg.norm(system.matrix(p) @ x - system.full_rhs(p))
                rows.append((method, p, res / bn, 0.0, dt))
            phase_seconds[method] = statistics.median(totals)

        elif method == "apsnap":
            totals, best = [], None
            for _ in range(repeats):
                t0 = time.perf_counter()
                out = []
                for p in params:
                    t1 = time.perf_counter()
                    coeff, resid = online.solve_apsnap(system, basis, p)
                    out.append((coeff, resid, time.perf_counter() - t1))
                totals.append(time.perf_counter() - t0)
                best = out
            proj = None
            if reference_outputs is not None:
                proj = system.output_functional.conj() @ basis.basis
            for k, ((coeff, resid, dt), p, bn) in enumerate(
                    zip(best, params, bnorms)):
                err = None
                if proj is not None:
                    err = abs(complex(proj @ coeff) - reference_outputs[k])
                rows.append((method, p, resid / bn, err, dt))
            phase_seconds[method] = statistics.median(totals)

        else:
            strat = method[len("subapsnap-"):]
            plan = art.plans[strat]
            totals, batch = [], None
            for _ in range(repeats):
                t0 = time.perf_counter()
                batch = online.solve_batch(plan, params, workers=workers)
                totals.append(time.perf_counter() - t0)
            # verification pass, outside the timed region
            for k, (row, p, bn) in enumerate(zip(batch, params, bnorms)):
                x = row.solution.lift()
                res = np.linalg.norm(system.matrix(p) @ x - system.full_rhs(p))
                err = None
                if row.output_value is not None and reference_outputs is not None:
                    err = abs(row.output_value - reference_outputs[k])
                rows.append((method, p, res / bn, err, row.wall_time))
            phase_seconds[method] = statistics.median(totals)

    paths = {}
    results_path = outdir / "results.csv"
    _write_csv(results_path, RESULT_HEADER,
               [(m, format_param(p), _fmt(r), _fmt(e), _fmt(t))
                for m, p, r, e, t in rows])
    paths["results"] = results_path

    sigma_path = outdir / "sigma.csv"
    _write_csv(sigma_path, ("index", "sigma"),
               [(i, _fmt(s)) for i, s in enumerate(basis.singular_values)])
    paths["sigma"] = sigma_path

    if cfg.compute_bounds and art.selectors:
        paths["bounds"] = _emit_bounds(cfg, art, params, outdir)

    timings_path = outdir / "timings.csv"
    _write_csv(timings_path, ("phase", "seconds"),
               [(k, _fmt(v)) for k, v in phase_seconds.items()])
    paths["timings"] = timings_path

    paths["summary"] = _emit_summary(outdir, cfg, rows, phase_seconds, basis)
    if cfg.plots:
        paths.update(emit_plots(results_path, outdir))
    return paths


def _emit_bounds(cfg: ExperimentConfig, art: OfflineArtifacts, params,
                 outdir: Path) -> Path:
    strat = _strategies(cfg.methods)[0]
    selector = art.selectors[strat]
    lip = cfg.lipschitz
    if lip is None:
        probes = [params[0], params[len(params) // 2], params[-1]]
        lip = bounds_mod.estimate_lipschitz(art.system, probes).value
    out_rows = []
    for p in params:
        rep = bounds_mod.bound_report(art.system, art.basis, selector, p,
                                      lipschitz=lip, anchor=art.anchor)
        flags = "|".join(name for name, ok in (
            ("A", rep.bound_a_ok), ("Ab", rep.bound_ab_ok),
            ("thm", rep.theorem_ok), ("corC", rep.corollary_closest_ok),
            ("corG", rep.corollary_global_ok)) if ok)
        out_rows.append((format_param(p), _fmt(rep.actual_ratio),
                         _fmt(rep.bound_a), _fmt(rep.bound_ab),
                         _fmt(rep.theorem), _fmt(rep.corollary_closest),
                         _fmt(rep.corollary_global), flags))
    path = outdir / "bounds.csv"
    _write_csv(path, BOUNDS_HEADER, out_rows)
    return path


def _emit_summary(outdir: Path, cfg: ExperimentConfig, rows, phase_seconds,
                  basis) -> Path:
    lines = [f"experiment: {cfg.name}", f"basis rank: {basis.rank}", ""]
    for method in cfg.methods:
        resids = [r for m, _, r, _, _ in rows if m == method]
        errs = [e for m, _, _, e, _ in rows if m == method and e is not None]
        if not resids:
            continue
        lines.append(f"{method}: max rel residual {max(resids):.3e}, "
                     f"median {statistics.median(resids):.3e}"
                     + (f", max output error {max(errs):.3e}" if errs else ""))
    lines.append("")
    for phase, sec in phase_seconds.items():
        lines.append(f"phase {phase}: {sec:.4f} s")
    path = outdir / "summary.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


# --------------------------------------------------------------------------
# KRR grid search experiment
# --------------------------------------------------------------------------

def run_krr_experiment(cfg: ExperimentConfig, outdir: Path, seed=None) -> dict:
    grid = dict(cfg.krr_grid or {})
    grid.setdefault("lambda_count", 30)
    grid.setdefault("sigma_count", 30)
    grid.setdefault("r", 16)
    grid.setdefault("oversample", 4.0)
    grid.setdefault("timing_samples", 5)
    system = systems.build_problem(cfg.problem)
    result = krr_mod.run_krr_grid(
        system, r=grid["r"], lambda_count=grid["lambda_count"],
        sigma_count=grid["sigma_count"], oversample=grid["oversample"],
        seed=cfg.selector.seed if seed is None else int(seed),
        timing_samples=grid["timing_samples"])

    rows = []
    for i, lam in enumerate(result.lambdas):
        for j, sig in enumerate(result.sigmas):
            rows.append((_fmt(lam), _fmt(sig), _fmt(result.rmse_full[i, j]),
                         _fmt(result.rmse_sub[i, j]),
                         _fmt(result.rel_residual_sub[i, j])))
    results_path = outdir / "krr_results.csv"
    _write_csv(results_path, KRR_HEADER, rows)

    geo = float(np.exp(np.mean(np.log(result.rel_residual_sub))))
    speedup = result.full_solve_seconds / max(result.online_solve_seconds, 1e-300)
    summary = [
        f"experiment: {cfg.name}",
        f"grid: {len(result.lambdas)} x {len(result.sigmas)}",
        f"basis rank: {result.basis_rank}, samples: {result.sample_count}",
        f"best (lambda, sigma) full: {result.best_full}",
        f"best (lambda, sigma) subapsnap: {result.best_sub}",
        f"argmin match: {result.best_full == result.best_sub}",
        f"geometric-mean rel residual: {geo:.3e}",
        f"median full per-pair: {result.full_solve_seconds:.4f} s",
        f"median online per-pair: {result.online_solve_seconds:.3e} s",
        f"speedup: {speedup:.1f}x",
        f"offline phase: {result.snapshot_seconds:.4f} s",
    ]
    summary_path = outdir / "summary.txt"
    summary_path.write_text("\n".join(summary) + "\n")
    paths = {"results": results_path, "summary": summary_path}
    if cfg.plots:
        paths["rmse_plot"] = _plot_krr(result, outdir)
    return paths


# --------------------------------------------------------------------------
# Plots
# --------------------------------------------------------------------------

def _mpl():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "subapsnap"
    return plt


def _savefig(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def _x_values(params):
    vals = [parse_param(p) if isinstance(p, str) else p for p in params]
    if vals and isinstance(vals[0], tuple):
        return list(range(len(vals))), "grid index"
    xs = [complex(v) for v in vals]
    if any(v.imag != 0 for v in xs):
        return [abs(v) for v in xs], "|p|"
    return [v.real for v in xs], "p"


def emit_plots(results_csv, outdir) -> dict:
    """SVG plots from a results.csv; sibling bounds.csv / sigma.csv /
    timings.csv are picked up when present. Deterministic for fixed input."""
    results_csv = Path(results_csv)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    plt = _mpl()
    with open(results_csv, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        data = list(reader)
    if header is None or not data:
        raise ConfigError(f"{results_csv}: empty result set")
    paths = {}

    if tuple(header) == KRR_HEADER:
        return paths  # krr grids are plotted at generation time

    by_method = {}
    for method, p, resid, _err, _t in data:
        by_method.setdefault(method, []).append((p, float(resid)))
    fig, ax = plt.subplots(figsize=(6, 4))
    for method in sorted(by_method):
        pts = by_method[method]
        xs, xlabel = _x_values([p for p, _ in pts])
        ys = [max(r, 1e-300) for _, r in pts]
        style = "o" if len(xs) == 1 else "-"
        ax.semilogy(xs, ys, style, label=method, linewidth=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("relative residual")
    ax.legend()
    fig.tight_layout()
    residual_path = outdir / "residuals.svg"
    _savefig(fig, residual_path)
    plt.close(fig)
    paths["residuals_plot"] = residual_path

    sigma_csv = results_csv.parent / "sigma.csv"
    if sigma_csv.exists():
        with open(sigma_csv, newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            sig = [(int(i), float(s)) for i, s in reader]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.semilogy([i + 1 for i, _ in sig],
                    [max(s, 1e-300) for _, s in sig], "o-")
        ax.set_xlabel("index")
        ax.set_ylabel("singular value of snapshot matrix")
        fig.tight_layout()
        p = outdir / "sigma.svg"
        _savefig(fig, p)
        plt.close(fig)
        paths["sigma_plot"] = p

    bounds_csv = results_csv.parent / "bounds.csv"
    if bounds_csv.exists():
        with open(bounds_csv, newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            brows = list(reader)
        xs, xlabel = _x_values([row[0] for row in brows])
        fig, ax = plt.subplots(figsize=(6, 4))
        for col, label in ((1, "actual ratio"), (2, "bound A"),
                           (5, "corollary closest"), (6, "corollary global")):
            ys = [float(row[col]) if row[col] else np.nan for row in brows]
            ys = [y if np.isfinite(y) and y > 0 else np.nan for y in ys]
            ax.semilogy(xs, ys, "-", label=label, linewidth=1)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("residual ratio")
        ax.legend()
        fig.tight_layout()
        p = outdir / "bounds.svg"
        _savefig(fig, p)
        plt.close(fig)
        paths["bounds_plot"] = p

    timings_csv = results_csv.parent / "timings.csv"
    if timings_csv.exists():
        with open(timings_csv, newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            trows = [(k, float(v)) for k, v in reader]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.bar(range(len(trows)), [v for _, v in trows])
        ax.set_xticks(range(len(trows)))
        ax.set_xticklabels([k for k, _ in trows], rotation=30, ha="right")
        ax.set_ylabel("seconds")
        fig.tight_layout()
        p = outdir / "timings.svg"
        _savefig(fig, p)
        plt.close(fig)
        paths["timings_plot"] = p
    return paths


def _plot_krr(result, outdir: Path):
    plt = _mpl()
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    extent = (result.sigmas[0], result.sigmas[-1],
              np.log10(result.lambdas[0]), np.log10(result.lambdas[-1]))
    for ax, grid, title in ((axes[0], result.rmse_full, "full"),
                            (axes[1], result.rmse_sub, "subapsnap")):
        im = ax.imshow(np.log10(grid), origin="lower", aspect="auto",
                       extent=extent)
        ax.set_title(f"log10 test RMSE ({title})")
        ax.set_xlabel("sigma")
    axes[0].set_ylabel("log10 lambda")
    fig.colorbar(im, ax=axes, shrink=0.9)
    path = outdir / "krr_rmse.svg"
    _savefig(fig, path)
    plt.close(fig)
    return path


# --------------------------------------------------------------------------
# Split offline / online phases
# --------------------------------------------------------------------------

def run_offline(cfg: ExperimentConfig, artifacts_dir, seed=None,
                workers: int = 1) -> dict:
    artifacts_dir = Path(artifacts_dir)
    artifacts_dir.mkdir(parents=True, exist_ok=True)
    art = build_offline(cfg, seed=seed, workers=workers)
    paths = {}
    basis_path = artifacts_dir / "basis.npz"
    snapshot.save_snapshot(basis_path, art.basis)
    paths["basis"] = basis_path
    for strat, sel in art.selectors.items():
        sp = artifacts_dir / f"selector_{strat}.json"
        subsample.save_selector(sp, sel)
        paths[f"selector_{strat}"] = sp
        pp = artifacts_dir / f"plan_{strat}.npz"
        online.save_plan(pp, art.plans[strat])
        paths[f"plan_{strat}"] = pp
    return paths


def run_online(cfg: ExperimentConfig, artifacts_dir, outdir,
               workers: int = 1) -> dict:
    artifacts_dir = Path(artifacts_dir)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    system = systems.build_problem(cfg.problem)
    basis_path = artifacts_dir / "basis.npz"
    if not basis_path.exists():
        raise ConfigError(f"missing offline artifact {basis_path}")
    basis = snapshot.load_snapshot(basis_path)
    params = test_parameters(system, cfg)
    rows = []
    for strat in _strategies(cfg.methods):
        sel_path = artifacts_dir / f"selector_{strat}.json"
        plan_path = artifacts_dir / f"plan_{strat}.npz"
        if not sel_path.exists() or not plan_path.exists():
            raise ConfigError(f"missing offline artifacts for {strat!r} "
                              f"in {artifacts_dir}")
        sel = subsample.load_selector(sel_path)
        plan = online.load_plan(plan_path, system, basis, sel)
        batch = online.solve_batch(plan, params, workers=workers)
        for row, p in zip(batch, params):
            x = row.solution.lift()
            bn = max(np.linalg.norm(system.full_rhs(p)), 1e-300)
            res = np.linalg.norm(system.matrix(p) @ x - system.full_rhs(p))
            rows.append((f"subapsnap-{strat}", format_param(p),
                         _fmt(res / bn), "", _fmt(row.wall_time)))
    results_path = outdir / "results.csv"
    _write_csv(results_path, RESULT_HEADER, rows)
    return {"results": results_path}


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subapsnap",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config end to end")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=1)

    p_plot = sub.add_parser("plot", help="render SVG plots from a results CSV")
    p_plot.add_argument("csv")
    p_plot.add_argument("--out", required=True)

    p_off = sub.add_parser("offline", help="run the offline phase only")
    p_off.add_argument("config")
    p_off.add_argument("--artifacts", default="artifacts")
    p_off.add_argument("--seed", type=int, default=None)
    p_off.add_argument("--workers", type=int, default=1)

    p_on = sub.add_parser("online", help="run the online phase from artifacts")
    p_on.add_argument("config")
    p_on.add_argument("--artifacts", required=True)
    p_on.add_argument("--out", default="out")
    p_on.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(resolve_config(args.config))
            paths = run_experiment(cfg, args.out, seed=args.seed,
                                   workers=args.workers)
        elif args.command == "plot":
            paths = emit_plots(args.csv, args.out)
        elif args.command == "offline":
            cfg = load_config(resolve_config(args.config))
            paths = run_offline(cfg, args.artifacts, seed=args.seed,
                                workers=args.workers)
        else:
            cfg = load_config(resolve_config(args.config))
            paths = run_online(cfg, args.artifacts, args.out,
                               workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, SubapsnapError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for key, path in sorted(paths.items()):
        print(f"{key}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
