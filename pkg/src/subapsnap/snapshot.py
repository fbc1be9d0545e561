"""Offline phase: solve at snapshot points and orthonormalize the basis."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ConfigError, NumericalError
from .systems import Axis, Domain, ParametricSystem


@dataclass(frozen=True)
class SnapshotBasis:
    """Orthonormalized snapshot of solutions x(p_i).

    ``points`` are the snapshot parameters, ``raw`` the n x r matrix of
    solves, ``basis`` the n x r' orthonormal matrix spanning (a truncation
    of) its range, and ``singular_values`` those of the raw snapshot.
    """

    points: tuple
    raw: np.ndarray
    basis: np.ndarray
    singular_values: np.ndarray

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def default_snapshot_points(domain: Domain, r: int,
                            layout: str = "equispaced") -> list:
    """Deterministic snapshot point sets on a box domain.

    1-d domains give exactly r points; multi-d domains use a tensor grid
    with ceil(r**(1/d)) points per axis (the total may exceed r).
    """
    if r < 1:
        raise ConfigError("need at least one snapshot point")
    d = domain.dim
    per_axis = r if d == 1 else int(np.ceil(r ** (1.0 / d)))
    grids = [_axis_points(ax, per_axis, layout) for ax in domain.axes]
    if d == 1:
        return list(grids[0])
    mesh = np.meshgrid(*grids, indexing="ij")
    return [tuple(m.flat[k] for m in mesh) for k in range(mesh[0].size)]


def _axis_points(axis: Axis, count: int, layout: str) -> np.ndarray:
    lo, hi = axis.lo, axis.hi
    if count == 1:
        pts = np.array([(lo + hi) / 2.0])
    elif layout == "equispaced":
        pts = np.linspace(lo, hi, count)
    elif layout == "log-spaced":
        if lo <= 0 or hi <= 0:
            raise ConfigError("log-spaced layout needs positive endpoints")
        pts = np.logspace(np.log10(lo), np.log10(hi), count)
    elif layout == "log1p":
        if lo < 0:
            raise ConfigError("log1p layout needs nonnegative endpoints")
        pts = np.expm1(np.linspace(np.log1p(lo), np.log1p(hi), count))
    elif layout == "chebyshev":
        nodes = np.cos(np.pi * (2 * np.arange(count) + 1) / (2 * count))[::-1]
        pts = (lo + hi) / 2.0 + (hi - lo) / 2.0 * nodes
    else:
        raise ConfigError(f"unknown point layout {layout!r}")
    if axis.imag:
        return pts * 1j
    return pts


def build_snapshot(system: ParametricSystem, points, mode="qr",
                   workers: int = 1) -> SnapshotBasis:
    """Solve at every snapshot point and orthonormalize.

    ``mode`` is "qr", "pod" / ("pod", tol), or "none" (raw columns kept;
    testing only). Snapshot solves may run in parallel; column order always
    follows the input point order.
    """
    points = list(points)
    if len(points) == 0:
        raise ConfigError("no snapshot points given")
    keys = [repr(p) for p in points]
    if len(set(keys)) != len(keys):
        raise ConfigError("duplicate snapshot points")
    if len(points) > system.n:
        raise ConfigError("more snapshot points than unknowns")

    def solve(p):
        try:
            return system.full_solve(p)
        except NumericalError as exc:
            raise NumericalError(f"snapshot solve failed at p={p}: {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(solve, points))
    else:
        cols = [solve(p) for p in points]
    raw = np.column_stack(cols)
    _, sigma, _ = linalg.thin_svd(raw)

    mode_name, tol = _parse_mode(mode)
    if mode_name == "qr":
        basis, _ = linalg.thin_qr(raw)
    elif mode_name == "pod":
        w, s, _ = linalg.thin_svd(raw)
        keep = s > tol * s[0] if s[0] > 0 else np.ones_like(s, dtype=bool)
        keep_r = max(int(np.count_nonzero(keep)), 1)
        basis = w[:, :keep_r]
    elif mode_name == "none":
        basis = raw
    else:
        raise ConfigError(f"unknown snapshot mode {mode!r}")
    return SnapshotBasis(points=tuple(points), raw=raw, basis=basis,
                         singular_values=sigma)


def _parse_mode(mode):
    if isinstance(mode, tuple):
        name, tol = mode
        return name, float(tol)
    if isinstance(mode, str) and mode.startswith("pod(") and mode.endswith(")"):
        return "pod", float(mode[4:-1])
    if mode == "pod":
        return "pod", 1e-10
    return mode, 0.0


def save_snapshot(path, basis: SnapshotBasis) -> None:
    """Serialize to .npz so offline and online phases can run separately."""
    pts = np.array([np.atleast_1d(np.asarray(p, dtype=complex)) for p in basis.points])
    np.savez_compressed(path, points=pts, raw=basis.raw, basis=basis.basis,
                        singular_values=basis.singular_values)


def load_snapshot(path) -> SnapshotBasis:
    data = np.load(path)
    pts = data["points"]
    points = []
    for row in pts:
        row = np.atleast_1d(row)
        if row.size == 1:
            val = complex(row[0])
            points.append(val.real if val.imag == 0 else val)
        else:
            points.append(tuple(complex(v).real if complex(v).imag == 0 else complex(v)
                                for v in row))
    return SnapshotBasis(points=tuple(points), raw=data["raw"],
                         basis=data["basis"],
                         singular_values=data["singular_values"])
