"""Online phase: per-parameter subsampled solves from a precomputed plan.

For affine systems the plan stores the s x r' blocks S A_k Q_X, so each new
parameter costs O(s r') to form the reduced matrix plus an O(s r'^2) solve;
no n-dimensional object is touched unless the solution is lifted.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .errors import RankDeficiencyError
from .snapshot import SnapshotBasis
from .subsample import RowSelector
from .systems import ParametricSystem

PLAN_CHECK_RTOL = 1e-13


@dataclass(frozen=True)
class OnlinePlan:
    system: ParametricSystem
    basis: SnapshotBasis
    selector: RowSelector
    blocks: Optional[tuple]          # per affine term, s x r' (unweighted)
    sampled_basis: np.ndarray        # S Q_X, s x r'
    output_projection: Optional[np.ndarray]  # c^H Q_X

    @property
    def affine(self) -> bool:
        return self.blocks is not None


@dataclass
class OnlineSolution:
    parameter: object
    coefficients: np.ndarray
    sampled_residual: float
    residual_interval: Optional[tuple] = None
    output_value: Optional[complex] = None
    _basis: SnapshotBasis = field(default=None, repr=False)
    _lifted: Optional[np.ndarray] = field(default=None, repr=False)

    def lift(self) -> np.ndarray:
        """Materialize x = Q_X c (O(n r'), done lazily on demand)."""
        if self._lifted is None:
            self._lifted = self._basis.basis @ self.coefficients
        return self._lifted


def _sampled_rows(system, basis, indices, p):
    """Rows ``indices`` (possibly repeated) of A(p) Q_X via the row oracle."""
    uniq, inverse = np.unique(indices, return_inverse=True)
    if system.affine_terms is None and system._row_fn is not None:
        # dense BLAS path; the sparse detour dominates the online cost here
        block = system.rows_dense(p, uniq) @ basis.basis
    else:
        block = system.rows(p, uniq) @ basis.basis
    return np.asarray(block)[inverse]


def precompute_online(system: ParametricSystem, basis: SnapshotBasis,
                      selector: RowSelector) -> OnlinePlan:
    """Precompute the selector-row blocks of each affine term.

    Only the s selected rows of each A_k are read. A spot check compares the
    first block against a direct row-oracle recomputation.
    """
    if basis.n != system.n or selector.n != system.n:
        raise ValueError("system/basis/selector dimension mismatch")
    idx = selector.indices
    uniq, inverse = np.unique(idx, return_inverse=True)
    sampled_basis = np.asarray(basis.basis)[idx]
    blocks = None
    if system.affine_terms is not None:
        blocks = tuple(
            np.asarray(term.matrix[uniq] @ basis.basis)[inverse]
            for term in system.affine_terms
        )
        # spot check against a direct assembly at the first anchor-ish point
        p0 = basis.points[0]
        direct = _sampled_rows(system, basis, idx, p0)
        combined = sum(term.coeff(p0) * blk
                       for term, blk in zip(system.affine_terms, blocks))
        err = np.linalg.norm(combined - direct)
        ref = max(np.linalg.norm(direct), 1e-300)
        if err > 1e-10 * ref:
            raise RankDeficiencyError(
                f"affine blocks disagree with row oracle (rel err {err / ref:.2e})"
            )
    proj = None
    if system.output_functional is not None:
        proj = system.output_functional.conj() @ basis.basis
    return OnlinePlan(system=system, basis=basis, selector=selector,
                      blocks=blocks, sampled_basis=sampled_basis,
                      output_projection=proj)


def solve_online(plan: OnlinePlan, p, want_interval: bool = False) -> OnlineSolution:
    """Solve the weighted subsampled least-squares problem at parameter p."""
    sel = plan.selector
    if plan.affine:
        terms = plan.system.affine_terms
        m = terms[0].coeff(p) * plan.blocks[0]
        for term, blk in zip(terms[1:], plan.blocks[1:]):
            m = m + term.coeff(p) * blk
    else:
        m = _sampled_rows(plan.system, plan.basis, sel.indices, p)
    tb = plan.system.rhs(p, sel.indices)
    try:
        coeff = linalg.solve_ls(m, tb, weights=sel.weights)
    except RankDeficiencyError as exc:
        raise RankDeficiencyError(
            f"subsampled system rank-deficient at p={p}: {exc}") from exc
    resid_vec = m @ coeff - tb
    if sel.weights is not None:
        resid_vec = resid_vec * sel.weights
    sampled_residual = float(np.linalg.norm(resid_vec))
    out_val = None
    if plan.output_projection is not None:
        out_val = complex(plan.output_projection @ coeff)
    sol = OnlineSolution(parameter=p, coefficients=coeff,
                         sampled_residual=sampled_residual,
                         output_value=out_val, _basis=plan.basis)
    if want_interval and sel.weights is not None:
        _, lower, upper, _ = estimate_residual(plan, sol)
        sol.residual_interval = (lower, upper)
    return sol


def estimate_residual(plan: OnlinePlan, solution: OnlineSolution):
    """Heuristic residual interval from the weighted sampled residual.

    Returns (estimate, lower, upper, eps) with eps = r log(r) / s clamped
    to [0, 0.99]. Only available for weighted (oversampled) selectors;
    interpolation-type selectors with s = r have zero sampled residual by
    construction and carry no information.
    """
    sel = plan.selector
    r = plan.basis.rank
    if sel.weights is None:
        raise ValueError("residual estimation requires a weighted selector")
    if sel.size <= r:
        raise ValueError("residual estimation requires oversampling (s > r)")
    eps = min(max(r * math.log(r) / sel.size if r > 1 else 0.0, 0.0), 0.99)
    est = solution.sampled_residual
    return est, est / (1.0 + eps), est / (1.0 - eps), eps


def solve_apsnap(system: ParametricSystem, basis: SnapshotBasis, p):
    """Reference full least-squares solve min_c ||A(p) Q_X c - b(p)||.

    Returns (coefficients, true residual norm). O(n r'^2).
    """
    b_mat = np.asarray(system.matrix(p) @ basis.basis)
    rhs = system.full_rhs(p)
    coeff = linalg.solve_ls(b_mat, rhs)
    residual = float(np.linalg.norm(b_mat @ coeff - rhs))
    return coeff, residual


def save_plan(path, plan: OnlinePlan) -> None:
    """Serialize the precomputed blocks (system/basis/selector travel
    separately; see snapshot.save_snapshot and subsample.save_selector)."""
    payload = {"sampled_basis": plan.sampled_basis,
               "affine": np.array(plan.affine)}
    if plan.blocks is not None:
        for k, blk in enumerate(plan.blocks):
            payload[f"block_{k}"] = blk
    if plan.output_projection is not None:
        payload["output_projection"] = plan.output_projection
    np.savez_compressed(path, **payload)


def load_plan(path, system: ParametricSystem, basis: SnapshotBasis,
              selector: RowSelector) -> OnlinePlan:
    data = np.load(path)
    blocks = None
    if bool(data["affine"]):
        blocks = []
        k = 0
        while f"block_{k}" in data:
            blocks.append(data[f"block_{k}"])
            k += 1
        blocks = tuple(blocks)
    proj = data["output_projection"] if "output_projection" in data else None
    return OnlinePlan(system=system, basis=basis, selector=selector,
                      blocks=blocks, sampled_basis=data["sampled_basis"],
                      output_projection=proj)


@dataclass(frozen=True)
class BatchRow:
    parameter: object
    sampled_residual: float
    residual_interval: Optional[tuple]
    output_value: Optional[complex]
    wall_time: float
    solution: OnlineSolution


def solve_batch(plan: OnlinePlan, parameters, want_interval: bool = False,
                workers: int = 1) -> list:
    """Solve many parameters; rows come back in input order."""

    def one(p):
        t0 = time.perf_counter()
        sol = solve_online(plan, p, want_interval=want_interval)
        dt = time.perf_counter() - t0
        return BatchRow(parameter=p, sampled_residual=sol.sampled_residual,
                        residual_interval=sol.residual_interval,
                        output_value=sol.output_value, wall_time=dt,
                        solution=sol)

    parameters = list(parameters)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, parameters))
    return [one(p) for p in parameters]
