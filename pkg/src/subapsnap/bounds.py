"""Residual near-optimality bounds for subsampled least-squares solves.

Two families: algebraic bounds comparing the subsampled and full solutions
of one least-squares problem (via the polar factor of B or of [B b]), and
parameter-perturbation bounds that reuse the selector quality at a nearby
anchor point, assuming a Lipschitz matrix family.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from . import linalg
from .errors import RankDeficiencyError
from .snapshot import SnapshotBasis
from .subsample import RowSelector
from .systems import ParametricSystem, param_distance

RATIO_FLOOR = 1e-300


@dataclass(frozen=True)
class BoundReport:
    parameter: object
    actual_ratio: float
    bound_a: float
    bound_ab: float
    theorem: Optional[float] = None
    corollary_closest: Optional[float] = None
    corollary_global: Optional[float] = None
    bound_a_ok: bool = False
    bound_ab_ok: bool = False
    theorem_ok: bool = False
    corollary_closest_ok: bool = False
    corollary_global_ok: bool = False
    ratio_defined: bool = True


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    pairs: int
    method: str


def _equilibrated(m):
    norms = np.linalg.norm(m, axis=0)
    norms[norms == 0] = 1.0
    return m / norms


def _sigma_extremes(m):
    m = np.asarray(m)
    s = np.linalg.svd(m, compute_uv=False)
    # a wide matrix has a nontrivial null space: sigma_min is zero even
    # though the economy SVD never reports it
    smin = 0.0 if m.shape[0] < m.shape[1] else float(s[-1])
    return float(s[0]), smin


def lemma_bounds(b_mat, rhs, selector: RowSelector):
    """Bounds on ||B c_hat - b|| / ||B c - b|| from a single instance.

    Returns (bound_a, bound_ab): ||S||_2 / sigma_min(S U) with B = U H the
    polar decomposition, and kappa_2(S U~) with U~ the polar factor of
    [B b]. Rank-deficient sampled factors give inf.
    """
    b_mat = np.asarray(b_mat)
    rhs = np.asarray(rhs)
    s_norm = selector.norm()
    # both bounds only see orthonormal bases of ranges, which are invariant
    # under column scaling; equilibrate so the rank test is meaningful
    try:
        u = linalg.polar_unitary(_equilibrated(b_mat)).unitary
        _, smin = _sigma_extremes(selector.apply(u))
        bound_a = s_norm / smin if smin > 0 else np.inf
    except RankDeficiencyError:
        bound_a = np.inf
    try:
        u_tilde = linalg.polar_unitary(
            _equilibrated(np.column_stack([b_mat, rhs]))).unitary
        smax_t, smin_t = _sigma_extremes(selector.apply(u_tilde))
        bound_ab = smax_t / smin_t if smin_t > 0 else np.inf
    except RankDeficiencyError:
        bound_ab = np.inf
    return bound_a, bound_ab


def actual_ratio(b_mat, rhs, selector: RowSelector) -> float:
    """Measured residual ratio ||B c_hat - b|| / ||B c - b|| (inf when the
    full residual underflows)."""
    b_mat = np.asarray(b_mat)
    rhs = np.asarray(rhs)
    c = linalg.solve_ls(b_mat, rhs)
    full = float(np.linalg.norm(b_mat @ c - rhs))
    c_hat = linalg.solve_ls(selector.apply(b_mat), selector.apply(rhs))
    sub = float(np.linalg.norm(b_mat @ c_hat - rhs))
    if full < RATIO_FLOOR:
        return np.inf
    return sub / full


def theorem_bound(system: ParametricSystem, basis: SnapshotBasis,
                  selector: RowSelector, p0, p_star, delta=None):
    """Perturbation bound anchored at p0.

    Returns (value, applicable). With U(p0) the polar factor of A(p0) Q_X
    and C = 3/sigma_min(A(p0) Q_X), the ratio is bounded by
    ||S|| / (sigma_min(S U(p0)) - C ||S|| delta) whenever the denominator is
    positive. ``delta`` defaults to a matrix-free estimate of
    ||A(p_star) - A(p0)||_2.
    """
    q = basis.basis
    b0 = np.asarray(system.matrix(p0) @ q)
    if delta is None:
        delta = matrix_difference_norm(system, p0, p_star)
    delta = float(delta)
    _, sig_aq = _sigma_extremes(b0)
    if sig_aq <= 0:
        return np.inf, False
    c_const = 3.0 / sig_aq
    try:
        u0 = linalg.polar_unitary(b0).unitary
    except RankDeficiencyError:
        return np.inf, False
    _, smin = _sigma_extremes(selector.apply(u0))
    s_norm = selector.norm()
    denom = smin - c_const * s_norm * delta
    if denom <= 0:
        return np.inf, False
    return s_norm / denom, True


def corollary_bounds(system: ParametricSystem, basis: SnapshotBasis,
                     selector: RowSelector, p_star, lipschitz: float,
                     covering_radius=None):
    """Lipschitz-propagated bounds: via the nearest snapshot point, and a
    parameter-independent global version over all snapshot points.

    Returns ((closest, closest_ok), (global, global_ok)).
    """
    if lipschitz < 0:
        raise ValueError("Lipschitz constant must be nonnegative")
    points = list(basis.points)
    dists = [param_distance(p_star, pi) for pi in points]
    i_star = int(np.argmin(dists))
    closest = theorem_bound(system, basis, selector, points[i_star], p_star,
                            delta=lipschitz * dists[i_star])

    if covering_radius is None:
        covering_radius = _covering_radius(points)
    s_norm = selector.norm()
    smins, sig_aqs = [], []
    for pi in points:
        b_i = np.asarray(system.matrix(pi) @ basis.basis)
        _, sig_aq = _sigma_extremes(b_i)
        sig_aqs.append(sig_aq)
        try:
            u_i = linalg.polar_unitary(b_i).unitary
        except RankDeficiencyError:
            return closest, (np.inf, False)
        _, smin = _sigma_extremes(selector.apply(u_i))
        smins.append(smin)
    if min(sig_aqs) <= 0:
        return closest, (np.inf, False)
    c_hat = 3.0 / min(sig_aqs)
    denom = min(smins) - c_hat * s_norm * lipschitz * covering_radius
    if denom <= 0:
        return closest, (np.inf, False)
    return closest, (s_norm / denom, True)


def _covering_radius(points) -> float:
    """Half the largest gap between adjacent snapshot points (1-d ordering
    by modulus); conservative for generic sets."""
    if len(points) == 1:
        return 0.0
    vecs = [np.atleast_1d(np.asarray(p, dtype=complex)) for p in points]
    if vecs[0].size == 1:
        vals = sorted(abs(v[0]) if v[0].imag else v[0].real for v in vecs)
        gaps = [b - a for a, b in zip(vals, vals[1:])]
        return max(gaps) / 2.0
    # multi-d: max over points of the distance to the nearest other point
    return max(
        min(param_distance(p, q) for j, q in enumerate(points) if j != i)
        for i, p in enumerate(points)
    )


def matrix_difference_norm(system: ParametricSystem, p, q,
                           iterations: int = 50, dense_limit: int = 2000,
                           seed: int = 0) -> float:
    """||A(p) - A(q)||_2, dense for small n, else power iteration."""
    diff = (system.matrix(p) - system.matrix(q)).tocsr()
    n = diff.shape[0]
    if n <= dense_limit:
        return float(np.linalg.norm(diff.toarray(), 2))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    dh = diff.conj().T.tocsr()
    est = 0.0
    for _ in range(iterations):
        w = dh @ (diff @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        est = np.sqrt(nw)
    return float(est)


def estimate_lipschitz(system: ParametricSystem, probe_points) -> LipschitzEstimate:
    """Lipschitz constant of p -> A(p) in the operator norm.

    Affine families whose parameter dependence is a single linear term give
    the exact constant |scale| * ||A_k||_2; otherwise the maximum difference
    quotient over consecutive probe pairs is returned.
    """
    terms = system.affine_terms
    if terms is not None:
        kinds = [t.kind for t in terms]
        if all(k in ("const", "linear") for k in kinds) and kinds.count("linear") == 1:
            term = terms[kinds.index("linear")]
            return LipschitzEstimate(
                value=abs(term.scale) * _sparse_norm(term.matrix),
                pairs=0, method="affine-exact")
        if all(k == "const" for k in kinds):
            return LipschitzEstimate(value=0.0, pairs=0, method="constant")
    probes = list(probe_points)
    if len(probes) < 2:
        raise ValueError("need at least two probe points")
    best = 0.0
    pairs = 0
    for p, q in zip(probes, probes[1:]):
        dist = param_distance(p, q)
        if dist == 0:
            raise ValueError("identical probe points")
        best = max(best, matrix_difference_norm(system, p, q) / dist)
        pairs += 1
    return LipschitzEstimate(value=best, pairs=pairs, method="difference-quotient")


def _sparse_norm(a, dense_limit: int = 2000) -> float:
    if a.shape[0] <= dense_limit:
        return float(np.linalg.norm(np.asarray(a.todense()), 2))
    val = spla.svds(a.astype(float) if a.dtype.kind != "c" else a,
                    k=1, return_singular_vectors=False)
    return float(val[0])


def bound_report(system: ParametricSystem, basis: SnapshotBasis,
                 selector: RowSelector, p_star, lipschitz=None,
                 covering_radius=None, anchor=None) -> BoundReport:
    """Evaluate every bound plus the measured ratio at one parameter."""
    b_mat = np.asarray(system.matrix(p_star) @ basis.basis)
    rhs = system.full_rhs(p_star)
    ratio = actual_ratio(b_mat, rhs, selector)
    bound_a, bound_ab = lemma_bounds(b_mat, rhs, selector)
    if anchor is not None:
        # a known Lipschitz constant gives delta without forming A(p)-A(p0)
        delta = (None if lipschitz is None
                 else lipschitz * param_distance(anchor, p_star))
        thm, thm_ok = theorem_bound(system, basis, selector, anchor, p_star,
                                    delta=delta)
    else:
        thm, thm_ok = None, False
    cor_c = cor_g = None
    cor_c_ok = cor_g_ok = False
    if lipschitz is not None:
        (cor_c, cor_c_ok), (cor_g, cor_g_ok) = corollary_bounds(
            system, basis, selector, p_star, lipschitz, covering_radius)
    return BoundReport(
        parameter=p_star, actual_ratio=ratio,
        bound_a=bound_a, bound_ab=bound_ab,
        theorem=thm, corollary_closest=cor_c, corollary_global=cor_g,
        bound_a_ok=np.isfinite(bound_a), bound_ab_ok=np.isfinite(bound_ab),
        theorem_ok=bool(thm_ok), corollary_closest_ok=bool(cor_c_ok),
        corollary_global_ok=bool(cor_g_ok),
        ratio_defined=np.isfinite(ratio),
    )
