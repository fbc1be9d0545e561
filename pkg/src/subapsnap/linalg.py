"""Dense factorization primitives: thin QR/SVD, polar factors, pivoting, LS solves.

Everything works for real and complex double precision; adjoints are always
conjugate transposes so the complex case needs no special handling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import RankDeficiencyError

DEFAULT_RTOL = 1e-12


@dataclass(frozen=True)
class PolarFactors:
    """Polar decomposition M = unitary @ hermitian.

    ``unitary`` is n x r with orthonormal columns, ``hermitian`` is r x r
    Hermitian positive semidefinite.
    """

    unitary: np.ndarray
    hermitian: np.ndarray


def _as_matrix(m):
    m = np.asarray(m)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def thin_qr(m, rtol: float = DEFAULT_RTOL):
    """Thin QR factorization of a tall matrix.

    Returns (Q, R) with Q n x r orthonormal and R r x r upper triangular.
    Raises RankDeficiencyError when a diagonal of R falls below
    ``rtol`` times the largest one.
    """
    m = _as_matrix(m)
    n, r = m.shape
    if n < r:
        raise ValueError(f"thin_qr requires n >= r, got {n} x {r}")
    q, rmat = np.linalg.qr(m)
    diag = np.abs(np.diag(rmat))
    if diag.size and diag.min() < rtol * max(diag.max(), np.finfo(float).tiny):
        raise RankDeficiencyError(
            f"numerically rank-deficient: min |R_ii| = {diag.min():.3e}, "
            f"max |R_ii| = {diag.max():.3e}"
        )
    return q, rmat


def thin_svd(m):
    """Thin SVD: returns (W, sigma, V) with M = W @ diag(sigma) @ V^H."""
    m = _as_matrix(m)
    try:
        w, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise RankDeficiencyError(f"SVD did not converge: {exc}") from exc
    return w, s, vh.conj().T


def polar_unitary(m, rtol: float = DEFAULT_RTOL) -> PolarFactors:
    """Polar decomposition M = U H via the thin SVD.

    U = W V^H is the closest matrix with orthonormal columns to M in the
    Frobenius norm; H = V diag(sigma) V^H. Requires full column rank,
    otherwise U is not unique.
    """
    w, s, v = thin_svd(m)
    if s.size and s[-1] < rtol * max(s[0], np.finfo(float).tiny):
        raise RankDeficiencyError(
            f"polar factor not unique: sigma_min = {s[-1]:.3e}, sigma_max = {s[0]:.3e}"
        )
    unitary = w @ v.conj().T
    hermitian = (v * s) @ v.conj().T
    return PolarFactors(unitary=unitary, hermitian=hermitian)


def solve_ls(m, rhs, weights=None, rtol: float = DEFAULT_RTOL):
    """Least-squares solve min_c ||diag(weights) (M c - rhs)||_2 via QR.

    ``weights`` (optional, length m) scale the rows; omit for the plain
    problem. Raises RankDeficiencyError naming the offending column when the
    (weighted) matrix is numerically rank-deficient.
    """
    m = _as_matrix(m)
    rhs = np.asarray(rhs)
    if rhs.shape[0] != m.shape[0]:
        raise ValueError("rhs length does not match row count")
    if m.shape[0] < m.shape[1]:
        raise ValueError("solve_ls requires rows >= cols")
    if weights is not None:
        weights = np.asarray(weights)
        m = m * weights[:, None]
        rhs = rhs * weights
    q, rmat = np.linalg.qr(m)
    diag = np.abs(np.diag(rmat))
    if diag.size and diag.min() < rtol * max(diag.max(), np.finfo(float).tiny):
        col = int(np.argmin(diag))
        raise RankDeficiencyError(
            f"rank-deficient least-squares matrix at column {col}"
        )
    return sla.solve_triangular(rmat, q.conj().T @ rhs)


def lupp_row_pivots(m):
    """First r pivot rows of Gaussian elimination with partial pivoting.

    Returns the ordered list of original row indices chosen as pivots when
    eliminating the n x r matrix column by column.
    """
    a = _as_matrix(m).copy()
    n, r = a.shape
    if n < r:
        raise ValueError("lupp_row_pivots requires n >= r")
    perm = np.arange(n)
    for k in range(r):
        col = np.abs(a[k:, k])
        piv = k + int(np.argmax(col))
        if col[piv - k] == 0.0:
            raise RankDeficiencyError(f"zero pivot column at elimination step {k}")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            perm[[k, piv]] = perm[[piv, k]]
        factors = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(factors, a[k, k:])
    return np.asarray(perm[:r], dtype=np.int64)


def cpqr_row_pivots(m):
    """Row pivots of M via Businger-Golub column-pivoted QR on M^H.

    Greedy max-residual-norm choice; returns the first r indices.
    """
    a = _as_matrix(m)
    n, r = a.shape
    if n < r:
        raise ValueError("cpqr_row_pivots requires n >= r")
    _, rmat, jpvt = sla.qr(a.conj().T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(rmat))[:r]
    if diag.min() == 0.0:
        raise RankDeficiencyError("rank-deficient input to cpqr_row_pivots")
    return [int(i) for i in jpvt[:r]]
