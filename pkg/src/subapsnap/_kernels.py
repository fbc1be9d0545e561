"""Hot row-assembly kernels, numba-compiled with a pure-numpy fallback.

Set the environment variable ``SUBAPSNAP_NO_NUMBA=1`` to force the numpy
path (useful for debugging and for the benchmark in benchmarks/).
"""
from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("SUBAPSNAP_NO_NUMBA", "0") not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def _rbf_rows_numpy(points, row_indices, sigma, lam):
    """Rows ``row_indices`` of exp(-(t_i - t_j)^2 / (2 sigma^2)) + lam * I."""
    diff = points[row_indices][:, None] - points[None, :]
    out = np.exp(-(diff * diff) / (2.0 * sigma * sigma))
    for k, i in enumerate(row_indices):
        out[k, i] += lam
    return out


def _rbf_cross_numpy(eval_points, train_points, sigma):
    """Cross-kernel block k(eval_i, train_j)."""
    diff = eval_points[:, None] - train_points[None, :]
    return np.exp(-(diff * diff) / (2.0 * sigma * sigma))


if USE_NUMBA:

    @njit(cache=True)
    def _rbf_rows_jit(points, row_indices, sigma, lam):
        n = points.shape[0]
        s = row_indices.shape[0]
        out = np.empty((s, n))
        inv = 1.0 / (2.0 * sigma * sigma)
        for k in range(s):
            ti = points[row_indices[k]]
            for j in range(n):
                d = ti - points[j]
                out[k, j] = np.exp(-d * d * inv)
            out[k, row_indices[k]] += lam
        return out

    @njit(cache=True)
    def _rbf_cross_jit(eval_points, train_points, sigma):
        m = eval_points.shape[0]
        n = train_points.shape[0]
        out = np.empty((m, n))
        inv = 1.0 / (2.0 * sigma * sigma)
        for i in range(m):
            for j in range(n):
                d = eval_points[i] - train_points[j]
                out[i, j] = np.exp(-d * d * inv)
        return out


def rbf_rows(points, row_indices, sigma, lam):
    points = np.ascontiguousarray(points, dtype=np.float64)
    row_indices = np.ascontiguousarray(row_indices, dtype=np.int64)
    if USE_NUMBA:
        return _rbf_rows_jit(points, row_indices, float(sigma), float(lam))
    return _rbf_rows_numpy(points, row_indices, float(sigma), float(lam))


def rbf_cross(eval_points, train_points, sigma):
    eval_points = np.ascontiguousarray(eval_points, dtype=np.float64)
    train_points = np.ascontiguousarray(train_points, dtype=np.float64)
    if USE_NUMBA:
        return _rbf_cross_jit(eval_points, train_points, float(sigma))
    return _rbf_cross_numpy(eval_points, train_points, float(sigma))
