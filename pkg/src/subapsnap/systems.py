"""Parameter-dependent linear systems A(p)x(p) = b(p).

A :class:`ParametricSystem` exposes row/rhs oracles (so callers can touch
only a few rows), an optional affine decomposition A(p) = sum_k f_k(p) A_k,
and a reference direct solver. Generators for the built-in test problems and
a Matrix Market loader live here as well.
"""
from __future__ import annotations

import cmath
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .errors import ConfigError, NumericalError

FULL_SOLVE_RTOL = 1e-10


# --------------------------------------------------------------------------
# Parameter domains
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Axis:
    """One axis of a box parameter domain.

    ``imag`` means the parameter runs along the imaginary axis: the stored
    endpoints are the (positive) imaginary parts and actual parameter values
    are ``1j * t``.
    """

    lo: float
    hi: float
    imag: bool = False

    def __post_init__(self):
        if not self.hi >= self.lo:
            raise ConfigError(f"axis endpoints out of order: [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Domain:
    axes: tuple

    @property
    def dim(self) -> int:
        return len(self.axes)


def interval(lo: float, hi: float, imag: bool = False) -> Domain:
    return Domain(axes=(Axis(lo, hi, imag),))


def param_vector(p) -> np.ndarray:
    """Parameter as a 1-d complex vector (scalars become length-1)."""
    if np.isscalar(p):
        return np.array([p], dtype=complex)
    return np.asarray(p, dtype=complex).ravel()


def param_distance(p, q) -> float:
    return float(np.linalg.norm(param_vector(p) - param_vector(q)))


# --------------------------------------------------------------------------
# Affine terms and the system class
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineTerm:
    """One term f_k(p) * A_k of an affine decomposition.

    ``kind`` tags the coefficient: "const" (f = scale), "linear"
    (f = scale * p, 1-d parameters only), or "other" (generic callable).
    The tag lets downstream code recognise exactly-Lipschitz systems.
    """

    coeff: Callable
    matrix: sp.csr_matrix
    kind: str = "other"
    scale: complex = 1.0


def const_term(a, scale=1.0) -> AffineTerm:
    s = complex(scale)
    return AffineTerm(coeff=lambda p, s=s: s, matrix=sp.csr_matrix(a),
                      kind="const", scale=s)


def linear_term(a, scale=1.0) -> AffineTerm:
    s = complex(scale)
    return AffineTerm(coeff=lambda p, s=s: s * p, matrix=sp.csr_matrix(a),
                      kind="linear", scale=s)


class ParametricSystem:
    """Oracle-style description of a family A(p) x = b(p).

    Immutable after construction; the oracles are pure functions of their
    arguments and may be called concurrently.
    """

    def __init__(self, n, domain, rhs_fn, affine_terms=None, row_fn=None,
                 matrix_fn=None, output_functional=None, banded=None,
                 name="", extras=None):
        if affine_terms is None and row_fn is None:
            raise ValueError("need affine terms or an explicit row oracle")
        self.n = int(n)
        self.domain = domain
        self.affine_terms = tuple(affine_terms) if affine_terms else None
        self._rhs_fn = rhs_fn
        self._row_fn = row_fn
        self._matrix_fn = matrix_fn
        self.output_functional = (
            None if output_functional is None else np.asarray(output_functional)
        )
        self.banded = banded  # (lower, upper) bandwidths, or None
        self.name = name
        self.extras = dict(extras or {})

    @property
    def dim(self) -> int:
        return self.domain.dim

    # -- oracles ----------------------------------------------------------

    def rows(self, p, indices) -> sp.csr_matrix:
        """Rows ``indices`` of A(p) as a sparse s x n block."""
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() >= self.n):
            raise IndexError(f"row index out of range for n={self.n}")
        if indices.size != np.unique(indices).size:
            raise ValueError("row indices must be distinct")
        if indices.size == 0:
            return sp.csr_matrix((0, self.n))
        if self._row_fn is not None:
            return sp.csr_matrix(self._row_fn(p, indices))
        out = None
        for term in self.affine_terms:
            block = term.matrix[indices] * term.coeff(p)
            out = block if out is None else out + block
        return sp.csr_matrix(out)

    def rows_dense(self, p, indices) -> np.ndarray:
        """Rows ``indices`` of A(p) as a dense block, straight from the row
        oracle. Hot-loop variant of :meth:`rows`: no sparse packaging."""
        if self._row_fn is None:
            raise ValueError("rows_dense requires an explicit row oracle")
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() >= self.n):
            raise IndexError(f"row index out of range for n={self.n}")
        block = self._row_fn(p, indices)
        if sp.issparse(block):
            return block.toarray()
        return np.asarray(block)

    def rhs(self, p, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() >= self.n):
            raise IndexError(f"rhs index out of range for n={self.n}")
        return np.asarray(self._rhs_fn(p, indices))

    def full_rhs(self, p) -> np.ndarray:
        return self.rhs(p, np.arange(self.n))

    def matrix(self, p) -> sp.csr_matrix:
        """Fully assembled A(p) (reference use; O(nnz))."""
        if self.affine_terms is not None:
            out = None
            for term in self.affine_terms:
                block = term.matrix * term.coeff(p)
                out = block if out is None else out + block
            return sp.csr_matrix(out)
        if self._matrix_fn is not None:
            return sp.csr_matrix(self._matrix_fn(p))
        return self.rows(p, np.arange(self.n))

    # -- reference solve --------------------------------------------------

    def full_solve(self, p) -> np.ndarray:
        """Direct solve of A(p) x = b(p) with a residual guard.

        Ill-conditioned instances get up to two steps of iterative
        refinement before the guard fires.
        """
        b = self.full_rhs(p)
        a = self.matrix(p)

        def solve(rhs):
            if self.banded is not None:
                return _banded_solve(a, rhs, self.banded)
            try:
                return spla.spsolve(a.tocsc(), rhs)
            except RuntimeError as exc:
                raise NumericalError(f"sparse solve failed at p={p}: {exc}") from exc

        x = solve(b)
        a_norm = spla.norm(a)  # Frobenius; backward-error scale, not sharp

        def floor(x):
            # attainable residual scale is ||A|| ||x|| + ||b||, not ||b||
            return max(a_norm * np.linalg.norm(x) + np.linalg.norm(b), 1e-300)

        res = np.linalg.norm(a @ x - b)
        for _ in range(2):
            if np.all(np.isfinite(x)) and res <= FULL_SOLVE_RTOL * floor(x):
                break
            x = x + solve(b - a @ x)
            res = np.linalg.norm(a @ x - b)
        if not np.all(np.isfinite(x)) or res > FULL_SOLVE_RTOL * floor(x):
            raise NumericalError(
                f"full_solve residual {res:.3e} exceeds "
                f"{FULL_SOLVE_RTOL:.0e} * (||A|| ||x|| + ||b||) at p={p}"
            )
        return x


def _banded_solve(a, b, bandwidths):
    lo, up = bandwidths
    dia = a.todia()
    dtype = np.result_type(dia.dtype, b.dtype)
    n = a.shape[0]
    ab = np.zeros((lo + up + 1, n), dtype=dtype)
    for off, row in zip(dia.offsets, dia.data):
        if off > up or -off > lo:
            raise NumericalError("matrix bandwidth exceeds declared bounds")
        ab[up - off] = row
    try:
        return sla.solve_banded((lo, up), ab, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"banded solve failed: {exc}") from exc


def assemble_rows(system: ParametricSystem, p, indices) -> sp.csr_matrix:
    return system.rows(p, indices)


def assemble_rhs(system: ParametricSystem, p, indices) -> np.ndarray:
    return system.rhs(p, indices)


def full_solve(system: ParametricSystem, p) -> np.ndarray:
    return system.full_solve(p)


# --------------------------------------------------------------------------
# Problem specifications
# --------------------------------------------------------------------------

KINDS = ("tridiag", "heat2d", "convdiff", "delay", "krr", "matrix_market")


@dataclass(frozen=True)
class ProblemSpec:
    """Tagged choice of test problem plus its parameters."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown problem kind {self.kind!r}")


def build_problem(spec: ProblemSpec) -> ParametricSystem:
    builder = {
        "tridiag": _build_tridiag,
        "heat2d": _build_heat2d,
        "convdiff": _build_convdiff,
        "delay": _build_delay,
        "krr": _build_krr,
        "matrix_market": _build_matrix_market,
    }[spec.kind]
    return builder(**spec.params)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _build_tridiag(n=1000, seed=0):
    """A(p) = A0 - p I with A0 = tridiag(-1, 2, -1); componentwise
    b(p) = exp(b0 * sin(p/10) * p) with b0 a seeded Gaussian vector."""
    n = int(n)
    _require(n >= 2, "tridiag: n must be >= 2")
    a0 = sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)],
                  [-1, 0, 1], format="csr")
    b0 = np.random.default_rng(int(seed)).standard_normal(n)

    def rhs_fn(p, idx):
        return np.exp(b0[idx] * np.sin(p / 10.0) * p)

    terms = (const_term(a0), linear_term(sp.identity(n, format="csr"), -1.0))
    return ParametricSystem(n, interval(-10.0, -9.0), rhs_fn,
                            affine_terms=terms, banded=(1, 1), name="tridiag")


def _conductivity_matrix(grid, edge_coeff):
    """FD matrix of -div(sigma grad u) on the interior of [-1,1]^2, u=0 on
    the boundary, with sigma evaluated at edge midpoints by ``edge_coeff``."""
    g = int(grid)
    h = 2.0 / (g + 1)
    xs = -1.0 + h * np.arange(1, g + 1)
    n = g * g
    rows, cols, vals = [], [], []

    def node(i, j):
        return i * g + j

    for i in range(g):
        for j in range(g):
            x, y = xs[i], xs[j]
            diag = 0.0
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                mx, my = x + di * h / 2.0, y + dj * h / 2.0
                c = edge_coeff(mx, my) / (h * h)
                diag += c
                ni, nj = i + di, j + dj
                if 0 <= ni < g and 0 <= nj < g:
                    rows.append(node(i, j))
                    cols.append(node(ni, nj))
                    vals.append(-c)
            rows.append(node(i, j))
            cols.append(node(i, j))
            vals.append(diag)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _build_heat2d(grid=50):
    """Stationary heat equation on [-1,1]^2, conductivity 1 + p inside the
    unit disk and 1 outside, unit forcing, zero Dirichlet boundary."""
    g = int(grid)
    _require(g >= 2, "heat2d: grid must be >= 2")
    base = _conductivity_matrix(g, lambda x, y: 1.0)
    disk = _conductivity_matrix(g, lambda x, y: 1.0 if x * x + y * y <= 1.0 else 0.0)
    n = g * g

    def rhs_fn(p, idx):
        return np.ones(len(idx))

    terms = (const_term(base), linear_term(disk, 1.0))
    return ParametricSystem(n, interval(0.0, 5.0), rhs_fn,
                            affine_terms=terms, name="heat2d")


def _build_convdiff(grid=50, convection=10.0):
    """Transfer-function system p E - A with A a stable 2-d
    convection-diffusion FD operator, E = I, b = ones, c = e_1.

    Stand-in for the lyapack convection-diffusion data set (not
    redistributable); same structure, desk-scale sizes.
    """
    g = int(grid)
    _require(g >= 2, "convdiff: grid must be >= 2")
    conv = float(convection)
    h = 1.0 / (g + 1)
    n = g * g
    lap = _conductivity_matrix(g, lambda x, y: 1.0) * (2.0 / (g + 1)) ** 2 / (h * h)
    # upwind d/dx on the same grid
    rows, cols, vals = [], [], []
    for i in range(g):
        for j in range(g):
            k = i * g + j
            rows.append(k); cols.append(k); vals.append(1.0 / h)
            if i > 0:
                rows.append(k); cols.append((i - 1) * g + j); vals.append(-1.0 / h)
    dx = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    a_cd = -(lap + conv * dx)

    def rhs_fn(p, idx):
        return np.ones(len(idx))

    c = np.zeros(n)
    c[0] = 1.0
    terms = (linear_term(sp.identity(n, format="csr")), const_term(a_cd, -1.0))
    return ParametricSystem(n, interval(1.0, 1e6, imag=True), rhs_fn,
                            affine_terms=terms, output_functional=c,
                            name="convdiff")


def _build_delay(n=1000, tau=0.1, kappa=2.1, seed=0):
    """Delay system A(p) = p I - A0 - e^(tau p) A1 with
    A1 = (T - kappa I)/tau, A0 = 3 A1, T the corner-adjusted adjacency.

    The constant vector is an eigenvector of T, so b and the output vector
    are seeded Gaussians to keep the solution family nontrivial.
    """
    n = int(n)
    tau = float(tau)
    kappa = float(kappa)
    _require(n >= 2, "delay: n must be >= 2")
    _require(tau > 0, "delay: tau must be positive")
    _require(kappa > 2, "delay: kappa must exceed 2")
    t = sp.diags([np.ones(n - 1), np.ones(n - 1)], [-1, 1], format="lil")
    t[0, 0] = 1.0
    t[n - 1, n - 1] = 1.0
    a1 = sp.csr_matrix((t.tocsr() - kappa * sp.identity(n)) / tau)
    a0 = sp.csr_matrix(3.0 * a1)
    rng = np.random.default_rng(int(seed))
    b = rng.standard_normal(n)
    c = rng.standard_normal(n)

    def rhs_fn(p, idx):
        return b[idx]
    terms = (
        linear_term(sp.identity(n, format="csr")),
        const_term(a0, -1.0),
        AffineTerm(coeff=lambda p: -cmath.exp(tau * p), matrix=a1, kind="other"),
    )
    return ParametricSystem(n, interval(1.0, 1e4, imag=True), rhs_fn,
                            affine_terms=terms, output_functional=c,
                            banded=(1, 1), name="delay")


def _build_krr(n_train=2000, n_test=200, seed=0, noise=0.3):
    """Kernel ridge regression system (K(sigma) + lambda I) x = y_train.

    Parameter is the pair p = (lambda, sigma). Data: equispaced points on
    [0, 10], shuffled by a seeded permutation; targets sin(t) + noise.
    No affine decomposition is recorded: the sigma-dependence of K is not
    affine, so the row oracle is the interface.
    """
    n_train = int(n_train)
    n_test = int(n_test)
    _require(n_train >= 2 and n_test >= 1, "krr: need n_train >= 2, n_test >= 1")
    _require(noise >= 0, "krr: noise must be nonnegative")
    rng = np.random.default_rng(int(seed))
    total = n_train + n_test
    t_all = np.linspace(0.0, 10.0, total)
    perm = rng.permutation(total)
    t_all = t_all[perm]
    y_all = np.sin(t_all) + float(noise) * rng.standard_normal(total)
    t_train, y_train = t_all[:n_train], y_all[:n_train]
    t_test, y_test = t_all[n_train:], y_all[n_train:]

    def row_fn(p, idx):
        lam, sigma = p
        return _kernels.rbf_rows(t_train, idx, sigma, lam)

    def matrix_fn(p):
        lam, sigma = p
        k = _kernels.rbf_cross(t_train, t_train, sigma)
        k[np.arange(n_train), np.arange(n_train)] += lam
        return k

    def rhs_fn(p, idx):
        return y_train[idx]

    domain = Domain(axes=(Axis(1e-5, 1e2), Axis(0.1, 10.0)))
    return ParametricSystem(
        n_train, domain, rhs_fn, row_fn=row_fn, matrix_fn=matrix_fn,
        name="krr",
        extras={"t_train": t_train, "y_train": y_train,
                "t_test": t_test, "y_test": y_test},
    )


# --------------------------------------------------------------------------
# Matrix Market ingestion
# --------------------------------------------------------------------------

def read_matrix_market(path) -> sp.csr_matrix:
    """Read a NIST coordinate-format .mtx file (real/complex/integer,
    general or symmetric/hermitian/skew). Raises ConfigError with the
    offending line number on malformed input."""
    try:
        with open(path, "r") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read matrix market file {path}: {exc}") from exc
    if not lines or not lines[0].startswith("%%MatrixMarket"):
        raise ConfigError(f"{path}:1: missing %%MatrixMarket header")
    head = lines[0].split()
    if len(head) != 5 or head[1].lower() != "matrix":
        raise ConfigError(f"{path}:1: malformed header {lines[0].strip()!r}")
    fmt, dtype, symm = head[2].lower(), head[3].lower(), head[4].lower()
    if fmt != "coordinate":
        raise ConfigError(f"{path}:1: only coordinate format is supported")
    if dtype not in ("real", "complex", "integer", "pattern"):
        raise ConfigError(f"{path}:1: unsupported field type {dtype!r}")
    if symm not in ("general", "symmetric", "hermitian", "skew-symmetric"):
        raise ConfigError(f"{path}:1: unsupported symmetry {symm!r}")

    lineno = 1
    k = 1
    while k < len(lines) and lines[k].lstrip().startswith("%"):
        k += 1
    if k >= len(lines):
        raise ConfigError(f"{path}:{k}: missing size line")
    lineno = k + 1
    try:
        nrows, ncols, nnz = (int(tok) for tok in lines[k].split())
    except ValueError:
        raise ConfigError(f"{path}:{lineno}: malformed size line {lines[k].strip()!r}")
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=complex if dtype == "complex" else float)
    idx = 0
    for off, line in enumerate(lines[k + 1:], start=lineno + 1):
        if not line.strip():
            continue
        if idx >= nnz:
            raise ConfigError(f"{path}:{off}: more entries than declared ({nnz})")
        toks = line.split()
        try:
            i, j = int(toks[0]) - 1, int(toks[1]) - 1
            if dtype == "pattern":
                v = 1.0
            elif dtype == "complex":
                v = float(toks[2]) + 1j * float(toks[3])
            else:
                v = float(toks[2])
        except (ValueError, IndexError):
            raise ConfigError(f"{path}:{off}: malformed entry {line.strip()!r}")
        if not (0 <= i < nrows and 0 <= j < ncols):
            raise ConfigError(f"{path}:{off}: index out of range")
        rows[idx], cols[idx], vals[idx] = i, j, v
        idx += 1
    if idx != nnz:
        raise ConfigError(f"{path}: expected {nnz} entries, found {idx}")
    a = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols))
    if symm != "general":
        off_diag = a.row != a.col
        mirror_vals = a.data[off_diag]
        if symm == "hermitian":
            mirror_vals = np.conj(mirror_vals)
        elif symm == "skew-symmetric":
            mirror_vals = -mirror_vals
        mirror = sp.coo_matrix((mirror_vals, (a.col[off_diag], a.row[off_diag])),
                               shape=a.shape)
        a = a + mirror
    return sp.csr_matrix(a)


_COEFF_RE = re.compile(
    r"^\s*(?:(?P<scale>[-+]?[0-9.eE+-]+)\s*\*\s*)?"
    r"(?:(?P<neg>-)?(?:(?P<p>p)|exp\(\s*(?P<a>[-+]?[0-9.eE+-]+)\s*\*\s*p\s*\)))?\s*$"
)


def parse_coefficient(expr: str) -> AffineTerm | tuple:
    """Parse a coefficient expression into (callable, kind, scale).

    Grammar covers the built-in problems: a scalar, ``p``, ``-p``,
    ``c*p``, ``exp(a*p)``, ``c*exp(a*p)``.
    """
    expr = expr.strip()
    try:
        s = float(expr)
        return (lambda p, s=s: s), "const", s
    except ValueError:
        pass
    m = _COEFF_RE.match(expr)
    if not m or (m.group("p") is None and m.group("a") is None):
        raise ConfigError(f"cannot parse coefficient expression {expr!r}")
    scale = float(m.group("scale")) if m.group("scale") else 1.0
    if m.group("neg"):
        scale = -scale
    if m.group("p"):
        return (lambda p, s=scale: s * p), "linear", scale
    a = float(m.group("a"))
    return (lambda p, s=scale, a=a: s * cmath.exp(a * p)), "other", scale


def _build_matrix_market(matrices=(), coefficients=(), rhs="ones",
                         domain_lo=0.0, domain_hi=1.0, domain_imag=False,
                         output=None):
    """Assemble a system from Matrix Market files with coefficient
    expressions; ``rhs`` is a .mtx path (n x 1) or "ones"."""
    if isinstance(matrices, str):
        matrices = [tok for tok in matrices.split(",") if tok.strip()]
    if isinstance(coefficients, str):
        coefficients = [tok for tok in coefficients.split(",") if tok.strip()]
    _require(len(matrices) >= 1, "matrix_market: need at least one matrix file")
    _require(len(matrices) == len(coefficients),
             "matrix_market: one coefficient expression per matrix file")
    terms = []
    n = None
    for path, expr in zip(matrices, coefficients):
        a = read_matrix_market(path.strip())
        if a.shape[0] != a.shape[1]:
            raise ConfigError(f"{path}: matrix must be square")
        if n is None:
            n = a.shape[0]
        elif a.shape[0] != n:
            raise ConfigError(f"{path}: size mismatch ({a.shape[0]} vs {n})")
        fn, kind, scale = parse_coefficient(expr)
        terms.append(AffineTerm(coeff=fn, matrix=a, kind=kind, scale=scale))
    if rhs == "ones":
        b = np.ones(n)
    else:
        b_mat = read_matrix_market(rhs)
        b = np.asarray(b_mat.todense()).ravel()
        if b.size != n:
            raise ConfigError(f"{rhs}: rhs length {b.size} != n={n}")

    def rhs_fn(p, idx):
        return b[idx]

    c = None
    if output is not None:
        c_mat = read_matrix_market(output)
        c = np.asarray(c_mat.todense()).ravel()
    return ParametricSystem(
        n, interval(float(domain_lo), float(domain_hi), bool(domain_imag)),
        rhs_fn, affine_terms=tuple(terms), output_functional=c,
        name="matrix_market")


# --------------------------------------------------------------------------
# ProblemSpec <-> config text
# --------------------------------------------------------------------------

_INT_FIELDS = {"n", "seed", "grid", "n_train", "n_test"}
_FLOAT_FIELDS = {"tau", "kappa", "convection", "noise",
                 "domain_lo", "domain_hi"}
_BOOL_FIELDS = {"domain_imag"}


def problem_spec_from_section(section) -> ProblemSpec:
    """Build a ProblemSpec from a config-file section (mapping of strings)."""
    items = dict(section)
    kind = items.pop("kind", None)
    if kind is None:
        raise ConfigError("[problem] section needs a 'kind' key")
    params = {}
    for key, value in items.items():
        if key in _INT_FIELDS:
            params[key] = int(value)
        elif key in _FLOAT_FIELDS:
            params[key] = float(value)
        elif key in _BOOL_FIELDS:
            params[key] = value.strip().lower() in ("1", "true", "yes")
        else:
            params[key] = value
    return ProblemSpec(kind=kind, params=params)


def problem_spec_to_section(spec: ProblemSpec) -> dict:
    out = {"kind": spec.kind}
    for key, value in spec.params.items():
        out[key] = str(value)
    return out
