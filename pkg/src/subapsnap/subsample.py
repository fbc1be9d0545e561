"""Row selection strategies: deterministic pivoting and randomized sampling.

The selector plays the role of the (possibly weighted) row-submatrix S of
the identity: applying it extracts rows ``indices`` and scales them by
``weights`` when present.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .errors import ConfigError, RankDeficiencyError

STRATEGIES = ("random", "lupp", "cpqr", "leverage", "arp")


@dataclass(frozen=True)
class RowSelector:
    """s selected row indices, optionally weighted (sampling w/ replacement).

    Weighted selectors carry w_j = 1/sqrt(s * pi_{i_j}) for sampling
    distribution pi, which makes E[(SQ)^H (SQ)] = I for orthonormal Q.
    """

    indices: np.ndarray
    n: int
    weights: Optional[np.ndarray] = None
    strategy: str = ""
    anchors: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        if self.weights is not None:
            object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
            if self.weights.shape != self.indices.shape:
                raise ValueError("weights/indices length mismatch")
            if np.any(self.weights <= 0):
                raise ValueError("weights must be positive")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.n):
            raise ValueError("selector index out of range")

    @property
    def size(self) -> int:
        return int(self.indices.size)

    def apply(self, m) -> np.ndarray:
        """S_w @ m: extract (possibly repeated) rows and scale by weights."""
        m = np.asarray(m)
        out = m[self.indices]
        if self.weights is not None:
            out = out * (self.weights[:, None] if out.ndim == 2 else self.weights)
        return out

    def norm(self) -> float:
        """Operator norm of the weighted row extractor."""
        if self.weights is None:
            return 1.0
        # repeated indices stack scaled copies of the same unit row
        acc = {}
        for i, w in zip(self.indices, self.weights):
            acc[i] = acc.get(i, 0.0) + w * w
        return math.sqrt(max(acc.values()))


@dataclass(frozen=True)
class SelectorConfig:
    strategy: str = "leverage"
    oversample: float = 4.0
    augment_rhs: bool = True
    anchor: str = "median-point"
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown selector strategy {self.strategy!r}")
        if self.oversample < 1.0:
            raise ConfigError("oversample factor must be >= 1")


def leverage_scores(q) -> np.ndarray:
    """Squared row norms of an orthonormal matrix; they sum to its width."""
    q = np.asarray(q)
    r = q.shape[1]
    gram = q.conj().T @ q
    if np.linalg.norm(gram - np.eye(r)) > 1e-8:
        raise ValueError("leverage_scores needs orthonormal columns")
    return np.einsum("ij,ij->i", q.conj(), q).real


def select_rows(b, rhs=None, config: SelectorConfig = SelectorConfig(),
                rng=None, anchors=()) -> RowSelector:
    """Build a RowSelector from B = A(p_anchor) @ Q_X (optionally [B b])."""
    b = np.asarray(b)
    if b.ndim != 2:
        raise ValueError("select_rows expects a matrix")
    n, r = b.shape
    if rng is None:
        rng = np.random.default_rng(config.seed)
    target = b
    if config.augment_rhs and rhs is not None:
        target = np.column_stack([b, np.asarray(rhs)])
    width = target.shape[1]
    strategy = config.strategy

    if strategy == "lupp":
        idx = linalg.lupp_row_pivots(target)
        return RowSelector(indices=idx, n=n, strategy=strategy, anchors=tuple(anchors))
    if strategy == "cpqr":
        idx = linalg.cpqr_row_pivots(target)
        return RowSelector(indices=idx, n=n, strategy=strategy, anchors=tuple(anchors))

    s = int(math.ceil(config.oversample * width))
    s = min(s, n) if strategy == "random" else s

    if strategy == "random":
        idx = np.sort(rng.choice(n, size=s, replace=False))
        return RowSelector(indices=idx, n=n, strategy=strategy, anchors=tuple(anchors))

    if strategy == "leverage":
        q = _range_basis(target)
        scores = leverage_scores(q)
        total = scores.sum()
        if total <= 0:
            raise RankDeficiencyError("all-zero leverage scores")
        pi = scores / total
        idx = rng.choice(n, size=s, replace=True, p=pi)
        weights = 1.0 / np.sqrt(s * pi[idx])
        return RowSelector(indices=idx, n=n, weights=weights,
                           strategy=strategy, anchors=tuple(anchors))

    if strategy == "arp":
        return _arp(target, n, rng, anchors)
    raise ConfigError(f"unknown selector strategy {strategy!r}")


def _range_basis(target, rtol=1e-12):
    """Orthonormal basis of the numerical range of ``target``.

    Columns are equilibrated first (the rhs column can dwarf the rest), and
    directions below rtol of the leading singular value are dropped: at an
    anchor point the rhs lies in the span of the matrix columns, so the
    augmented matrix is rank-deficient by construction.
    """
    m = np.asarray(target)
    norms = np.linalg.norm(m, axis=0)
    norms = np.where(norms == 0, 1.0, norms)
    w, s, _ = linalg.thin_svd(m / norms)
    if s[0] == 0:
        raise RankDeficiencyError("zero matrix has no range basis")
    keep = max(int(np.count_nonzero(s > rtol * s[0])), 1)
    return w[:, :keep]


def _arp(target, n, rng, anchors):
    """Adaptive randomized pivoting: sequential draws proportional to the
    squared residual row norms after projecting out chosen rows' span."""
    resid = np.asarray(target, dtype=complex).copy()
    scale = np.linalg.norm(target)
    width = target.shape[1]
    chosen = []
    for _ in range(width):
        norms = np.einsum("ij,ij->i", resid.conj(), resid).real
        norms[norms < (1e-14 * scale) ** 2] = 0.0
        total = norms.sum()
        if total <= 0:
            raise RankDeficiencyError("degenerate residual in adaptive pivoting")
        i = int(rng.choice(n, p=norms / total))
        chosen.append(i)
        v = resid[i]
        v = v / np.linalg.norm(v)
        resid = resid - np.outer(resid @ v.conj(), v)
    return RowSelector(indices=chosen, n=n, strategy="arp", anchors=tuple(anchors))


def merge_selectors(selectors) -> RowSelector:
    """Sorted, deduplicated union of unweighted selectors over the same n."""
    selectors = list(selectors)
    if not selectors:
        raise ValueError("merge_selectors needs at least one selector")
    n = selectors[0].n
    for sel in selectors:
        if sel.n != n:
            raise ValueError("selectors cover different row counts")
        if sel.weights is not None:
            raise ValueError("cannot union weighted selectors")
    union = np.unique(np.concatenate([sel.indices for sel in selectors]))
    anchors = tuple(a for sel in selectors for a in sel.anchors)
    return RowSelector(indices=union, n=n,
                       strategy="+".join(dict.fromkeys(s.strategy for s in selectors)),
                       anchors=anchors)


def choose_anchor(points) -> object:
    """Median snapshot point; complex points are ordered by modulus."""
    pts = list(points)
    order = sorted(range(len(pts)), key=lambda k: _anchor_key(pts[k]))
    return pts[order[(len(pts) - 1) // 2]]


def _anchor_key(p):
    vec = np.atleast_1d(np.asarray(p, dtype=complex))
    if vec.size > 1 or vec.imag.any():
        return float(np.linalg.norm(vec))
    return float(vec.real[0])


def save_selector(path, selector: RowSelector) -> None:
    payload = {
        "n": selector.n,
        "indices": [int(i) for i in selector.indices],
        "weights": None if selector.weights is None
        else [float(w) for w in selector.weights],
        "strategy": selector.strategy,
        "anchors": [repr(a) for a in selector.anchors],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_selector(path) -> RowSelector:
    with open(path) as fh:
        payload = json.load(fh)
    return RowSelector(
        indices=np.array(payload["indices"], dtype=np.int64),
        n=int(payload["n"]),
        weights=None if payload["weights"] is None
        else np.array(payload["weights"], dtype=float),
        strategy=payload["strategy"],
        anchors=tuple(payload["anchors"]),
    )
