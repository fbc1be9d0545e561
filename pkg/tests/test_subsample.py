import numpy as np
import pytest

from subapsnap import linalg, subsample
from subapsnap.errors import ConfigError
from subapsnap.subsample import RowSelector, SelectorConfig, select_rows


def _orth(rng, n, r):
    q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return q


def test_selector_apply_and_norm():
    sel = RowSelector(indices=[2, 0, 2], n=4,
                      weights=np.array([1.0, 2.0, 3.0]))
    m = np.arange(8.0).reshape(4, 2)
    out = sel.apply(m)
    assert np.allclose(out, [[4.0, 5.0], [0.0, 2.0], [12.0, 15.0]])
    # aggregated weight on the repeated row 2: sqrt(1 + 9)
    assert np.isclose(sel.norm(), np.sqrt(10.0))
    assert RowSelector(indices=[1, 3], n=5).norm() == 1.0


def test_selector_validation():
    with pytest.raises(ValueError):
        RowSelector(indices=[0, 5], n=5)
    with pytest.raises(ValueError):
        RowSelector(indices=[0, 1], n=5, weights=np.array([1.0]))
    with pytest.raises(ValueError):
        RowSelector(indices=[0], n=5, weights=np.array([0.0]))
    with pytest.raises(ConfigError):
        SelectorConfig(strategy="bogus")
    with pytest.raises(ConfigError):
        SelectorConfig(oversample=0.5)


def test_leverage_scores_sum_to_width():
    rng = np.random.default_rng(0)
    for trial in range(10):
        q = _orth(rng, 50, 6)
        scores = subsample.leverage_scores(q)
        assert np.isclose(scores.sum(), 6.0)
        assert scores.min() >= 0
    with pytest.raises(ValueError):
        subsample.leverage_scores(rng.standard_normal((20, 3)))


def test_deterministic_strategies_pick_informative_rows():
    rng = np.random.default_rng(1)
    for strategy in ("lupp", "cpqr"):
        for trial in range(10):
            b = rng.standard_normal((60, 5))
            sel = select_rows(b, config=SelectorConfig(strategy=strategy,
                                                       augment_rhs=False))
            assert sel.size == 5
            assert sel.weights is None
            # the sampled square block must be well-conditioned enough to
            # reproduce the LS solution reasonably
            sub = b[sel.indices]
            assert np.linalg.matrix_rank(sub) == 5


def test_augment_rhs_changes_width():
    rng = np.random.default_rng(2)
    b = rng.standard_normal((40, 4))
    rhs = rng.standard_normal(40)
    sel = select_rows(b, rhs, SelectorConfig(strategy="lupp", augment_rhs=True))
    assert sel.size == 5
    sel = select_rows(b, rhs, SelectorConfig(strategy="lupp", augment_rhs=False))
    assert sel.size == 4


def test_random_selector_reproducible():
    rng = np.random.default_rng(3)
    b = rng.standard_normal((100, 5))
    cfg = SelectorConfig(strategy="random", oversample=3.0, seed=7)
    a = select_rows(b, config=cfg)
    c = select_rows(b, config=cfg)
    assert np.array_equal(a.indices, c.indices)
    assert a.size == 15
    assert len(set(a.indices.tolist())) == a.size  # without replacement


def test_leverage_weights_formula():
    rng = np.random.default_rng(4)
    q = _orth(rng, 200, 4)
    cfg = SelectorConfig(strategy="leverage", oversample=10.0,
                         augment_rhs=False, seed=0)
    sel = select_rows(q, config=cfg)
    scores = subsample.leverage_scores(q)
    pi = scores / scores.sum()
    assert np.allclose(sel.weights, 1.0 / np.sqrt(sel.size * pi[sel.indices]))


def test_leverage_unbiased_gram():
    # E[(S_w Q)^H (S_w Q)] = I; loose tolerance, few hundred draws
    rng = np.random.default_rng(5)
    q = _orth(rng, 150, 3)
    cfg = SelectorConfig(strategy="leverage", oversample=20.0,
                         augment_rhs=False)
    acc = np.zeros((3, 3))
    draws = 400
    gen = np.random.default_rng(11)
    for _ in range(draws):
        sel = select_rows(q, config=cfg, rng=gen)
        sq = sel.apply(q)
        acc += sq.T @ sq
    assert np.linalg.norm(acc / draws - np.eye(3)) < 0.15


def test_arp_selector_spans_target():
    rng = np.random.default_rng(6)
    b = rng.standard_normal((80, 6))
    sel = select_rows(b, config=SelectorConfig(strategy="arp",
                                               augment_rhs=False, seed=2))
    assert sel.size == 6
    assert np.linalg.matrix_rank(b[sel.indices]) == 6


def test_merge_selectors():
    a = RowSelector(indices=[3, 1], n=10, strategy="lupp")
    b = RowSelector(indices=[1, 7], n=10, strategy="cpqr")
    m = subsample.merge_selectors([a, b])
    assert np.array_equal(m.indices, [1, 3, 7])
    w = RowSelector(indices=[0], n=10, weights=np.array([2.0]))
    with pytest.raises(ValueError):
        subsample.merge_selectors([a, w])


def test_choose_anchor_median():
    assert subsample.choose_anchor([-9.0, -10.0, -9.5]) == -9.5
    # complex points ordered by modulus
    assert subsample.choose_anchor([1j * 10, 1j * 1, 1j * 100]) == 1j * 10
    # even count: lower median
    assert subsample.choose_anchor([1.0, 2.0, 3.0, 4.0]) == 2.0


def test_selector_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    b = rng.standard_normal((50, 4))
    sel = select_rows(b, config=SelectorConfig(strategy="leverage",
                                               augment_rhs=False, seed=1))
    path = tmp_path / "sel.json"
    subsample.save_selector(path, sel)
    back = subsample.load_selector(path)
    assert np.array_equal(back.indices, sel.indices)
    assert np.allclose(back.weights, sel.weights)
    assert back.n == sel.n and back.strategy == sel.strategy
