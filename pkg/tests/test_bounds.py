import numpy as np
import pytest

from subapsnap import bounds, linalg, snapshot, subsample
from subapsnap.subsample import RowSelector, SelectorConfig, select_rows
from subapsnap.systems import ProblemSpec, build_problem


def _random_instance(rng, n=60, r=5):
    b = rng.standard_normal((n, r))
    rhs = rng.standard_normal(n)
    return b, rhs


def test_lemma_bounds_hold_on_random_instances():
    rng = np.random.default_rng(0)
    for trial in range(100):
        b, rhs = _random_instance(rng)
        strategy = ("lupp", "cpqr", "leverage")[trial % 3]
        sel = select_rows(b, rhs, SelectorConfig(strategy=strategy,
                                                 oversample=4.0, seed=trial))
        ratio = bounds.actual_ratio(b, rhs, sel)
        bound_a, bound_ab = bounds.lemma_bounds(b, rhs, sel)
        assert ratio <= bound_a * (1 + 1e-8)
        assert ratio <= bound_ab * (1 + 1e-8)


def test_bound_ab_at_most_bound_a_generically():
    # kappa(S U~) <= ||S|| / sigma_min(SU) does not hold in general, but
    # both must dominate the measured ratio; check the measured ordering
    rng = np.random.default_rng(1)
    b, rhs = _random_instance(rng, 80, 6)
    sel = select_rows(b, rhs, SelectorConfig(strategy="lupp"))
    ratio = bounds.actual_ratio(b, rhs, sel)
    ba, bab = bounds.lemma_bounds(b, rhs, sel)
    assert ratio <= min(ba, bab) * (1 + 1e-8)


def test_actual_ratio_unit_for_full_selector():
    rng = np.random.default_rng(2)
    b, rhs = _random_instance(rng)
    sel = RowSelector(indices=np.arange(60), n=60)
    assert np.isclose(bounds.actual_ratio(b, rhs, sel), 1.0, atol=1e-6)


def test_ratio_inf_when_full_residual_vanishes():
    # zero rhs: both residuals are exactly zero, ratio undefined
    rng = np.random.default_rng(3)
    b = rng.standard_normal((30, 3))
    sel = RowSelector(indices=np.arange(0, 30, 2), n=30)
    assert bounds.actual_ratio(b, np.zeros(30), sel) == np.inf


@pytest.fixture(scope="module")
def tridiag_setup():
    system = build_problem(ProblemSpec("tridiag", {"n": 150}))
    pts = snapshot.default_snapshot_points(system.domain, 6)
    basis = snapshot.build_snapshot(system, pts)
    anchor = subsample.choose_anchor(pts)
    b = np.asarray(system.matrix(anchor) @ basis.basis)
    sel = select_rows(b, system.full_rhs(anchor),
                      SelectorConfig(strategy="lupp"), anchors=(anchor,))
    return system, basis, sel, anchor


def test_theorem_bound_tightens_toward_anchor(tridiag_setup):
    system, basis, sel, anchor = tridiag_setup
    near, ok_near = bounds.theorem_bound(system, basis, sel, anchor,
                                         anchor + 1e-3)
    far, ok_far = bounds.theorem_bound(system, basis, sel, anchor,
                                       anchor + 0.2)
    assert ok_near
    if ok_far:
        assert near <= far


def test_theorem_bound_dominates_ratio(tridiag_setup):
    system, basis, sel, anchor = tridiag_setup
    rng = np.random.default_rng(4)
    for trial in range(20):
        p = anchor + rng.uniform(-0.05, 0.05)
        val, ok = bounds.theorem_bound(system, basis, sel, anchor, p)
        if not ok:
            continue
        b_mat = np.asarray(system.matrix(p) @ basis.basis)
        ratio = bounds.actual_ratio(b_mat, system.full_rhs(p), sel)
        if np.isfinite(ratio):
            assert ratio <= val * (1 + 1e-8)


def test_corollary_bounds_dominate_ratio(tridiag_setup):
    system, basis, sel, _ = tridiag_setup
    lip = bounds.estimate_lipschitz(system, []).value
    assert lip == 1.0  # A(p) = A0 - p I
    rng = np.random.default_rng(5)
    for trial in range(20):
        p = rng.uniform(-10.0, -9.0)
        (cl, cl_ok), (gl, gl_ok) = bounds.corollary_bounds(
            system, basis, sel, p, lip)
        b_mat = np.asarray(system.matrix(p) @ basis.basis)
        ratio = bounds.actual_ratio(b_mat, system.full_rhs(p), sel)
        if not np.isfinite(ratio):
            continue
        if cl_ok:
            assert ratio <= cl * (1 + 1e-8)
        if gl_ok:
            assert ratio <= gl * (1 + 1e-8)
            # the global bound is parameter independent and never tighter
            assert gl >= cl - 1e-12 if cl_ok else True


def test_covering_radius_equispaced():
    pts = list(np.linspace(-10, -9, 6))
    h = bounds._covering_radius(pts)
    assert np.isclose(h, 0.1)  # half the 0.2 gap


def test_estimate_lipschitz_exact_and_quotient():
    tri = build_problem(ProblemSpec("tridiag", {"n": 50}))
    est = bounds.estimate_lipschitz(tri, [])
    assert est.method == "affine-exact" and est.value == 1.0

    delay = build_problem(ProblemSpec("delay", {"n": 50}))
    probes = [1j * t for t in (1.0, 2.0, 5.0, 10.0)]
    est = bounds.estimate_lipschitz(delay, probes)
    assert est.method == "difference-quotient"
    # direct check: quotient of the first probe pair is a lower bound
    d01 = bounds.matrix_difference_norm(delay, probes[0], probes[1])
    assert est.value >= d01 / 1.0 - 1e-10


def test_matrix_difference_norm_power_iteration_agrees():
    system = build_problem(ProblemSpec("tridiag", {"n": 300}))
    dense = bounds.matrix_difference_norm(system, -9.2, -9.8, dense_limit=2000)
    power = bounds.matrix_difference_norm(system, -9.2, -9.8, dense_limit=10)
    assert np.isclose(dense, power, rtol=1e-6)


def test_bound_report_fields(tridiag_setup):
    system, basis, sel, anchor = tridiag_setup
    rep = bounds.bound_report(system, basis, sel, -9.42, lipschitz=1.0,
                              anchor=anchor)
    assert rep.ratio_defined
    assert rep.actual_ratio <= rep.bound_a * (1 + 1e-8)
    if rep.corollary_closest_ok:
        assert rep.actual_ratio <= rep.corollary_closest * (1 + 1e-8)
