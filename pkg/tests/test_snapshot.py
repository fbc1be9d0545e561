import numpy as np
import pytest

from subapsnap import snapshot
from subapsnap.errors import ConfigError
from subapsnap.systems import Domain, Axis, ProblemSpec, build_problem, interval


@pytest.fixture(scope="module")
def tridiag():
    return build_problem(ProblemSpec("tridiag", {"n": 80}))


def test_default_points_1d_layouts():
    dom = interval(1.0, 100.0)
    eq = snapshot.default_snapshot_points(dom, 5, "equispaced")
    assert np.allclose(eq, np.linspace(1, 100, 5))
    lg = snapshot.default_snapshot_points(dom, 5, "log-spaced")
    assert np.allclose(lg, np.logspace(0, 2, 5))
    ch = snapshot.default_snapshot_points(dom, 5, "chebyshev")
    assert min(ch) > 1.0 and max(ch) < 100.0
    l1 = snapshot.default_snapshot_points(interval(0.0, 5.0), 4, "log1p")
    assert l1[0] == 0.0 and np.isclose(l1[-1], 5.0)
    assert np.all(np.diff(l1) > 0)


def test_default_points_imag_axis():
    dom = interval(1.0, 1000.0, imag=True)
    pts = snapshot.default_snapshot_points(dom, 3, "log-spaced")
    assert all(p.real == 0 for p in pts)
    assert np.isclose(pts[0].imag, 1.0) and np.isclose(pts[-1].imag, 1000.0)


def test_default_points_2d_tensor_grid():
    dom = Domain(axes=(Axis(0.0, 1.0), Axis(2.0, 3.0)))
    pts = snapshot.default_snapshot_points(dom, 9)
    assert len(pts) == 9
    assert all(len(p) == 2 for p in pts)


def test_default_points_rejects_bad_layout():
    with pytest.raises(ConfigError):
        snapshot.default_snapshot_points(interval(0, 1), 3, "spiral")
    with pytest.raises(ConfigError):
        snapshot.default_snapshot_points(interval(-1, 1), 3, "log-spaced")


def test_build_snapshot_qr_columns_span_solutions(tridiag):
    pts = snapshot.default_snapshot_points(tridiag.domain, 5)
    basis = snapshot.build_snapshot(tridiag, pts)
    assert basis.rank == 5
    q = basis.basis
    assert np.allclose(q.conj().T @ q, np.eye(5), atol=1e-12)
    # every raw snapshot is exactly reproduced by its projection
    proj = q @ (q.conj().T @ basis.raw)
    assert np.allclose(proj, basis.raw, atol=1e-8 * np.linalg.norm(basis.raw))


def test_build_snapshot_column_order_matches_points(tridiag):
    pts = [-9.1, -9.9, -9.5]
    basis = snapshot.build_snapshot(tridiag, pts)
    for k, p in enumerate(pts):
        assert np.allclose(basis.raw[:, k], tridiag.full_solve(p), atol=1e-12)


def test_build_snapshot_workers_deterministic(tridiag):
    pts = snapshot.default_snapshot_points(tridiag.domain, 6)
    a = snapshot.build_snapshot(tridiag, pts, workers=1)
    b = snapshot.build_snapshot(tridiag, pts, workers=3)
    assert np.array_equal(a.raw, b.raw)


def test_build_snapshot_pod_truncates(tridiag):
    pts = list(snapshot.default_snapshot_points(tridiag.domain, 6))
    basis = snapshot.build_snapshot(tridiag, pts, mode=("pod", 1e-2))
    assert basis.rank < 6
    assert basis.singular_values.shape == (6,)


def test_build_snapshot_rejects_duplicates(tridiag):
    with pytest.raises(ConfigError):
        snapshot.build_snapshot(tridiag, [-9.5, -9.5])


def test_snapshot_roundtrip(tmp_path, tridiag):
    pts = snapshot.default_snapshot_points(tridiag.domain, 4)
    basis = snapshot.build_snapshot(tridiag, pts)
    path = tmp_path / "basis.npz"
    snapshot.save_snapshot(path, basis)
    back = snapshot.load_snapshot(path)
    assert np.array_equal(back.basis, basis.basis)
    assert np.array_equal(back.raw, basis.raw)
    assert back.points == basis.points


def test_snapshot_roundtrip_complex_and_tuple_points(tmp_path):
    delay = build_problem(ProblemSpec("delay", {"n": 40}))
    pts = [1j * 3.0, 1j * 20.0, 1j * 100.0]
    basis = snapshot.build_snapshot(delay, pts)
    path = tmp_path / "b.npz"
    snapshot.save_snapshot(path, basis)
    back = snapshot.load_snapshot(path)
    assert back.points == tuple(pts)

    krr = build_problem(ProblemSpec("krr", {"n_train": 60, "n_test": 5}))
    pairs = [(1e-3, 1.0), (1.0, 5.0)]
    basis = snapshot.build_snapshot(krr, pairs)
    snapshot.save_snapshot(path, basis)
    back = snapshot.load_snapshot(path)
    assert back.points == tuple(pairs)
