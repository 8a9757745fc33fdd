import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import grid_mesh
from maskfit.correspondence import Correspondences
from maskfit.errors import ConvergenceError, GeometryError, SingularSystem
from maskfit.geometry import RangeScan, TriangleMesh, cotangent_weights, point_surface_distance
from maskfit.landmarks import LandmarkPairs
from maskfit.nonrigid import (
    EnergyWeights,
    ScheduleConfig,
    energy_gradient,
    energy_terms,
    energy_value,
    normal_equations,
    register_nonrigid,
    require_converged,
    solve_displacement,
)
from maskfit.synthetic import make_mesh_scan, make_template, polar_mesh
from oracles import dense_minimizer, energy_direct


def random_instance(seed, nx=None, ny=None):
    """Small jittered, slightly curved grid with random pairs, landmarks and weights."""
    r = np.random.default_rng(seed)
    nx = nx or int(r.integers(3, 8))
    ny = ny or int(r.integers(3, 7))
    mesh = grid_mesh(nx, ny, spacing=2.0, jitter=0.15, rng=r, z=lambda x, y: 0.2 * np.sin(0.7 * x) * np.cos(0.5 * y))
    n = mesh.n_vertices
    scan_pts = mesh.vertices + r.normal(0, 0.5, (n, 3))
    normals = r.normal(size=(n, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    scan = RangeScan(scan_pts, normals=normals)
    pv = np.sort(r.choice(n, int(r.integers(n // 3, n + 1)), replace=False))
    pairs = Correspondences.from_arrays(pv, r.integers(0, n, len(pv)))
    lv = r.choice(n, 3, replace=False)
    lms = LandmarkPairs(("a", "b", "c"), mesh.vertices[lv] + r.normal(0, 0.1, (3, 3)), mesh.vertices[lv] + r.normal(0, 1, (3, 3)), lv)
    w = EnergyWeights(*r.uniform(0.05, 10, 4))
    return mesh, scan, pairs, lms, w


def _oracle_args(mesh, scan, pairs, lms):
    return (
        mesh.vertices, mesh.faces,
        pairs.template_vertex, scan.points[pairs.scan_point], scan.normals[pairs.scan_point],
        lms.template_vertex, lms.template, lms.scan,
    )


def test_energy_zero_at_rest_on_identical_scan():
    m = grid_mesh(4, 4)
    scan = RangeScan(m.vertices, faces=m.faces)
    pairs = Correspondences.from_arrays(np.arange(16), np.arange(16))
    lms = LandmarkPairs(("a", "b", "c"), m.vertices[[0, 5, 10]], m.vertices[[0, 5, 10]], np.array([0, 5, 10]))
    assert energy_value(np.zeros((16, 3)), m, scan, pairs, lms, EnergyWeights()) == 0.0


def test_membrane_vanishes_on_translation(rng):
    mesh, scan, pairs, lms, _ = random_instance(1)
    d = np.tile(rng.normal(size=3), (mesh.n_vertices, 1))
    assert energy_terms(d, mesh, scan, pairs, lms, EnergyWeights())[2] == pytest.approx(0.0, abs=1e-20)


def test_energy_matches_direct_summation():
    for seed in range(10):
        mesh, scan, pairs, lms, w = random_instance(seed)
        d = np.random.default_rng(seed).normal(0, 0.3, (mesh.n_vertices, 3))
        ref, _ = energy_direct(d, *_oracle_args(mesh, scan, pairs, lms), w.as_tuple())
        assert energy_value(d, mesh, scan, pairs, lms, w) == pytest.approx(ref, rel=1e-10)


def test_gradient_matches_finite_differences():
    from oracles import central_gradient

    for seed in range(5):
        mesh, scan, pairs, lms, w = random_instance(seed, 4, 4)
        d0 = np.random.default_rng(seed).normal(0, 0.3, (mesh.n_vertices, 3))
        g = energy_gradient(d0, mesh, scan, pairs, lms, w)
        fd = central_gradient(lambda d: energy_value(d, mesh, scan, pairs, lms, w), d0)
        assert np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(g)


def test_gradient_vanishes_at_minimizer():
    mesh, scan, pairs, lms, w = random_instance(4)
    d = solve_displacement(mesh, scan, pairs, lms, w)
    _, b = normal_equations(mesh, scan, pairs, lms, w)
    g = energy_gradient(d, mesh, scan, pairs, lms, w)
    assert np.linalg.norm(g) < 1e-6 * max(1.0, np.linalg.norm(b))


def test_ref_only_gradient_zero_at_landmark_solution():
    mesh, scan, _, lms, _ = random_instance(2)
    w = EnergyWeights(0.0, 0.0, 0.0, 3.0)
    d = np.zeros((mesh.n_vertices, 3))
    d[lms.template_vertex] = lms.scan - lms.template
    g = energy_gradient(d, mesh, scan, None, lms, w)
    assert np.abs(g).max() == 0.0


def test_solve_matches_dense_oracle():
    for seed in range(5):
        mesh, scan, pairs, lms, w = random_instance(100 + seed)
        d = solve_displacement(mesh, scan, pairs, lms, w)
        ref = dense_minimizer(*_oracle_args(mesh, scan, pairs, lms), w.as_tuple())
        assert np.abs(d - ref).max() < 1e-8


def test_solve_identity_case():
    m = grid_mesh(5, 5)
    scan = RangeScan(m.vertices, faces=m.faces)
    pairs = Correspondences.from_arrays(np.arange(25), np.arange(25))
    lms = LandmarkPairs(("a", "b", "c"), m.vertices[[0, 6, 24]], m.vertices[[0, 6, 24]], np.array([0, 6, 24]))
    d = solve_displacement(m, scan, pairs, lms, EnergyWeights())
    assert np.abs(d).max() < 1e-8


def test_high_smoothness_limit_is_rigid_translation():
    m = grid_mesh(6, 6, jitter=0.1, rng=np.random.default_rng(0))
    lv = np.array([0, 35])
    lms = LandmarkPairs(("a", "b"), m.vertices[lv], m.vertices[lv] + [2.0, 0.0, 0.0], lv)
    d = solve_displacement(m, RangeScan(m.vertices), None, lms, EnergyWeights(0.0, 0.0, 1e6, 10.0))
    dx = d[:, 0]
    assert np.abs(dx - dx.mean()).max() < 0.01 * dx.mean()


def test_singular_when_component_has_no_data():
    a = grid_mesh(3, 3)
    b = a.vertices + [10.0, 0.0, 0.0]
    two = TriangleMesh(np.vstack([a.vertices, b]), np.vstack([a.faces, a.faces + 9]))
    pairs = Correspondences.from_arrays(np.arange(9), np.arange(9))
    with pytest.raises(SingularSystem):
        solve_displacement(two, RangeScan(two.vertices), pairs, None, EnergyWeights())
    with pytest.raises(SingularSystem):
        solve_displacement(two, RangeScan(two.vertices), None, None, EnergyWeights())


def test_weights_validation():
    with pytest.raises(GeometryError):
        EnergyWeights(0.0, 0.0, 1.0, 0.0)
    with pytest.raises(GeometryError):
        EnergyWeights(-1.0, 1.0, 1.0, 1.0)
    with pytest.raises(GeometryError):
        ScheduleConfig(decay=1.0)
    with pytest.raises(GeometryError):
        ScheduleConfig(step_threshold=0.0)


@given(st.integers(0, 10_000))
def test_property_quadratic_exactness(seed):
    mesh, scan, pairs, lms, w = random_instance(seed)
    r = np.random.default_rng(seed)
    d_prev = r.normal(0, 0.5, (mesh.n_vertices, 3))
    d = solve_displacement(mesh, scan, pairs, lms, w)
    assert energy_value(d, mesh, scan, pairs, lms, w) <= energy_value(d_prev, mesh, scan, pairs, lms, w) + 1e-9


@given(st.integers(0, 10_000))
def test_property_membrane_positive_on_nonconstant(seed):
    r = np.random.default_rng(seed)
    m = grid_mesh(4, 4, jitter=0.1, rng=r)
    cot = cotangent_weights(m)
    d = r.normal(size=(16, 3))
    e = energy_terms(d, m, RangeScan(m.vertices), None, None, EnergyWeights(), cot)[2]
    assert e > 0


def test_register_identical_scan_terminates_quickly():
    mesh = polar_mesh(10)[0]
    scan = RangeScan(mesh.vertices, faces=mesh.faces)
    lv = np.array([3, 40, 100, 200])
    lms = LandmarkPairs(tuple("abcd"), mesh.vertices[lv], mesh.vertices[lv], lv)
    res = register_nonrigid(mesh, scan, lms)
    assert res.iterations <= 3
    assert res.converged
    assert np.abs(res.displacement).max() < 1e-6


def test_register_bump_on_mesh_scan():
    t = make_template(25)
    scan, surface = make_mesh_scan()
    res = register_nonrigid(t.mesh, scan)
    d = point_surface_distance(res.mesh.vertices, surface)
    assert np.sqrt(np.mean(d**2)) < 0.5
    assert res.iterations <= 30
    np.testing.assert_array_equal(res.mesh.vertices, t.mesh.vertices + res.displacement)


def test_schedule_monotone_and_exact_halving():
    mesh = polar_mesh(12)[0]
    scan, _ = make_mesh_scan(scan_rings=30)
    res = register_nonrigid(mesh, scan, schedule=ScheduleConfig(max_iterations=12))
    memb = [r.weights.memb for r in res.log]
    ref = [r.weights.ref for r in res.log]
    for seq in (memb, ref):
        for a, b in zip(seq, seq[1:]):
            assert b == a or b == max(a * 0.5, 1e-3)
    for rec, nxt in zip(res.log, res.log[1:]):
        assert (nxt.weights.memb < rec.weights.memb) == rec.decayed
    assert res.log_text().splitlines()[0].startswith("iteration\tpairs\tenergy")


def test_zero_iterations_is_convergence_failure():
    mesh = polar_mesh(8)[0]
    res = register_nonrigid(mesh, RangeScan(mesh.vertices), schedule=ScheduleConfig(max_iterations=0))
    with pytest.raises(ConvergenceError):
        require_converged(res)
