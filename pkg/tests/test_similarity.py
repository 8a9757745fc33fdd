import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.transform import Rotation

from maskfit.errors import DegenerateConfiguration, DegenerateScale, GeometryError
from maskfit.similarity import (
    SimilarityTransform,
    align_similarity,
    estimate_initial_scale,
    fit_rigid_given_scale,
    fit_scale_given_rigid,
)
from oracles import golden_section


def _cloud(rng, n=10):
    return rng.normal(0, 40, (n, 3))


def test_initial_scale_identity_and_scaled(rng):
    a = _cloud(rng)
    assert estimate_initial_scale((a, a)) == pytest.approx(1.0, abs=1e-15)
    c = rng.normal(size=3) * 50
    assert estimate_initial_scale((a, 2.5 * (a - c) + c)) == pytest.approx(2.5, abs=1e-12)


def test_initial_scale_degenerate(rng):
    a = _cloud(rng)
    with pytest.raises(DegenerateScale):
        estimate_initial_scale((a, np.zeros_like(a)))
    with pytest.raises(DegenerateScale):
        estimate_initial_scale((np.zeros((4, 3)), a[:4]))


def test_initial_scale_matches_golden_section(rng):
    for _ in range(10):
        a = _cloud(rng)
        b = a * rng.uniform(0.5, 2) + rng.normal(0, 0.5, a.shape)
        i, j = np.triu_indices(len(a), 1)
        dt = np.linalg.norm(a[i] - a[j], axis=1)
        ds = np.linalg.norm(b[i] - b[j], axis=1)
        ref = golden_section(lambda s: float(np.sum((s * dt - ds) ** 2)), 0.01, 10.0)
        assert estimate_initial_scale((a, b)) == pytest.approx(ref, abs=1e-8)


def test_rigid_aligned_is_identity(rng):
    a = _cloud(rng)
    r, t = fit_rigid_given_scale((a, a), 1.0)
    np.testing.assert_allclose(r, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(t, 0.0, atol=1e-10)


def test_rigid_recovers_known_motion(rng):
    a = _cloud(rng)
    r0 = Rotation.random(random_state=3).as_matrix()
    t0 = np.array([10.0, -20.0, 5.0])
    r, t = fit_rigid_given_scale((a, a @ r0.T + t0), 1.0)
    np.testing.assert_allclose(r, r0, atol=1e-9)
    np.testing.assert_allclose(t, t0, atol=1e-9)


def test_rigid_rejects_collinear():
    a = np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2.0]])
    with pytest.raises(DegenerateConfiguration):
        fit_rigid_given_scale((a, a + 1), 1.0)


def test_rigid_no_reflection(rng):
    a = _cloud(rng)
    b = a * np.array([-1.0, 1.0, 1.0])
    r, _ = fit_rigid_given_scale((a, b), 1.0)
    assert np.linalg.det(r) == pytest.approx(1.0)


def test_scale_given_rigid_examples(rng):
    a = _cloud(rng)
    assert fit_scale_given_rigid((a, a), np.eye(3), np.zeros(3)) == pytest.approx(1.0)
    assert fit_scale_given_rigid((a, 3 * a), np.eye(3), np.zeros(3)) == pytest.approx(3.0)
    with pytest.raises(DegenerateScale):
        fit_scale_given_rigid((a, -a), np.eye(3), np.zeros(3))


def test_scale_given_rigid_matches_golden_section(rng):
    for seed in range(10):
        a = _cloud(rng)
        r = Rotation.random(random_state=seed).as_matrix()
        t = rng.normal(0, 30, 3)
        b = 1.3 * a @ r.T + t + rng.normal(0, 0.5, a.shape)
        ref = golden_section(lambda s: float(np.sum((s * a @ r.T + t - b) ** 2)), 0.01, 10.0)
        assert fit_scale_given_rigid((a, b), r, t) == pytest.approx(ref, abs=1e-8)


def test_align_identity(rng):
    a = _cloud(rng, 20)
    tf, rep = align_similarity((a, a))
    assert tf.scale == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(tf.rotation, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(tf.translation, 0.0, atol=1e-9)
    assert 1 <= rep.iterations <= 2


def test_align_known_transform(rng):
    a = _cloud(rng, 60)
    truth = SimilarityTransform(1.7, Rotation.random(random_state=7).as_matrix(), np.array([30.0, -60.0, 45.0]))
    tf, rep = align_similarity((a, truth.apply(a)))
    assert abs(tf.scale - truth.scale) < 1e-7
    assert np.abs(tf.rotation - truth.rotation).max() < 1e-7
    assert np.abs(tf.translation - truth.translation).max() < 1e-7


def test_align_with_noise():
    sigma = 0.5
    worst = 0.0
    for seed in range(100):
        r = np.random.default_rng(seed)
        a = r.normal(0, 40, (60, 3))
        truth = SimilarityTransform(r.uniform(0.5, 2), Rotation.random(random_state=seed).as_matrix(), r.uniform(-100, 100, 3))
        b = truth.apply(a) + r.normal(0, sigma, a.shape)
        _, rep = align_similarity((a, b))
        worst = max(worst, rep.rms)
    assert worst <= 2 * sigma


def test_transform_validation():
    with pytest.raises(GeometryError):
        SimilarityTransform(-1.0, np.eye(3), np.zeros(3))
    with pytest.raises(GeometryError):
        SimilarityTransform(1.0, np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(GeometryError):
        SimilarityTransform(1.0, 2 * np.eye(3), np.zeros(3))


def test_transform_dict_round_trip():
    tf = SimilarityTransform(1.25, Rotation.random(random_state=1).as_matrix(), np.array([1.0, 2.0, 3.0]))
    back = SimilarityTransform.from_dict(tf.to_dict())
    assert back.scale == tf.scale
    np.testing.assert_array_equal(back.rotation, tf.rotation)
    np.testing.assert_array_equal(back.translation, tf.translation)


@given(
    st.integers(0, 2**31 - 1),
    st.floats(0.5, 2.0),
    st.floats(0.0, 2.0),
)
def test_property_recovery_and_monotone(seed, scale, noise):
    r = np.random.default_rng(seed)
    a = r.normal(0, 40, (12, 3))
    truth = SimilarityTransform(scale, Rotation.random(random_state=seed).as_matrix(), r.uniform(-100, 100, 3))
    b = truth.apply(a) + r.normal(0, noise, a.shape)
    tf, rep = align_similarity((a, b))
    res = np.asarray(rep.residuals)
    assert np.all(np.diff(res) <= 1e-12 * max(1.0, res[0]))
    if noise == 0.0:
        assert rep.rms < 1e-7
    rt = tf.rotation
    assert np.abs(rt.T @ rt - np.eye(3)).max() < 1e-9 and np.linalg.det(rt) > 0
