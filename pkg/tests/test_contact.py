import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import grid_mesh
from maskfit.contact import ContactParams, PressureReport, compare_reports, interface_gaps, simulate_press
from maskfit.errors import GeometryError, UndefinedCV
from maskfit.geometry import TriangleMesh

DOWN = (0.0, 0.0, -1.0)


def _face(n=21, spacing=1.0, z=None):
    return grid_mesh(n, n, spacing=spacing, z=z)


def _plate(offset=5.0, tilt_deg=0.0, n=9, spacing=2.5, shift=(1.3, 1.3)):
    m = grid_mesh(n, n, spacing=spacing)
    v = np.array(m.vertices)
    v[:, :2] += shift
    v[:, 2] = offset + v[:, 0] * math.tan(math.radians(tilt_deg))
    return TriangleMesh(v, m.faces)


def test_parallel_planes_uniform():
    rep = simulate_press(_face(), _plate(), ContactParams(DOWN, max_penetration=1.0, stiffness=3.0))
    hit = rep.pressure > 0
    assert hit.sum() == rep.contacted > 0
    np.testing.assert_allclose(rep.pressure[hit], 3.0, rtol=0, atol=1e-12)
    assert rep.cv == pytest.approx(0.0, abs=1e-12)


def test_tilted_plane_linear_profile():
    face = _face(41, 0.5)
    plate = _plate(tilt_deg=1.0, n=9, spacing=2.5, shift=(0.1, 0.1))
    pen = 0.1
    rep = simulate_press(face, plate, ContactParams(DOWN, max_penetration=pen))
    hit = rep.pressure > 0
    x = face.vertices[hit, 0]
    gaps = interface_gaps(face.vertices, plate, DOWN)
    x0 = face.vertices[np.argmin(np.where(np.isfinite(gaps), gaps, np.inf)), 0]
    expect = pen - (x - x0) * math.tan(math.radians(1.0))
    np.testing.assert_allclose(rep.pressure[hit], expect, atol=1e-9)
    assert rep.cv > 0
    assert len(np.unique(np.round(x, 9))) > 2


def test_hovering_is_no_contact(caplog):
    plate = _plate()
    rep = simulate_press(_face(), plate, ContactParams((0.0, 0.0, 1.0)))
    assert rep.no_contact and np.all(rep.pressure == 0)
    assert "never touches" in caplog.text


def test_params_validation():
    with pytest.raises(GeometryError):
        ContactParams((0, 0, 0))
    with pytest.raises(GeometryError):
        ContactParams(max_penetration=0)
    with pytest.raises(GeometryError):
        ContactParams(stiffness=-1)
    assert np.linalg.norm(ContactParams((3.0, 0, 4.0)).approach_direction) == pytest.approx(1.0)


def test_rim_band_restricts_statistics():
    face = _face()
    rim = np.array([[10.0, 10.0, 0.0]])
    rep = simulate_press(face, _plate(), ContactParams(DOWN), rim_points=rim)
    d = np.linalg.norm(face.vertices - rim, axis=1)
    np.testing.assert_array_equal(rep.rim, np.flatnonzero(d <= 3.0))


def test_conforming_offset_null_case():
    bowl = lambda x, y: 0.02 * ((x - 10) ** 2 + (y - 10) ** 2)
    face = _face(21, 1.0, z=bowl)
    shell = TriangleMesh(face.vertices + [0.0, 0.0, 4.0], face.faces)
    rep = simulate_press(face, shell, ContactParams(DOWN, max_penetration=1.5))
    hit = rep.pressure > 0
    assert rep.std / rep.mean < 1e-9
    assert hit.sum() == face.n_vertices


def _report(vals):
    vals = np.asarray(vals, dtype=float)
    mean = vals.mean()
    cv = vals.std() / mean if mean > 0 else float("nan")
    return PressureReport(vals, np.arange(len(vals)), np.array(DOWN), mean=mean, std=vals.std(), cv=cv)


def test_compare_examples():
    a = _report([1.0, 2.0, 3.0])
    assert compare_reports(a, a).ratio == 1.0
    p = PressureReport(np.ones(1), np.arange(1), np.array(DOWN), mean=1.0, cv=0.1)
    g = PressureReport(np.ones(1), np.arange(1), np.array(DOWN), mean=1.0, cv=0.4)
    c = compare_reports(p, g)
    assert c.ratio == pytest.approx(0.25) and c.success
    assert c.to_dict()["success"] is True
    with pytest.raises(UndefinedCV):
        compare_reports(_report([0.0, 0.0]), a)


@given(st.floats(0.05, 2.0), st.floats(0.05, 2.0), st.floats(0.0, 3.0))
def test_property_monotone_in_penetration(p1, p2, tilt):
    lo, hi = sorted((p1, p2))
    face = _face(15, 1.0)
    plate = _plate(tilt_deg=tilt, n=6, spacing=3.0)
    a = simulate_press(face, plate, ContactParams(DOWN, max_penetration=lo)).pressure
    b = simulate_press(face, plate, ContactParams(DOWN, max_penetration=hi)).pressure
    assert np.all(b >= a)


@given(st.floats(0.1, 100.0), st.floats(0.0, 3.0))
def test_property_stiffness_equivariance(k, tilt):
    face = _face(15, 1.0)
    plate = _plate(tilt_deg=tilt, n=6, spacing=3.0)
    a = simulate_press(face, plate, ContactParams(DOWN, max_penetration=1.0, stiffness=k))
    b = simulate_press(face, plate, ContactParams(DOWN, max_penetration=1.0, stiffness=2 * k))
    np.testing.assert_allclose(b.pressure, 2 * a.pressure, rtol=1e-14)
    assert b.cv == pytest.approx(a.cv, rel=1e-12, abs=1e-15)
