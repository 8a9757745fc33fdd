"""Quasi-static penalty-contact proxy for mask pressure.

The interface mesh is translated along the approach direction until it first
touches the face, then pushed ``max_penetration`` further. Each face vertex
lying under the interface is displaced by its penetration depth; pressure is
``stiffness * displacement``. Uniformity is summarized by the coefficient of
variation over face vertices near the contact region.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._accel import njit, pick
from .errors import GeometryError, UndefinedCV
from .geometry import TriangleMesh
from .kdtree import KdTree

log = logging.getLogger(__name__)

RIM_BAND_MM = 3.0
_EPS = 1e-12


@dataclass(frozen=True)
class ContactParams:
    approach_direction: tuple | None = None
    max_penetration: float = 2.0
    stiffness: float = 1.0
    friction_coeff: float = 50.0  # kept for parity with the reference experiment; unused
    rim_band: float = RIM_BAND_MM

    def __post_init__(self):
        if self.approach_direction is not None:
            d = np.asarray(self.approach_direction, dtype=np.float64).reshape(3)
            n = np.linalg.norm(d)
            if not n > 0:
                raise GeometryError("approach direction must be non-zero")
            object.__setattr__(self, "approach_direction", tuple((d / n).tolist()))
        if not self.max_penetration > 0:
            raise GeometryError("max_penetration must be positive")
        if not self.stiffness > 0:
            raise GeometryError("stiffness must be positive")


@dataclass
class PressureReport:
    pressure: np.ndarray
    rim: np.ndarray  # indices of face vertices used for statistics
    approach_direction: np.ndarray
    mean: float = 0.0
    std: float = 0.0
    cv: float = float("nan")
    min: float = 0.0
    max: float = 0.0
    no_contact: bool = False
    contacted: int = 0
    extra: dict = field(default_factory=dict)

    def summary(self):
        return {
            "mean": self.mean,
            "std": self.std,
            "cv": self.cv,
            "min": self.min,
            "max": self.max,
            "rim_vertices": int(len(self.rim)),
            "contacted_vertices": int(self.contacted),
            "no_contact": bool(self.no_contact),
        }


def _basis(direction):
    d = np.asarray(direction, dtype=np.float64)
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(d, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    return e1, e2


def _bin_triangles(tri2d, cell):
    """CSR lists of triangles overlapping each cell of a uniform 2-D grid."""
    lo = tri2d.min(axis=1)
    hi = tri2d.max(axis=1)
    origin = lo.min(axis=0)
    c0 = np.floor((lo - origin) / cell).astype(np.int64)
    c1 = np.floor((hi - origin) / cell).astype(np.int64)
    shape = c1.max(axis=0) + 1
    nx = c1[:, 0] - c0[:, 0] + 1
    ny = c1[:, 1] - c0[:, 1] + 1
    count = nx * ny
    tri = np.repeat(np.arange(len(tri2d)), count)
    local = np.arange(count.sum()) - np.repeat(np.cumsum(count) - count, count)
    cx = c0[tri, 0] + local // ny[tri]
    cy = c0[tri, 1] + local % ny[tri]
    cid = cx * shape[1] + cy
    order = np.argsort(cid, kind="stable")
    tri = tri[order]
    starts = np.searchsorted(cid[order], np.arange(shape[0] * shape[1] + 1))
    return origin, shape, starts, tri


@njit(cache=True)
def _gaps_loops(pts2d, depth, tri2d, trih, origin, cell, shape, starts, tris):
    n = pts2d.shape[0]
    gap = np.full(n, np.inf)
    for k in range(n):
        x = pts2d[k, 0]
        y = pts2d[k, 1]
        cx = int(np.floor((x - origin[0]) / cell))
        cy = int(np.floor((y - origin[1]) / cell))
        if cx < 0 or cy < 0 or cx >= shape[0] or cy >= shape[1]:
            continue
        c = cx * shape[1] + cy
        for s in range(starts[c], starts[c + 1]):
            t = tris[s]
            ax = tri2d[t, 0, 0]
            ay = tri2d[t, 0, 1]
            e1x = tri2d[t, 1, 0] - ax
            e1y = tri2d[t, 1, 1] - ay
            e2x = tri2d[t, 2, 0] - ax
            e2y = tri2d[t, 2, 1] - ay
            det = e1x * e2y - e1y * e2x
            if abs(det) < 1e-18:
                continue
            px = x - ax
            py = y - ay
            b1 = (px * e2y - py * e2x) / det
            b2 = (e1x * py - e1y * px) / det
            b0 = 1.0 - b1 - b2
            if b0 < -_EPS or b1 < -_EPS or b2 < -_EPS:
                continue
            h = b0 * trih[t, 0] + b1 * trih[t, 1] + b2 * trih[t, 2]
            g = depth[k] - h
            if g < gap[k]:
                gap[k] = g
    return gap


def _gaps_numpy(pts2d, depth, tri2d, trih, origin, cell, shape, starts, tris):
    n = len(pts2d)
    gap = np.full(n, np.inf)
    cxy = np.floor((pts2d - origin) / cell).astype(np.int64)
    inside = (cxy[:, 0] >= 0) & (cxy[:, 1] >= 0) & (cxy[:, 0] < shape[0]) & (cxy[:, 1] < shape[1])
    verts = np.flatnonzero(inside)
    c = cxy[verts, 0] * shape[1] + cxy[verts, 1]
    cnt = starts[c + 1] - starts[c]
    vk = np.repeat(verts, cnt)
    pos = np.repeat(starts[c], cnt) + (np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt))
    t = tris[pos]
    a = tri2d[t, 0]
    e1 = tri2d[t, 1] - a
    e2 = tri2d[t, 2] - a
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    p = pts2d[vk] - a
    ok = np.abs(det) >= 1e-18
    det = np.where(ok, det, 1.0)
    b1 = (p[:, 0] * e2[:, 1] - p[:, 1] * e2[:, 0]) / det
    b2 = (e1[:, 0] * p[:, 1] - e1[:, 1] * p[:, 0]) / det
    b0 = 1.0 - b1 - b2
    ok &= (b0 >= -_EPS) & (b1 >= -_EPS) & (b2 >= -_EPS)
    h = b0 * trih[t, 0] + b1 * trih[t, 1] + b2 * trih[t, 2]
    np.minimum.at(gap, vk[ok], depth[vk[ok]] - h[ok])
    return gap


_gaps = pick(_gaps_loops, _gaps_numpy)


def interface_gaps(face_vertices, interface: TriangleMesh, direction):
    """Distance along ``direction`` from the interface to each face vertex.

    ``inf`` where the line through a vertex misses the interface.
    """
    d = np.asarray(direction, dtype=np.float64)
    e1, e2 = _basis(d)
    frame = np.stack([e1, e2])
    pts = np.asarray(face_vertices, dtype=np.float64)
    pts2d = np.ascontiguousarray(pts @ frame.T)
    depth = np.ascontiguousarray(pts @ d)
    tv = interface.vertices[interface.faces]  # (m, 3, 3)
    tri2d = np.ascontiguousarray(tv @ frame.T)
    trih = np.ascontiguousarray(tv @ d)
    ext = tri2d.max(axis=1) - tri2d.min(axis=1)
    cell = float(max(np.median(ext.max(axis=1)), 1e-6))
    origin, shape, starts, tris = _bin_triangles(tri2d, cell)
    return _gaps(pts2d, depth, tri2d, trih, origin, cell, shape, starts, tris)


def rim_vertices(face_vertices, rim_points, band=RIM_BAND_MM):
    """Face vertices within ``band`` mm of any contact-region point."""
    _, dist = KdTree(rim_points).query(face_vertices)
    return np.flatnonzero(dist <= band)


def default_direction(face: TriangleMesh, rim):
    """Approach against the mean face normal over the rim."""
    n = face.normals[rim].sum(axis=0) if len(rim) else face.normals.sum(axis=0)
    length = np.linalg.norm(n)
    if not length > 0:
        raise GeometryError("cannot infer an approach direction from degenerate normals")
    return -n / length


def simulate_press(face: TriangleMesh, interface: TriangleMesh, params: ContactParams = ContactParams(), rim_points=None):
    """Press ``interface`` onto ``face`` and report per-vertex proxy pressure."""
    if face.n_vertices == 0 or interface.n_faces == 0:
        raise GeometryError("press simulation needs a non-empty face and interface")
    if rim_points is not None:
        rim = rim_vertices(face.vertices, np.asarray(rim_points).reshape(-1, 3), params.rim_band)
    else:
        rim = None
    if params.approach_direction is not None:
        direction = np.asarray(params.approach_direction)
    else:
        direction = default_direction(face, rim if rim is not None else np.arange(face.n_vertices))
    gap = interface_gaps(face.vertices, interface, direction)
    hit = np.isfinite(gap)
    pressure = np.zeros(face.n_vertices)
    if rim is None:
        rim = np.flatnonzero(hit)
    report = PressureReport(pressure=pressure, rim=rim, approach_direction=direction)
    if not hit.any() or gap[hit].max() < 0:
        # nothing under the interface, or the whole face lies behind it
        log.warning("interface never touches the face along %s", direction.tolist())
        report.no_contact = True
        return report
    first = gap[hit].min()
    travel = first + params.max_penetration
    disp = np.where(hit, np.maximum(0.0, travel - gap), 0.0)
    pressure[:] = params.stiffness * disp
    report.contacted = int(np.count_nonzero(pressure > 0))
    report.extra["travel"] = float(travel)
    vals = pressure[rim]
    if len(vals):
        report.mean = float(vals.mean())
        report.std = float(vals.std())
        report.min = float(vals.min())
        report.max = float(vals.max())
        report.cv = report.std / report.mean if report.mean > 0 else float("nan")
    return report


@dataclass
class Comparison:
    cv_personalized: float
    cv_generic: float
    ratio: float
    success: bool

    def to_dict(self):
        return {
            "cv_personalized": self.cv_personalized,
            "cv_generic": self.cv_generic,
            "ratio": self.ratio,
            "success": self.success,
        }


def compare_reports(personalized: PressureReport, generic: PressureReport) -> Comparison:
    """CV ratio personalized / generic; success when the personalized fit is more uniform."""
    for name, r in (("personalized", personalized), ("generic", generic)):
        if not r.mean > 0:
            raise UndefinedCV(f"{name} report has zero mean rim pressure")
    if generic.cv == 0:
        ratio = 1.0 if personalized.cv == 0 else float("inf")
    else:
        ratio = personalized.cv / generic.cv
    return Comparison(personalized.cv, generic.cv, ratio, bool(ratio < 1))
