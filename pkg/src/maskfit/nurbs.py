"""Tensor-product NURBS surfaces for the mask interface.

Basis functions follow the standard span search + triangular Cox-de Boor
table. Evaluation at the upper end of a knot vector uses the last non-empty
span so the final control row is reachable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import njit, pick
from .errors import GeometryError, MapOutOfRange, OutOfDomain, ParseError
from .geometry import TriangleMesh


@dataclass(frozen=True, eq=False)
class NurbsSurface:
    degree_u: int
    degree_v: int
    knots_u: np.ndarray
    knots_v: np.ndarray
    control_points: np.ndarray  # (n_u, n_v, 3)
    weights: np.ndarray  # (n_u, n_v)

    def __post_init__(self):
        ku = np.array(self.knots_u, dtype=np.float64).reshape(-1)
        kv = np.array(self.knots_v, dtype=np.float64).reshape(-1)
        cp = np.array(self.control_points, dtype=np.float64)
        w = np.array(self.weights, dtype=np.float64)
        p, q = int(self.degree_u), int(self.degree_v)
        if p < 1 or q < 1:
            raise ParseError(f"degrees must be >= 1, got ({p}, {q})")
        if cp.ndim != 3 or cp.shape[2] != 3:
            raise ParseError(f"control_points must be an (n_u, n_v, 3) grid, got shape {cp.shape}")
        nu, nv = cp.shape[:2]
        if w.shape != (nu, nv):
            raise ParseError(f"weights shape {w.shape} does not match control grid ({nu}, {nv})")
        for name, k, deg, n in (("knots_u", ku, p, nu), ("knots_v", kv, q, nv)):
            if len(k) != n + deg + 1:
                raise ParseError(
                    f"{name} has {len(k)} knots; expected n + degree + 1 = {n + deg + 1}"
                )
            if np.any(np.diff(k) < 0):
                raise ParseError(f"{name} is not non-decreasing")
            if not (np.all(k[: deg + 1] == k[0]) and np.all(k[-deg - 1 :] == k[-1])):
                raise ParseError(f"{name} is not clamped (end knots must repeat degree + 1 times)")
            if k[-1] <= k[0]:
                raise ParseError(f"{name} spans an empty domain")
        if not np.all(w > 0):
            raise ParseError("NURBS weights must be positive")
        if not np.isfinite(cp).all():
            raise ParseError("non-finite control point")
        for a in (ku, kv, cp, w):
            a.setflags(write=False)
        object.__setattr__(self, "degree_u", p)
        object.__setattr__(self, "degree_v", q)
        object.__setattr__(self, "knots_u", ku)
        object.__setattr__(self, "knots_v", kv)
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "weights", w)

    @property
    def shape(self):
        return self.control_points.shape[:2]

    @property
    def domain_u(self):
        return float(self.knots_u[self.degree_u]), float(self.knots_u[-self.degree_u - 1])

    @property
    def domain_v(self):
        return float(self.knots_v[self.degree_v]), float(self.knots_v[-self.degree_v - 1])

    def with_control_points(self, cp):
        return NurbsSurface(self.degree_u, self.degree_v, self.knots_u, self.knots_v, cp, self.weights)

    def __eq__(self, other):
        if not isinstance(other, NurbsSurface):
            return NotImplemented
        return (
            self.degree_u == other.degree_u
            and self.degree_v == other.degree_v
            and np.array_equal(self.knots_u, other.knots_u)
            and np.array_equal(self.knots_v, other.knots_v)
            and np.array_equal(self.control_points, other.control_points)
            and np.array_equal(self.weights, other.weights)
        )


def clamped_uniform_knots(n, degree):
    """Clamped knot vector on [0, 1] with uniformly spaced interior knots."""
    inner = np.linspace(0.0, 1.0, n - degree + 1)
    return np.concatenate([np.zeros(degree), inner, np.ones(degree)])


@dataclass(frozen=True, eq=False)
class ControlMap:
    """Control-point grid index (i, j) -> contact-region ordinal k."""

    entries: np.ndarray  # (m, 3) int: i, j, k

    def __post_init__(self):
        e = np.array(self.entries, dtype=np.int64).reshape(-1, 3)
        if len(np.unique(e[:, :2], axis=0)) != len(e):
            raise ParseError("control map lists a control point twice")
        if len(e) and e.min() < 0:
            raise ParseError("control map indices must be non-negative")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def __len__(self):
        return len(self.entries)

    def check(self, shape, region_length=None):
        e = self.entries
        if len(e) and (e[:, 0].max() >= shape[0] or e[:, 1].max() >= shape[1]):
            raise MapOutOfRange(f"control map references a control point outside the {shape} grid")
        if region_length is not None and len(e) and e[:, 2].max() >= region_length:
            raise MapOutOfRange(
                f"control map ordinal {int(e[:, 2].max())} exceeds region length {region_length}"
            )

    def __eq__(self, other):
        return isinstance(other, ControlMap) and np.array_equal(self.entries, other.entries)


# ---------------------------------------------------------------------------
# basis functions


@njit(cache=True)
def find_span(n_ctrl, degree, u, knots):
    """Knot span index i with knots[i] <= u < knots[i+1] (last span at the end)."""
    if u >= knots[n_ctrl]:
        return n_ctrl - 1
    lo = degree
    hi = n_ctrl
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if u < knots[mid]:
            hi = mid
        else:
            lo = mid
    return lo


@njit(cache=True)
def basis_funs(span, u, degree, knots):
    """The degree + 1 non-zero B-spline basis values on ``span``."""
    out = np.zeros(degree + 1)
    left = np.zeros(degree + 1)
    right = np.zeros(degree + 1)
    out[0] = 1.0
    for j in range(1, degree + 1):
        left[j] = u - knots[span + 1 - j]
        right[j] = knots[span + j] - u
        saved = 0.0
        for r in range(j):
            tmp = out[r] / (right[r + 1] + left[j - r])
            out[r] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        out[j] = saved
    return out


@njit(cache=True)
def _evaluate_loops(p, q, ku, kv, cp, w, us, vs):
    nu = cp.shape[0]
    nv = cp.shape[1]
    m = us.shape[0]
    out = np.empty((m, 3))
    for s in range(m):
        su = find_span(nu, p, us[s], ku)
        sv = find_span(nv, q, vs[s], kv)
        bu = basis_funs(su, us[s], p, ku)
        bv = basis_funs(sv, vs[s], q, kv)
        den = 0.0
        for a in range(p + 1):
            for b in range(q + 1):
                den += bu[a] * bv[b] * w[su - p + a, sv - q + b]
        # normalize before weighting the points so a lone unit basis
        # reproduces its control point bit for bit
        x = 0.0
        y = 0.0
        z = 0.0
        for a in range(p + 1):
            i = su - p + a
            for b in range(q + 1):
                j = sv - q + b
                r = bu[a] * bv[b] * w[i, j] / den
                x += r * cp[i, j, 0]
                y += r * cp[i, j, 1]
                z += r * cp[i, j, 2]
        out[s, 0] = x
        out[s, 1] = y
        out[s, 2] = z
    return out


def _spans_numpy(n_ctrl, degree, t, knots):
    span = np.searchsorted(knots, t, side="right") - 1
    return np.clip(span, degree, n_ctrl - 1)


def _basis_numpy(span, t, degree, knots):
    """Vectorized triangular table: (m, degree + 1) basis values."""
    m = len(t)
    out = np.zeros((m, degree + 1))
    left = np.zeros((m, degree + 1))
    right = np.zeros((m, degree + 1))
    out[:, 0] = 1.0
    for j in range(1, degree + 1):
        left[:, j] = t - knots[span + 1 - j]
        right[:, j] = knots[span + j] - t
        saved = np.zeros(m)
        for r in range(j):
            tmp = out[:, r] / (right[:, r + 1] + left[:, j - r])
            out[:, r] = saved + right[:, r + 1] * tmp
            saved = left[:, j - r] * tmp
        out[:, j] = saved
    return out


def _evaluate_numpy(p, q, ku, kv, cp, w, us, vs):
    nu, nv = cp.shape[:2]
    su = _spans_numpy(nu, p, us, ku)
    sv = _spans_numpy(nv, q, vs, kv)
    bu = _basis_numpy(su, us, p, ku)
    bv = _basis_numpy(sv, vs, q, kv)
    den = np.zeros(len(us))
    for a in range(p + 1):
        for b in range(q + 1):
            den += bu[:, a] * bv[:, b] * w[su - p + a, sv - q + b]
    out = np.zeros((len(us), 3))
    for a in range(p + 1):
        i = su - p + a
        for b in range(q + 1):
            j = sv - q + b
            r = bu[:, a] * bv[:, b] * w[i, j] / den
            out += r[:, None] * cp[i, j]
    return out


_evaluate = pick(_evaluate_loops, _evaluate_numpy)


def _check_domain(s: NurbsSurface, us, vs):
    u0, u1 = s.domain_u
    v0, v1 = s.domain_v
    if np.any((us < u0) | (us > u1) | ~np.isfinite(us)) or np.any((vs < v0) | (vs > v1) | ~np.isfinite(vs)):
        raise OutOfDomain(f"parameters outside [{u0}, {u1}] x [{v0}, {v1}]")


def evaluate_points(s: NurbsSurface, us, vs):
    """Surface points for paired parameter arrays ``us``, ``vs``."""
    us = np.ascontiguousarray(us, dtype=np.float64).reshape(-1)
    vs = np.ascontiguousarray(vs, dtype=np.float64).reshape(-1)
    if us.shape != vs.shape:
        raise GeometryError("u and v parameter arrays must have the same length")
    _check_domain(s, us, vs)
    return _evaluate(
        s.degree_u, s.degree_v, s.knots_u, s.knots_v,
        np.ascontiguousarray(s.control_points), np.ascontiguousarray(s.weights), us, vs,
    )


def evaluate_surface(s: NurbsSurface, u, v):
    return evaluate_points(s, [u], [v])[0]


def rational_basis(s: NurbsSurface, u, v):
    """Full (n_u, n_v) grid of rational basis values at one parameter pair."""
    _check_domain(s, np.array([u]), np.array([v]))
    nu, nv = s.shape
    su = find_span(nu, s.degree_u, float(u), s.knots_u)
    sv = find_span(nv, s.degree_v, float(v), s.knots_v)
    bu = basis_funs(su, float(u), s.degree_u, s.knots_u)
    bv = basis_funs(sv, float(v), s.degree_v, s.knots_v)
    r = np.zeros((nu, nv))
    r[su - s.degree_u : su + 1, sv - s.degree_v : sv + 1] = np.outer(bu, bv)
    r *= s.weights
    return r / r.sum()


def fit_interface(generic: NurbsSurface, cmap: ControlMap, warped) -> NurbsSurface:
    """Move each mapped control point onto its warped contact-region point."""
    pts = np.asarray(getattr(warped, "points", warped), dtype=np.float64).reshape(-1, 3)
    cmap.check(generic.shape, len(pts))
    cp = np.array(generic.control_points)
    e = cmap.entries
    cp[e[:, 0], e[:, 1]] = pts[e[:, 2]]
    return generic.with_control_points(cp)


def transform_surface(s: NurbsSurface, transform) -> NurbsSurface:
    """Apply a similarity transform to the control points (NURBS are affine invariant)."""
    cp = transform.apply(s.control_points.reshape(-1, 3)).reshape(s.control_points.shape)
    return s.with_control_points(cp)


def tessellate(s: NurbsSurface, res_u, res_v) -> TriangleMesh:
    """Regular ``res_u x res_v`` sample grid, two triangles per cell."""
    if res_u < 2 or res_v < 2:
        raise GeometryError("tessellation resolution must be at least 2 in each direction")
    u = np.linspace(*s.domain_u, res_u)
    v = np.linspace(*s.domain_v, res_v)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    verts = evaluate_points(s, uu.ravel(), vv.ravel())
    idx = np.arange(res_u * res_v).reshape(res_u, res_v)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[:-1, 1:].ravel()
    d = idx[1:, 1:].ravel()
    faces = np.concatenate([np.stack([a, b, d], 1), np.stack([a, d, c], 1)])
    return TriangleMesh(verts, faces)


def boundary_curve(s: NurbsSurface, samples=2000, side="v0"):
    """Dense samples along one boundary iso-curve."""
    if side in ("v0", "v1"):
        u = np.linspace(*s.domain_u, samples)
        v = np.full(samples, s.domain_v[0] if side == "v0" else s.domain_v[1])
    else:
        v = np.linspace(*s.domain_v, samples)
        u = np.full(samples, s.domain_u[0] if side == "u0" else s.domain_u[1])
    return evaluate_points(s, u, v)
