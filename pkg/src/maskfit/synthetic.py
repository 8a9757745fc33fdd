"""Procedural face surfaces, depth rendering and the bundled demo assets.

The template is an analytic height field sampled on an elliptic polar mesh
centred under the nose, so that concentric vertex rings around the nose are
natural candidates for the mask contact band. A "patient" scan is the same
surface plus smooth bumps, moved by a similarity transform into a camera
frame and ray-cast into a 16-bit depth image.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import njit, pick
from .geometry import Intrinsics, RangeScan, TriangleMesh
from .landmarks import LandmarkSet, PixelLandmark
from .nurbs import ControlMap, NurbsSurface, clamped_uniform_knots
from .region import ContactRegion
from .similarity import SimilarityTransform

FACE_RADIUS = 90.0
Y_STRETCH = 1.3
BAND_RADII = (22.0, 46.0)
EYES = ((-40.0, -55.0), (40.0, -55.0))
DEPTH_UNIT = 0.1


def face_height(x, y):
    """Protrusion toward the viewer (mm) of the neutral face at (x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    h = 40.0 * (1.0 - (x / 100.0) ** 2 - (y / 130.0) ** 2)
    h += 18.0 * np.exp(-(x**2) / (2 * 10.0**2) - (y - 5.0) ** 2 / (2 * 12.0**2))
    h += 9.0 * np.exp(-(x**2) / (2 * 8.0**2) - (y + 25.0) ** 2 / (2 * 18.0**2))
    for ex, ey in EYES:
        h -= 6.0 * np.exp(-((x - ex) ** 2 + (y - ey) ** 2) / (2 * 10.0**2))
    h -= 3.0 * np.exp(-(x**2) / (2 * 18.0**2) - (y - 60.0) ** 2 / (2 * 6.0**2))
    return h


@dataclass(frozen=True)
class Bump:
    x: float
    y: float
    amplitude: float
    sigma: float

    def __call__(self, x, y):
        return self.amplitude * np.exp(-((x - self.x) ** 2 + (y - self.y) ** 2) / (2 * self.sigma**2))


DEFAULT_BUMPS = (Bump(24.0, 8.0, 3.0, 14.0), Bump(-22.0, -20.0, -2.0, 12.0))


def ring_counts(n_rings):
    return [8, 16] + [int(6 * k) for k in range(3, n_rings + 1)]


def polar_mesh(n_rings, radius=FACE_RADIUS, height=face_height):
    """Elliptic polar mesh: a centre vertex plus ``n_rings`` vertex loops.

    Returns ``(mesh, ring_starts, ring_sizes, ring_radii)``. Faces are wound
    so normals point toward -z (the viewer).
    """
    counts = ring_counts(n_rings)
    xs, ys, rho_list = [0.0], [0.0], []
    starts = []
    for k, n in enumerate(counts, start=1):
        rho = radius * k / n_rings
        theta = 2 * np.pi * np.arange(n) / n
        starts.append(len(xs))
        xs.extend(rho * np.cos(theta))
        ys.extend(Y_STRETCH * rho * np.sin(theta))
        rho_list.append(rho)
    x = np.array(xs)
    y = np.array(ys)
    verts = np.stack([x, y, -height(x, y)], axis=1)
    faces = []
    # centre fan
    n1 = counts[0]
    for j in range(n1):
        faces.append((0, starts[0] + j, starts[0] + (j + 1) % n1))
    # zipper between consecutive rings, walking both by angle
    for k in range(len(counts) - 1):
        na, nb = counts[k], counts[k + 1]
        sa, sb = starts[k], starts[k + 1]
        i = j = 0
        while i < na or j < nb:
            ta = (i + 1) / na
            tb = (j + 1) / nb
            if j >= nb or (i < na and ta <= tb):
                faces.append((sa + i % na, sb + j % nb, sa + (i + 1) % na))
                i += 1
            else:
                faces.append((sa + i % na, sb + j % nb, sb + (j + 1) % nb))
                j += 1
    faces = np.array(faces, dtype=np.int64)
    mesh = TriangleMesh(verts, faces)
    if mesh.normals[:, 2].mean() > 0:
        mesh = TriangleMesh(verts, faces[:, ::-1])
    return mesh, np.array(starts), np.array(counts), np.array(rho_list)


def deformed_height(bumps=DEFAULT_BUMPS):
    def h(x, y):
        out = face_height(x, y)
        for b in bumps:
            out = out + b(x, y)
        return out

    return h


def bump_displacement(vertices, bumps=DEFAULT_BUMPS):
    """Displacement (along -z) that turns the neutral face into the bumped one."""
    v = np.asarray(vertices)
    dz = np.zeros(len(v))
    for b in bumps:
        dz -= b(v[:, 0], v[:, 1])
    out = np.zeros_like(v)
    out[:, 2] = dz
    return out


# ---------------------------------------------------------------------------
# depth rendering


@njit(cache=True)
def _render_loops(tri, fx, fy, cx, cy, width, height):
    depth = np.full((height, width), np.inf)
    for t in range(tri.shape[0]):
        ax = tri[t, 0, 0]; ay = tri[t, 0, 1]; az = tri[t, 0, 2]
        bx = tri[t, 1, 0]; by = tri[t, 1, 1]; bz = tri[t, 1, 2]
        qx = tri[t, 2, 0]; qy = tri[t, 2, 1]; qz = tri[t, 2, 2]
        if az <= 0 or bz <= 0 or qz <= 0:
            continue
        u0 = fx * ax / az + cx; u1 = fx * bx / bz + cx; u2 = fx * qx / qz + cx
        v0 = fy * ay / az + cy; v1 = fy * by / bz + cy; v2 = fy * qy / qz + cy
        umin = max(int(np.ceil(min(u0, min(u1, u2)))), 0)
        umax = min(int(np.floor(max(u0, max(u1, u2)))), width - 1)
        vmin = max(int(np.ceil(min(v0, min(v1, v2)))), 0)
        vmax = min(int(np.floor(max(v0, max(v1, v2)))), height - 1)
        e1x = bx - ax; e1y = by - ay; e1z = bz - az
        e2x = qx - ax; e2y = qy - ay; e2z = qz - az
        for pv in range(vmin, vmax + 1):
            for pu in range(umin, umax + 1):
                dx = (pu - cx) / fx
                dy = (pv - cy) / fy
                # Moller-Trumbore with ray origin at the camera centre, dz = 1
                px = dy * e2z - e2y
                py = e2x - dx * e2z
                pz = dx * e2y - dy * e2x
                det = e1x * px + e1y * py + e1z * pz
                if abs(det) < 1e-15:
                    continue
                inv = 1.0 / det
                tx = -ax; ty = -ay; tz = -az
                b1 = (tx * px + ty * py + tz * pz) * inv
                if b1 < -1e-12 or b1 > 1.0 + 1e-12:
                    continue
                qx2 = ty * e1z - tz * e1y
                qy2 = tz * e1x - tx * e1z
                qz2 = tx * e1y - ty * e1x
                b2 = (dx * qx2 + dy * qy2 + qz2) * inv
                if b2 < -1e-12 or b1 + b2 > 1.0 + 1e-12:
                    continue
                z = (e2x * qx2 + e2y * qy2 + e2z * qz2) * inv
                if z > 0 and z < depth[pv, pu]:
                    depth[pv, pu] = z
    return depth


def _render_numpy(tri, fx, fy, cx, cy, width, height):
    depth = np.full((height, width), np.inf)
    for a, b, q in tri:
        if min(a[2], b[2], q[2]) <= 0:
            continue
        us = fx * np.array([a[0], b[0], q[0]]) / np.array([a[2], b[2], q[2]]) + cx
        vs = fy * np.array([a[1], b[1], q[1]]) / np.array([a[2], b[2], q[2]]) + cy
        u = np.arange(max(int(np.ceil(us.min())), 0), min(int(np.floor(us.max())), width - 1) + 1)
        v = np.arange(max(int(np.ceil(vs.min())), 0), min(int(np.floor(vs.max())), height - 1) + 1)
        if len(u) == 0 or len(v) == 0:
            continue
        pu, pv = np.meshgrid(u, v)
        d = np.stack([(pu - cx) / fx, (pv - cy) / fy, np.ones(pu.shape)], axis=-1)
        e1, e2 = b - a, q - a
        p = np.cross(d, e2)
        det = p @ e1
        ok = np.abs(det) >= 1e-15
        inv = 1.0 / np.where(ok, det, 1.0)
        tvec = -a
        b1 = (p @ tvec) * inv
        qv = np.cross(tvec, e1)
        b2 = (d @ qv) * inv
        z = (e2 @ qv) * inv
        ok &= (b1 >= -1e-12) & (b1 <= 1 + 1e-12) & (b2 >= -1e-12) & (b1 + b2 <= 1 + 1e-12) & (z > 0)
        cur = depth[pv, pu]
        upd = ok & (z < cur)
        cur[upd] = z[upd]
        depth[pv, pu] = cur
    return depth


_render = pick(_render_loops, _render_numpy)


def render_depth(mesh: TriangleMesh, intrinsics: Intrinsics, width, height):
    """Ray-cast z-depth (mm) per pixel centre; ``inf`` where nothing is hit."""
    tri = np.ascontiguousarray(mesh.vertices[mesh.faces])
    k = intrinsics
    return _render(tri, float(k.fx), float(k.fy), float(k.cx), float(k.cy), int(width), int(height))


def quantize_depth(depth, unit=DEPTH_UNIT):
    """Depth in ``unit`` steps as uint16, 0 where invalid."""
    q = np.zeros(depth.shape, dtype=np.uint16)
    ok = np.isfinite(depth) & (depth > 0)
    q[ok] = np.clip(np.floor(depth[ok] / unit + 0.5), 1, 65535).astype(np.uint16)
    return q


def scan_from_depth(depth_units, intrinsics: Intrinsics, unit=DEPTH_UNIT):
    """Back-project a quantized depth image into a grid-bearing RangeScan."""
    h, w = depth_units.shape
    vv, uu = np.nonzero(depth_units > 0)
    z = depth_units[vv, uu].astype(np.float64) * unit
    pts = intrinsics.back_project(uu.astype(np.float64), vv.astype(np.float64), z)
    grid = np.full((h, w), -1, np.int64)
    grid[vv, uu] = np.arange(len(pts))
    return RangeScan(pts, grid=grid, intrinsics=intrinsics)


# ---------------------------------------------------------------------------
# assets


@dataclass
class TemplateAssets:
    mesh: TriangleMesh
    landmarks: LandmarkSet
    region: ContactRegion
    interface: NurbsSurface
    control_map: ControlMap
    ring_starts: np.ndarray
    ring_sizes: np.ndarray
    ring_radii: np.ndarray


def _band_rings(ring_radii, n_band=8, band=BAND_RADII):
    targets = np.linspace(band[0], band[1], n_band)
    rings = [int(np.argmin(np.abs(ring_radii - t))) for t in targets]
    if len(set(rings)) != n_band:
        raise ValueError("template too coarse for an 8-ring contact band")
    return rings


def make_template(n_rings=25, n_u=32, n_v=8) -> TemplateAssets:
    """Neutral face template with landmarks, contact band and generic interface."""
    mesh, starts, sizes, radii = polar_mesh(n_rings)
    # landmarks: 60 vertices on four ring radii x 15 angles
    names, tv = [], []
    for a, frac in enumerate((0.2, 0.4, 0.6, 0.85)):
        k = int(np.argmin(np.abs(radii - frac * FACE_RADIUS)))
        for b in range(15):
            j = int(round(b * sizes[k] / 15)) % sizes[k]
            names.append(f"lm_{a}_{b:02d}")
            tv.append(starts[k] + j)
    landmarks = LandmarkSet(tuple(names), mesh.vertices[tv], np.array(tv))

    band = _band_rings(radii, n_v)
    idx, ring_len, offsets = [], [], []
    for k in band:
        offsets.append(len(idx))
        idx.extend(range(starts[k], starts[k] + sizes[k]))
        ring_len.append(int(sizes[k]))
    region = ContactRegion(np.array(idx), closed=True, rings=tuple(ring_len))

    entries = []
    for jv, k in enumerate(band):
        n = sizes[k]
        for iu in range(n_u):
            # n_u - 1 divisions so the last column closes onto the first
            entries.append((iu, jv, offsets[jv] + int(round(iu * n / (n_u - 1))) % n))
    cmap = ControlMap(np.array(entries))
    cp = np.zeros((n_u, n_v, 3))
    region_pts = mesh.vertices[region.vertex_indices]
    e = cmap.entries
    cp[e[:, 0], e[:, 1]] = region_pts[e[:, 2]]
    surf = NurbsSurface(3, 3, clamped_uniform_knots(n_u, 3), clamped_uniform_knots(n_v, 3), cp, np.ones((n_u, n_v)))
    return TemplateAssets(mesh, landmarks, region, surf, cmap, starts, sizes, radii)


DEFAULT_POSE = SimilarityTransform(
    1.06,
    # small head rotation: yaw 8 deg, pitch -5 deg, roll 3 deg
    (lambda a, b, c: (
        np.array([[np.cos(c), -np.sin(c), 0], [np.sin(c), np.cos(c), 0], [0, 0, 1]])
        @ np.array([[np.cos(a), 0, np.sin(a)], [0, 1, 0], [-np.sin(a), 0, np.cos(a)]])
        @ np.array([[1, 0, 0], [0, np.cos(b), -np.sin(b)], [0, np.sin(b), np.cos(b)]])
    ))(np.radians(8.0), np.radians(-5.0), np.radians(3.0)),
    np.array([6.0, -4.0, 520.0]),
)

DEFAULT_INTRINSICS = Intrinsics(600.0, 600.0, 180.0, 220.0)
DEFAULT_IMAGE = (360, 440)


@dataclass
class SyntheticScan:
    depth: np.ndarray  # uint16, DEPTH_UNIT per count
    intrinsics: Intrinsics
    scan: RangeScan
    pixel_landmarks: list
    pose: SimilarityTransform
    surface: TriangleMesh  # ground-truth surface in camera frame


def make_scan(
    template: TemplateAssets,
    bumps=DEFAULT_BUMPS,
    pose=DEFAULT_POSE,
    intrinsics=DEFAULT_INTRINSICS,
    image=DEFAULT_IMAGE,
    n_rings=None,
    eye_holes=True,
) -> SyntheticScan:
    """Render the bumped face, seen from ``pose``, into a quantized depth image."""
    if n_rings is None:
        n_rings = 150
    height = deformed_height(bumps)
    dense, _, _, _ = polar_mesh(n_rings, radius=1.25 * FACE_RADIUS, height=height)
    surface = TriangleMesh(pose.apply(dense.vertices), dense.faces)
    w, h = image
    depth = render_depth(surface, intrinsics, w, h)
    q = quantize_depth(depth)
    if eye_holes:
        # structured-light sensors typically lose depth on the eyes
        scan0 = scan_from_depth(q, intrinsics)
        local = (scan0.points - pose.translation) @ pose.rotation / pose.scale
        vv, uu = np.nonzero(q > 0)
        for ex, ey in EYES:
            hole = (local[:, 0] - ex) ** 2 + (local[:, 1] - ey) ** 2 < 7.0**2
            q[vv[hole], uu[hole]] = 0
    scan = scan_from_depth(q, intrinsics)
    lm_local = template.landmarks.positions.copy()
    lm_local[:, 2] = -height(lm_local[:, 0], lm_local[:, 1])
    lm_cam = pose.apply(lm_local)
    u, v = intrinsics.project(lm_cam)
    pixel = [PixelLandmark(n, float(a), float(b)) for n, a, b in zip(template.landmarks.names, u, v)]
    return SyntheticScan(q, intrinsics, scan, pixel, pose, surface)


def make_mesh_scan(template_rings=25, scan_rings=60, bumps=DEFAULT_BUMPS):
    """Bumped face as a dense mesh scan (no depth grid) in template coordinates."""
    dense, _, _, _ = polar_mesh(scan_rings, radius=1.25 * FACE_RADIUS, height=deformed_height(bumps))
    return RangeScan(dense.vertices, faces=dense.faces), dense
