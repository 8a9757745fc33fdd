"""Mesh and range-scan containers plus the per-vertex geometry they need.

All coordinates are millimeters.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._accel import njit, pick
from .errors import GeometryError, NonManifoldEdge, ParseError, ZeroAreaFace

log = logging.getLogger(__name__)

ZERO_AREA = 1e-12


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class TriangleMesh:
    """Indexed triangle surface.

    ``vertices`` is (n, 3) float64, ``faces`` is (m, 3) int64. Arrays are
    copied and made read-only; derived quantities are cached.
    """

    def __init__(self, vertices, faces):
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        n = len(vertices)
        if len(faces):
            if faces.min() < 0 or faces.max() >= n:
                raise GeometryError(f"face index out of range for {n} vertices")
            degenerate = (
                (faces[:, 0] == faces[:, 1])
                | (faces[:, 1] == faces[:, 2])
                | (faces[:, 0] == faces[:, 2])
            )
            if degenerate.any():
                bad = int(np.flatnonzero(degenerate)[0])
                raise GeometryError(f"face {bad} repeats a vertex index: {faces[bad].tolist()}")
        if not np.isfinite(vertices).all():
            raise GeometryError("non-finite vertex coordinates")
        self.vertices = _frozen(vertices, np.float64)
        self.faces = _frozen(faces, np.int64)

    def __len__(self):
        return len(self.vertices)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @cached_property
    def normals(self):
        n, _ = vertex_normals(self.vertices, self.faces, strict=False)
        n.setflags(write=False)
        return n

    @cached_property
    def isolated_vertices(self):
        used = np.zeros(len(self.vertices), dtype=bool)
        used[self.faces.ravel()] = True
        return np.flatnonzero(~used)

    @cached_property
    def edges(self):
        """Unique undirected edges as sorted (i, j) pairs, i < j."""
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def with_vertices(self, vertices):
        """Same connectivity, new positions."""
        return TriangleMesh(vertices, self.faces)

    def __repr__(self):
        return f"TriangleMesh(n_vertices={self.n_vertices}, n_faces={self.n_faces})"


def face_normals(vertices, faces):
    """Unnormalized face normals (length = twice the face area)."""
    v0 = vertices[faces[:, 0]]
    return np.cross(vertices[faces[:, 1]] - v0, vertices[faces[:, 2]] - v0)


def vertex_normals(vertices, faces, strict=True):
    """Area-weighted vertex normals.

    Returns ``(normals, isolated)`` where ``isolated`` lists vertices with no
    incident face; their normal is the zero vector. With ``strict`` a face of
    area below 1e-12 mm^2 raises ZeroAreaFace, otherwise it contributes
    nothing.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    fn = face_normals(vertices, faces)
    area = 0.5 * np.linalg.norm(fn, axis=1)
    small = area < ZERO_AREA
    if small.any():
        if strict:
            bad = int(np.flatnonzero(small)[0])
            raise ZeroAreaFace(f"face {bad} has area {area[bad]:.3g} mm^2")
        fn[small] = 0.0
    acc = np.zeros_like(vertices)
    for k in range(3):
        np.add.at(acc, faces[:, k], fn)
    length = np.linalg.norm(acc, axis=1)
    isolated = np.flatnonzero(length == 0.0)
    out = np.zeros_like(acc)
    ok = length > 0
    out[ok] = acc[ok] / length[ok, None]
    return out, isolated


def compute_vertex_normals(mesh: TriangleMesh):
    """Per-vertex unit normals of ``mesh``, strict about degenerate faces."""
    if mesh.n_faces == 0:
        raise GeometryError("mesh has no faces")
    normals, isolated = vertex_normals(mesh.vertices, mesh.faces, strict=True)
    if len(isolated):
        log.warning("%d isolated vertices get a zero normal", len(isolated))
    return normals


@dataclass(frozen=True, eq=False)
class CotangentWeights:
    """Symmetric per-edge cotangent weights, stored once per undirected edge."""

    edges: np.ndarray  # (E, 2), i < j
    weights: np.ndarray  # (E,)
    n_vertices: int
    _lookup: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._lookup.update(
            {(int(i), int(j)): k for k, (i, j) in enumerate(self.edges)}
        )

    def weight(self, i, j):
        key = (i, j) if i < j else (j, i)
        return float(self.weights[self._lookup[key]])

    def __len__(self):
        return len(self.edges)


def cotangent_weights(mesh: TriangleMesh) -> CotangentWeights:
    """(cot a + cot b) / 2 for interior edges, cot a / 2 on the boundary.

    Obtuse angles give negative weights; they are kept as-is.
    """
    v, f = mesh.vertices, mesh.faces
    # corner k is opposite edge (f[k+1], f[k+2])
    keys, cots = [], []
    for k in range(3):
        i, j, o = f[:, (k + 1) % 3], f[:, (k + 2) % 3], f[:, k]
        a = v[i] - v[o]
        b = v[j] - v[o]
        cross = np.linalg.norm(np.cross(a, b), axis=1)
        if (cross < 2 * ZERO_AREA).any():
            bad = int(np.flatnonzero(cross < 2 * ZERO_AREA)[0])
            raise ZeroAreaFace(f"face {bad} is degenerate")
        cots.append(np.einsum("ij,ij->i", a, b) / cross)
        keys.append(np.sort(np.stack([i, j], axis=1), axis=1))
    keys = np.concatenate(keys)
    cots = np.concatenate(cots)
    edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if (counts > 2).any():
        bad = edges[np.flatnonzero(counts > 2)[0]]
        raise NonManifoldEdge(f"edge ({bad[0]}, {bad[1]}) borders more than two faces")
    w = np.zeros(len(edges))
    np.add.at(w, inverse, 0.5 * cots)
    edges = edges.astype(np.int64)
    edges.setflags(write=False)
    w.setflags(write=False)
    return CotangentWeights(edges=edges, weights=w, n_vertices=mesh.n_vertices)


def triangulate_grid(grid, points, max_edge=10.0):
    """Triangulate the valid pixels of a range image lattice.

    Each 2x2 pixel block yields two triangles when all four are valid, one
    when exactly three are. Triangles with an edge longer than ``max_edge``
    (depth discontinuities) are dropped. Winding makes normals face the
    camera (negative z).
    """
    g = np.asarray(grid)
    a = g[:-1, :-1].ravel()
    b = g[:-1, 1:].ravel()
    c = g[1:, :-1].ravel()
    d = g[1:, 1:].ravel()
    tris = []
    full = (a >= 0) & (b >= 0) & (c >= 0) & (d >= 0)
    tris.append(np.stack([a[full], c[full], b[full]], axis=1))
    tris.append(np.stack([b[full], c[full], d[full]], axis=1))
    three = ((a >= 0).astype(int) + (b >= 0) + (c >= 0) + (d >= 0)) == 3
    m = three & (d < 0)
    tris.append(np.stack([a[m], c[m], b[m]], axis=1))
    m = three & (c < 0)
    tris.append(np.stack([a[m], d[m], b[m]], axis=1))
    m = three & (b < 0)
    tris.append(np.stack([a[m], c[m], d[m]], axis=1))
    m = three & (a < 0)
    tris.append(np.stack([b[m], c[m], d[m]], axis=1))
    faces = np.concatenate(tris).astype(np.int64)
    if len(faces) == 0:
        return faces.reshape(0, 3)
    p = np.asarray(points)
    e0 = np.linalg.norm(p[faces[:, 1]] - p[faces[:, 0]], axis=1)
    e1 = np.linalg.norm(p[faces[:, 2]] - p[faces[:, 1]], axis=1)
    e2 = np.linalg.norm(p[faces[:, 0]] - p[faces[:, 2]], axis=1)
    keep = np.maximum(np.maximum(e0, e1), e2) <= max_edge
    faces = faces[keep]
    area = 0.5 * np.linalg.norm(face_normals(p, faces), axis=1)
    return faces[area >= ZERO_AREA]


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ParseError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")

    def project(self, points):
        p = np.asarray(points, dtype=np.float64)
        return self.fx * p[..., 0] / p[..., 2] + self.cx, self.fy * p[..., 1] / p[..., 2] + self.cy

    def back_project(self, u, v, z):
        return np.stack([(u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z], axis=-1)


class RangeScan:
    """Scanned surface samples.

    ``grid`` (optional) is an (H, W) int array holding the point index
    observed at each pixel, -1 where depth is invalid; ``grid[v, u]``.
    Surface normals come from explicit ``normals``, else from ``faces``,
    else from the triangulated grid, else from local PCA.
    """

    def __init__(self, points, grid=None, intrinsics=None, faces=None, normals=None):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(points) == 0:
            raise GeometryError("range scan has no points")
        if not np.isfinite(points).all():
            raise GeometryError("non-finite scan points")
        if grid is not None:
            grid = np.asarray(grid, dtype=np.int64)
            if grid.ndim != 2:
                raise GeometryError("scan grid must be two-dimensional")
            if intrinsics is None:
                raise GeometryError("a scan grid requires camera intrinsics")
            present = grid[grid >= 0]
            if len(present) and present.max() >= len(points):
                raise GeometryError("scan grid references a missing point")
            grid = _frozen(grid, np.int64)
        if faces is not None:
            faces = _frozen(np.asarray(faces, dtype=np.int64).reshape(-1, 3), np.int64)
            if len(faces) and (faces.min() < 0 or faces.max() >= len(points)):
                raise GeometryError("scan face index out of range")
        if normals is not None:
            normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
            if normals.shape != points.shape:
                raise GeometryError("scan normals must match points")
            length = np.linalg.norm(normals, axis=1, keepdims=True)
            normals = _frozen(np.divide(normals, length, out=np.zeros_like(normals), where=length > 0), np.float64)
        self.points = _frozen(points, np.float64)
        self.grid = grid
        self.intrinsics = intrinsics
        self._faces = faces
        self._normals = normals

    def __len__(self):
        return len(self.points)

    @property
    def has_grid(self):
        return self.grid is not None

    @cached_property
    def faces(self):
        if self._faces is not None:
            return self._faces
        if self.grid is not None:
            f = triangulate_grid(self.grid, self.points)
            f.setflags(write=False)
            return f
        return None

    @cached_property
    def normals(self):
        if self._normals is not None:
            return self._normals
        faces = self.faces
        if faces is not None and len(faces):
            n, isolated = vertex_normals(self.points, faces, strict=False)
            if len(isolated):
                n[isolated] = _pca_normals(self.points, self.kdtree, subset=isolated)
        else:
            n = _pca_normals(self.points, self.kdtree)
        if faces is None or self.grid is not None:
            # no winding to trust: face the camera at the origin
            flip = np.einsum("ij,ij->i", n, self.points) > 0
            n[flip] *= -1
        n.setflags(write=False)
        return n

    @cached_property
    def kdtree(self):
        from .kdtree import KdTree

        return KdTree(self.points)

    def mesh(self):
        """Surface as a TriangleMesh (requires faces or a grid)."""
        if self.faces is None:
            raise GeometryError("scan has no connectivity; cannot build a surface mesh")
        return TriangleMesh(self.points, self.faces)


def _pca_normals(points, tree, k=10, subset=None):
    idx = np.arange(len(points)) if subset is None else np.asarray(subset)
    k = min(k, len(points))
    nbrs, _ = tree.query_knn(points[idx], k)
    out = np.zeros((len(idx), 3))
    for row, nb in enumerate(nbrs):
        q = points[nb] - points[nb].mean(axis=0)
        if len(nb) < 3:
            out[row] = (0.0, 0.0, -1.0)
            continue
        _, _, vt = np.linalg.svd(q, full_matrices=False)
        out[row] = vt[-1]
    return out


# ---------------------------------------------------------------------------
# point-to-surface distance


@njit(cache=True)
def _closest_on_triangle(p, a, b, c):
    ab0 = b[0] - a[0]; ab1 = b[1] - a[1]; ab2 = b[2] - a[2]
    ac0 = c[0] - a[0]; ac1 = c[1] - a[1]; ac2 = c[2] - a[2]
    ap0 = p[0] - a[0]; ap1 = p[1] - a[1]; ap2 = p[2] - a[2]
    d1 = ab0 * ap0 + ab1 * ap1 + ab2 * ap2
    d2 = ac0 * ap0 + ac1 * ap1 + ac2 * ap2
    if d1 <= 0.0 and d2 <= 0.0:
        return a[0], a[1], a[2]
    bp0 = p[0] - b[0]; bp1 = p[1] - b[1]; bp2 = p[2] - b[2]
    d3 = ab0 * bp0 + ab1 * bp1 + ab2 * bp2
    d4 = ac0 * bp0 + ac1 * bp1 + ac2 * bp2
    if d3 >= 0.0 and d4 <= d3:
        return b[0], b[1], b[2]
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        return a[0] + t * ab0, a[1] + t * ab1, a[2] + t * ab2
    cp0 = p[0] - c[0]; cp1 = p[1] - c[1]; cp2 = p[2] - c[2]
    d5 = ab0 * cp0 + ab1 * cp1 + ab2 * cp2
    d6 = ac0 * cp0 + ac1 * cp1 + ac2 * cp2
    if d6 >= 0.0 and d5 <= d6:
        return c[0], c[1], c[2]
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        return a[0] + t * ac0, a[1] + t * ac1, a[2] + t * ac2
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b[0] + t * (c[0] - b[0]), b[1] + t * (c[1] - b[1]), b[2] + t * (c[2] - b[2])
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return a[0] + ab0 * v + ac0 * w, a[1] + ab1 * v + ac1 * w, a[2] + ab2 * v + ac2 * w


@njit(cache=True)
def _surface_distance_loops(queries, vertices, faces, centers, radii, lo, hi, best0):
    nq = queries.shape[0]
    out = np.empty(nq)
    for qi in range(nq):
        p = queries[qi]
        best = best0[qi]
        for f in range(lo[qi], hi[qi]):
            dx = p[0] - centers[f, 0]
            dy = p[1] - centers[f, 1]
            dz = p[2] - centers[f, 2]
            dc = np.sqrt(dx * dx + dy * dy + dz * dz) - radii[f]
            if dc > 0.0 and dc * dc >= best:
                continue
            x, y, z = _closest_on_triangle(p, vertices[faces[f, 0]], vertices[faces[f, 1]], vertices[faces[f, 2]])
            d2 = (p[0] - x) ** 2 + (p[1] - y) ** 2 + (p[2] - z) ** 2
            if d2 < best:
                best = d2
        out[qi] = np.sqrt(best)
    return out


def _closest_on_triangles_numpy(p, a, b, c):
    """Vectorized closest point from one query to many triangles."""
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 1.0 / (va + vb + vc)
        out = a + ab * (vb * denom)[:, None] + ac * (vc * denom)[:, None]
        e_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        out = np.where(e_bc[:, None], b + t[:, None] * (c - b), out)
        e_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        t = d2 / (d2 - d6)
        out = np.where(e_ac[:, None], a + t[:, None] * ac, out)
        out = np.where(((d6 >= 0) & (d5 <= d6))[:, None], c, out)
        e_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        t = d1 / (d1 - d3)
        out = np.where(e_ab[:, None], a + t[:, None] * ab, out)
        out = np.where(((d3 >= 0) & (d4 <= d3))[:, None], b, out)
        out = np.where(((d1 <= 0) & (d2 <= 0))[:, None], a, out)
    return out


def _surface_distance_numpy(queries, vertices, faces, centers, radii, lo, hi, best0):
    a, b, c = vertices[faces[:, 0]], vertices[faces[:, 1]], vertices[faces[:, 2]]
    out = np.empty(len(queries))
    for qi, p in enumerate(queries):
        sl = slice(lo[qi], hi[qi])
        d2 = ((_closest_on_triangles_numpy(p, a[sl], b[sl], c[sl]) - p) ** 2).sum(axis=1)
        out[qi] = np.sqrt(min(best0[qi], d2.min()))
    return out


_surface_distance = pick(_surface_distance_loops, _surface_distance_numpy)


def point_surface_distance(points, mesh: TriangleMesh):
    """Exact Euclidean distance from each point to the triangle surface."""
    from .kdtree import KdTree

    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    v, f = mesh.vertices, mesh.faces
    if len(f) == 0:
        raise GeometryError("surface has no faces")
    tri = v[f]
    centers = tri.mean(axis=1)
    radii = np.linalg.norm(tri - centers[:, None, :], axis=2).max(axis=1)
    # upper bound from the triangle with the nearest center, then only faces
    # whose center x lies within bound + max radius can do better
    seed, _ = KdTree(centers).query(pts)
    near = tri[seed]
    best0 = ((_closest_on_triangles_numpy(pts, near[:, 0], near[:, 1], near[:, 2]) - pts) ** 2).sum(axis=1)
    order = np.argsort(centers[:, 0], kind="stable")
    cx = centers[order, 0]
    reach = np.sqrt(best0) + radii.max()
    lo = np.searchsorted(cx, pts[:, 0] - reach, side="left")
    hi = np.searchsorted(cx, pts[:, 0] + reach, side="right")
    return _surface_distance(
        pts, np.ascontiguousarray(v), np.ascontiguousarray(f[order]),
        np.ascontiguousarray(centers[order]), np.ascontiguousarray(radii[order]), lo, hi, best0,
    )


# ---------------------------------------------------------------------------
# image-grid projection


def grid_project(scan: RangeScan, queries):
    """Nearest scan point by projecting each query onto the depth-image grid.

    Returns ``(indices, distances)``; index -1 marks queries behind the
    camera, outside the image, or whose 3x3 neighborhood has no valid depth.
    When the center pixel is invalid the nearest valid neighbor (3-D
    distance, ties to the lower point index) is used.
    """
    if scan.grid is None or scan.intrinsics is None:
        raise GeometryError("grid projection needs a scan grid and intrinsics")
    q = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    grid = scan.grid
    h, w = grid.shape
    idx = np.full(len(q), -1, np.int64)
    dist = np.full(len(q), np.inf)
    front = q[:, 2] > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u, v = scan.intrinsics.project(q)
    u = np.where(front, np.floor(u + 0.5), -1).astype(np.int64)
    v = np.where(front, np.floor(v + 0.5), -1).astype(np.int64)
    inside = front & (u >= 0) & (u < w) & (v >= 0) & (v < h)
    center = np.full(len(q), -1, np.int64)
    center[inside] = grid[v[inside], u[inside]]
    hit = center >= 0
    idx[hit] = center[hit]
    dist[hit] = np.linalg.norm(q[hit] - scan.points[center[hit]], axis=1)
    holes = np.flatnonzero(inside & ~hit)
    if len(holes):
        best_d = np.full(len(holes), np.inf)
        best_i = np.full(len(holes), -1, np.int64)
        for dv in (-1, 0, 1):
            for du in (-1, 0, 1):
                uu = u[holes] + du
                vv = v[holes] + dv
                ok = (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h)
                cand = np.full(len(holes), -1, np.int64)
                cand[ok] = grid[vv[ok], uu[ok]]
                ok = cand >= 0
                d = np.full(len(holes), np.inf)
                d[ok] = np.linalg.norm(q[holes[ok]] - scan.points[cand[ok]], axis=1)
                better = ok & ((d < best_d) | ((d == best_d) & (cand < best_i)))
                best_d[better] = d[better]
                best_i[better] = cand[better]
        idx[holes] = best_i
        dist[holes] = np.where(best_i >= 0, best_d, np.inf)
    return idx, dist


def grid_project_nearest(scan: RangeScan, query):
    """Single-query form of :func:`grid_project`; raises instead of returning -1."""
    from .errors import BehindCamera, NoValidPixel

    q = np.asarray(query, dtype=np.float64).reshape(3)
    if q[2] <= 0:
        raise BehindCamera(f"query {q.tolist()} has non-positive depth")
    idx, dist = grid_project(scan, q[None])
    if idx[0] < 0:
        raise NoValidPixel(f"no valid depth near the projection of {q.tolist()}")
    return int(idx[0]), float(dist[0])
