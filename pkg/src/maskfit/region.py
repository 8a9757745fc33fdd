"""Contact region on the template and its transfer onto the registered face."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, InvalidRegionIndex


@dataclass(frozen=True, eq=False)
class ContactRegion:
    """Ordered template vertex indices marking where the mask touches the face.

    The list may hold several loops back to back (a band of concentric
    rims); ``rings`` gives the length of each. With ``closed`` every loop
    must be cyclically edge-connected on the template.
    """

    vertex_indices: np.ndarray
    closed: bool = True
    rings: tuple | None = None

    def __post_init__(self):
        idx = np.array(self.vertex_indices, dtype=np.int64).reshape(-1)
        if len(idx) == 0:
            raise GeometryError("contact region is empty")
        if len(np.unique(idx)) != len(idx):
            raise GeometryError("contact region repeats a vertex")
        if idx.min() < 0:
            raise InvalidRegionIndex("negative contact region index")
        rings = (len(idx),) if self.rings is None else tuple(int(r) for r in self.rings)
        if sum(rings) != len(idx) or min(rings) < 1:
            raise GeometryError(f"ring lengths {rings} do not partition {len(idx)} indices")
        idx.setflags(write=False)
        object.__setattr__(self, "vertex_indices", idx)
        object.__setattr__(self, "rings", rings)

    def __len__(self):
        return len(self.vertex_indices)

    def ring_slices(self):
        start = 0
        for r in self.rings:
            yield slice(start, start + r)
            start += r

    def check(self, mesh):
        """Validate indices (and loop connectivity when closed) against ``mesh``."""
        if self.vertex_indices.max() >= mesh.n_vertices:
            raise InvalidRegionIndex(
                f"region index {int(self.vertex_indices.max())} >= vertex count {mesh.n_vertices}"
            )
        if self.closed:
            edges = {tuple(e) for e in mesh.edges.tolist()}
            for sl in self.ring_slices():
                loop = self.vertex_indices[sl]
                for a, b in zip(loop, np.roll(loop, -1)):
                    key = (int(a), int(b)) if a < b else (int(b), int(a))
                    if len(loop) > 1 and key not in edges:
                        raise GeometryError(f"region loop is broken between vertices {a} and {b}")

    def __eq__(self, other):
        return (
            isinstance(other, ContactRegion)
            and np.array_equal(self.vertex_indices, other.vertex_indices)
            and self.closed == other.closed
            and self.rings == other.rings
        )


@dataclass(frozen=True, eq=False)
class WarpedRegion:
    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self):
        return len(self.points)


def transfer_region(region: ContactRegion, result) -> WarpedRegion:
    """Deformed positions of the region's template vertices, in region order."""
    mesh = getattr(result, "mesh", result)
    if region.vertex_indices.max() >= mesh.n_vertices:
        raise InvalidRegionIndex(
            f"region index {int(region.vertex_indices.max())} >= vertex count {mesh.n_vertices}"
        )
    return WarpedRegion(mesh.vertices[region.vertex_indices])


@dataclass
class RegionCheck:
    distances: np.ndarray
    tolerance: float
    passed: bool
    failures: np.ndarray


def validate_region_on_scan(warped: WarpedRegion, scan, tol=2.0) -> RegionCheck:
    """Nearest scan-point distance per warped point; fails if any exceeds ``tol``."""
    if len(warped) == 0:
        raise GeometryError("warped region is empty")
    _, dist = scan.kdtree.query(warped.points)
    bad = np.flatnonzero(dist > tol)
    return RegionCheck(distances=dist, tolerance=tol, passed=len(bad) == 0, failures=bad)
