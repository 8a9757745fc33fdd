"""Closest-point matching from template vertices to the scan, and pruning."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllPairsPruned, GeometryError
from .geometry import RangeScan, grid_project


@dataclass(frozen=True)
class PruneConfig:
    max_distance: float = 5.0
    max_normal_angle: float = 25.0

    def __post_init__(self):
        if not (self.max_distance > 0 and self.max_normal_angle > 0):
            raise GeometryError("prune thresholds must be strictly positive")


@dataclass(frozen=True, eq=False)
class Correspondences:
    """Template-vertex to scan-point pairs, ordered by template vertex.

    ``normal_angle`` (degrees) is NaN until :func:`prune_pairs` fills it.
    """

    template_vertex: np.ndarray
    scan_point: np.ndarray
    distance: np.ndarray
    normal_angle: np.ndarray

    def __len__(self):
        return len(self.template_vertex)

    def subset(self, mask):
        return Correspondences(
            self.template_vertex[mask], self.scan_point[mask], self.distance[mask], self.normal_angle[mask]
        )

    @classmethod
    def from_arrays(cls, template_vertex, scan_point, distance=None, normal_angle=None):
        tv = np.asarray(template_vertex, dtype=np.int64)
        sp = np.asarray(scan_point, dtype=np.int64)
        dist = np.zeros(len(tv)) if distance is None else np.asarray(distance, dtype=np.float64)
        ang = np.full(len(tv), np.nan) if normal_angle is None else np.asarray(normal_angle, dtype=np.float64)
        return cls(tv, sp, dist, ang)


def match_closest(vertices, scan: RangeScan) -> Correspondences:
    """One candidate scan point per template vertex.

    Uses image-grid projection when the scan has a grid, exact KD-tree
    search otherwise. Vertices that project to no valid pixel get no pair.
    """
    v = np.asarray(getattr(vertices, "vertices", vertices), dtype=np.float64)
    if scan.has_grid:
        idx, dist = grid_project(scan, v)
    else:
        idx, dist = scan.kdtree.query(v)
    keep = idx >= 0
    tv = np.flatnonzero(keep)
    return Correspondences.from_arrays(tv, idx[keep], dist[keep])


def normal_angles(a, b):
    """Angle in degrees between paired unit vectors."""
    dot = np.clip(np.einsum("ij,ij->i", a, b), -1.0, 1.0)
    return np.degrees(np.arccos(dot))


def prune_pairs(pairs: Correspondences, template_normals, scan_normals, cfg: PruneConfig = PruneConfig()):
    """Keep pairs with distance <= max_distance and normal angle <= max_normal_angle."""
    if len(pairs) == 0:
        raise AllPairsPruned("no correspondences to prune")
    tn = np.asarray(template_normals)[pairs.template_vertex]
    sn = np.asarray(scan_normals)[pairs.scan_point]
    dot = np.clip(np.einsum("ij,ij->i", tn, sn), -1.0, 1.0)
    ang = np.degrees(np.arccos(dot))
    # compared in cosine space so an angle of exactly max_normal_angle is kept
    keep = (pairs.distance <= cfg.max_distance) & (dot >= np.cos(np.radians(cfg.max_normal_angle)))
    if not keep.any():
        raise AllPairsPruned("every correspondence exceeded the distance or normal-angle threshold")
    out = Correspondences(pairs.template_vertex, pairs.scan_point, pairs.distance, ang)
    return out.subset(keep)
