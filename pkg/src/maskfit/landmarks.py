"""Named landmark sets, depth-validity filtering and name-keyed pairing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, TooFewLandmarks

MIN_LANDMARKS = 3


@dataclass(frozen=True, eq=False)
class LandmarkSet:
    """Ordered named 3-D feature points.

    ``template_vertex`` is set for template-side sets: the mesh vertex each
    landmark is bound to.
    """

    names: tuple
    positions: np.ndarray
    template_vertex: np.ndarray | None = None

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        seen = set()
        for n in names:
            if n in seen:
                raise GeometryError(f"duplicate landmark name {n!r}")
            seen.add(n)
        pos = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        if len(pos) != len(names):
            raise GeometryError("landmark names and positions differ in length")
        pos.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "positions", pos)
        if self.template_vertex is not None:
            tv = np.array(self.template_vertex, dtype=np.int64).reshape(-1)
            if len(tv) != len(names):
                raise GeometryError("template_vertex must have one entry per landmark")
            tv.setflags(write=False)
            object.__setattr__(self, "template_vertex", tv)

    def __len__(self):
        return len(self.names)

    def check_template(self, n_vertices):
        if self.template_vertex is None:
            raise GeometryError("template landmarks must carry template_vertex")
        if len(self.template_vertex) and (
            self.template_vertex.min() < 0 or self.template_vertex.max() >= n_vertices
        ):
            raise GeometryError("landmark template_vertex out of range")

    def transformed(self, transform):
        return LandmarkSet(self.names, transform.apply(self.positions), self.template_vertex)

    def __eq__(self, other):
        if not isinstance(other, LandmarkSet):
            return NotImplemented
        tv_eq = (self.template_vertex is None and other.template_vertex is None) or (
            self.template_vertex is not None
            and other.template_vertex is not None
            and np.array_equal(self.template_vertex, other.template_vertex)
        )
        return self.names == other.names and np.array_equal(self.positions, other.positions) and tv_eq


@dataclass(frozen=True)
class PixelLandmark:
    name: str
    u: float
    v: float


def filter_invalid_depth(raw, scan):
    """Lift pixel landmarks to 3-D scan points, dropping invalid-depth pixels.

    Returns ``(landmarks, dropped_names)``. Pixels are rounded to the nearest
    integer; a landmark survives only if that pixel holds a valid depth.
    """
    if scan.grid is None:
        raise GeometryError("depth filtering needs a scan grid")
    h, w = scan.grid.shape
    names, pos, dropped = [], [], []
    for lm in raw:
        u = int(np.floor(lm.u + 0.5))
        v = int(np.floor(lm.v + 0.5))
        idx = scan.grid[v, u] if (0 <= u < w and 0 <= v < h) else -1
        if idx < 0:
            dropped.append(lm.name)
        else:
            names.append(lm.name)
            pos.append(scan.points[idx])
    if len(names) < MIN_LANDMARKS:
        raise TooFewLandmarks(
            f"only {len(names)} landmarks have valid depth (need {MIN_LANDMARKS}); dropped: {', '.join(dropped)}"
        )
    return LandmarkSet(tuple(names), np.array(pos).reshape(-1, 3)), dropped


@dataclass(frozen=True, eq=False)
class LandmarkPairs:
    """Template/scan landmark correspondence, joined by name."""

    names: tuple
    template: np.ndarray  # (k, 3)
    scan: np.ndarray  # (k, 3)
    template_vertex: np.ndarray | None = None

    def __len__(self):
        return len(self.names)

    def transformed(self, transform):
        """Apply a similarity transform to the template side."""
        return LandmarkPairs(self.names, transform.apply(self.template), self.scan, self.template_vertex)


def pair_landmarks(template_set: LandmarkSet, scan_set: LandmarkSet) -> LandmarkPairs:
    """Inner join on name, keeping template order."""
    if len(template_set) == 0 or len(scan_set) == 0:
        raise TooFewLandmarks("empty landmark set")
    lookup = {n: i for i, n in enumerate(scan_set.names)}
    ti, si = [], []
    for i, n in enumerate(template_set.names):
        j = lookup.get(n)
        if j is not None:
            ti.append(i)
            si.append(j)
    if len(ti) < MIN_LANDMARKS:
        raise TooFewLandmarks(f"only {len(ti)} landmark names are shared (need {MIN_LANDMARKS})")
    ti = np.array(ti)
    tv = None if template_set.template_vertex is None else template_set.template_vertex[ti]
    return LandmarkPairs(
        names=tuple(template_set.names[i] for i in ti),
        template=template_set.positions[ti].copy(),
        scan=scan_set.positions[np.array(si)].copy(),
        template_vertex=tv,
    )
