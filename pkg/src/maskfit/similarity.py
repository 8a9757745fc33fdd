"""Landmark-based similarity alignment (scale, rotation, translation).

The scale is initialized from pairwise landmark distances, then rotation +
translation and scale are refined by alternating exact partial minimizers of
``sum ||a R p_i + t - q_i||^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfiguration, DegenerateScale, GeometryError


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not self.scale > 0:
            raise DegenerateScale(f"scale must be positive, got {self.scale}")
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9 or np.linalg.det(r) <= 0:
            raise GeometryError("rotation must be orthonormal with det +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points):
        p = np.asarray(points, dtype=np.float64)
        return self.scale * p @ self.rotation.T + self.translation

    def apply_vectors(self, vectors):
        """Rotate direction vectors (normals); scale does not apply."""
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T

    def to_dict(self):
        return {
            "scale": self.scale,
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["scale"], d["rotation"], d["translation"])


@dataclass
class AlignmentReport:
    iterations: int = 0
    rms: float = float("nan")
    residuals: list = field(default_factory=list)

    def to_dict(self):
        return {"iterations": self.iterations, "rms": self.rms, "residuals": list(self.residuals)}


def _arrays(pairs):
    if hasattr(pairs, "template"):
        return np.asarray(pairs.template, float), np.asarray(pairs.scan, float)
    src, dst = pairs
    return np.asarray(src, float).reshape(-1, 3), np.asarray(dst, float).reshape(-1, 3)


def _pairwise(p):
    i, j = np.triu_indices(len(p), k=1)
    return np.linalg.norm(p[i] - p[j], axis=1)


def estimate_initial_scale(pairs):
    """Least-squares scale matching pairwise landmark distances."""
    src, dst = _arrays(pairs)
    if len(src) < 2:
        raise DegenerateScale("need at least two landmark pairs to estimate scale")
    dt = _pairwise(src)
    ds = _pairwise(dst)
    den = float(dt @ dt)
    num = float(dt @ ds)
    if den < 1e-12 or num <= 0:
        raise DegenerateScale("landmark distances are degenerate")
    return num / den


def fit_rigid_given_scale(pairs, scale):
    """Orthogonal Procrustes rotation and the matching translation."""
    src, dst = _arrays(pairs)
    if len(src) < 3:
        raise DegenerateConfiguration("need at least three landmark pairs")
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    a = src - cs
    b = dst - cd
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0 or sv[1] <= 1e-9 * sv[0]:
        raise DegenerateConfiguration("template landmarks are collinear")
    u, _, vt = np.linalg.svd(b.T @ a)
    d = np.sign(np.linalg.det(u @ vt))
    if d == 0:
        d = 1.0
    r = u @ np.diag([1.0, 1.0, d]) @ vt
    t = cd - scale * r @ cs
    return r, t


def fit_scale_given_rigid(pairs, rotation, translation):
    """Closed-form scale minimizing the residual with R and t held fixed."""
    src, dst = _arrays(pairs)
    if len(src) < 1:
        raise DegenerateScale("need at least one landmark pair")
    rp = src @ np.asarray(rotation).T
    den = float(np.sum(rp * rp))
    if den < 1e-12:
        raise DegenerateScale("rotated template landmarks have zero norm")
    alpha = float(np.sum(rp * (dst - translation))) / den
    if alpha <= 0:
        raise DegenerateScale(f"scale update is non-positive ({alpha:.3g})")
    return alpha


def _rms(src, dst, scale, r, t):
    res = scale * src @ r.T + t - dst
    return float(np.sqrt(np.mean(np.sum(res * res, axis=1))))


def align_similarity(pairs, tol=1e-8, max_iter=50):
    """Alternate (R, t) and scale steps until the RMS residual settles."""
    src, dst = _arrays(pairs)
    alpha = estimate_initial_scale((src, dst))
    report = AlignmentReport()
    prev = np.inf
    r, t = np.eye(3), np.zeros(3)
    for it in range(1, max_iter + 1):
        r, t = fit_rigid_given_scale((src, dst), alpha)
        alpha = fit_scale_given_rigid((src, dst), r, t)
        rms = _rms(src, dst, alpha, r, t)
        report.residuals.append(rms)
        report.iterations = it
        if abs(prev - rms) < tol:
            break
        prev = rms
    report.rms = report.residuals[-1]
    return SimilarityTransform(alpha, r, t), report
