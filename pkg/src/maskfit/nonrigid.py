"""Non-rigid template registration.

The unknown is a per-vertex displacement field ``d`` (total, from the rest
pose). Each outer iteration matches the deformed template to the scan, prunes
bad pairs, then minimizes the quadratic energy

    a_p2point * sum_pairs ||v_i + d_i - c_i||^2
  + a_p2plane * sum_pairs (n_i . (v_i + d_i - c_i))^2
  + a_memb    * sum_i sum_{j in N(i)} ||w_ij (d_i - d_j)||^2
  + a_ref     * sum_landmarks ||r_k + d_{v(k)} - s_k||^2

exactly by a sparse direct solve of its normal equations. When the RMS
change of ``d`` between iterations drops below a threshold, the membrane and
landmark weights are halved (down to floors). The loop stops once a small
step occurs at the floors or directly after a decay, or at the iteration cap.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
import scipy.sparse.linalg as spla
from scipy.sparse.linalg import splu

from .correspondence import Correspondences, PruneConfig, match_closest, prune_pairs
from .errors import AllPairsPruned, ConvergenceError, GeometryError, SingularSystem
from .geometry import CotangentWeights, RangeScan, TriangleMesh, cotangent_weights, vertex_normals

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnergyWeights:
    p2point: float = 0.1
    p2plane: float = 1.0
    memb: float = 100.0
    ref: float = 10.0

    def __post_init__(self):
        vals = (self.p2point, self.p2plane, self.memb, self.ref)
        if any(not np.isfinite(x) or x < 0 for x in vals):
            raise GeometryError(f"energy weights must be finite and non-negative: {vals}")
        if not (self.p2point > 0 or self.p2plane > 0 or self.ref > 0):
            raise GeometryError("at least one data weight (p2point, p2plane, ref) must be positive")

    def as_tuple(self):
        return (self.p2point, self.p2plane, self.memb, self.ref)


@dataclass(frozen=True)
class ScheduleConfig:
    step_threshold: float = 1e-2
    decay: float = 0.5
    max_iterations: int = 30
    min_memb: float = 1e-3
    min_ref: float = 1e-3

    def __post_init__(self):
        if not self.step_threshold > 0:
            raise GeometryError("step_threshold must be positive")
        if not 0 < self.decay < 1:
            raise GeometryError("decay must lie in (0, 1)")
        if self.max_iterations < 0:
            raise GeometryError("max_iterations must be non-negative")


@dataclass
class IterationRecord:
    iteration: int
    pairs: int
    energy: float
    step: float
    weights: EnergyWeights
    decayed: bool = False

    def line(self):
        w = self.weights
        return (
            f"{self.iteration}\t{self.pairs}\t{self.energy:.9e}\t{self.step:.9e}\t"
            f"{w.p2point:.9g}\t{w.p2plane:.9g}\t{w.memb:.9g}\t{w.ref:.9g}\t{int(self.decayed)}"
        )


LOG_HEADER = "iteration\tpairs\tenergy\tstep_rms_mm\tw_p2point\tw_p2plane\tw_memb\tw_ref\tdecayed"


@dataclass
class RegistrationResult:
    rest: TriangleMesh
    mesh: TriangleMesh
    displacement: np.ndarray
    log: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self):
        return len(self.log)

    def log_text(self):
        return "\n".join([LOG_HEADER] + [r.line() for r in self.log]) + "\n"


# ---------------------------------------------------------------------------
# problem data


@dataclass(frozen=True, eq=False)
class _Terms:
    rest: np.ndarray  # (n, 3)
    pv: np.ndarray  # pair template vertex (p,)
    pc: np.ndarray  # pair target point (p, 3)
    pn: np.ndarray  # pair target normal (p, 3)
    lv: np.ndarray  # landmark template vertex (k,)
    lr: np.ndarray  # template landmark position (k, 3)
    ls: np.ndarray  # scan landmark position (k, 3)
    edges: np.ndarray  # (E, 2)
    w: np.ndarray  # (E,)


def _terms(template, scan, pairs, landmarks, cot):
    rest = np.asarray(template.vertices, dtype=np.float64)
    if cot is None:
        cot = cotangent_weights(template)
    if pairs is None or len(pairs) == 0:
        pv = np.zeros(0, np.int64)
        pc = np.zeros((0, 3))
        pn = np.zeros((0, 3))
    else:
        pv = np.asarray(pairs.template_vertex, np.int64)
        pc = np.asarray(scan.points)[pairs.scan_point]
        pn = np.asarray(scan.normals)[pairs.scan_point]
    if landmarks is None or len(landmarks) == 0:
        lv = np.zeros(0, np.int64)
        lr = np.zeros((0, 3))
        ls = np.zeros((0, 3))
    else:
        if landmarks.template_vertex is None:
            raise GeometryError("landmark pairs need template_vertex bindings")
        lv = np.asarray(landmarks.template_vertex, np.int64)
        lr = np.asarray(landmarks.template, np.float64)
        ls = np.asarray(landmarks.scan, np.float64)
        if len(lv) and (lv.min() < 0 or lv.max() >= len(rest)):
            raise GeometryError("landmark template_vertex out of range")
    return _Terms(rest, pv, pc, pn, lv, lr, ls, np.asarray(cot.edges), np.asarray(cot.weights))


def energy_terms(d, template, scan, pairs, landmarks, weights, cot=None):
    """The four unweighted energy terms ``(p2point, p2plane, memb, ref)``."""
    t = _terms(template, scan, pairs, landmarks, cot)
    d = np.asarray(d, dtype=np.float64).reshape(-1, 3)
    r = t.rest[t.pv] + d[t.pv] - t.pc
    e_point = float(np.sum(r * r))
    e_plane = float(np.sum(np.einsum("ij,ij->i", t.pn, r) ** 2))
    diff = d[t.edges[:, 0]] - d[t.edges[:, 1]]
    # each undirected edge appears once from each endpoint's neighborhood
    e_memb = 2.0 * float(np.sum((t.w[:, None] * diff) ** 2))
    lr = t.lr + d[t.lv] - t.ls
    e_ref = float(np.sum(lr * lr))
    return e_point, e_plane, e_memb, e_ref


def energy_value(d, template, scan, pairs, landmarks, weights: EnergyWeights, cot=None):
    terms = energy_terms(d, template, scan, pairs, landmarks, weights, cot)
    return float(np.dot(weights.as_tuple(), terms))


def energy_gradient(d, template, scan, pairs, landmarks, weights: EnergyWeights, cot=None):
    """Analytic gradient of :func:`energy_value` with respect to ``d``, shape (n, 3)."""
    t = _terms(template, scan, pairs, landmarks, cot)
    d = np.asarray(d, dtype=np.float64).reshape(-1, 3)
    g = np.zeros_like(d)
    r = t.rest[t.pv] + d[t.pv] - t.pc
    np.add.at(g, t.pv, 2.0 * weights.p2point * r)
    proj = np.einsum("ij,ij->i", t.pn, r)
    np.add.at(g, t.pv, 2.0 * weights.p2plane * proj[:, None] * t.pn)
    diff = d[t.edges[:, 0]] - d[t.edges[:, 1]]
    ge = 4.0 * weights.memb * (t.w * t.w)[:, None] * diff
    np.add.at(g, t.edges[:, 0], ge)
    np.add.at(g, t.edges[:, 1], -ge)
    lr = t.lr + d[t.lv] - t.ls
    np.add.at(g, t.lv, 2.0 * weights.ref * lr)
    return g


def normal_equations(template, scan, pairs, landmarks, weights: EnergyWeights, cot=None):
    """Sparse ``A`` (3n x 3n, SPD when well posed) and ``b`` with E = d'Ad - 2b'd + const.

    Unknowns are interleaved: component k of vertex i is row 3i + k.
    """
    t = _terms(template, scan, pairs, landmarks, cot)
    n = len(t.rest)
    blocks = np.zeros((n, 3, 3))
    rhs = np.zeros((n, 3))
    eye = np.eye(3)

    delta = t.pc - t.rest[t.pv]
    np.add.at(blocks, t.pv, weights.p2point * eye)
    np.add.at(rhs, t.pv, weights.p2point * delta)
    nn = t.pn[:, :, None] * t.pn[:, None, :]
    np.add.at(blocks, t.pv, weights.p2plane * nn)
    np.add.at(rhs, t.pv, weights.p2plane * np.einsum("ij,ij->i", t.pn, delta)[:, None] * t.pn)

    np.add.at(blocks, t.lv, weights.ref * eye)
    np.add.at(rhs, t.lv, weights.ref * (t.ls - t.lr))

    c = 2.0 * weights.memb * t.w * t.w
    ei, ej = t.edges[:, 0], t.edges[:, 1]
    np.add.at(blocks, ei, c[:, None, None] * eye)
    np.add.at(blocks, ej, c[:, None, None] * eye)

    base = 3 * np.arange(n)
    rows = [np.repeat(base, 9) + np.tile(np.repeat(np.arange(3), 3), n)]
    cols = [np.repeat(base, 9) + np.tile(np.tile(np.arange(3), 3), n)]
    vals = [blocks.reshape(-1)]
    for k in range(3):
        rows += [3 * ei + k, 3 * ej + k]
        cols += [3 * ej + k, 3 * ei + k]
        vals += [-c, -c]
    a = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(3 * n, 3 * n)
    ).tocsc()
    a.sum_duplicates()
    a.eliminate_zeros()
    return a, rhs.reshape(-1)


def _check_components(t, weights, n):
    """Every membrane-connected component needs at least one data term."""
    c = 2.0 * weights.memb * t.w * t.w
    live = c > 0
    graph = sp.coo_matrix(
        (np.ones(int(live.sum())), (t.edges[live, 0], t.edges[live, 1])), shape=(n, n)
    )
    ncomp, label = connected_components(graph, directed=False)
    anchored = np.zeros(ncomp, dtype=bool)
    if weights.p2point > 0 or weights.p2plane > 0:
        anchored[label[t.pv]] = True
    if weights.ref > 0:
        anchored[label[t.lv]] = True
    if not anchored.all():
        bad = np.flatnonzero(~anchored)
        first = int(np.flatnonzero(label == bad[0])[0])
        raise SingularSystem(
            f"{len(bad)} mesh component(s) carry no data term (e.g. the one containing vertex {first})"
        )


def solve_displacement(template, scan, pairs, landmarks, weights: EnergyWeights, cot=None, rtol=1e-10):
    """Exact minimizer of the quadratic energy for fixed correspondences."""
    t = _terms(template, scan, pairs, landmarks, cot)
    n = len(t.rest)
    if len(t.pv) == 0 and len(t.lv) == 0:
        raise SingularSystem("no correspondences and no landmarks")
    _check_components(t, weights, n)
    if cot is None:
        cot = CotangentWeights(t.edges, t.w, n)
    a, b = normal_equations(template, scan, pairs, landmarks, weights, cot)
    try:
        lu = splu(a, permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise SingularSystem(f"normal matrix is singular: {exc}") from exc
    x = lu.solve(b)
    # normwise backward error, so huge membrane weights do not mask a good solve
    a_norm = spla.norm(a, 1)

    def residual(x):
        den = a_norm * np.abs(x).sum() + np.abs(b).sum()
        return np.abs(a @ x - b).sum() / max(den, np.finfo(float).tiny)

    res = residual(x)
    for _ in range(3):
        if res < rtol:
            break
        x = x + lu.solve(b - a @ x)
        res = residual(x)
    if not np.isfinite(x).all() or res >= rtol:
        raise SingularSystem(f"linear solve did not reach relative residual {rtol:g} (got {res:.3g})")
    return x.reshape(n, 3)


# ---------------------------------------------------------------------------
# outer loop


def _decay(w: EnergyWeights, s: ScheduleConfig):
    return replace(w, memb=max(w.memb * s.decay, s.min_memb), ref=max(w.ref * s.decay, s.min_ref))


def _at_floor(w: EnergyWeights, s: ScheduleConfig):
    return w.memb <= s.min_memb and w.ref <= s.min_ref


def register_nonrigid(
    template: TriangleMesh,
    scan: RangeScan,
    landmarks=None,
    weights: EnergyWeights = EnergyWeights(),
    schedule: ScheduleConfig = ScheduleConfig(),
    prune: PruneConfig = PruneConfig(),
    on_iteration=None,
) -> RegistrationResult:
    """Deform ``template`` (already similarity-aligned) onto ``scan``."""
    cot = cotangent_weights(template)
    rest = template.vertices
    d = np.zeros_like(rest)
    w = weights
    records = []
    converged = False
    scan_normals = scan.normals
    for it in range(1, schedule.max_iterations + 1):
        current = rest + d
        normals, _ = vertex_normals(current, template.faces, strict=False)
        raw = match_closest(current, scan)
        try:
            if len(raw) == 0:
                raise AllPairsPruned("no template vertex found a scan match")
            pairs = prune_pairs(raw, normals, scan_normals, prune)
        except AllPairsPruned as exc:
            raise AllPairsPruned(str(exc), iteration=it) from exc
        d_new = solve_displacement(template, scan, pairs, landmarks, w, cot)
        step = float(np.sqrt(np.mean(np.sum((d_new - d) ** 2, axis=1))))
        energy = energy_value(d_new, template, scan, pairs, landmarks, w, cot)
        rec = IterationRecord(it, len(pairs), energy, step, w)
        records.append(rec)
        d = d_new
        stop = False
        if step < schedule.step_threshold:
            # a decay that moved nothing means the weights no longer matter
            if _at_floor(w, schedule) or (records[-2].decayed if len(records) > 1 else False):
                converged = stop = True
            else:
                w = _decay(w, schedule)
                rec.decayed = True
        log.debug(rec.line())
        if on_iteration is not None:
            on_iteration(rec)
        if stop:
            break
    deformed = TriangleMesh(rest + d, template.faces)
    return RegistrationResult(rest=template, mesh=deformed, displacement=d, log=records, converged=converged)


def require_converged(result: RegistrationResult):
    """Reject a run that never iterated; hitting the iteration cap is accepted."""
    if not result.log:
        raise ConvergenceError("registration ran zero iterations")
    return result
