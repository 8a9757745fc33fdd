"""``maskfit`` command line: align, register, transfer, design, evaluate, pipeline.

Each stage reads its inputs from files and writes its outputs into ``--out``.
Staged commands default their upstream inputs to the files a previous stage
left in the same output directory, so ``pipeline`` is exactly the stages run
back to back.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, formats
from .contact import ContactParams, compare_reports, simulate_press
from .correspondence import PruneConfig
from .errors import GeometryError, MaskfitError
from .fixtures import ASSETS_DIR, LANDMARKS_PATH, SCAN_PATH
from .geometry import TriangleMesh
from .landmarks import LandmarkSet, filter_invalid_depth, pair_landmarks
from .nonrigid import EnergyWeights, ScheduleConfig, register_nonrigid, require_converged
from .nurbs import fit_interface, tessellate, transform_surface
from .region import transfer_region, validate_region_on_scan
from .similarity import align_similarity

log = logging.getLogger("maskfit")

TRANSFORM = "transform.json"
REGISTERED = "registered.obj"
REG_LOG = "registration_log.tsv"
DISPLACEMENT = "displacement.npy"
WARPED = "warped_region.json"
INTERFACE = "interface.json"
INTERFACE_MESH = "interface.obj"
GENERIC_MESH = "generic_interface.obj"
PRESSURE_P = "pressure_personalized.txt"
PRESSURE_G = "pressure_generic.txt"
COMPARISON = "comparison.json"


@dataclass
class PipelineConfig:
    scan: Path
    landmarks: Path
    assets: Path
    out: Path
    weights: EnergyWeights
    schedule: ScheduleConfig
    prune: PruneConfig
    contact: ContactParams
    res_u: int
    res_v: int
    region_tol: float
    face: str

    @classmethod
    def from_args(cls, a):
        for p in (a.scan, a.landmarks, a.assets):
            if not Path(p).exists():
                raise formats.ParseError("input not found", p)
        return cls(
            scan=Path(a.scan),
            landmarks=Path(a.landmarks),
            assets=Path(a.assets),
            out=Path(a.out),
            weights=EnergyWeights(a.w_p2point, a.w_p2plane, a.w_memb, a.w_ref),
            schedule=ScheduleConfig(step_threshold=a.step_threshold, max_iterations=a.max_iters),
            prune=PruneConfig(a.max_dist_mm, a.max_normal_deg),
            contact=ContactParams(
                approach_direction=tuple(a.approach) if a.approach else None,
                max_penetration=a.max_penetration,
                stiffness=a.stiffness,
                rim_band=a.rim_band,
            ),
            res_u=a.res_u,
            res_v=a.res_v,
            region_tol=a.region_tol,
            face=a.face,
        )


def _path(arg, cfg, default):
    return Path(arg) if arg else cfg.out / default


def _scan_landmark_pairs(cfg, bundle, scan):
    raw = formats.read_landmarks(cfg.landmarks)
    if isinstance(raw, LandmarkSet):
        scan_lms = raw
    else:
        scan_lms, dropped = filter_invalid_depth(raw, scan)
        if dropped:
            log.info("dropped %d landmark(s) on invalid depth: %s", len(dropped), ", ".join(dropped))
    return pair_landmarks(bundle.landmarks, scan_lms)


def cmd_align(cfg, args):
    bundle = formats.read_bundle(cfg.assets)
    scan = formats.read_range_scan(cfg.scan)
    pairs = _scan_landmark_pairs(cfg, bundle, scan)
    tf, report = align_similarity(pairs)
    log.info("align: scale %.6f, %d iterations, landmark rms %.4f mm", tf.scale, report.iterations, report.rms)
    formats.write_transform(cfg.out / TRANSFORM, tf, report)


def cmd_register(cfg, args):
    bundle = formats.read_bundle(cfg.assets)
    scan = formats.read_range_scan(cfg.scan)
    tf = formats.read_transform(_path(args.transform, cfg, TRANSFORM))
    pairs = _scan_landmark_pairs(cfg, bundle, scan).transformed(tf)
    aligned = TriangleMesh(tf.apply(bundle.template.vertices), bundle.template.faces)
    res = register_nonrigid(
        aligned, scan, pairs, cfg.weights, cfg.schedule, cfg.prune,
        on_iteration=lambda r: log.info("register: %s", r.line()),
    )
    require_converged(res)
    if not res.converged:
        log.info("register: stopped at the iteration cap (%d)", res.iterations)
    formats.write_mesh(cfg.out / REGISTERED, res.mesh)
    (cfg.out / REG_LOG).write_text(res.log_text(), encoding="utf-8")
    np.save(cfg.out / DISPLACEMENT, res.displacement)


def cmd_transfer(cfg, args):
    bundle = formats.read_bundle(cfg.assets)
    registered = formats.read_mesh(_path(args.registered, cfg, REGISTERED))
    if registered.n_vertices != bundle.template.n_vertices:
        raise GeometryError("registered mesh does not match the template vertex count")
    warped = transfer_region(bundle.region, registered)
    scan = formats.read_range_scan(cfg.scan)
    chk = validate_region_on_scan(warped, scan, cfg.region_tol)
    if not chk.passed:
        log.warning(
            "transfer: %d warped point(s) farther than %.3g mm from the scan (first: %s)",
            len(chk.failures), cfg.region_tol, chk.failures[:5].tolist(),
        )
    formats.write_warped(cfg.out / WARPED, warped, chk.distances)


def cmd_design(cfg, args):
    bundle = formats.read_bundle(cfg.assets)
    tf = formats.read_transform(_path(args.transform, cfg, TRANSFORM))
    warped = formats.read_warped(_path(args.warped, cfg, WARPED))
    placed = transform_surface(bundle.interface, tf)
    fitted = fit_interface(placed, bundle.control_map, warped)
    formats.write_nurbs(cfg.out / INTERFACE, fitted, bundle.control_map)
    formats.write_mesh(cfg.out / INTERFACE_MESH, tessellate(fitted, cfg.res_u, cfg.res_v))
    formats.write_mesh(cfg.out / GENERIC_MESH, tessellate(placed, cfg.res_u, cfg.res_v))


def _face_mesh(cfg, args):
    if cfg.face == "registered":
        return formats.read_mesh(_path(args.registered, cfg, REGISTERED))
    return formats.read_range_scan(cfg.scan).mesh()


def cmd_evaluate(cfg, args):
    face = _face_mesh(cfg, args)
    warped = formats.read_warped(_path(args.warped, cfg, WARPED))
    personalized = formats.read_mesh(_path(args.interface_mesh, cfg, INTERFACE_MESH))
    generic = formats.read_mesh(_path(args.generic_mesh, cfg, GENERIC_MESH))
    rp = simulate_press(face, personalized, cfg.contact, rim_points=warped.points)
    rg = simulate_press(face, generic, cfg.contact, rim_points=warped.points)
    formats.write_pressure_report(cfg.out / PRESSURE_P, rp, "personalized")
    formats.write_pressure_report(cfg.out / PRESSURE_G, rg, "generic")
    if rp.no_contact or rg.no_contact:
        log.warning("evaluate: no contact (personalized=%s, generic=%s)", rp.no_contact, rg.no_contact)
        doc = {"no_contact": True, "cv_personalized": None, "cv_generic": None, "ratio": None, "success": False}
    else:
        doc = {"no_contact": False, **compare_reports(rp, rg).to_dict()}
    (cfg.out / COMPARISON).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    log.info("evaluate: %s", json.dumps(doc))


def cmd_pipeline(cfg, args):
    for stage in (cmd_align, cmd_register, cmd_transfer, cmd_design, cmd_evaluate):
        stage(cfg, args)


COMMANDS = {
    "align": (cmd_align, "similarity-align the template to the scan landmarks"),
    "register": (cmd_register, "non-rigidly register the aligned template to the scan"),
    "transfer": (cmd_transfer, "carry the contact region onto the registered face"),
    "design": (cmd_design, "fit the interface NURBS to the warped region and tessellate"),
    "evaluate": (cmd_evaluate, "press fitted and generic interfaces onto the face and compare"),
    "pipeline": (cmd_pipeline, "run align, register, transfer, design, evaluate"),
}


def _add_common(p):
    io = p.add_argument_group("inputs and outputs")
    io.add_argument("--scan", default=str(SCAN_PATH), help="16-bit PGM depth image (with sidecar intrinsics) or PLY cloud")
    io.add_argument("--landmarks", default=str(LANDMARKS_PATH), help="scan landmark JSON (pixel or 3-D)")
    io.add_argument("--assets", default=str(ASSETS_DIR), help="asset bundle directory")
    io.add_argument("--out", default="maskfit_out", help="output directory (default: %(default)s)")
    io.add_argument("--transform", help=f"similarity transform JSON (default: OUT/{TRANSFORM})")
    io.add_argument("--registered", help=f"registered template mesh (default: OUT/{REGISTERED})")
    io.add_argument("--warped", help=f"warped region JSON (default: OUT/{WARPED})")
    io.add_argument("--interface-mesh", help=f"fitted interface mesh (default: OUT/{INTERFACE_MESH})")
    io.add_argument("--generic-mesh", help=f"generic interface mesh (default: OUT/{GENERIC_MESH})")

    r = p.add_argument_group("registration")
    d = EnergyWeights()
    r.add_argument("--w-p2point", type=float, default=d.p2point)
    r.add_argument("--w-p2plane", type=float, default=d.p2plane)
    r.add_argument("--w-memb", type=float, default=d.memb)
    r.add_argument("--w-ref", type=float, default=d.ref)
    s = ScheduleConfig()
    r.add_argument("--step-threshold", type=float, default=s.step_threshold, help="RMS step (mm) that triggers weight decay")
    r.add_argument("--max-iters", type=int, default=s.max_iterations)
    pc = PruneConfig()
    r.add_argument("--max-dist-mm", type=float, default=pc.max_distance)
    r.add_argument("--max-normal-deg", type=float, default=pc.max_normal_angle)

    g = p.add_argument_group("region, design and evaluation")
    g.add_argument("--region-tol", type=float, default=2.0, help="warped-region to scan distance gate (mm)")
    g.add_argument("--res-u", type=int, default=256, help="interface tessellation samples along u")
    g.add_argument("--res-v", type=int, default=24, help="interface tessellation samples along v")
    cp = ContactParams()
    g.add_argument("--max-penetration", type=float, default=cp.max_penetration)
    g.add_argument("--stiffness", type=float, default=cp.stiffness)
    g.add_argument("--rim-band", type=float, default=cp.rim_band)
    g.add_argument("--approach", type=float, nargs=3, metavar=("X", "Y", "Z"), help="press direction (default: inferred)")
    g.add_argument("--face", choices=("scan", "registered"), default="scan", help="face surface to press onto")


def build_parser():
    ap = argparse.ArgumentParser(prog="maskfit", description="Personalized mask interface design from a facial range scan.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("-q", "--quiet", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_) in COMMANDS.items():
        _add_common(sub.add_parser(name, help=help_, description=help_))
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose > 1 else logging.INFO)
    logging.basicConfig(level=level, format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = PipelineConfig.from_args(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command][0](cfg, args)
    except MaskfitError as exc:
        print(f"maskfit {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"maskfit {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
