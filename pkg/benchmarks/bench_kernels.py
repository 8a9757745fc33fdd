"""Time the compiled kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N]

Each backend runs in its own interpreter because the choice is made at
import time (``MASKFIT_NO_NUMBA=1``). Numba compile time is excluded by a
warm-up call on small inputs.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _cases():
    from maskfit.contact import interface_gaps
    from maskfit.geometry import Intrinsics, TriangleMesh, point_surface_distance
    from maskfit.kdtree import KdTree
    from maskfit.nurbs import NurbsSurface, clamped_uniform_knots, evaluate_points
    from maskfit.synthetic import polar_mesh, render_depth

    r = np.random.default_rng(0)
    cloud = r.normal(0, 30, (50_000, 3))
    queries = r.normal(0, 30, (20_000, 3))
    face = polar_mesh(60)[0]
    plate = TriangleMesh(face.vertices * [1.05, 1.05, 0] + [0, 0, 40.0], face.faces)
    cam = TriangleMesh(face.vertices * [1, 1, -1] + [0, 0, 400.0], face.faces)
    k = Intrinsics(600.0, 600.0, 160.0, 120.0)
    surf = NurbsSurface(
        3, 3, clamped_uniform_knots(32, 3), clamped_uniform_knots(8, 3),
        r.normal(0, 10, (32, 8, 3)), np.ones((32, 8)),
    )
    us, vs = r.uniform(0, 1, 20_000), r.uniform(0, 1, 20_000)
    probe = r.normal(0, 30, (2_000, 3))
    tree = KdTree(cloud)
    return {
        "kdtree build (50k)": lambda: KdTree(cloud),
        "kdtree query (20k)": lambda: tree.query(queries),
        "nurbs evaluate (20k)": lambda: evaluate_points(surf, us, vs),
        "surface distance (2k)": lambda: point_surface_distance(probe, face),
        "contact gaps": lambda: interface_gaps(face.vertices, plate, np.array([0.0, 0.0, -1.0])),
        "depth render 320x240": lambda: render_depth(cam, k, 320, 240),
    }


def _worker(repeat):
    from maskfit import _accel

    cases = _cases()
    out = {"backend": _accel.backend_name(), "times": {}}
    for name, fn in cases.items():
        fn()  # warm-up (compiles under numba)
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        out["times"][name] = best
    print(json.dumps(out))


def _run(no_numba, repeat):
    env = dict(os.environ)
    env.pop("MASKFIT_NO_NUMBA", None)
    if no_numba:
        env["MASKFIT_NO_NUMBA"] = "1"
    proc = subprocess.run(
        [sys.executable, __file__, "--worker", "--repeat", str(repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        _worker(args.repeat)
        return
    fast = _run(False, args.repeat)
    slow = _run(True, args.repeat)
    print(f"{'kernel':<24}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for name, t_fast in fast["times"].items():
        t_slow = slow["times"][name]
        print(f"{name:<24}{t_fast * 1e3:>10.2f}ms{t_slow * 1e3:>10.2f}ms{t_slow / t_fast:>9.1f}x")


if __name__ == "__main__":
    main()
