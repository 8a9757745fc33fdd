"""Run every compiled kernel on fixed inputs and save the results.

Invoked in a subprocess so the backend flag is read at import time.
"""
import sys

import numpy as np


def probe():
    from maskfit import _accel
    from maskfit.contact import interface_gaps
    from maskfit.geometry import Intrinsics, TriangleMesh, point_surface_distance
    from maskfit.kdtree import KdTree
    from maskfit.nurbs import NurbsSurface, clamped_uniform_knots, evaluate_points
    from maskfit.synthetic import polar_mesh, render_depth

    r = np.random.default_rng(7)
    out = {"backend": np.array(_accel.backend_name())}
    pts = r.normal(0, 20, (3000, 3))
    pts[1000:1100] = pts[:100]  # duplicates exercise the tie rule
    q = r.normal(0, 20, (400, 3))
    tree = KdTree(pts)
    for name in ("perm", "lo", "hi", "left", "right", "axis", "split"):
        out["kd_" + name] = getattr(tree, name)
    out["kd_idx"], out["kd_dist"] = tree.query(q)
    out["knn_idx"], out["knn_dist"] = tree.query_knn(q[:50], 6)

    cp = r.normal(0, 10, (7, 6, 3))
    s = NurbsSurface(3, 2, clamped_uniform_knots(7, 3), clamped_uniform_knots(6, 2), cp, r.uniform(0.5, 2, (7, 6)))
    out["nurbs"] = evaluate_points(s, r.uniform(0, 1, 500), r.uniform(0, 1, 500))

    face = polar_mesh(20)[0]
    out["surf_dist"] = point_surface_distance(r.normal(0, 30, (300, 3)), face)
    plate = TriangleMesh(face.vertices * [1.1, 1.1, 0] + [0.3, -0.2, 40.0], face.faces)
    out["gaps"] = interface_gaps(face.vertices, plate, np.array([0.0, 0.0, -1.0]))

    cam = TriangleMesh(face.vertices * [1, 1, -1] + [0, 0, 300.0], face.faces)
    out["depth"] = render_depth(cam, Intrinsics(400.0, 400.0, 40.0, 40.0), 80, 80)
    return out


if __name__ == "__main__":
    np.savez(sys.argv[1], **probe())
