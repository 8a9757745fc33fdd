"""Bundled synthetic demo data and the generator that produces it.

Regenerate with ``python -m maskfit.fixtures`` (output is deterministic).
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from . import formats, synthetic

DATA_DIR = Path(__file__).resolve().parent / "data"
ASSETS_DIR = DATA_DIR / "assets"
SCAN_PATH = DATA_DIR / "scan" / "face.pgm"
LANDMARKS_PATH = DATA_DIR / "scan" / "face_landmarks.json"


@dataclass
class FixturePaths:
    assets: Path
    scan: Path
    landmarks: Path


def write_fixtures(root, n_rings=25, scan_rings=None, image=synthetic.DEFAULT_IMAGE, intrinsics=None):
    """Write an asset bundle plus a depth scan of the bumped face under ``root``."""
    root = Path(root)
    template = synthetic.make_template(n_rings)
    kwargs = {"image": image}
    if intrinsics is not None:
        kwargs["intrinsics"] = intrinsics
    scan = synthetic.make_scan(template, n_rings=scan_rings, **kwargs)
    bundle = formats.AssetBundle(
        template.mesh, template.landmarks, template.region, template.interface, template.control_map
    )
    formats.write_bundle(root / "assets", bundle)
    (root / "scan").mkdir(parents=True, exist_ok=True)
    scan_path = root / "scan" / "face.pgm"
    formats.write_range_scan(scan_path, scan.depth, scan.intrinsics)
    lm_path = root / "scan" / "face_landmarks.json"
    formats.write_landmarks(lm_path, scan.pixel_landmarks)
    return FixturePaths(root / "assets", scan_path, lm_path)


def main(argv=None):
    ap = argparse.ArgumentParser(description="Regenerate the bundled synthetic fixtures.")
    ap.add_argument("--out", type=Path, default=DATA_DIR)
    ap.add_argument("--rings", type=int, default=25, help="template ring count (25 gives ~2k vertices)")
    args = ap.parse_args(argv)
    paths = write_fixtures(args.out, args.rings)
    print(paths.assets, paths.scan, paths.landmarks, sep="\n")


if __name__ == "__main__":
    main()
