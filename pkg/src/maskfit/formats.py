"""Readers and writers for meshes, scans, landmarks, regions, NURBS assets.

Every reader validates what it builds and raises :class:`ParseError` with
the file and a line (text) or byte offset (binary) location.
"""
from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GeometryError, MaskfitError, MissingIntrinsics, ParseError, UnsupportedFeature
from .geometry import Intrinsics, RangeScan, TriangleMesh
from .landmarks import LandmarkSet, PixelLandmark
from .nurbs import ControlMap, NurbsSurface
from .region import ContactRegion, WarpedRegion
from .synthetic import DEPTH_UNIT, scan_from_depth

log = logging.getLogger(__name__)


def _num(x):
    return repr(float(x))


def _open_text(path):
    try:
        return open(path, "r", encoding="utf-8")
    except FileNotFoundError:
        raise ParseError("file not found", path) from None
    except OSError as exc:
        raise ParseError(str(exc), path) from None


def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise ParseError("file not found", path) from None
    except OSError as exc:
        raise ParseError(str(exc), path) from None


# ---------------------------------------------------------------------------
# OBJ


def read_obj(path) -> TriangleMesh:
    verts, faces = [], []
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            tag, *rest = s.split()
            if tag == "v":
                if len(rest) < 3:
                    raise ParseError("vertex needs three coordinates", path, f"line {lineno}")
                try:
                    verts.append([float(t) for t in rest[:3]])
                except ValueError:
                    raise ParseError(f"bad vertex coordinates {rest[:3]}", path, f"line {lineno}") from None
            elif tag == "f":
                if len(rest) < 3:
                    raise ParseError("face needs at least three vertices", path, f"line {lineno}")
                try:
                    idx = [int(t.split("/")[0]) for t in rest]
                except ValueError:
                    raise ParseError(f"bad face indices {rest}", path, f"line {lineno}") from None
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                if any(i < 0 or i >= len(verts) for i in idx):
                    raise ParseError(f"face index out of range {rest}", path, f"line {lineno}")
                if len(idx) > 3:
                    log.warning("%s:%d: %d-gon fan-triangulated", path, lineno, len(idx))
                for k in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[k], idx[k + 1]))
            elif tag in ("mtllib", "usemtl"):
                raise UnsupportedFeature(f"materials are not supported ({tag})", path, f"line {lineno}")
            elif tag in ("vn", "vt", "vp", "o", "g", "s", "l"):
                continue
            else:
                raise ParseError(f"unknown record {tag!r}", path, f"line {lineno}")
    try:
        return TriangleMesh(np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))
    except GeometryError as exc:
        raise ParseError(str(exc), path) from None


def write_obj(path, mesh: TriangleMesh):
    lines = [f"v {_num(x)} {_num(y)} {_num(z)}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# PLY

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


@dataclass
class PlyData:
    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray | None


def _ply_header(data, path):
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise ParseError("not a PLY file (missing magic or end_header)", path, "byte 0")
    nl = data.find(b"\n", end)
    if nl < 0:
        raise ParseError("truncated header", path, f"byte {end}")
    header = data[:nl].decode("ascii", errors="replace").splitlines()
    fmt = None
    elements = []
    for line in header[1:]:
        parts = line.split()
        if not parts or parts[0] in ("comment", "obj_info", "end_header"):
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append([parts[1], int(parts[2]), []])
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before element", path)
            if parts[1] == "list":
                elements[-1][2].append((parts[4], "list", parts[2], parts[3]))
            else:
                if parts[1] not in _PLY_TYPES:
                    raise ParseError(f"unknown property type {parts[1]}", path)
                elements[-1][2].append((parts[2], parts[1]))
    if fmt not in ("binary_little_endian", "ascii"):
        raise UnsupportedFeature(f"PLY format {fmt!r} is not supported", path)
    return fmt, elements, nl + 1


def read_ply(path) -> PlyData:
    data = _read_bytes(path)
    fmt, elements, offset = _ply_header(data, path)
    verts = np.zeros((0, 3))
    normals = None
    faces = np.zeros((0, 3), np.int64)
    tokens = data[offset:].split() if fmt == "ascii" else None
    tpos = 0
    for name, count, props in elements:
        if fmt == "ascii":
            rows = []
            for r in range(count):
                row = {}
                for prop in props:
                    if prop[1] == "list":
                        if tpos >= len(tokens):
                            raise ParseError(f"truncated {name} data", path, f"element {name} row {r}")
                        n = int(tokens[tpos])
                        row[prop[0]] = [int(float(t)) for t in tokens[tpos + 1 : tpos + 1 + n]]
                        if len(row[prop[0]]) != n:
                            raise ParseError(f"truncated {name} data", path, f"element {name} row {r}")
                        tpos += 1 + n
                    else:
                        if tpos >= len(tokens):
                            raise ParseError(f"truncated {name} data", path, f"element {name} row {r}")
                        row[prop[0]] = float(tokens[tpos])
                        tpos += 1
                rows.append(row)
        else:
            if all(p[1] != "list" for p in props):
                dt = np.dtype([(p[0], "<" + _PLY_TYPES[p[1]]) for p in props])
                need = dt.itemsize * count
                if offset + need > len(data):
                    raise ParseError(
                        f"truncated {name} block: need {need} bytes", path, f"byte {len(data)}"
                    )
                arr = np.frombuffer(data, dtype=dt, count=count, offset=offset)
                offset += need
                rows = arr
            else:
                rows = []
                for r in range(count):
                    row = {}
                    for prop in props:
                        try:
                            if prop[1] == "list":
                                ct = "<" + _PLY_TYPES[prop[2]]
                                it = np.dtype("<" + _PLY_TYPES[prop[3]])
                                n = int(np.frombuffer(data, ct, 1, offset)[0])
                                offset += np.dtype(ct).itemsize
                                row[prop[0]] = np.frombuffer(data, it, n, offset).astype(np.int64).tolist()
                                offset += it.itemsize * n
                            else:
                                t = np.dtype("<" + _PLY_TYPES[prop[1]])
                                row[prop[0]] = float(np.frombuffer(data, t, 1, offset)[0])
                                offset += t.itemsize
                        except ValueError:
                            raise ParseError(f"truncated {name} data", path, f"byte {offset}") from None
                    rows.append(row)
        if name == "vertex":
            get = (lambda k: np.asarray(rows[k], dtype=np.float64)) if isinstance(rows, np.ndarray) else (
                lambda k: np.array([row[k] for row in rows], dtype=np.float64)
            )
            try:
                verts = np.stack([get("x"), get("y"), get("z")], axis=1) if count else np.zeros((0, 3))
                keys = rows.dtype.names if isinstance(rows, np.ndarray) else (rows[0].keys() if rows else ())
                if {"nx", "ny", "nz"} <= set(keys):
                    normals = np.stack([get("nx"), get("ny"), get("nz")], axis=1)
            except (KeyError, ValueError):
                raise ParseError("vertex element lacks x/y/z", path) from None
        elif name == "face":
            tri = []
            key = props[0][0] if props else None
            for r, row in enumerate(rows if not isinstance(rows, np.ndarray) else []):
                idx = row[key]
                if len(idx) < 3:
                    raise ParseError("face with fewer than three vertices", path, f"face {r}")
                if len(idx) > 3:
                    log.warning("%s: face %d fan-triangulated", path, r)
                tri.extend((idx[0], idx[k], idx[k + 1]) for k in range(1, len(idx) - 1))
            faces = np.array(tri, dtype=np.int64).reshape(-1, 3)
    if fmt == "binary_little_endian" and offset != len(data):
        log.warning("%s: %d trailing bytes ignored", path, len(data) - offset)
    if len(faces) and (faces.min() < 0 or faces.max() >= len(verts)):
        raise ParseError("face index out of range", path)
    return PlyData(verts, faces, normals)


def write_ply(path, mesh: TriangleMesh):
    """Binary little-endian PLY: double x/y/z, uchar-count int-index faces."""
    head = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property double x\nproperty double y\nproperty double z\n"
        f"element face {mesh.n_faces}\n"
        "property list uchar int vertex_indices\nend_header\n"
    ).encode("ascii")
    face_dt = np.dtype([("n", "u1"), ("idx", "<i4", (3,))])
    f = np.empty(mesh.n_faces, dtype=face_dt)
    f["n"] = 3
    f["idx"] = mesh.faces
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
        fh.write(f.tobytes())


def read_mesh(path) -> TriangleMesh:
    ext = Path(path).suffix.lower()
    if ext == ".obj":
        return read_obj(path)
    if ext == ".ply":
        ply = read_ply(path)
        try:
            return TriangleMesh(ply.vertices, ply.faces)
        except GeometryError as exc:
            raise ParseError(str(exc), path) from None
    raise UnsupportedFeature(f"unknown mesh extension {ext!r}", path)


def write_mesh(path, mesh: TriangleMesh):
    ext = Path(path).suffix.lower()
    if ext == ".obj":
        write_obj(path, mesh)
    elif ext == ".ply":
        write_ply(path, mesh)
    else:
        raise UnsupportedFeature(f"unknown mesh extension {ext!r}", path)


# ---------------------------------------------------------------------------
# depth images


def read_pgm(path) -> np.ndarray:
    """Binary (P5) PGM, 8- or 16-bit; 16-bit samples are stored little-endian."""
    data = _read_bytes(path)
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("truncated PGM header", path, f"byte {pos}")
        fields.append(data[start:pos])
    pos += 1
    if fields[0] != b"P5":
        raise UnsupportedFeature(f"expected binary PGM (P5), got {fields[0]!r}", path, "byte 0")
    try:
        w, h, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise ParseError("non-numeric PGM header field", path) from None
    if w <= 0 or h <= 0:
        raise ParseError(f"image dimensions must be positive, got {w}x{h}", path)
    if not 0 < maxval < 65536:
        raise ParseError(f"bad maxval {maxval}", path)
    dt = np.dtype("<u2") if maxval > 255 else np.dtype("u1")
    need = w * h * dt.itemsize
    if len(data) - pos < need:
        raise ParseError(f"truncated pixel data: need {need} bytes, have {len(data) - pos}", path, f"byte {len(data)}")
    return np.frombuffer(data, dtype=dt, count=w * h, offset=pos).reshape(h, w).astype(np.uint16)


def write_pgm(path, image):
    img = np.asarray(image, dtype=np.uint16)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(img.astype("<u2").tobytes())


def intrinsics_sidecar(path):
    p = Path(path)
    return p.with_name(p.stem + ".intrinsics.json")


def read_intrinsics(path) -> Intrinsics:
    d = _read_json(path)
    try:
        return Intrinsics(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"intrinsics need numeric fx, fy, cx, cy ({exc})", path) from None


def write_intrinsics(path, k: Intrinsics):
    _write_json(path, {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy})


def read_range_scan(path, intrinsics_path=None) -> RangeScan:
    """A 16-bit PGM depth image (0.1 mm units, 0 = invalid) plus intrinsics, or a PLY cloud."""
    ext = Path(path).suffix.lower()
    if ext == ".ply":
        ply = read_ply(path)
        if len(ply.vertices) == 0:
            raise ParseError("point cloud is empty", path)
        faces = ply.faces if len(ply.faces) else None
        return RangeScan(ply.vertices, faces=faces, normals=ply.normals)
    if ext != ".pgm":
        raise UnsupportedFeature(f"unknown scan extension {ext!r}", path)
    side = Path(intrinsics_path) if intrinsics_path else intrinsics_sidecar(path)
    if not side.exists():
        raise MissingIntrinsics(f"no intrinsics sidecar (looked for {side})", path)
    depth = read_pgm(path)
    if not (depth > 0).any():
        raise ParseError("depth image has no valid pixels", path)
    return scan_from_depth(depth, read_intrinsics(side), DEPTH_UNIT)


def write_range_scan(path, depth_units, intrinsics: Intrinsics):
    write_pgm(path, depth_units)
    write_intrinsics(intrinsics_sidecar(path), intrinsics)


# ---------------------------------------------------------------------------
# JSON documents


def _read_json(path):
    with _open_text(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path, f"line {exc.lineno} col {exc.colno}") from None


def _write_json(path, obj):
    # one top-level entry per line, values compact
    if isinstance(obj, dict) and obj:
        body = ",\n".join(f" {json.dumps(k)}: {json.dumps(v)}" for k, v in obj.items())
        text = "{\n" + body + "\n}"
    elif isinstance(obj, list) and obj:
        text = "[\n" + ",\n".join(" " + json.dumps(v) for v in obj) + "\n]"
    else:
        text = json.dumps(obj)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_landmarks(path, mesh: TriangleMesh | None = None):
    """Landmark JSON: a list of ``{name, u, v}`` or ``{name, x, y, z, template_vertex?}``.

    Pixel landmarks come back as a list of :class:`PixelLandmark`; 3-D or
    vertex-bound landmarks as a :class:`LandmarkSet`. Entries with only
    ``template_vertex`` take their position from ``mesh``.
    """
    doc = _read_json(path)
    if isinstance(doc, dict) and "landmarks" in doc:
        doc = doc["landmarks"]
    if not isinstance(doc, list) or not doc:
        raise ParseError("expected a non-empty JSON array of landmarks", path)
    names, seen = [], set()
    for k, e in enumerate(doc):
        if not isinstance(e, dict) or "name" not in e:
            raise ParseError("landmark entry needs a name", path, f"entry {k}")
        if e["name"] in seen:
            raise ParseError(f"duplicate landmark name {e['name']!r}", path, f"entry {k}")
        seen.add(e["name"])
        names.append(str(e["name"]))
    pixel = ["u" in e for e in doc]
    if any(pixel):
        if not all(pixel):
            raise ParseError("cannot mix pixel and 3-D landmarks in one file", path)
        try:
            return [PixelLandmark(n, float(e["u"]), float(e["v"])) for n, e in zip(names, doc)]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"pixel landmark needs numeric u and v ({exc})", path) from None
    has_tv = ["template_vertex" in e for e in doc]
    if any(has_tv) and not all(has_tv):
        raise ParseError("template_vertex must be given for all landmarks or none", path)
    pos = []
    for k, e in enumerate(doc):
        if all(c in e for c in "xyz"):
            try:
                pos.append([float(e["x"]), float(e["y"]), float(e["z"])])
            except (TypeError, ValueError):
                raise ParseError("non-numeric landmark coordinate", path, f"entry {k}") from None
        elif "template_vertex" in e and mesh is not None:
            tv = int(e["template_vertex"])
            if not 0 <= tv < mesh.n_vertices:
                raise ParseError(f"template_vertex {tv} out of range", path, f"entry {k}")
            pos.append(mesh.vertices[tv].tolist())
        else:
            raise ParseError("landmark needs (u, v), (x, y, z) or a template_vertex with a mesh", path, f"entry {k}")
    tv = np.array([int(e["template_vertex"]) for e in doc]) if all(has_tv) else None
    if tv is not None and mesh is not None and (tv.min() < 0 or tv.max() >= mesh.n_vertices):
        raise ParseError("template_vertex out of range", path)
    return LandmarkSet(tuple(names), np.array(pos), tv)


def write_landmarks(path, landmarks):
    if isinstance(landmarks, LandmarkSet):
        out = []
        for k, n in enumerate(landmarks.names):
            x, y, z = (float(c) for c in landmarks.positions[k])
            e = {"name": n, "x": x, "y": y, "z": z}
            if landmarks.template_vertex is not None:
                e["template_vertex"] = int(landmarks.template_vertex[k])
            out.append(e)
    else:
        out = [{"name": lm.name, "u": float(lm.u), "v": float(lm.v)} for lm in landmarks]
    _write_json(path, out)


def read_region(path) -> ContactRegion:
    doc = _read_json(path)
    if not isinstance(doc, dict) or "indices" not in doc:
        raise ParseError("region file needs an 'indices' array", path)
    try:
        idx = np.array(doc["indices"], dtype=np.int64)
        return ContactRegion(idx, closed=bool(doc.get("closed", True)), rings=doc.get("rings"))
    except (GeometryError, TypeError, ValueError) as exc:
        raise ParseError(str(exc), path) from None


def write_region(path, region: ContactRegion):
    _write_json(
        path,
        {"closed": region.closed, "rings": list(region.rings), "indices": region.vertex_indices.tolist()},
    )


def read_warped(path) -> WarpedRegion:
    doc = _read_json(path)
    try:
        return WarpedRegion(np.array(doc["points"], dtype=np.float64).reshape(-1, 3))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"warped region needs a points array ({exc})", path) from None


def write_warped(path, warped: WarpedRegion, distances=None):
    doc = {"points": warped.points.tolist()}
    if distances is not None:
        doc["scan_distance_mm"] = [float(d) for d in distances]
    _write_json(path, doc)


def read_nurbs(path):
    """NURBS JSON -> ``(surface, control_map or None)``."""
    doc = _read_json(path)
    try:
        surf = NurbsSurface(
            int(doc["degree_u"]), int(doc["degree_v"]),
            np.array(doc["knots_u"], dtype=np.float64), np.array(doc["knots_v"], dtype=np.float64),
            np.array(doc["control_points"], dtype=np.float64), np.array(doc["weights"], dtype=np.float64),
        )
    except KeyError as exc:
        raise ParseError(f"missing field {exc}", path) from None
    except ParseError as exc:
        raise ParseError(str(exc), path) from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed NURBS data ({exc})", path) from None
    cmap = None
    if "control_map" in doc:
        try:
            cmap = ControlMap(np.array(doc["control_map"], dtype=np.int64).reshape(-1, 3))
            cmap.check(surf.shape)
        except MaskfitError as exc:
            raise ParseError(str(exc), path) from None
    return surf, cmap


def write_nurbs(path, surf: NurbsSurface, cmap: ControlMap | None = None):
    doc = {
        "degree_u": surf.degree_u,
        "degree_v": surf.degree_v,
        "knots_u": surf.knots_u.tolist(),
        "knots_v": surf.knots_v.tolist(),
        "control_points": surf.control_points.tolist(),
        "weights": surf.weights.tolist(),
    }
    if cmap is not None:
        doc["control_map"] = cmap.entries.tolist()
    _write_json(path, doc)


def read_transform(path):
    from .similarity import SimilarityTransform

    doc = _read_json(path)
    try:
        return SimilarityTransform.from_dict(doc)
    except (KeyError, TypeError, ValueError, GeometryError) as exc:
        raise ParseError(f"bad similarity transform ({exc})", path) from None


def write_transform(path, transform, report=None):
    doc = transform.to_dict()
    if report is not None:
        doc["report"] = report.to_dict()
    _write_json(path, doc)


# ---------------------------------------------------------------------------
# asset bundle

BUNDLE_FILES = {
    "template": "template.obj",
    "landmarks": "template_landmarks.json",
    "region": "region.json",
    "interface": "interface.json",
}


@dataclass
class AssetBundle:
    template: TriangleMesh
    landmarks: LandmarkSet
    region: ContactRegion
    interface: NurbsSurface
    control_map: ControlMap

    def validate(self):
        self.landmarks.check_template(self.template.n_vertices)
        self.region.check(self.template)
        self.control_map.check(self.interface.shape, len(self.region))


def read_bundle(directory) -> AssetBundle:
    d = Path(directory)
    manifest = dict(BUNDLE_FILES)
    if (d / "bundle.json").exists():
        manifest.update(_read_json(d / "bundle.json"))
    for key, name in manifest.items():
        if not (d / name).exists():
            raise ParseError(f"asset bundle is missing its {key} file", d / name)
    mesh = read_mesh(d / manifest["template"])
    lms = read_landmarks(d / manifest["landmarks"], mesh)
    if not isinstance(lms, LandmarkSet) or lms.template_vertex is None:
        raise ParseError("template landmarks must be vertex-bound", d / manifest["landmarks"])
    region = read_region(d / manifest["region"])
    surf, cmap = read_nurbs(d / manifest["interface"])
    if cmap is None:
        raise ParseError("generic interface needs a control_map", d / manifest["interface"])
    bundle = AssetBundle(mesh, lms, region, surf, cmap)
    try:
        bundle.validate()
    except MaskfitError as exc:
        raise ParseError(f"inconsistent asset bundle: {exc}", d) from None
    return bundle


def write_bundle(directory, bundle: AssetBundle):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_mesh(d / BUNDLE_FILES["template"], bundle.template)
    write_landmarks(d / BUNDLE_FILES["landmarks"], bundle.landmarks)
    write_region(d / BUNDLE_FILES["region"], bundle.region)
    write_nurbs(d / BUNDLE_FILES["interface"], bundle.interface, bundle.control_map)
    _write_json(d / "bundle.json", BUNDLE_FILES)


# ---------------------------------------------------------------------------
# pressure report


def write_pressure_report(path, report, label=""):
    """One ``index pressure`` line per face vertex, then a ``#``-prefixed summary block."""
    lines = ["# maskfit pressure report" + (f" ({label})" if label else ""), "index pressure"]
    lines += [f"{i} {_num(p)}" for i, p in enumerate(report.pressure)]
    lines.append("# summary")
    for k, v in report.summary().items():
        lines.append(f"# {k} = {v if isinstance(v, (bool, int)) else _num(v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_pressure_report(path):
    """``(pressures, summary)`` from a report written by :func:`write_pressure_report`."""
    pressures, summary = [], {}
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s == "index pressure":
                continue
            if s.startswith("#"):
                if "=" in s:
                    k, v = s[1:].split("=", 1)
                    summary[k.strip()] = v.strip()
                continue
            try:
                i, p = s.split()
                if int(i) != len(pressures):
                    raise ValueError("non-sequential index")
                pressures.append(float(p))
            except ValueError as exc:
                raise ParseError(str(exc), path, f"line {lineno}") from None
    return np.array(pressures), summary


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
