"""Self-contained world archive: a zip holding manifest.json, the
heightfield as raw little-endian float64, per-prop ASCII STL meshes, and
a labels.json. Entries are stored uncompressed with fixed timestamps so
the same world always produces a byte-identical archive.
"""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np

from .world import Heightfield, Prop, SemanticLabel, World, WorldError

_FIXED_DATE = (1980, 1, 1, 0, 0, 0)
FORMAT_VERSION = 1


def write_stl(vertices: np.ndarray, triangles: np.ndarray) -> str:
    """ASCII STL for a local-frame triangle mesh (deterministic text)."""
    out = io.StringIO()
    out.write("solid prop\n")
    for tri in triangles:
        p0, p1, p2 = vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]
        n = np.cross(p1 - p0, p2 - p0)
        nn = np.linalg.norm(n)
        n = n / nn if nn > 0 else np.zeros(3)
        out.write(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}\n")
        out.write("    outer loop\n")
        for p in (p0, p1, p2):
            out.write(f"      vertex {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        out.write("    endloop\n")
        out.write("  endfacet\n")
    out.write("endsolid prop\n")
    return out.getvalue()


def read_stl(text: str):
    """Parse ASCII STL into a triangle soup (vertices, triangles)."""
    verts = []
    for line in text.splitlines():
        parts = line.split()
        if parts and parts[0] == "vertex":
            if len(parts) != 4:
                raise WorldError("malformed STL vertex line")
            verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
    if not verts or len(verts) % 3 != 0:
        raise WorldError("STL must contain a whole number of triangles")
    vertices = np.array(verts, dtype=float)
    triangles = np.arange(len(verts), dtype=int).reshape(-1, 3)
    return vertices, triangles


def _add_entry(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
    info.compress_type = zipfile.ZIP_STORED
    zf.writestr(info, data)


def save_world(world: World, path) -> None:
    hf = world.heightfield
    manifest = {
        "format": FORMAT_VERSION,
        "heightfield": {
            "origin": [float(hf.origin[0]), float(hf.origin[1])],
            "cell_size": hf.cell_size,
            "nx": hf.nx,
            "ny": hf.ny,
            "dtype": "<f8",
            "file": "heightfield.bin",
        },
        "props": [
            {"id": p.id, "stl": f"props/{p.id:05d}.stl",
             "pose": [float(v) for v in p.pose],
             "generation": p.generation}
            for p in world.props],
    }
    labels = {
        "terrain": {"class_id": hf.label.class_id,
                    "instance_id": hf.label.instance_id},
        "props": {str(p.id): {"class_id": p.label.class_id,
                              "instance_id": p.label.instance_id}
                  for p in world.props},
    }
    with zipfile.ZipFile(path, "w") as zf:
        _add_entry(zf, "manifest.json",
                   json.dumps(manifest, indent=2, sort_keys=True).encode())
        _add_entry(zf, "heightfield.bin", hf.depth.astype("<f8").tobytes())
        for p in world.props:
            _add_entry(zf, f"props/{p.id:05d}.stl",
                       write_stl(p.vertices, p.triangles).encode())
        _add_entry(zf, "labels.json",
                   json.dumps(labels, indent=2, sort_keys=True).encode())


def load_world(path) -> World:
    with zipfile.ZipFile(path, "r") as zf:
        manifest = json.loads(zf.read("manifest.json"))
        labels = json.loads(zf.read("labels.json"))
        if manifest.get("format") != FORMAT_VERSION:
            raise WorldError(f"{path}: unsupported archive format")
        hfm = manifest["heightfield"]
        raw = zf.read(hfm["file"])
        depth = np.frombuffer(raw, dtype="<f8").reshape(hfm["nx"], hfm["ny"])
        hf = Heightfield(origin=tuple(hfm["origin"]),
                         cell_size=float(hfm["cell_size"]),
                         depth=depth.copy())
        world = World(heightfield=hf)
        for pm in manifest["props"]:
            verts, tris = read_stl(zf.read(pm["stl"]).decode("utf-8"))
            lab = labels["props"][str(pm["id"])]
            world.props.append(Prop(
                id=pm["id"], vertices=verts, triangles=tris,
                pose=np.array(pm["pose"], dtype=float),
                label=SemanticLabel(class_id=lab["class_id"],
                                    instance_id=lab["instance_id"]),
                generation=pm["generation"]))
        if world.props:
            world._next_prop_id = max(p.id for p in world.props) + 1
            world._next_generation = max(p.generation for p in world.props) + 1
    return world
