"""Plain-text mesh and tag-sidecar files.

Geometry uses an OBJ-compatible subset, one record per line:

    v <x> <y> <z>      vertex position in meters
    f <i> <j> <k>      triangle, 1-based vertex indices, CCW from outside

Blank lines and `#` comments are ignored. Coordinates are written with
shortest-round-trip precision, so save -> load is bit-exact.

The tag sidecar holds one `label faceIndex` pair per line, face indices
0-based in file order of the `f` records (the in-memory face index).
"""

from __future__ import annotations

import numpy as np

from .mesh import MeshError, TriangleMesh, require_valid


def load_mesh(path, tags_path=None, validate=True):
    """Read a mesh (and optional tag sidecar); validate unless told not to."""
    verts = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            kind, args = parts[0], parts[1:]
            if kind == "v":
                if len(args) != 3:
                    raise MeshError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    verts.append([float(x) for x in args])
                except ValueError as exc:
                    raise MeshError(f"{path}:{lineno}: {exc}") from None
            elif kind == "f":
                if len(args) != 3:
                    raise MeshError(f"{path}:{lineno}: face needs 3 vertex indices")
                try:
                    idx = [int(x) for x in args]
                except ValueError as exc:
                    raise MeshError(f"{path}:{lineno}: {exc}") from None
                if min(idx) < 1:
                    raise MeshError(f"{path}:{lineno}: face indices are 1-based")
                faces.append([i - 1 for i in idx])
            else:
                raise MeshError(f"{path}:{lineno}: unknown record '{kind}'")
    if not faces:
        raise MeshError(f"{path}: no faces found")

    tags = None
    if tags_path is not None:
        tags = np.full(len(faces), "", dtype="<U16")
        for label, face in read_tags(tags_path):
            if not 0 <= face < len(faces):
                raise MeshError(f"{tags_path}: face index {face} outside 0..{len(faces) - 1}")
            tags[face] = label

    mesh = TriangleMesh(np.asarray(verts), np.asarray(faces), tags)
    if validate:
        require_valid(mesh)
    return mesh


def save_mesh(mesh, path, tags_path=None):
    """Write the mesh; tag sidecar is written only when a path is given."""
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {float(x)!r} {float(y)!r} {float(z)!r}\n")
        for i, j, k in mesh.faces:
            fh.write(f"f {i + 1} {j + 1} {k + 1}\n")
    if tags_path is not None:
        write_tags(mesh, tags_path)


def read_tags(path):
    """Yield (label, face_index) pairs from a sidecar file."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise MeshError(f"{path}:{lineno}: expected 'label faceIndex'")
            try:
                out.append((parts[0], int(parts[1])))
            except ValueError:
                raise MeshError(f"{path}:{lineno}: face index must be an integer") from None
    return out


def write_tags(mesh, path):
    with open(path, "w", encoding="utf-8") as fh:
        for face in np.flatnonzero(mesh.face_tags != ""):
            fh.write(f"{mesh.face_tags[face]} {face}\n")
