"""Triangle surface meshes: core type, validation, statistics, sphere seed.

Meshes are immutable value objects over numpy arrays. Vertex coordinates are
in meters; user-facing edge-length statistics are reported in millimeters.
Faces are triangles with counter-clockwise vertex order seen from outside
(normals point into the exterior domain).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

#: faces with area below this are treated as degenerate (m^2)
AREA_EPS = 1e-12
#: vertex pairs closer than this are duplicates (m)
VERTEX_EPS = 1e-9


class MeshError(ValueError):
    """Raised for structurally unusable mesh input."""


@dataclass(frozen=True)
class MeshDefect:
    kind: str  # open-edge | nonmanifold-edge | orientation | degenerate-face | duplicate-vertices
    index: int  # offending face/edge/vertex index (first of a pair where applicable)
    detail: str

    def __str__(self):
        return f"{self.kind} at index {self.index}: {self.detail}"


class TriangleMesh:
    """Immutable triangle mesh with optional per-face tag labels.

    Parameters
    ----------
    vertices : (nv, 3) float array, meters
    faces : (nf, 3) integer array of vertex indices
    face_tags : optional (nf,) array of string labels, '' meaning untagged
    """

    def __init__(self, vertices, faces, face_tags=None):
        v = np.ascontiguousarray(vertices, dtype=np.float64)
        f = np.ascontiguousarray(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must be (n, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            bad = int(np.flatnonzero((f < 0).any(axis=1) | (f >= len(v)).any(axis=1))[0])
            raise MeshError(f"face {bad} references a vertex outside 0..{len(v) - 1}")
        if face_tags is None:
            t = np.full(len(f), "", dtype="<U16")
        else:
            t = np.asarray(face_tags, dtype="<U16")
            if t.shape != (len(f),):
                raise MeshError("face_tags must have one label per face")
        for arr in (v, f, t):
            arr.setflags(write=False)
        self.vertices = v
        self.faces = f
        self.face_tags = t
        self._cache = {}

    # -- basic quantities ---------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def face_corners(self):
        """(nf, 3, 3) vertex positions per face."""
        return self._cached("corners", lambda: self.vertices[self.faces])

    @property
    def face_normals_area(self):
        """Unnormalized normals: 0.5 * (b-a) x (c-a); |.| is the face area."""

        def compute():
            c = self.face_corners
            n = 0.5 * np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
            n.setflags(write=False)
            return n

        return self._cached("nvec", compute)

    @property
    def face_areas(self):
        return self._cached("areas", lambda: np.linalg.norm(self.face_normals_area, axis=1))

    @property
    def face_normals(self):
        def compute():
            nv = self.face_normals_area
            a = np.linalg.norm(nv, axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                n = nv / a[:, None]
            return n

        return self._cached("normals", compute)

    @property
    def face_centroids(self):
        return self._cached("centroids", lambda: self.face_corners.mean(axis=1))

    @property
    def face_diameters(self):
        """Longest edge per face (m)."""

        def compute():
            c = self.face_corners
            e = np.stack(
                [
                    np.linalg.norm(c[:, 1] - c[:, 0], axis=1),
                    np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
                    np.linalg.norm(c[:, 0] - c[:, 2], axis=1),
                ],
                axis=1,
            )
            return e.max(axis=1)

        return self._cached("diam", compute)

    @property
    def area(self):
        return float(self.face_areas.sum())

    def edges(self):
        """Unique undirected edges and the face->edge incidence.

        Returns
        -------
        edges : (ne, 2) int array, each row sorted ascending
        face_edges : (nf, 3) indices into `edges`, edge k of face f being
            (faces[f, k], faces[f, (k+1) % 3])
        """

        def compute():
            f = self.faces
            directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
            undirected = np.sort(directed, axis=1)
            edges, inverse = np.unique(undirected, axis=0, return_inverse=True)
            face_edges = inverse.reshape(3, -1).T
            edges.setflags(write=False)
            face_edges.setflags(write=False)
            return edges, face_edges

        return self._cached("edges", compute)

    @property
    def n_edges(self):
        return len(self.edges()[0])

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces

    @property
    def edge_lengths(self):
        def compute():
            e = self.edges()[0]
            return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

        return self._cached("elen", compute)

    @property
    def vertex_valences(self):
        def compute():
            e = self.edges()[0]
            return np.bincount(e.ravel(), minlength=self.n_vertices)

        return self._cached("valence", compute)

    # -- tags ----------------------------------------------------------------

    def tag_labels(self):
        labels = np.unique(self.face_tags)
        return [str(s) for s in labels if s]

    def faces_with_tag(self, label):
        return np.flatnonzero(self.face_tags == label)

    def with_tags(self, label, face_indices):
        """Return a copy with `label` assigned to the given faces."""
        tags = self.face_tags.copy()
        tags[np.asarray(face_indices, dtype=np.int64)] = label
        return TriangleMesh(self.vertices, self.faces, tags)

    # -- connectivity --------------------------------------------------------

    def halfedges(self):
        """Half-edge arrays (origin, face, next, twin) for a valid closed mesh.

        Half-edge h = 3*f + k runs from faces[f, k] to faces[f, (k+1) % 3].
        Raises MeshError when an edge is not shared by exactly two
        consistently oriented faces.
        """

        def compute():
            f = self.faces
            nh = 3 * len(f)
            origin = f.ravel()
            dest = f[:, [1, 2, 0]].ravel()
            face = np.repeat(np.arange(len(f)), 3)
            nxt = (np.arange(nh) - np.arange(nh) % 3) + (np.arange(nh) % 3 + 1) % 3
            key = origin * self.n_vertices + dest
            rkey = dest * self.n_vertices + origin
            order = np.argsort(key, kind="stable")
            pos = np.searchsorted(key[order], rkey)
            bad = (pos >= nh) | (key[order][np.minimum(pos, nh - 1)] != rkey)
            if bad.any():
                h = int(np.flatnonzero(bad)[0])
                raise MeshError(
                    f"no oppositely oriented twin for edge ({origin[h]}, {dest[h]}) of face {face[h]}"
                )
            twin = order[pos]
            if not (twin[twin] == np.arange(nh)).all():
                raise MeshError("twin mapping is not an involution (non-manifold edge)")
            out = {"origin": origin, "face": face, "next": nxt, "twin": twin}
            for a in out.values():
                a.setflags(write=False)
            return out

        return self._cached("halfedges", compute)

    # -- misc ----------------------------------------------------------------

    def content_digest(self):
        h = hashlib.sha256()
        h.update(self.vertices.tobytes())
        h.update(self.faces.tobytes())
        h.update("|".join(self.face_tags.tolist()).encode())
        return h.hexdigest()

    def __repr__(self):
        tags = self.tag_labels()
        extra = f", tags={tags}" if tags else ""
        return f"TriangleMesh({self.n_vertices} vertices, {self.n_faces} faces{extra})"


# -- validation ----------------------------------------------------------------


def validate_mesh(mesh, area_eps=AREA_EPS, vertex_eps=VERTEX_EPS):
    """Check the closed-2-manifold contract; return a list of MeshDefect.

    Checks: every undirected edge shared by exactly two faces, consistent
    winding (each directed edge appears once), no degenerate faces, no
    duplicate vertices.
    """
    defects = []
    f = mesh.faces

    same = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])
    for i in np.flatnonzero(same):
        defects.append(MeshDefect("degenerate-face", int(i), "repeated vertex index"))

    small = mesh.face_areas < area_eps
    for i in np.flatnonzero(small & ~same):
        defects.append(MeshDefect("degenerate-face", int(i), f"area {mesh.face_areas[i]:.3e} m^2 < {area_eps:.0e}"))

    directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    owner = np.tile(np.arange(len(f)), 3)
    und = np.sort(directed, axis=1)
    edges, inv, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)

    for e in np.flatnonzero(counts == 1):
        i, j = edges[e]
        face = int(owner[inv == e][0])
        defects.append(MeshDefect("open-edge", face, f"edge ({i}, {j}) borders only face {face}"))
    for e in np.flatnonzero(counts > 2):
        i, j = edges[e]
        fs = sorted(int(x) for x in owner[inv == e])
        defects.append(MeshDefect("nonmanifold-edge", fs[0], f"edge ({i}, {j}) shared by faces {fs}"))

    # orientation: within a count-2 edge both directed copies must be opposite
    dkey, dcounts = np.unique(directed, axis=0, return_counts=True)
    if (dcounts > 1).any():
        flip_votes = {}
        for row in dkey[dcounts > 1]:
            hits = owner[(directed[:, 0] == row[0]) & (directed[:, 1] == row[1])]
            for face in hits:
                flip_votes[int(face)] = flip_votes.get(int(face), 0) + 1
        for face, votes in sorted(flip_votes.items()):
            defects.append(
                MeshDefect("orientation", face, f"face {face} has {votes} edge(s) wound like a neighbor")
            )

    if mesh.n_vertices > 1:
        pairs = cKDTree(mesh.vertices).query_pairs(vertex_eps, output_type="ndarray")
        for i, j in pairs:
            defects.append(MeshDefect("duplicate-vertices", int(i), f"vertices {i} and {j} coincide within {vertex_eps:g} m"))

    return defects


def require_valid(mesh):
    """Raise MeshError with a readable summary when validation fails."""
    defects = validate_mesh(mesh)
    if defects:
        head = "; ".join(str(d) for d in defects[:5])
        more = f" (+{len(defects) - 5} more)" if len(defects) > 5 else ""
        raise MeshError(f"invalid mesh: {head}{more}")
    return mesh


# -- statistics ------------------------------------------------------------------


@dataclass(frozen=True)
class MeshStats:
    n_vertices: int
    n_faces: int
    n_edges: int
    edge_min_mm: float
    edge_max_mm: float
    edge_avg_mm: float
    area_m2: float
    valence_histogram: dict = field(repr=False)

    def csv_row(self, target_min_mm=None, target_max_mm=None):
        """Row matching the study-table column order:
        target-min, target-max, min, max, avg edge length (mm), face count."""

        def fmt(x):
            return "" if x is None else f"{x:.6g}"

        return (
            f"{fmt(target_min_mm)},{fmt(target_max_mm)},"
            f"{self.edge_min_mm:.6g},{self.edge_max_mm:.6g},{self.edge_avg_mm:.6g},{self.n_faces}"
        )


def mesh_stats(mesh):
    lengths_mm = mesh.edge_lengths * 1e3
    valences = mesh.vertex_valences
    hist = {int(v): int(c) for v, c in zip(*np.unique(valences, return_counts=True))}
    return MeshStats(
        n_vertices=mesh.n_vertices,
        n_faces=mesh.n_faces,
        n_edges=mesh.n_edges,
        edge_min_mm=float(lengths_mm.min()),
        edge_max_mm=float(lengths_mm.max()),
        edge_avg_mm=float(lengths_mm.mean()),
        area_m2=mesh.area,
        valence_histogram=hist,
    )


# -- sphere seed -----------------------------------------------------------------

# icosahedron vertices; faces are derived from the convex hull so the
# connectivity table cannot drift out of sync with the coordinates
_PHI = (1.0 + math.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        (-1, _PHI, 0), (1, _PHI, 0), (-1, -_PHI, 0), (1, -_PHI, 0),
        (0, -1, _PHI), (0, 1, _PHI), (0, -1, -_PHI), (0, 1, -_PHI),
        (_PHI, 0, -1), (_PHI, 0, 1), (-_PHI, 0, -1), (-_PHI, 0, 1),
    ],
    dtype=np.float64,
)


def _icosahedron_faces():
    from scipy.spatial import ConvexHull

    tri = np.array(sorted(map(tuple, ConvexHull(_ICO_VERTS).simplices)), dtype=np.int64)
    corners = _ICO_VERTS[tri]
    outward = np.einsum("ij,ij->i", np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]), corners.mean(axis=1))
    tri[outward < 0] = tri[outward < 0][:, [0, 2, 1]]
    return tri


_ICO_FACES = _icosahedron_faces()


def make_sphere_mesh(radius_m, target_edge_mm, face_toward=None):
    """Closed triangulated sphere with average edge length near the target.

    Builds a geodesic sphere (subdivided icosahedron): each base face is split
    into s^2 triangles with exact integer welding along shared edges, then the
    lattice is projected onto the sphere. The subdivision frequency is chosen
    so the projected average edge length lands on `target_edge_mm`; with 20*s^2
    faces available the 20% average-edge guarantee needs target <= radius/2.

    With `face_toward`, the sphere is rigidly rotated so one face centroid
    lies exactly on the ray from the center through that direction. Reciprocal
    measurement setups want an element centered on the measurement axis; a
    bare geodesic sphere has a vertex on each icosahedral axis, so a patch
    tagged near such an axis would otherwise sit half an edge off it.

    Raises ValueError when the target edge exceeds the radius (the sphere
    curvature cannot be resolved at all).
    """
    radius = float(radius_m)
    target = float(target_edge_mm) * 1e-3
    if radius <= 0:
        raise MeshError("radius must be positive")
    if target <= 0:
        raise MeshError("target edge length must be positive")
    if target > radius:
        raise MeshError(
            f"target edge {target_edge_mm:g} mm exceeds the sphere radius {radius:g} m; "
            "the curvature cannot be resolved"
        )
    # equilateral cover of the sphere area with 20 s^2 faces has edge
    # sqrt(16 pi / (sqrt(3) 20)) * R / s ~= 1.2046 R / s
    s = max(1, round(1.20458 * radius / target))

    base = _ICO_VERTS / np.linalg.norm(_ICO_VERTS[0])
    verts = []
    index = {}

    def vertex_at(key, point):
        idx = index.get(key)
        if idx is None:
            idx = len(verts)
            index[key] = idx
            verts.append(point)
        return idx

    faces = []
    for fid, (a, b, c) in enumerate(_ICO_FACES):
        A, B, C = base[a], base[b], base[c]
        corner_ids = (int(a), int(b), int(c))
        grid = {}
        for i in range(s + 1):
            for j in range(s + 1 - i):
                k = s - i - j
                # global welding key: corner, point on a shared edge, or interior
                if i == s:
                    key = ("v", corner_ids[1])
                elif j == s:
                    key = ("v", corner_ids[2])
                elif k == s:
                    key = ("v", corner_ids[0])
                elif k == 0:  # edge B-C, parameter j from B
                    u, v, t = corner_ids[1], corner_ids[2], j
                    key = ("e", u, v, t) if u < v else ("e", v, u, s - t)
                elif j == 0:  # edge A-B, parameter i from A
                    u, v, t = corner_ids[0], corner_ids[1], i
                    key = ("e", u, v, t) if u < v else ("e", v, u, s - t)
                elif i == 0:  # edge A-C, parameter j from A
                    u, v, t = corner_ids[0], corner_ids[2], j
                    key = ("e", u, v, t) if u < v else ("e", v, u, s - t)
                else:
                    key = ("f", fid, i, j)
                grid[(i, j)] = vertex_at(key, (k * A + i * B + j * C) / s)
        for i in range(s):
            for j in range(s - i):
                faces.append((grid[(i, j)], grid[(i + 1, j)], grid[(i, j + 1)]))
                if i + j < s - 1:
                    faces.append((grid[(i + 1, j)], grid[(i + 1, j + 1)], grid[(i, j + 1)]))

    v = np.asarray(verts, dtype=np.float64)
    v = v / np.linalg.norm(v, axis=1)[:, None] * radius
    if face_toward is not None:
        direction = np.asarray(face_toward, dtype=np.float64)
        length = np.linalg.norm(direction)
        if length == 0.0:
            raise MeshError("face_toward must be a nonzero direction")
        direction = direction / length
        f = np.asarray(faces, dtype=np.int64)
        centroids = v[f].mean(axis=1)
        units = centroids / np.linalg.norm(centroids, axis=1)[:, None]
        v = v @ _rotation_between(units[int(np.argmax(units @ direction))], direction).T
    mesh = TriangleMesh(v, np.asarray(faces, dtype=np.int64))
    expect = (10 * s * s + 2, 20 * s * s, 30 * s * s)
    got = (mesh.n_vertices, mesh.n_faces, mesh.n_edges)
    if got != expect:
        raise RuntimeError(f"sphere welding failed: (V,F,E)={got}, expected {expect}")
    return mesh


def _rotation_between(a, b):
    """Rotation matrix taking unit vector a onto unit vector b."""
    c = float(np.dot(a, b))
    axis = np.cross(a, b)
    s2 = float(np.dot(axis, axis))
    if s2 < 1e-30:
        if c > 0.0:
            return np.eye(3)
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if np.dot(perp, perp) < 1e-12:
            perp = np.cross(a, [0.0, 1.0, 0.0])
        perp = perp / np.linalg.norm(perp)
        return 2.0 * np.outer(perp, perp) - np.eye(3)
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + k + k @ k * ((1.0 - c) / s2)


def tag_faces_near(mesh, label, center_m, radius_mm):
    """Tag every face whose centroid lies within radius of a point.

    Falls back to the single nearest face when the ball is empty, so a patch
    always exists.
    """
    center = np.asarray(center_m, dtype=np.float64)
    d = np.linalg.norm(mesh.face_centroids - center, axis=1)
    hit = np.flatnonzero(d <= float(radius_mm) * 1e-3)
    if len(hit) == 0:
        hit = np.array([int(np.argmin(d))])
    return mesh.with_tags(label, hit)
