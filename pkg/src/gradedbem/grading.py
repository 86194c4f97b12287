"""A-priori mesh grading: distance-driven edge targets plus remeshing.

The target edge length interpolates between a fine length at a tagged
microphone patch and a coarse length at the far side of the mesh, driven
by a grading function of the normalized patch distance. The remesher then
iterates split / collapse / flip / smooth passes until edge lengths track
their local targets.

Normalization constants (patch centroid and the distance scale d_max) are
frozen from the input mesh at the start of the run, so targets are stable
while the mesh deforms. All phases are deterministic: candidates are
processed in sorted order and batch updates rebuild the arrays in place of
pointer surgery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .mesh import AREA_EPS, MeshError, TriangleMesh, mesh_stats, require_valid
from .projection import SurfaceProjector

SPLIT_FACTOR = 4.0 / 3.0
COLLAPSE_FACTOR = 4.0 / 5.0

_FAMILIES = ("power", "raised-cosine", "uniform")

# candidates evaluated per collapse sub-pass; bounds the memory of the
# vectorized guard checks without changing the exhaustion semantics
_COLLAPSE_CHUNK = 65536


@dataclass(frozen=True)
class GradingSpec:
    """Grading law and remesher configuration.

    `family` is one of "power" (mu = d^alpha), "raised-cosine"
    (mu = 1 - cos^alpha(pi d / 2)) or "uniform" (target = lmax_mm
    everywhere). Lengths are millimeters. `d_max_m`, when given, overrides
    the input-mesh normalization distance.
    """

    family: str
    alpha: float = 0.0
    lmin_mm: float = 1.0
    lmax_mm: float = 1.0
    patch_label: str = ""
    d_max_m: float | None = None
    iterations: int = 10

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown grading family {self.family!r}, expected one of {_FAMILIES}")
        if self.alpha < 0:
            raise ValueError("grading exponent must be nonnegative")
        if not (0 < self.lmin_mm <= self.lmax_mm):
            raise ValueError("edge-length bounds must satisfy 0 < lmin <= lmax")
        if self.d_max_m is not None and self.d_max_m <= 0:
            raise ValueError("d_max must be positive")
        if self.iterations < 1:
            raise ValueError("at least one iteration required")

    @classmethod
    def uniform(cls, l_mm, iterations=10):
        return cls(family="uniform", lmin_mm=l_mm, lmax_mm=l_mm, iterations=iterations)

    def label(self):
        """Short study label such as UNI(20) or COS2(2,20)."""
        if self.family == "uniform":
            return f"UNI({self.lmax_mm:g})"
        prefix = "POW" if self.family == "power" else "COS"
        return f"{prefix}{self.alpha:g}({self.lmin_mm:g},{self.lmax_mm:g})"


def grading_value(spec, dbar):
    """Grading factor mu(dbar) in [0, 1] for dbar in [0, 1]."""
    d = np.asarray(dbar, dtype=np.float64)
    if np.any((d < 0) | (d > 1)):
        raise ValueError("relative distance must lie in [0, 1]")
    if spec.family == "uniform":
        return np.ones_like(d)
    if spec.family == "power":
        return d**spec.alpha
    return 1.0 - np.cos(np.pi * d / 2.0) ** spec.alpha


def target_edge_length(spec, dbar):
    """Local target edge length in millimeters."""
    return spec.lmin_mm + (spec.lmax_mm - spec.lmin_mm) * grading_value(spec, dbar)


def patch_centroid(mesh, label):
    """Area-weighted centroid of the faces tagged `label`."""
    idx = mesh.faces_with_tag(label)
    if len(idx) == 0:
        raise MeshError(f"mesh has no faces tagged {label!r}")
    areas = mesh.face_areas[idx]
    return (mesh.face_centroids[idx] * areas[:, None]).sum(axis=0) / areas.sum()


def edge_relative_distance(vertices, edges, patch_center, d_max):
    """Normalized midpoint distance of edges to the patch center, clamped to [0, 1].

    `edges` is an (m, 2) array of vertex index pairs.
    """
    if d_max <= 0:
        raise ValueError("d_max must be positive")
    e = np.atleast_2d(np.asarray(edges, dtype=np.int64))
    mid = 0.5 * (vertices[e[:, 0]] + vertices[e[:, 1]])
    d = np.linalg.norm(mid - np.asarray(patch_center, dtype=np.float64), axis=1)
    return np.clip(d / d_max, 0.0, 1.0)


@dataclass(frozen=True)
class IterationTrace:
    splits: int
    collapses: int
    flips: int
    relocations: int


@dataclass(frozen=True)
class GradedMeshReport:
    """Outcome of a remeshing run."""

    stats: object
    iterations: tuple
    band_fraction: float
    input_faces: int

    def summary(self):
        lines = [
            f"faces {self.input_faces} -> {self.stats.n_faces}, "
            f"edges {self.stats.n_edges}, "
            f"edge lengths {self.stats.edge_min_mm:.2f}/{self.stats.edge_avg_mm:.2f}/"
            f"{self.stats.edge_max_mm:.2f} mm (min/avg/max)",
            f"{100 * self.band_fraction:.1f}% of edges within [4/5, 4/3] of local target",
        ]
        for i, t in enumerate(self.iterations, start=1):
            lines.append(
                f"iter {i:2d}: {t.splits} splits, {t.collapses} collapses, "
                f"{t.flips} flips, {t.relocations} relocations"
            )
        return "\n".join(lines)

    def save_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "splits", "collapses", "flips", "relocations"])
            for i, t in enumerate(self.iterations, start=1):
                w.writerow([i, t.splits, t.collapses, t.flips, t.relocations])


# -- connectivity helpers on raw arrays ---------------------------------------


def _unique_edges(faces):
    """Sorted unique undirected edges and the per-face edge ids.

    Returns (edges (ne, 2) with i < j, face_edges (nf, 3)); column k of
    face_edges is the edge joining corners k and (k + 1) % 3.
    """
    raw = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    raw = np.sort(raw, axis=1)
    edges, inv = np.unique(raw, axis=0, return_inverse=True)
    return edges, inv.reshape(3, -1).T


def _edge_face_table(face_edges, n_edges):
    """The two incident faces per edge, raising on open or fused edges."""
    order = np.argsort(face_edges.ravel(), kind="stable")
    eid = face_edges.ravel()[order]
    fid = order // 3
    first = np.searchsorted(eid, np.arange(n_edges), side="left")
    last = np.searchsorted(eid, np.arange(n_edges), side="right")
    if not ((last - first) == 2).all():
        raise MeshError("remesher requires every edge to border exactly two faces")
    return np.column_stack([fid[first], fid[first + 1]])


def _csr_rows(indptr, data, idx):
    """Concatenated CSR rows for a batch of keys, with per-key counts."""
    counts = indptr[idx + 1] - indptr[idx]
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=data.dtype), counts
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    pos = np.repeat(indptr[idx] - offsets, counts) + np.arange(total)
    return data[pos], counts


def _valences(faces, n_vertices):
    edges, _ = _unique_edges(faces)
    return np.bincount(edges.ravel(), minlength=n_vertices)


def _neighbors_csr(edges, n_vertices):
    """Vertex adjacency as (indptr, indices), neighbors sorted per vertex."""
    both = np.concatenate([edges, edges[:, ::-1]])
    order = np.lexsort((both[:, 1], both[:, 0]))
    src = both[order, 0]
    dst = both[order, 1]
    indptr = np.zeros(n_vertices + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst


def _vertex_faces_csr(faces, n_vertices):
    """Vertex-to-incident-face map as (indptr, face_indices)."""
    flat = faces.ravel()
    face_ids = np.repeat(np.arange(len(faces)), 3)
    order = np.argsort(flat, kind="stable")
    indptr = np.zeros(n_vertices + 1, dtype=np.int64)
    np.add.at(indptr, flat + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, face_ids[order]


def _patch_boundary_vertices(faces, tags, n_vertices):
    """Vertices incident to both a tagged and an untagged face."""
    if not (tags != "").any():
        return np.zeros(n_vertices, dtype=bool)
    tagged = tags != ""
    on_tagged = np.zeros(n_vertices, dtype=bool)
    on_untagged = np.zeros(n_vertices, dtype=bool)
    on_tagged[faces[tagged].ravel()] = True
    on_untagged[faces[~tagged].ravel()] = True
    return on_tagged & on_untagged


def _face_normals(vertices, faces):
    c = vertices[faces]
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    return n  # scaled by twice the area


class _Remesher:
    """Mutable remeshing state over raw arrays."""

    def __init__(self, mesh, spec, projector):
        self.spec = spec
        self.v = mesh.vertices.copy()
        self.f = mesh.faces.copy()
        self.tags = mesh.face_tags.copy()
        self.projector = projector

        if spec.family != "uniform":
            if spec.patch_label == "" or spec.patch_label not in mesh.tag_labels():
                raise MeshError(
                    f"grading family {spec.family!r} needs faces tagged {spec.patch_label!r}"
                )
            self.center = patch_centroid(mesh, spec.patch_label)
        else:
            self.center = np.zeros(3)
        if spec.d_max_m is not None:
            self.d_max = float(spec.d_max_m)
        else:
            edges, _ = _unique_edges(self.f)
            mids = 0.5 * (self.v[edges[:, 0]] + self.v[edges[:, 1]])
            self.d_max = float(np.linalg.norm(mids - self.center, axis=1).max()) or 1.0

    def targets_m(self, edges):
        """Local target lengths for vertex-pair rows, in meters."""
        dbar = edge_relative_distance(self.v, edges, self.center, self.d_max)
        return target_edge_length(self.spec, dbar) * 1e-3

    # -- split ---------------------------------------------------------------

    def split_pass(self):
        edges, face_edges = _unique_edges(self.f)
        lengths = np.linalg.norm(self.v[edges[:, 0]] - self.v[edges[:, 1]], axis=1)
        long = lengths > SPLIT_FACTOR * self.targets_m(edges)
        n_split = int(long.sum())
        if n_split == 0:
            return 0

        mid_id = np.full(len(edges), -1, dtype=np.int64)
        mid_id[long] = len(self.v) + np.arange(n_split)
        mids = 0.5 * (self.v[edges[long, 0]] + self.v[edges[long, 1]])
        self.v = np.concatenate([self.v, mids])

        marked = long[face_edges]  # (nf, 3); edge k joins corners k, k+1
        pattern = marked[:, 0] * 1 + marked[:, 1] * 2 + marked[:, 2] * 4
        out_faces = [self.f[pattern == 0]]
        out_tags = [self.tags[pattern == 0]]

        def emit(sel, *children):
            fa = self.f[sel]
            m = mid_id[face_edges[sel]]
            cols = {"v0": fa[:, 0], "v1": fa[:, 1], "v2": fa[:, 2], "m0": m[:, 0], "m1": m[:, 1], "m2": m[:, 2]}
            for tri in children:
                out_faces.append(np.column_stack([cols[name] for name in tri]))
                out_tags.append(self.tags[sel])

        # one split edge (rotations of the same pattern)
        emit(pattern == 1, ("v0", "m0", "v2"), ("m0", "v1", "v2"))
        emit(pattern == 2, ("v1", "m1", "v0"), ("m1", "v2", "v0"))
        emit(pattern == 4, ("v2", "m2", "v1"), ("m2", "v0", "v1"))
        # two split edges: corner triangle plus a fixed quad diagonal
        emit(pattern == 3, ("m0", "v1", "m1"), ("v0", "m0", "m1"), ("v0", "m1", "v2"))
        emit(pattern == 6, ("m1", "v2", "m2"), ("v1", "m1", "m2"), ("v1", "m2", "v0"))
        emit(pattern == 5, ("m2", "v0", "m0"), ("v2", "m2", "m0"), ("v2", "m0", "v1"))
        # all three: midpoint triangle and three corners
        emit(
            pattern == 7,
            ("v0", "m0", "m2"),
            ("m0", "v1", "m1"),
            ("m2", "m1", "v2"),
            ("m0", "m1", "m2"),
        )
        self.f = np.concatenate(out_faces)
        self.tags = np.concatenate(out_tags)
        return n_split

    # -- collapse --------------------------------------------------------------

    def collapse_pass(self):
        """One greedy independent-set sub-pass; returns accepted count."""
        nv = len(self.v)
        edges, face_edges = _unique_edges(self.f)
        lengths = np.linalg.norm(self.v[edges[:, 0]] - self.v[edges[:, 1]], axis=1)
        targets = self.targets_m(edges)
        cand = np.flatnonzero(lengths < COLLAPSE_FACTOR * targets)
        if len(cand) == 0:
            return 0
        ratio = lengths[cand] / targets[cand]
        cand = cand[np.lexsort((cand, ratio))][:_COLLAPSE_CHUNK]

        indptr, nbr = _neighbors_csr(edges, nv)
        f_indptr, f_ids = _vertex_faces_csr(self.f, nv)
        valence = np.diff(indptr)
        boundary = _patch_boundary_vertices(self.f, self.tags, nv)
        normals = _face_normals(self.v, self.f)
        edge_face = _edge_face_table(face_edges, len(edges))

        a = edges[cand, 0]
        b = edges[cand, 1]
        removed = edge_face[cand]
        o1 = self.f[removed[:, 0]].sum(axis=1) - a - b
        o2 = self.f[removed[:, 1]].sum(axis=1) - a - b

        # the link of the edge must be exactly the two opposite corners
        ones = np.ones(2 * len(edges), dtype=np.int8)
        adj = csr_matrix(
            (ones, (np.concatenate([edges[:, 0], edges[:, 1]]), np.concatenate([edges[:, 1], edges[:, 0]]))),
            shape=(nv, nv),
        )
        common = np.asarray(adj[a].multiply(adj[b]).sum(axis=1)).ravel()
        link_ok = common == 2
        opp_ok = (valence[o1] >= 4) & (valence[o2] >= 4)

        # collapse target: midpoint, or the patch-boundary endpoint
        take_a = boundary[a] & ~boundary[b]
        take_b = boundary[b] & ~boundary[a]
        target = 0.5 * (self.v[a] + self.v[b])
        target[take_a] = self.v[a[take_a]]
        target[take_b] = self.v[b[take_b]]

        ok = link_ok & opp_ok
        ok &= self._collapse_geometry_ok(cand, a, b, target, indptr, nbr, f_indptr, f_ids, normals)

        # greedy independent set with live tag bookkeeping
        tag_counts = {}
        for t in np.unique(self.tags):
            if t:
                tag_counts[t] = int((self.tags == t).sum())
        touched = np.zeros(nv, dtype=bool)
        accepted = []
        for i in np.flatnonzero(ok):
            ai, bi = a[i], b[i]
            if touched[ai] or touched[bi] or touched[o1[i]] or touched[o2[i]]:
                continue
            drop = {}
            for t in (self.tags[removed[i, 0]], self.tags[removed[i, 1]]):
                if t:
                    drop[t] = drop.get(t, 0) + 1
            if any(tag_counts[t] - n <= 0 for t, n in drop.items()):
                continue
            for t, n in drop.items():
                tag_counts[t] -= n
            accepted.append(i)
            touched[ai] = touched[bi] = True
            touched[nbr[indptr[ai] : indptr[ai + 1]]] = True
            touched[nbr[indptr[bi] : indptr[bi + 1]]] = True
        if not accepted:
            return 0
        acc = np.array(accepted)

        # survivor keeps the target position; loser is remapped onto it
        surv = np.where(take_b[acc], b[acc], np.minimum(a[acc], b[acc]))
        surv = np.where(take_a[acc], a[acc], surv)
        lose = np.where(surv == a[acc], b[acc], a[acc])
        self.v[surv] = target[acc]
        remap = np.arange(nv)
        remap[lose] = surv
        f2 = remap[self.f]
        keep = (f2[:, 0] != f2[:, 1]) & (f2[:, 1] != f2[:, 2]) & (f2[:, 2] != f2[:, 0])
        self.f = f2[keep]
        self.tags = self.tags[keep]
        self._compact_vertices()
        return len(acc)

    def _collapse_geometry_ok(self, cand, a, b, target, indptr, nbr, f_indptr, f_ids, normals):
        """Vectorized normal-flip and new-edge-length guards."""
        ok = np.ones(len(cand), dtype=bool)

        # new edge lengths from the collapse target to the union ring
        ring_a, counts_a = _csr_rows(indptr, nbr, a)
        ring_b, counts_b = _csr_rows(indptr, nbr, b)
        ring = np.concatenate([ring_a, ring_b])
        rows = np.concatenate(
            [
                np.repeat(np.arange(len(cand)), counts_a),
                np.repeat(np.arange(len(cand)), counts_b),
            ]
        )
        keep = (ring != a[rows]) & (ring != b[rows])
        rows, ring = rows[keep], ring[keep]
        mids = 0.5 * (target[rows] + self.v[ring])
        dbar = np.clip(np.linalg.norm(mids - self.center, axis=1) / self.d_max, 0.0, 1.0)
        limit = target_edge_length(self.spec, dbar) * 1e-3 * SPLIT_FACTOR
        too_long = np.linalg.norm(target[rows] - self.v[ring], axis=1) > limit
        ok[np.unique(rows[too_long])] = False

        # normal inversion / degeneracy on surviving faces around a and b
        faces_a, fcounts_a = _csr_rows(f_indptr, f_ids, a)
        faces_b, fcounts_b = _csr_rows(f_indptr, f_ids, b)
        faces_ab = np.concatenate([faces_a, faces_b])
        frows = np.concatenate(
            [
                np.repeat(np.arange(len(cand)), fcounts_a),
                np.repeat(np.arange(len(cand)), fcounts_b),
            ]
        )
        tri = self.f[faces_ab]
        move = (tri == a[frows][:, None]) | (tri == b[frows][:, None])
        # faces containing both endpoints disappear in the collapse; the
        # guard only applies to the survivors
        dies = move.sum(axis=1) == 2
        corners = self.v[tri]
        rows_idx, corner_idx = np.where(move)
        corners[rows_idx, corner_idx] = target[frows[rows_idx]]
        new_n = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
        old_n = normals[faces_ab]
        bad = (np.einsum("ij,ij->i", new_n, old_n) <= 0) | (
            np.linalg.norm(new_n, axis=1) < 2 * AREA_EPS
        )
        ok[np.unique(frows[bad & ~dies])] = False
        return ok

    # -- flip ------------------------------------------------------------------

    def flip_pass(self):
        nv = len(self.v)
        edges, face_edges = _unique_edges(self.f)
        edge_face = _edge_face_table(face_edges, len(edges))

        a, b = edges[:, 0].copy(), edges[:, 1].copy()
        f1, f2 = edge_face[:, 0].copy(), edge_face[:, 1].copy()
        # orient so that f1 is the face traversing a -> b; the replacement
        # faces below rely on this to keep the mesh consistently wound
        x, y, z = self.f[f1, 0], self.f[f1, 1], self.f[f1, 2]
        has_ab = ((x == a) & (y == b)) | ((y == a) & (z == b)) | ((z == a) & (x == b))
        f1[~has_ab], f2[~has_ab] = f2[~has_ab], f1[~has_ab]

        o1 = self.f[f1].sum(axis=1) - a - b
        o2 = self.f[f2].sum(axis=1) - a - b
        valence = _valences(self.f, nv)

        va, vb, w1, w2 = valence[a], valence[b], valence[o1], valence[o2]
        gain = (
            (va - 7) ** 2
            + (vb - 7) ** 2
            + (w1 - 5) ** 2
            + (w2 - 5) ** 2
            - (va - 6) ** 2
            - (vb - 6) ** 2
            - (w1 - 6) ** 2
            - (w2 - 6) ** 2
        )
        ok = (gain < 0) & (va >= 4) & (vb >= 4) & (self.tags[f1] == self.tags[f2])

        # no existing edge between the opposite corners
        key = edges[:, 0] * nv + edges[:, 1]
        lo = np.minimum(o1, o2)
        hi = np.maximum(o1, o2)
        ok &= ~np.isin(lo * nv + hi, key)

        # foldover: both replacement triangles must stay aligned with the
        # local orientation
        n_old = _face_normals(self.v, self.f)
        n_ref = n_old[f1] + n_old[f2]
        new1 = np.cross(self.v[o2] - self.v[a], self.v[o1] - self.v[a])
        new2 = np.cross(self.v[o1] - self.v[b], self.v[o2] - self.v[b])
        ok &= np.einsum("ij,ij->i", new1, n_ref) > 0
        ok &= np.einsum("ij,ij->i", new2, n_ref) > 0
        ok &= np.linalg.norm(new1, axis=1) > 2 * AREA_EPS
        ok &= np.linalg.norm(new2, axis=1) > 2 * AREA_EPS

        touched = np.zeros(nv, dtype=bool)
        accepted = []
        for i in np.flatnonzero(ok):
            quad = (a[i], b[i], o1[i], o2[i])
            if any(touched[q] for q in quad):
                continue
            accepted.append(i)
            for q in quad:
                touched[q] = True
        if not accepted:
            return 0
        acc = np.array(accepted)
        self.f[f1[acc]] = np.column_stack([a[acc], o2[acc], o1[acc]])
        self.f[f2[acc]] = np.column_stack([b[acc], o1[acc], o2[acc]])
        return len(acc)

    # -- smooth ------------------------------------------------------------------

    def smooth_pass(self, damping=0.5):
        nv = len(self.v)
        areas2 = np.linalg.norm(_face_normals(self.v, self.f), axis=1)
        centroids = self.v[self.f].mean(axis=1)
        w_sum = np.zeros(nv)
        acc = np.zeros((nv, 3))
        for kcol in range(3):
            np.add.at(w_sum, self.f[:, kcol], areas2)
            np.add.at(acc, self.f[:, kcol], centroids * areas2[:, None])
        n_acc = np.zeros((nv, 3))
        fn = _face_normals(self.v, self.f)
        for kcol in range(3):
            np.add.at(n_acc, self.f[:, kcol], fn)
        norm = np.linalg.norm(n_acc, axis=1, keepdims=True)
        n_hat = n_acc / np.maximum(norm, 1e-300)

        goal = acc / np.maximum(w_sum, 1e-300)[:, None]
        step = goal - self.v
        step -= np.einsum("ij,ij->i", step, n_hat)[:, None] * n_hat

        free = ~_patch_boundary_vertices(self.f, self.tags, nv)
        moved = self.v.copy()
        moved[free] += damping * step[free]
        projected, _, _ = self.projector.project(moved)
        self.v = projected
        return int(free.sum())

    # -- driver --------------------------------------------------------------------

    def _compact_vertices(self):
        used = np.unique(self.f)
        remap = np.full(len(self.v), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        self.v = self.v[used]
        self.f = remap[self.f]

    def run(self):
        trace = []
        for _ in range(self.spec.iterations):
            n_split = self.split_pass()
            n_collapse = 0
            while True:
                got = self.collapse_pass()
                if got == 0:
                    break
                n_collapse += got
            n_flip = 0
            while True:
                got = self.flip_pass()
                if got == 0:
                    break
                n_flip += got
            n_moved = self.smooth_pass()
            trace.append(IterationTrace(n_split, n_collapse, n_flip, n_moved))
        return trace

    def band_fraction(self):
        edges, _ = _unique_edges(self.f)
        lengths = np.linalg.norm(self.v[edges[:, 0]] - self.v[edges[:, 1]], axis=1)
        targets = self.targets_m(edges)
        good = (lengths >= COLLAPSE_FACTOR * targets) & (lengths <= SPLIT_FACTOR * targets)
        return float(good.mean())


def remesh(mesh, spec, projector=None):
    """Regrade `mesh` toward the local target edge lengths of `spec`.

    Returns (new mesh, report). The geometry is continually projected back
    onto the input surface, so the output approximates the same shape at
    the new resolution. Raises MeshError if the result fails validation
    (internal guard) or if the patch tag `spec` asks for is missing.
    """
    state = _Remesher(mesh, spec, projector or SurfaceProjector(mesh))
    trace = state.run()
    out = TriangleMesh(state.v, state.f, state.tags)
    require_valid(out)
    report = GradedMeshReport(
        stats=mesh_stats(out),
        iterations=tuple(trace),
        band_fraction=state.band_fraction(),
        input_faces=mesh.n_faces,
    )
    return out, report
