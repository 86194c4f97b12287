"""Exact closest-point queries onto a triangle mesh.

The accelerated path prunes with a kd-tree over face centroids: for a query q
it first measures the exact distance u to the face with the nearest centroid,
then only faces whose centroid lies within u + r_max can possibly beat it
(r_max = largest centroid-to-corner distance over the mesh, since any point of
face f is within r(f) of its centroid). Scanning that candidate set exactly
reproduces the brute-force answer, which `project_brute` provides as an
oracle.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def closest_point_on_triangles(p, a, b, c):
    """Closest points on paired triangles (a, b, c) for query points p.

    All arguments are (n, 3); returns (n, 3). Standard barycentric region
    classification (Ericson, Real-Time Collision Detection 5.1.5), vectorized.
    """
    p, a, b, c = (np.asarray(x, dtype=np.float64) for x in (p, a, b, c))
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def settle(mask, value):
        mask = mask & ~done
        out[mask] = value[mask] if value.ndim == 2 else value
        done[mask] = True

    settle((d1 <= 0) & (d2 <= 0), a)  # vertex A
    settle((d3 >= 0) & (d4 <= d3), b)  # vertex B
    settle((d6 >= 0) & (d5 <= d6), c)  # vertex C

    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = d1 / (d1 - d3)
        settle((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + t_ab[:, None] * ab)
        t_ac = d2 / (d2 - d6)
        settle((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + t_ac[:, None] * ac)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        settle((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + t_bc[:, None] * (c - b))

        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        settle(np.ones(len(p), dtype=bool), a + v[:, None] * ab + w[:, None] * ac)
    return out


def project_brute(mesh, points, chunk=2_000_000):
    """Closest point by scanning every face; the correctness oracle.

    Returns (closest_points, face_indices, distances). Among equidistant
    faces the lowest index wins.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    corners = mesh.face_corners
    nf = len(corners)
    best_d = np.full(len(pts), np.inf)
    best_f = np.zeros(len(pts), dtype=np.int64)
    best_p = np.zeros_like(pts)
    rows = max(1, chunk // max(nf, 1))
    for start in range(0, len(pts), rows):
        sl = slice(start, min(start + rows, len(pts)))
        block = pts[sl]
        qi = np.repeat(np.arange(len(block)), nf)
        fi = np.tile(np.arange(nf), len(block))
        cp = closest_point_on_triangles(
            block[qi], corners[fi, 0], corners[fi, 1], corners[fi, 2]
        )
        d = np.linalg.norm(block[qi] - cp, axis=1)
        order = np.lexsort((fi, d, qi))
        _, first = np.unique(qi[order], return_index=True)
        pick = order[first]
        best_d[sl] = d[pick]
        best_f[sl] = fi[pick]
        best_p[sl] = cp[pick]
    return best_p, best_f, best_d


class SurfaceProjector:
    """Accelerated exact closest-point queries against a fixed mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        self._corners = mesh.face_corners
        self._centroids = mesh.face_centroids
        self._tree = cKDTree(self._centroids)
        self._face_radius = np.linalg.norm(
            self._corners - self._centroids[:, None, :], axis=2
        ).max(axis=1)
        self._r_max = float(self._face_radius.max())

    def project(self, points, k_seed=8):
        """Exact closest points for a batch of queries.

        Returns (closest_points, face_indices, distances); ties resolved
        toward the lowest face index, matching `project_brute`.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = len(pts)
        k = min(k_seed, len(self._centroids))
        _, seed = self._tree.query(pts, k=k)
        seed = seed.reshape(n, k)

        # exact distance to the seed faces gives the pruning radius
        qi = np.repeat(np.arange(n), k)
        fi = seed.ravel()
        cp = closest_point_on_triangles(
            pts[qi], self._corners[fi, 0], self._corners[fi, 1], self._corners[fi, 2]
        )
        d = np.linalg.norm(pts[qi] - cp, axis=1).reshape(n, k)
        u = d.min(axis=1)
        radius = u + self._r_max + 1e-12

        cand = self._tree.query_ball_point(pts, radius)
        counts = np.fromiter((len(c) for c in cand), dtype=np.int64, count=n)
        qi = np.repeat(np.arange(n), counts)
        fi = np.concatenate([np.asarray(c, dtype=np.int64) for c in cand]) if n else np.empty(0, np.int64)
        # tighter per-face prune: face fi can only win if its centroid lies
        # within u + r(fi) of the query
        dc = np.linalg.norm(pts[qi] - self._centroids[fi], axis=1)
        keep = dc <= u[qi] + self._face_radius[fi] + 1e-12
        qi, fi = qi[keep], fi[keep]
        cp = closest_point_on_triangles(
            pts[qi], self._corners[fi, 0], self._corners[fi, 1], self._corners[fi, 2]
        )
        d = np.linalg.norm(pts[qi] - cp, axis=1)
        order = np.lexsort((fi, d, qi))
        _, first = np.unique(qi[order], return_index=True)
        pick = order[first]
        return cp[pick], fi[pick], d[pick]

    def distances(self, points):
        return self.project(points)[2]
