"""Burton-Miller collocation BEM for the exterior Helmholtz problem.

Conventions (see waves.py): time factor e^{+i omega t}, outgoing kernel
g(r) = e^{-ikr}/(4 pi r), outward unit normals, sound pressure p = i rho
omega phi. Elements are piecewise constant with collocation at face
centroids.

With the single/double layer operators S, D, the adjoint double layer K'
and the hypersingular operator N, the exterior Neumann problem satisfies

    phi/2 - D phi + S q = phi_inc           (field equation)
    N phi - K' q - q/2 = -d_n phi_inc       (normal-derivative equation)

where q = d phi/d n is known from the boundary velocity. The solver uses
the combined row (field + eta * derivative), eta = i/k:

    (I/2 - D + eta N) phi = phi_inc - eta d_n phi_inc - S q + eta (q/2 + K' q)

which stays uniquely solvable at interior resonances of the complementary
problem.

Static (k = 0) parts of the strongly singular operators are evaluated in
closed form: the double layer via the van Oosterom-Strackee signed solid
angle, and the edge line integral of the Maue-regularized hypersingular
operator via the Biot-Savart segment formula. The remaining dynamic
kernels are bounded and integrated by Gauss rules, with 4-way subdivision
when the collocation point sits within two diameters of an element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError
from scipy.linalg import solve as _dense_solve
from scipy.sparse.linalg import gmres

from .fields import PressureField
from .mesh import MeshError
from .projection import SurfaceProjector
from .quadrature import (
    rule_arrays,
    segment_points,
    segment_rule,
    subdivide4,
    triangle_points,
)
from .waves import FOUR_PI, Medium

DENSE_CAP_DEFAULT = 8000
NEAR_DIAMETERS = 2.0  # refinement radius in units of the element diameter
NEAR_LEVELS = 3  # 4**levels subdivision children per near element
DIRECT_SOLVER_CAP = 3000  # 'auto' switches to GMRES above this size


class SolverError(RuntimeError):
    """Linear solve failed (singular system or iteration cap)."""


@dataclass(frozen=True)
class PointSource:
    """Monopole excitation; incident pressure strength * e^{-ikr} / (4 pi r)."""

    position: tuple
    strength: complex = 1.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        if pos.shape != (3,) or not np.all(np.isfinite(pos)):
            raise ValueError("source position must be a finite 3-vector")
        object.__setattr__(self, "position", tuple(float(v) for v in pos))


@dataclass(frozen=True)
class VibratingPatch:
    """Uniform outward normal velocity on the faces tagged `label`, m/s."""

    label: str
    velocity: float = 1.0

    def __post_init__(self):
        if not self.label:
            raise ValueError("patch label must be non-empty")


@dataclass(frozen=True)
class BemProblem:
    """One exterior Helmholtz problem on a closed mesh at wavenumber k."""

    mesh: object
    k: float
    excitation: object
    medium: Medium = Medium()

    def __post_init__(self):
        if not (self.k > 0 and math.isfinite(self.k)):
            raise ValueError("wavenumber must be positive and finite")
        if isinstance(self.excitation, VibratingPatch):
            if self.excitation.label not in self.mesh.tag_labels():
                raise ValueError(
                    f"mesh has no faces tagged {self.excitation.label!r}"
                )
        elif isinstance(self.excitation, PointSource):
            x = np.asarray(self.excitation.position)[None, :]
            if points_inside(self.mesh, x)[0]:
                raise ValueError("point source lies inside the mesh")
        else:
            raise ValueError("excitation must be a PointSource or a VibratingPatch")

    @property
    def omega(self):
        return self.k * self.medium.c

    def normal_velocity(self):
        """Prescribed outward normal velocity per face (m/s)."""
        v = np.zeros(self.mesh.n_faces)
        if isinstance(self.excitation, VibratingPatch):
            v[self.mesh.faces_with_tag(self.excitation.label)] = self.excitation.velocity
        return v

    def potential_flux(self):
        """q = d phi/d n per face; the momentum equation gives v = -grad phi."""
        return -self.normal_velocity().astype(np.complex128)


@dataclass(frozen=True)
class BoundarySolution:
    """Velocity potential per face solving a BemProblem."""

    phi: np.ndarray
    problem: BemProblem
    method: str
    residual_history: tuple

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.complex128)
        if phi.shape != (self.problem.mesh.n_faces,):
            raise ValueError("potential vector length must equal the face count")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    def surface_pressure(self):
        return 1j * self.problem.medium.rho * self.problem.omega * self.phi


# -- geometry ------------------------------------------------------------------


def solid_angles(points, corners):
    """Signed solid angle of each triangle seen from each point.

    points (m, 3), corners (n, 3, 3) -> (m, n). Positive for a triangle
    wound counterclockwise around the viewing direction, so a closed
    outward-oriented mesh sums to 4 pi from inside and 0 from outside.
    """
    a = corners[None, :, 0, :] - points[:, None, :]
    b = corners[None, :, 1, :] - points[:, None, :]
    c = corners[None, :, 2, :] - points[:, None, :]
    la = np.linalg.norm(a, axis=-1)
    lb = np.linalg.norm(b, axis=-1)
    lc = np.linalg.norm(c, axis=-1)
    triple = np.einsum("mnd,mnd->mn", a, np.cross(b, c))
    denom = (
        la * lb * lc
        + np.einsum("mnd,mnd->mn", a, b) * lc
        + np.einsum("mnd,mnd->mn", b, c) * la
        + np.einsum("mnd,mnd->mn", c, a) * lb
    )
    return 2.0 * np.arctan2(triple, denom)


def points_inside(mesh, points):
    """Winding-number interior test for a closed mesh."""
    points = np.asarray(points, dtype=np.float64)
    corners = mesh.vertices[mesh.faces]
    inside = np.empty(len(points), dtype=bool)
    chunk = _row_chunk_size(len(corners))
    for i0 in range(0, len(points), chunk):
        i1 = min(len(points), i0 + chunk)
        w = solid_angles(points[i0:i1], corners).sum(axis=1)
        inside[i0:i1] = w > 2.0 * math.pi
    return inside


def _biot_savart(points, corners):
    """Closed-form loop integral oint (y - x) x dl / |y - x|^3 per triangle.

    Each segment contributes the Biot-Savart form (a x b)(|a| + |b|) /
    (|a||b|(|a||b| + a.b)). The sum over a triangle's boundary equals the
    gradient grad_x of the solid angle it subtends, so the static edge
    term of the hypersingular operator is -n_i . result / (4 pi).
    Returns (m, n, 3).
    """
    m = points.shape[0]
    n = corners.shape[0]
    out = np.zeros((m, n, 3))
    for e in range(3):
        p1 = corners[:, e, :]
        p2 = corners[:, (e + 1) % 3, :]
        a = p1[None, :, :] - points[:, None, :]
        b = p2[None, :, :] - points[:, None, :]
        la = np.linalg.norm(a, axis=-1)
        lb = np.linalg.norm(b, axis=-1)
        denom = la * lb * (la * lb + np.einsum("mnd,mnd->mn", a, b))
        out += np.cross(a, b) * ((la + lb) / denom)[..., None]
    return out


class _Geometry:
    """Per-face arrays shared by assembly and field evaluation."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.corners = mesh.vertices[mesh.faces]
        self.centroids = mesh.face_centroids
        self.areas = mesh.face_areas
        raw = np.cross(
            self.corners[:, 1] - self.corners[:, 0], self.corners[:, 2] - self.corners[:, 0]
        )
        self.normals = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        edge_len = np.stack(
            [
                np.linalg.norm(self.corners[:, (e + 1) % 3] - self.corners[:, e], axis=1)
                for e in range(3)
            ]
        )
        self.diameters = edge_len.max(axis=0)
        self.radius = np.linalg.norm(
            self.corners - self.centroids[:, None, :], axis=2
        ).max(axis=1)
        heights = 2.0 * self.areas / self.diameters
        if np.any(heights < 1e-6 * self.diameters):
            worst = int(np.argmin(heights / self.diameters))
            raise MeshError(f"near-degenerate element {worst} (height/diameter < 1e-6)")


def _static_single_layer_diag(geo):
    """Exact integral of 1/(4 pi r) over each face from its own centroid.

    The face is split at the centroid into three apex triangles; each
    contributes d * ln((t_b + |b|) / (t_a + |a|)) with d the apex-to-edge
    distance and t the corner positions along the edge.
    """
    total = np.zeros(len(geo.areas))
    for e in range(3):
        a = geo.corners[:, e, :] - geo.centroids
        b = geo.corners[:, (e + 1) % 3, :] - geo.centroids
        u = b - a
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        ta = np.einsum("nd,nd->n", a, u)
        tb = np.einsum("nd,nd->n", b, u)
        la = np.linalg.norm(a, axis=1)
        lb = np.linalg.norm(b, axis=1)
        d = np.linalg.norm(a - ta[:, None] * u, axis=1)
        total += d * np.log((tb + lb) / (ta + la))
    return total / FOUR_PI


# -- assembly ------------------------------------------------------------------


def _row_chunk_size(n):
    return max(8, min(256, 12_000_000 // max(n, 1)))


class _LayerEvaluator:
    """Computes S / D / K' / N-edge blocks for batches of field points."""

    def __init__(self, geo, k, quad_rule):
        self.geo = geo
        self.k = k
        bary, bw, edge_order = rule_arrays(quad_rule)
        self.bary = bary
        self.bw = bw
        self.edge_order = edge_order
        self.qp, self.qw = triangle_points(geo.corners, bary, bw)

    def near_pairs(self, points, skip=None):
        """(row, face) pairs needing subdivision, excluding `skip` diagonals."""
        dc = np.linalg.norm(points[:, None, :] - self.geo.centroids[None, :, :], axis=2)
        near = dc < NEAR_DIAMETERS * self.geo.diameters[None, :] + self.geo.radius[None, :]
        if skip is not None:
            near[np.arange(len(points)), skip] = False
        return np.nonzero(near)

    def sd_blocks(self, points, *, row_faces=None, with_kprime_cols=None):
        """Single and double layer rows at `points`, plus optional extras.

        row_faces: face index per point when the points are collocation
        centroids (enables exact diagonal treatment). with_kprime_cols:
        row normals are needed to form K' columns for those faces.

        Returns dict with S, D, and (when requested) KP (m, len(cols)).
        """
        geo = self.geo
        k = self.k
        m = len(points)
        n = len(geo.areas)

        S = np.zeros((m, n), dtype=np.complex128)
        Drem = np.zeros((m, n), dtype=np.complex128)
        for qi in range(self.bary.shape[0]):
            d = points[:, None, :] - self.qp[None, :, qi, :]
            r = np.linalg.norm(d, axis=2)
            if row_faces is not None:
                # rules with a centroid node hit r = 0 on the own face;
                # substitute 1 and rely on the exact diagonal fill below
                r[np.arange(m), row_faces] = 1.0
            E = np.exp(-1j * k * r)
            w = self.qw[:, qi]
            S += w * E / (FOUR_PI * r)
            dn = np.einsum("mnd,nd->mn", d, geo.normals)
            Drem += w * (E * (1 + 1j * k * r) - 1.0) * dn / (FOUR_PI * r**3)

        Dstat = -solid_angles(points, geo.corners) / FOUR_PI

        # refine near pairs with subdivided elements (full S kernel, dynamic
        # remainder of D; the static D part is already exact)
        ii, jj = self.near_pairs(points, skip=row_faces)
        if len(ii):
            children = subdivide4(geo.corners[jj], NEAR_LEVELS)
            cpts, cw = triangle_points(children, self.bary, self.bw)
            cpts = cpts.reshape(len(ii), -1, 3)
            cw = cw.reshape(len(ii), -1)
            d = points[ii, None, :] - cpts
            r = np.linalg.norm(d, axis=2)
            E = np.exp(-1j * k * r)
            S[ii, jj] = (cw * E / (FOUR_PI * r)).sum(axis=1)
            dn = np.einsum("pqd,pd->pq", d, geo.normals[jj])
            Drem[ii, jj] = (
                cw * (E * (1 + 1j * k * r) - 1.0) * dn / (FOUR_PI * r**3)
            ).sum(axis=1)

        if row_faces is not None:
            rows = np.arange(m)
            # singular diagonal: analytic static part plus the bounded
            # remainder (e^{-ikr} - 1)/(4 pi r) on three centroid fans
            sub = np.stack(
                [
                    np.stack(
                        [
                            geo.centroids[row_faces],
                            geo.corners[row_faces, e, :],
                            geo.corners[row_faces, (e + 1) % 3, :],
                        ],
                        axis=1,
                    )
                    for e in range(3)
                ],
                axis=1,
            )  # (m, 3, 3, 3)
            spts, sw = triangle_points(sub, self.bary, self.bw)
            dvec = points[:, None, None, :] - spts
            r = np.linalg.norm(dvec, axis=3)
            rem = (sw * (np.exp(-1j * k * r) - 1.0) / (FOUR_PI * r)).sum(axis=(1, 2))
            S[rows, row_faces] = self._static_diag[row_faces] + rem
            # flat-element double layer has no self contribution; the
            # interface jump lives in the I/2 term of the combined row
            Dstat[rows, row_faces] = 0.0
            Drem[rows, row_faces] = 0.0

        out = {"S": S, "D": Dstat + Drem}
        if with_kprime_cols is not None and len(with_kprime_cols):
            out["KP"] = self._kprime(points, with_kprime_cols, row_faces)
        return out

    @property
    def _static_diag(self):
        cached = getattr(self, "_static_diag_cache", None)
        if cached is None:
            cached = _static_single_layer_diag(self.geo)
            self._static_diag_cache = cached
        return cached

    def _kprime(self, points, cols, row_faces):
        """Adjoint double layer columns: -int E(1+ikr)((x-y).n_x)/(4 pi r^3)."""
        geo = self.geo
        k = self.k
        m = len(points)
        # the row normal is the normal of the collocation face
        n_x = geo.normals[row_faces] if row_faces is not None else None
        if n_x is None:
            raise ValueError("K' columns need collocation rows")
        KP = np.zeros((m, len(cols)), dtype=np.complex128)
        own = np.nonzero(row_faces[:, None] == np.asarray(cols)[None, :])
        for qi in range(self.bary.shape[0]):
            d = points[:, None, :] - self.qp[None, cols, qi, :]
            r = np.linalg.norm(d, axis=2)
            r[own] = 1.0
            E = np.exp(-1j * k * r)
            dn = np.einsum("mnd,md->mn", d, n_x)
            KP += -self.qw[cols, qi] * E * (1 + 1j * k * r) * dn / (FOUR_PI * r**3)
        # refinement for rows close to patch columns
        ii, jj = self.near_pairs(points, skip=row_faces)
        keep = np.isin(jj, cols)
        ii, jj = ii[keep], jj[keep]
        if len(ii):
            colmap = {int(cj): i for i, cj in enumerate(cols)}
            local = np.array([colmap[int(cj)] for cj in jj])
            children = subdivide4(geo.corners[jj], NEAR_LEVELS)
            cpts, cw = triangle_points(children, self.bary, self.bw)
            cpts = cpts.reshape(len(ii), -1, 3)
            cw = cw.reshape(len(ii), -1)
            d = points[ii, None, :] - cpts
            r = np.linalg.norm(d, axis=2)
            E = np.exp(-1j * k * r)
            dn = np.einsum("pqd,pd->pq", d, n_x[ii])
            KP[ii, local] = (-cw * E * (1 + 1j * k * r) * dn / (FOUR_PI * r**3)).sum(axis=1)
        # in-plane rows: (x - y) . n_x = 0 exactly on the own face
        KP[own] = 0.0
        return KP

    def n_edge(self, points, row_normals):
        """Edge part of the hypersingular operator: -n_x . oint grad_x G x dl.

        The static part (grad of the subtended solid angle) is exact; the
        bounded dynamic remainder of grad_x G is integrated by Gauss-
        Legendre per edge, using n_x . (g x t) = g . (t x n_x). The
        remainder grows like k^2/r toward a close edge, so near pairs
        (own face included) are redone with a composite rule.
        """
        geo = self.geo
        k = self.k
        out = np.asarray(
            -np.einsum("mnd,md->mn", _biot_savart(points, geo.corners), row_normals)
            / FOUR_PI,
            dtype=np.complex128,
        )
        for e in range(3):
            p1 = geo.corners[:, e, :]
            p2 = geo.corners[:, (e + 1) % 3, :]
            pts, w = segment_points(p1, p2, self.edge_order)
            t_hat = p2 - p1
            t_hat = t_hat / np.linalg.norm(t_hat, axis=1, keepdims=True)
            txn = np.cross(t_hat[None, :, :], row_normals[:, None, :])
            for gi in range(pts.shape[1]):
                d = points[:, None, :] - pts[None, :, gi, :]
                r = np.linalg.norm(d, axis=2)
                scal = (np.exp(-1j * k * r) * (1 + 1j * k * r) - 1.0) / (FOUR_PI * r**3)
                out += w[:, gi] * scal * np.einsum("mnd,mnd->mn", d, txn)

        ii, jj = self.near_pairs(points)
        if len(ii):
            out[ii, jj] += self._edge_remainder_correction(points[ii], row_normals[ii], jj)
        return out

    def _edge_remainder_correction(self, x, n_x, faces):
        """Composite-minus-base edge remainder for near (point, face) pairs."""
        k = self.k
        corners = self.geo.corners[faces]
        base_t, base_w = segment_rule(self.edge_order)
        pieces = 8
        fine_t = np.concatenate([(s + base_t) / pieces for s in range(pieces)])
        fine_w = np.tile(base_w / pieces, pieces)
        corr = np.zeros(len(faces), dtype=np.complex128)
        for e in range(3):
            p1 = corners[:, e, :]
            p2 = corners[:, (e + 1) % 3, :]
            seg = p2 - p1
            length = np.linalg.norm(seg, axis=1)
            t_hat = seg / length[:, None]
            txn = np.cross(t_hat, n_x)
            for t, w, sign in ((fine_t, fine_w, 1.0), (base_t, base_w, -1.0)):
                d = x[:, None, :] - (p1[:, None, :] + t[None, :, None] * seg[:, None, :])
                r = np.linalg.norm(d, axis=2)
                scal = (np.exp(-1j * k * r) * (1 + 1j * k * r) - 1.0) / (FOUR_PI * r**3)
                dt = np.einsum("pqd,pd->pq", d, txn)
                corr += sign * length * ((w[None, :] * scal * dt).sum(axis=1))
        return corr


def _incident(problem, points, normals=None):
    """Incident potential (and its normal derivative when normals given)."""
    scale = 1.0 / (1j * problem.medium.rho * problem.omega)
    if not isinstance(problem.excitation, PointSource):
        phi = np.zeros(len(points), dtype=np.complex128)
        return (phi, phi.copy()) if normals is not None else phi
    src = np.asarray(problem.excitation.position)
    p0 = problem.excitation.strength
    d = points - src
    r = np.linalg.norm(d, axis=1)
    if np.any(r < 1e-12):
        raise ValueError("evaluation point coincides with the source")
    k = problem.k
    phi = p0 * scale * np.exp(-1j * k * r) / (FOUR_PI * r)
    if normals is None:
        return phi
    dg = -p0 * scale * (1 + 1j * k * r) * np.exp(-1j * k * r) / (FOUR_PI * r**2)
    dphi = dg * np.einsum("md,md->m", d, normals) / r
    return phi, dphi


def assemble(problem, *, dense_cap=DENSE_CAP_DEFAULT, quad_rule="tri7"):
    """Dense Burton-Miller system (A, b) for a BemProblem.

    Raises ValueError when the face count exceeds `dense_cap` and MeshError
    on near-degenerate elements.
    """
    mesh = problem.mesh
    n = mesh.n_faces
    if n > dense_cap:
        raise ValueError(
            f"mesh has {n} faces, above the dense assembly cap {dense_cap}; "
            "raise dense_cap explicitly if the memory budget allows"
        )
    geo = _Geometry(mesh)
    k = problem.k
    eta = 1j / k
    layers = _LayerEvaluator(geo, k, quad_rule)

    q = problem.potential_flux()
    cols = np.flatnonzero(q != 0)

    A = np.empty((n, n), dtype=np.complex128)
    b = np.empty(n, dtype=np.complex128)
    chunk = _row_chunk_size(n)
    for i0 in range(0, n, chunk):
        i1 = min(n, i0 + chunk)
        rows = np.arange(i0, i1)
        x = geo.centroids[i0:i1]
        blocks = layers.sd_blocks(x, row_faces=rows, with_kprime_cols=cols)
        S, D = blocks["S"], blocks["D"]
        nn = geo.normals[i0:i1] @ geo.normals.T
        N = k * k * nn * S + layers.n_edge(x, geo.normals[i0:i1])
        A[i0:i1] = -D + eta * N
        A[rows, rows] += 0.5

        phi_inc, dphi_inc = _incident(problem, x, geo.normals[i0:i1])
        rhs = phi_inc - eta * dphi_inc - S @ q + eta * 0.5 * q[i0:i1]
        if len(cols):
            rhs = rhs + eta * (blocks["KP"] @ q[cols])
        b[i0:i1] = rhs
    return A, b


# -- linear solvers ---------------------------------------------------------------


def solve_system(A, b, method="auto", tol=1e-6, max_iterations=1000):
    """Solve A x = b by dense LU or restarted GMRES.

    Returns (x, residual_history, method). The history holds the relative
    residual trace for the iterative path and the final relative residual
    for the direct path.
    """
    n = len(b)
    if A.shape != (n, n):
        raise ValueError("system matrix must be square and match the right-hand side")
    if method == "auto":
        method = "direct" if n <= DIRECT_SOLVER_CAP else "gmres"
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n, dtype=np.complex128), (0.0,), method

    if method == "direct":
        with np.errstate(all="ignore"):
            try:
                x = _dense_solve(A, b)
            except LinAlgError as err:
                raise SolverError(f"direct solve failed: {err}") from err
            rel = float(np.linalg.norm(b - A @ x) / bnorm)
        if not np.isfinite(rel) or rel > max(tol, 1e-8):
            raise SolverError(f"direct solve left relative residual {rel:.3e}")
        return x, (rel,), method

    if method != "gmres":
        raise ValueError(f"unknown solver method {method!r}")

    history = []
    restart = min(300, n, max_iterations)
    x, info = gmres(
        A,
        b,
        rtol=tol,
        atol=0.0,
        restart=restart,
        maxiter=max(1, -(-max_iterations // restart)),
        callback=lambda pr: history.append(float(pr)),
        callback_type="pr_norm",
    )
    rel = float(np.linalg.norm(b - A @ x) / bnorm)
    if info != 0 or rel > tol:
        raise SolverError(
            f"GMRES stopped (info={info}) with relative residual {rel:.3e} > {tol:g}"
        )
    history.append(rel)
    return x, tuple(history), method


def solve(problem, *, method="auto", tol=1e-6, max_iterations=1000,
          dense_cap=DENSE_CAP_DEFAULT, quad_rule="tri7"):
    """Assemble and solve; returns the boundary potential with diagnostics."""
    A, b = assemble(problem, dense_cap=dense_cap, quad_rule=quad_rule)
    phi, history, used = solve_system(A, b, method=method, tol=tol, max_iterations=max_iterations)
    return BoundarySolution(phi=phi, problem=problem, method=used, residual_history=history)


# -- field evaluation ---------------------------------------------------------------


def _representation(solution, points, quad_rule="tri7"):
    """phi_inc + D phi - S q at arbitrary points (no jump term)."""
    problem = solution.problem
    geo = _Geometry(problem.mesh)
    layers = _LayerEvaluator(geo, problem.k, quad_rule)
    q = problem.potential_flux()
    out = np.empty(len(points), dtype=np.complex128)
    chunk = _row_chunk_size(problem.mesh.n_faces)
    for i0 in range(0, len(points), chunk):
        i1 = min(len(points), i0 + chunk)
        x = points[i0:i1]
        blocks = layers.sd_blocks(x)
        out[i0:i1] = _incident(problem, x) + blocks["D"] @ solution.phi - blocks["S"] @ q
    return out


def evaluate_exterior(solution, grid_or_points, *, quad_rule="tri7"):
    """Total sound pressure at exterior points via the representation formula.

    Accepts an EvalGrid or an (m, 3) array. Raises ValueError for points
    inside the mesh or within one element diameter of the surface.
    """
    points = getattr(grid_or_points, "points", grid_or_points)
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError("evaluation points must be an (m, 3) array")
    problem = solution.problem
    mesh = problem.mesh

    max_diam = float(np.max(_Geometry(mesh).diameters))
    dist = SurfaceProjector(mesh).distances(points)
    if np.any(dist < max_diam):
        bad = int(np.argmin(dist))
        raise ValueError(
            f"evaluation point {bad} is {dist[bad]:.4g} m from the surface, "
            f"inside the one-element-diameter guard ({max_diam:.4g} m)"
        )
    if np.any(points_inside(mesh, points)):
        raise ValueError("evaluation points must lie outside the mesh")

    phi = _representation(solution, points, quad_rule)
    return 1j * problem.medium.rho * problem.omega * phi


def interior_residual(solution, points, *, quad_rule="tri7"):
    """Null-field probe: the representation evaluated at interior points,
    scaled to pressure units. Small values indicate a consistent solution."""
    points = np.asarray(points, dtype=np.float64)
    phi = _representation(solution, points, quad_rule)
    return 1j * solution.problem.medium.rho * solution.problem.omega * phi


def patch_source_strength(mesh, patch_label, freq_hz, medium=Medium(), velocity=1.0):
    """Equivalent free-monopole strength of the vibrating patch.

    A small patch of area A moving with normal velocity v has volume
    velocity Q = v A and radiates like a monopole of strength
    i rho omega Q (pressure times meter). Dividing a reciprocal run by
    this makes it comparable to a unit point source at the patch.
    """
    faces = mesh.faces_with_tag(patch_label)
    if len(faces) == 0:
        raise ValueError(f"mesh has no faces tagged {patch_label!r}")
    area = float(mesh.face_areas[faces].sum())
    omega = 2.0 * math.pi * freq_hz
    return 1j * medium.rho * omega * velocity * area


def calc_hrtf_reciprocal(mesh, patch_label, grid, freqs_hz, *, medium=Medium(),
                         velocity=1.0, method="auto", tol=1e-6,
                         dense_cap=DENSE_CAP_DEFAULT, quad_rule="tri7"):
    """Reciprocal HRTF runs: vibrate the tagged patch, listen on the grid.

    Solves one Burton-Miller problem per frequency and stacks the grid
    pressures into a PressureField aligned with `freqs_hz`.
    """
    freqs = [float(f) for f in freqs_hz]
    if not freqs or any(f <= 0 for f in freqs):
        raise ValueError("frequencies must be positive")
    values = np.empty((len(freqs), len(grid.points)), dtype=np.complex128)
    for fi, f in enumerate(freqs):
        problem = BemProblem(
            mesh=mesh,
            k=medium.wavenumber(f),
            excitation=VibratingPatch(label=patch_label, velocity=velocity),
            medium=medium,
        )
        solution = solve(problem, method=method, tol=tol, dense_cap=dense_cap, quad_rule=quad_rule)
        values[fi] = evaluate_exterior(solution, grid, quad_rule=quad_rule)
    return PressureField(freqs_hz=np.asarray(freqs), values=values)
