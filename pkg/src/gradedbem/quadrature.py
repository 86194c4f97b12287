"""Numerical integration rules on triangles and segments.

Barycentric triangle rules (exact through the stated polynomial degree),
midpoint 4-way subdivision for near-singular refinement, and Gauss-Legendre
segment rules for the edge line integrals of the hypersingular operator.
"""

from __future__ import annotations

import numpy as np

# 7-point rule, degree 5 (Radon / Hammer-Marlowe-Stroud)
_A1, _B1, _W1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
_A2, _B2, _W2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
TRI7_BARY = np.array(
    [
        (1 / 3, 1 / 3, 1 / 3),
        (_A1, _B1, _B1),
        (_B1, _A1, _B1),
        (_B1, _B1, _A1),
        (_A2, _B2, _B2),
        (_B2, _A2, _B2),
        (_B2, _B2, _A2),
    ]
)
TRI7_W = np.array([0.225, _W1, _W1, _W1, _W2, _W2, _W2])

# 12-point rule, degree 6 (Dunavant)
_C1, _D1, _V1 = 0.873821971016996, 0.063089014491502, 0.050844906370207
_C2, _D2, _V2 = 0.501426509658179, 0.249286745170910, 0.116786275726379
_E1, _E2, _E3, _V3 = 0.636502499121399, 0.310352451033785, 0.053145049844816, 0.082851075618374
TRI12_BARY = np.array(
    [
        (_C1, _D1, _D1),
        (_D1, _C1, _D1),
        (_D1, _D1, _C1),
        (_C2, _D2, _D2),
        (_D2, _C2, _D2),
        (_D2, _D2, _C2),
        (_E1, _E2, _E3),
        (_E1, _E3, _E2),
        (_E2, _E1, _E3),
        (_E2, _E3, _E1),
        (_E3, _E1, _E2),
        (_E3, _E2, _E1),
    ]
)
TRI12_W = np.array([_V1] * 3 + [_V2] * 3 + [_V3] * 6)

# triangle rule paired with the segment order used for edge line integrals
RULES = {
    "tri7": (TRI7_BARY, TRI7_W, 4),
    "tri12": (TRI12_BARY, TRI12_W, 8),
}


def rule_arrays(name):
    try:
        return RULES[name]
    except KeyError:
        raise ValueError(f"unknown quadrature rule {name!r}, expected one of {sorted(RULES)}")


def triangle_points(corners, bary, weights):
    """Quadrature points and area-scaled weights on a batch of triangles.

    corners: (..., 3, 3); returns points (..., nq, 3) and weights (..., nq)
    that integrate f over each triangle as sum(w * f(points)).
    """
    corners = np.asarray(corners, dtype=np.float64)
    pts = np.einsum("qb,...bd->...qd", bary, corners)
    cross = np.cross(corners[..., 1, :] - corners[..., 0, :], corners[..., 2, :] - corners[..., 0, :])
    area = 0.5 * np.linalg.norm(cross, axis=-1)
    return pts, weights * area[..., None]


def subdivide4(corners, levels):
    """Midpoint-subdivide each triangle `levels` times.

    corners: (n, 3, 3) -> (n, 4**levels, 3, 3); children have equal area.
    """
    out = np.asarray(corners, dtype=np.float64)[:, None, :, :]
    for _ in range(levels):
        a = out[..., 0, :]
        b = out[..., 1, :]
        c = out[..., 2, :]
        ab = 0.5 * (a + b)
        bc = 0.5 * (b + c)
        ca = 0.5 * (c + a)
        children = np.stack(
            [
                np.stack([a, ab, ca], axis=-2),
                np.stack([ab, b, bc], axis=-2),
                np.stack([ca, bc, c], axis=-2),
                np.stack([ab, bc, ca], axis=-2),
            ],
            axis=-3,
        )
        out = children.reshape(children.shape[0], -1, 3, 3)
    return out


def segment_rule(order):
    """Gauss-Legendre nodes and weights rescaled to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def segment_points(starts, ends, order):
    """Quadrature points/weights along straight segments.

    starts, ends: (..., 3); returns points (..., nq, 3) and weights (..., nq)
    scaled by segment length.
    """
    t, w = segment_rule(order)
    starts = np.asarray(starts, dtype=np.float64)
    ends = np.asarray(ends, dtype=np.float64)
    pts = starts[..., None, :] + t[:, None] * (ends - starts)[..., None, :]
    length = np.linalg.norm(ends - starts, axis=-1)
    return pts, w * length[..., None]
