"""Exterior evaluation grids on a sphere around the scatterer.

Two families are provided:

* an equi-angular grid in interaural-polar coordinates (poles on the
  interaural y axis), used for numerical-accuracy studies, and
* a measurement-style grid in azimuth/elevation coordinates with a polar
  gap below -30 degrees elevation.

Each grid carries per-point quadrature weights for a sin-weighted rectangle
rule on the sphere, so that weighted discrete norms approximate continuous
surface norms, plus an ipsilateral/contralateral hemisphere label relative
to the +y reference direction (points with y == 0 count as ipsilateral).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

FULL_SPHERE_STERADIANS = 4.0 * np.pi


def interaural_to_cartesian(lateral_deg, polar_deg, radius_m):
    """Map interaural-polar angles to cartesian positions.

    lateral in [-90, 90] measures elevation toward the +y pole (the left
    ear side); polar rotates around that axis with 0 degrees in front (+x)
    and 90 degrees above (+z). Accepts scalars or arrays, broadcasting.
    """
    lat = np.deg2rad(np.asarray(lateral_deg, dtype=np.float64))
    pol = np.deg2rad(np.asarray(polar_deg, dtype=np.float64))
    if np.any(np.abs(lat) > np.pi / 2 + 1e-12):
        raise ValueError("lateral angle must lie in [-90, 90] degrees")
    x = radius_m * np.cos(lat) * np.cos(pol)
    y = radius_m * np.sin(lat)
    z = radius_m * np.cos(lat) * np.sin(pol)
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def cartesian_to_interaural(points):
    """Inverse of `interaural_to_cartesian`: (lateral, polar) in degrees.

    Polar is wrapped into [0, 360); at the poles it is reported as 0.
    """
    p = np.asarray(points, dtype=np.float64)
    r = np.linalg.norm(p, axis=-1)
    lat = np.rad2deg(np.arcsin(np.clip(p[..., 1] / r, -1.0, 1.0)))
    pol = np.rad2deg(np.arctan2(p[..., 2], p[..., 0])) % 360.0
    pol = np.where(np.abs(lat) >= 90.0 - 1e-13, 0.0, pol)
    return lat, pol


def spherical_to_cartesian(azimuth_deg, elevation_deg, radius_m):
    """Azimuth/elevation angles (z up, azimuth 0 = +x, 90 = +y) to cartesian."""
    az = np.deg2rad(np.asarray(azimuth_deg, dtype=np.float64))
    el = np.deg2rad(np.asarray(elevation_deg, dtype=np.float64))
    x = radius_m * np.cos(el) * np.cos(az)
    y = radius_m * np.cos(el) * np.sin(az)
    z = radius_m * np.sin(el)
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


@dataclass(frozen=True)
class EvalGrid:
    """Immutable set of exterior evaluation points on a sphere.

    `coordinates` holds the native angle pair per point in degrees:
    (lateral, polar) for the interaural grid, (azimuth, elevation) for the
    gap grid. `weights` are solid-angle quadrature weights (steradians);
    `hemisphere` holds "ipsi" or "contra" per point.
    """

    points: np.ndarray
    coordinates: np.ndarray
    radius_m: float
    weights: np.ndarray
    hemisphere: np.ndarray
    name: str = field(default="grid")

    def __post_init__(self):
        for a in (self.points, self.coordinates, self.weights, self.hemisphere):
            a.setflags(write=False)
        if not (len(self.points) == len(self.coordinates) == len(self.weights) == len(self.hemisphere)):
            raise ValueError("grid arrays must have one row per point")

    def __len__(self):
        return len(self.points)

    @property
    def n_points(self):
        return len(self.points)

    def hemisphere_mask(self, which):
        """Boolean mask for 'all', 'ipsi' or 'contra'."""
        if which == "all":
            return np.ones(len(self.points), dtype=bool)
        if which in ("ipsi", "contra"):
            return self.hemisphere == which
        raise ValueError(f"unknown hemisphere selector {which!r}")

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "x", "y", "z", "coord1", "coord2", "weight", "hemisphere"])
            for i in range(len(self.points)):
                w.writerow(
                    [
                        i,
                        repr(float(self.points[i, 0])),
                        repr(float(self.points[i, 1])),
                        repr(float(self.points[i, 2])),
                        repr(float(self.coordinates[i, 0])),
                        repr(float(self.coordinates[i, 1])),
                        repr(float(self.weights[i])),
                        str(self.hemisphere[i]),
                    ]
                )


def _hemisphere_labels(points):
    # reference direction +y; the y == 0 great circle counts as ipsilateral
    return np.where(points[:, 1] >= 0.0, "ipsi", "contra").astype("<U6")


def _polar_cap_weight(half_angle_rad):
    # solid angle of a spherical cap of the given angular radius
    return 2.0 * np.pi * (1.0 - np.cos(half_angle_rad))


def make_eqa_grid(radius_m=1.2, lateral_step_deg=2.5, polar_step_deg=5.0):
    """Equi-angular interaural-polar grid with collapsed poles.

    Construction: lateral angles run over [-90, 90] at the given step; the
    two extreme rings degenerate to the interaural poles and contribute one
    point each; every interior ring carries polar angles over [0, 360) at
    the polar step. Points are ordered by lateral ring ascending (south
    pole first), then polar angle ascending. Defaults give 71 interior
    rings of 72 points plus 2 poles = 5114 points.

    Weights: per interior point, (polar step) x (lateral step) x
    sin(angle from the interaural pole); per pole, the exact solid angle
    of the cap of angular radius (lateral step)/2. All weights are
    positive and sum to ~4 pi.
    """
    lateral_step = float(lateral_step_deg)
    polar_step = float(polar_step_deg)
    if lateral_step <= 0 or polar_step <= 0:
        raise ValueError("angle steps must be positive")
    n_lat = 180.0 / lateral_step
    n_pol = 360.0 / polar_step
    if abs(n_lat - round(n_lat)) > 1e-9 or abs(n_pol - round(n_pol)) > 1e-9:
        raise ValueError(
            f"steps must divide their ranges evenly: 180/{lateral_step:g} and 360/{polar_step:g}"
        )
    n_lat, n_pol = int(round(n_lat)), int(round(n_pol))

    lats, pols, weights = [], [], []
    dlat = np.deg2rad(lateral_step)
    dpol = np.deg2rad(polar_step)
    for i in range(n_lat + 1):
        lat = -90.0 + i * lateral_step
        if i == 0 or i == n_lat:
            lats.append(np.array([lat]))
            pols.append(np.array([0.0]))
            weights.append(np.array([_polar_cap_weight(dlat / 2.0)]))
        else:
            ring_pol = np.arange(n_pol) * polar_step
            lats.append(np.full(n_pol, lat))
            pols.append(ring_pol)
            colat = np.deg2rad(90.0 - lat)  # angle from the +y pole
            weights.append(np.full(n_pol, dpol * dlat * np.sin(colat)))
    lat = np.concatenate(lats)
    pol = np.concatenate(pols)
    w = np.concatenate(weights)
    pts = interaural_to_cartesian(lat, pol, float(radius_m))
    return EvalGrid(
        points=pts,
        coordinates=np.column_stack([lat, pol]),
        radius_m=float(radius_m),
        weights=w,
        hemisphere=_hemisphere_labels(pts),
        name="eqa",
    )


def _gap_grid_azimuths():
    # base ring every 5 degrees, refined to 2.5 degrees where the wrapped
    # azimuth magnitude is at most 30 degrees (the frontal wedge)
    base = np.arange(72) * 5.0
    half = 2.5 + np.arange(72) * 5.0
    wrapped = np.minimum(half, 360.0 - half)
    return np.sort(np.concatenate([base, half[wrapped <= 30.0]]))


def make_ari_grid(radius_m=1.2):
    """Measurement-style azimuth/elevation grid with a polar gap.

    Construction (deterministic): elevation runs from -30 to +90 degrees in
    5 degree steps; the +90 ring degenerates to the top pole and contributes
    a single point. Each other ring carries azimuths on a 5 degree base grid
    refined to 2.5 degrees inside the frontal wedge |azimuth| <= 30 degrees,
    giving 84 azimuths per ring: 24 rings x 84 + 1 pole = 2017 points.
    Points are ordered by elevation ascending, then azimuth ascending.

    Weights: per-point azimuth gap (half the distance to each ring
    neighbor) x elevation step x cos(elevation); the pole gets the exact
    cap weight. Published counts for grids of this family differ; the
    count here follows this documented construction.
    """
    elev_step = 5.0
    elevations = np.arange(-30.0, 90.0 + 1e-9, elev_step)
    ring_az = _gap_grid_azimuths()

    azs, els, weights = [], [], []
    # per-point azimuth spacing: half-gap to each circular neighbor
    gaps = np.diff(np.concatenate([ring_az, [ring_az[0] + 360.0]]))
    az_span = np.deg2rad((gaps + np.roll(gaps, 1)) / 2.0)
    del_rad = np.deg2rad(elev_step)
    for el in elevations:
        if el >= 90.0 - 1e-9:
            azs.append(np.array([0.0]))
            els.append(np.array([90.0]))
            weights.append(np.array([_polar_cap_weight(del_rad / 2.0)]))
        else:
            azs.append(ring_az)
            els.append(np.full(len(ring_az), el))
            weights.append(az_span * del_rad * np.cos(np.deg2rad(el)))
    az = np.concatenate(azs)
    el = np.concatenate(els)
    w = np.concatenate(weights)
    pts = spherical_to_cartesian(az, el, float(radius_m))
    return EvalGrid(
        points=pts,
        coordinates=np.column_stack([az, el]),
        radius_m=float(radius_m),
        weights=w,
        hemisphere=_hemisphere_labels(pts),
        name="ari",
    )
