"""Shared acoustic conventions.

Everything in this package assumes the e^{+i omega t} time convention, so the
outgoing free-field Green's function is

    g(r) = exp(-i k r) / (4 pi r)

and sound pressure relates to the velocity potential by p = i rho omega phi.
All kernel code derives from the helpers below so the sign convention lives in
exactly one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class Medium:
    """Homogeneous propagation medium (defaults: air)."""

    rho: float = 1.2  # density, kg/m^3
    c: float = 343.0  # speed of sound, m/s

    def wavenumber(self, freq_hz: float) -> float:
        return 2.0 * math.pi * freq_hz / self.c

    def omega(self, freq_hz: float) -> float:
        return 2.0 * math.pi * freq_hz


def greens(r, k):
    """Free-field Green's function g(r) = exp(-ikr)/(4 pi r)."""
    r = np.asarray(r)
    return np.exp(-1j * k * r) / (FOUR_PI * r)


def greens_dr(r, k):
    """dg/dr = -(1 + ikr) exp(-ikr) / (4 pi r^2)."""
    r = np.asarray(r)
    return -(1.0 + 1j * k * r) * np.exp(-1j * k * r) / (FOUR_PI * r * r)


def greens_drr(r, k):
    """d2g/dr2 = (2 + 2ikr - (kr)^2) exp(-ikr) / (4 pi r^3)."""
    r = np.asarray(r)
    kr = k * r
    return (2.0 + 2j * kr - kr * kr) * np.exp(-1j * kr) / (FOUR_PI * r**3)
