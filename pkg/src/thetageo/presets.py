"""Ready-made test configurations used across demos and the test suite."""

from __future__ import annotations

import math

import numpy as np

from .geodesic import GeodesicSegment
from .lattice import Lattice
from .potential import KahlerPotential, PeriodicPotential, PotentialPath

__all__ = [
    "STANDARD_LADDER",
    "cosine_potential",
    "standard_pair",
    "standard_segment",
    "disk_boundary_blend",
]

STANDARD_LADDER = (16, 32, 64, 128, 256)


def cosine_potential(lattice: Lattice, amplitude: float, frequency=None) -> KahlerPotential:
    """phi with psi(y) = amplitude * cos(2 pi n.y); default n = e_1."""
    n = tuple([1] + [0] * (lattice.m - 1)) if frequency is None else tuple(frequency)
    psi = PeriodicPotential.from_cosines(lattice.m, [(n, amplitude, 0.0)])
    return KahlerPotential(lattice, psi)


def standard_pair(m: int = 1):
    """Flat endpoint and the 0.01-cosine endpoint on the model lattice.

    For m = 1 this is psi_1(y) = 0.01 cos(2 pi y); higher dimensions add
    one cosine per coordinate at the same amplitude.
    """
    lattice = Lattice.model(m)
    flat = KahlerPotential(lattice, PeriodicPotential.zero(m))
    terms = []
    for alpha in range(m):
        n = tuple(1 if b == alpha else 0 for b in range(m))
        terms.append((n, 0.01, 0.0))
    bumpy = KahlerPotential(lattice, PeriodicPotential.from_cosines(m, terms))
    return PotentialPath(flat, bumpy)


def standard_segment(m: int = 1) -> GeodesicSegment:
    return GeodesicSegment(standard_pair(m))


def smooth_step(angles: np.ndarray, sharpness: float = 4.0) -> np.ndarray:
    """1-periodic logistic profile: ~0 on (0, pi), ~1 on (pi, 2 pi), analytic."""
    return 1.0 / (1.0 + np.exp(sharpness * np.sin(angles)))


def disk_boundary_blend(
    lattice: Lattice, amplitude: float = 0.01, samples: int = 64, sharpness: float = 4.0
):
    """Boundary potentials for the disk: flat on the upper half circle,
    the cosine endpoint on the lower half, with an analytic transition."""
    from .harmonic import BoundaryData

    angles = 2.0 * math.pi * np.arange(samples) / samples
    weights = smooth_step(angles, sharpness)
    n = tuple([1] + [0] * (lattice.m - 1))
    pots = []
    for w in weights:
        psi = PeriodicPotential.from_cosines(lattice.m, [(n, amplitude * float(w), 0.0)])
        pots.append(KahlerPotential(lattice, psi))
    return BoundaryData.disk(pots)
