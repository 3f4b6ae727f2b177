"""Invariant Kahler potentials phi(y) = 2 pi y.X.y + 4 pi psi(y).

psi is a real trigonometric polynomial on the unit torus, expressed in the
lattice coordinates y (so it is 1-periodic in every y_alpha; for a general
period matrix this is the invariant perturbation pulled back to lattice
coordinates).  Derivatives are exact termwise, and positivity of
Hess phi = 4 pi (X + Hess psi) is certified at construction by grid
sampling plus an explicit Lipschitz margin from the Fourier data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvexityError
from .lattice import Lattice

__all__ = ["PeriodicPotential", "KahlerPotential", "PotentialPath"]

TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi


class PeriodicPotential:
    """Finite Fourier series psi(y) = sum_n c_n exp(2 pi i n.y), real valued.

    Reality requires c_{-n} = conj(c_n) for every stored frequency; this is
    validated exactly on construction.
    """

    def __init__(self, m: int, coeffs=None):
        self.m = int(m)
        coeffs = dict(coeffs or {})
        cleaned = {}
        for n, c in coeffs.items():
            n = tuple(int(a) for a in n)
            if len(n) != self.m:
                raise ValueError(f"frequency {n} has wrong dimension (m={self.m})")
            c = complex(c)
            if c != 0.0:
                cleaned[n] = c
        for n, c in cleaned.items():
            neg = tuple(-a for a in n)
            if neg not in cleaned or cleaned[neg] != c.conjugate():
                raise ValueError(f"reality violated: coeff at {neg} must equal conj(coeff at {n})")
        order = sorted(cleaned)
        self.freqs = np.array(order, dtype=float).reshape(len(order), self.m)
        self.coeffs = np.array([cleaned[n] for n in order], dtype=complex)
        self._fmap = {n: cleaned[n] for n in order}

    @classmethod
    def zero(cls, m: int) -> "PeriodicPotential":
        return cls(m, {})

    @classmethod
    def from_cosines(cls, m: int, terms) -> "PeriodicPotential":
        """Build from (frequency vector, amplitude, phase) triples.

        Each triple contributes amp * cos(2 pi n.y + phase); the conjugate
        pair is added automatically so reality holds by construction.
        """
        acc: dict[tuple, complex] = {}
        for n, amp, phase in terms:
            n = tuple(int(a) for a in n)
            neg = tuple(-a for a in n)
            amp = float(amp)
            phase = float(phase)
            if n == neg:
                acc[n] = acc.get(n, 0.0) + amp * math.cos(phase)
            else:
                half = 0.5 * amp * complex(math.cos(phase), math.sin(phase))
                acc[n] = acc.get(n, 0.0) + half
                acc[neg] = acc.get(neg, 0.0) + half.conjugate()
        return cls(m, acc)

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    def coefficient(self, n) -> complex:
        return self._fmap.get(tuple(int(a) for a in n), 0.0 + 0.0j)

    def __call__(self, y) -> np.ndarray:
        """psi(y) for y of shape (..., m); returns shape (...)."""
        y = np.asarray(y, dtype=float)
        if self.is_zero:
            return np.zeros(y.shape[:-1])
        phases = np.exp(TWO_PI * 1j * (y @ self.freqs.T))
        return (phases @ self.coeffs).real

    def grad(self, y) -> np.ndarray:
        """Gradient of psi, shape (..., m)."""
        y = np.asarray(y, dtype=float)
        if self.is_zero:
            return np.zeros(y.shape)
        phases = np.exp(TWO_PI * 1j * (y @ self.freqs.T))
        weighted = phases * (TWO_PI * 1j * self.coeffs)
        return (weighted @ self.freqs).real

    def hess(self, y) -> np.ndarray:
        """Hessian of psi, shape (..., m, m)."""
        y = np.asarray(y, dtype=float)
        if self.is_zero:
            return np.zeros(y.shape + (self.m,))
        phases = np.exp(TWO_PI * 1j * (y @ self.freqs.T))
        weighted = phases * (-(TWO_PI**2) * self.coeffs)
        outer = self.freqs[:, :, None] * self.freqs[:, None, :]
        return np.einsum("...t,tab->...ab", weighted, outer).real

    def third_derivative_bound(self) -> float:
        """(2 pi)^3 sum |c_n| |n|^3, a Lipschitz bound for the Hessian."""
        if self.is_zero:
            return 0.0
        norms = np.sqrt((self.freqs**2).sum(axis=1))
        return float((TWO_PI**3) * (np.abs(self.coeffs) * norms**3).sum())

    def __repr__(self):
        return f"PeriodicPotential(m={self.m}, terms={len(self.coeffs)})"


class KahlerPotential:
    """phi(y) = 2 pi y.X.y^T + 4 pi psi(y), certified convex at construction.

    Doubles as the hermitian weight h = e^{-phi} on the polarizing bundle.
    """

    def __init__(self, lattice: Lattice, psi: PeriodicPotential, cert_points: int = 64):
        if psi.m != lattice.m:
            raise ValueError("psi dimension does not match lattice dimension")
        self.lattice = lattice
        self.psi = psi
        self._certify(max(cert_points, 64))

    def _certify(self, points: int):
        m = self.lattice.m
        axes = [np.arange(points) / points] * m
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([g.reshape(-1) for g in mesh], axis=-1)
        hess = self.lattice.X[None, :, :] + self.psi.hess(grid)
        min_eig = float(np.linalg.eigvalsh(hess)[:, 0].min())
        margin = self.psi.third_derivative_bound() * math.sqrt(m) / (2.0 * points)
        self.convexity_margin = FOUR_PI * (min_eig - margin)
        if self.convexity_margin <= 0.0:
            raise ConvexityError(
                f"Hess phi not certifiably positive: grid min eigenvalue {min_eig:.3e}, "
                f"Fourier-tail margin {margin:.3e}"
            )

    @property
    def m(self) -> int:
        return self.lattice.m

    def phi(self, y) -> np.ndarray:
        """phi(y), batched over leading axes of y."""
        y = np.asarray(y, dtype=float)
        quad = np.einsum("...a,ab,...b->...", y, self.lattice.X, y)
        return TWO_PI * quad + FOUR_PI * self.psi(y)

    def grad(self, y) -> np.ndarray:
        """grad phi = 4 pi (X y + grad psi); the moment map coordinates."""
        y = np.asarray(y, dtype=float)
        return FOUR_PI * (y @ self.lattice.X + self.psi.grad(y))

    def hess(self, y, check: bool = False) -> np.ndarray:
        """Hess phi = 4 pi (X + Hess psi), positive definite by certificate."""
        y = np.asarray(y, dtype=float)
        h = FOUR_PI * (self.lattice.X + self.psi.hess(y))
        if check and np.linalg.eigvalsh(h.reshape(-1, self.m, self.m))[:, 0].min() <= 0.0:
            raise ConvexityError("Hess phi not positive definite at queried point")
        return h

    def volume_density(self, y, check: bool = False) -> np.ndarray:
        """det Hess phi(y); equals (4 pi)^m det(I + Hess psi) in the model case."""
        d = np.linalg.det(self.hess(y, check=check))
        if check and np.any(d <= 0.0):
            raise ConvexityError("volume density not positive at queried point")
        return d

    def __repr__(self):
        return f"KahlerPotential(m={self.m}, terms={len(self.psi.coeffs)})"


@dataclass(frozen=True)
class PotentialPath:
    """Endpoint pair (phi_0, phi_1) on a shared lattice; the geodesic data."""

    phi0: KahlerPotential
    phi1: KahlerPotential

    def __post_init__(self):
        if self.phi0.lattice != self.phi1.lattice:
            raise ValueError("endpoint potentials must share one lattice")

    @property
    def lattice(self) -> Lattice:
        return self.phi0.lattice
