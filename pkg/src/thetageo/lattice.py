"""Period lattices and theta functions of level k with certified truncation.

The theta basis of level k attached to a period matrix Z is

    theta_j(z) = sum_{n in Z^m} exp(pi i (j+kn) (Z/k) (j+kn)^T + 2 pi i (j+kn).z)

for j in {0, ..., k-1}^m.  In the model case Z = iI this reduces to
sum_n exp(-pi (j+kn)^2 / k + 2 pi i (j+kn).z).  Each lattice sum is
truncated at a radius chosen from an explicit Gaussian tail bound driven
by the smallest eigenvalue of X = Im Z, so every returned value carries a
rigorous absolute truncation error below ``TruncationPolicy.tail_tol``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LatticeError, TruncationOverflowError

__all__ = [
    "Lattice",
    "ThetaIndex",
    "TruncationPolicy",
    "theta_basis",
    "basis_array",
    "theta_eval",
    "theta_eval_scaled",
    "theta_log_abs_sq",
    "hermitian_norm_sq",
    "hermitian_log_norm_sq",
]


class Lattice:
    """Principally polarized abelian variety C^m / (Z^m + Z.Z^m).

    Parameters
    ----------
    Z : (m, m) array_like, complex
        Period matrix.  Must be exactly symmetric as stored, with
        positive definite imaginary part X = Im Z.
    """

    def __init__(self, Z):
        Z = np.array(Z, dtype=complex)
        if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
            raise LatticeError("period matrix must be square")
        if not np.array_equal(Z, Z.T):
            raise LatticeError("period matrix must be exactly symmetric")
        self.Z = Z
        self.m = Z.shape[0]
        self.X = np.ascontiguousarray(Z.imag)
        eigs = np.linalg.eigvalsh(self.X)
        if eigs[0] <= 0.0:
            raise LatticeError("Im Z must be positive definite")
        self.lam_min = float(eigs[0])
        self.X_inv = np.linalg.inv(self.X)

    @classmethod
    def model(cls, m: int = 1) -> "Lattice":
        """Model case Z = i I, the square lattice Z^m + i Z^m."""
        return cls(1j * np.eye(m))

    @property
    def is_model(self) -> bool:
        return np.array_equal(self.Z, 1j * np.eye(self.m))

    @property
    def symplectic_volume(self) -> float:
        """Total mass of det Hess phi(y) dy over the unit cell: (4 pi)^m det X.

        The same for every invariant potential on this lattice (the mixed
        Hessian terms integrate to zero by periodicity), so it is the
        normalizing constant that makes Bergman densities tend to k^m.
        """
        return float((4.0 * math.pi) ** self.m * np.linalg.det(self.X))

    def coordinates(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Split z = x + Z.y into real lattice coordinates (x, y)."""
        z = np.asarray(z, dtype=complex)
        y = z.imag @ self.X_inv
        x = z.real - y @ self.Z.real
        return x, y

    def point(self, x, y) -> np.ndarray:
        """Assemble z = x + Z.y from lattice coordinates."""
        return np.asarray(x, dtype=float) + np.asarray(y, dtype=float) @ self.Z

    def __eq__(self, other):
        return isinstance(other, Lattice) and np.array_equal(self.Z, other.Z)

    def __hash__(self):
        return hash(self.Z.tobytes())

    def __repr__(self):
        return f"Lattice(m={self.m}, Z={self.Z.tolist()!r})"


@dataclass(frozen=True)
class ThetaIndex:
    """Index (k, j) of a level-k theta function, j in {0, ..., k-1}^m."""

    k: int
    j: tuple[int, ...]

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("level k must be >= 1")
        j = tuple(int(a) for a in self.j)
        object.__setattr__(self, "j", j)
        if any(a < 0 or a > self.k - 1 for a in j):
            raise ValueError("index components must lie in {0, ..., k-1}")

    @property
    def m(self) -> int:
        return len(self.j)


@dataclass(frozen=True)
class TruncationPolicy:
    """Absolute tail tolerance and radius cap for theta lattice sums."""

    tail_tol: float = 1e-14
    max_radius: int = 64

    def __post_init__(self):
        if self.tail_tol <= 0.0:
            raise ValueError("tail_tol must be positive")
        if self.max_radius < 1:
            raise ValueError("max_radius must be >= 1")


DEFAULT_POLICY = TruncationPolicy()


def theta_basis(lattice: Lattice, k: int) -> list[ThetaIndex]:
    """All k^m level-k indices in lexicographic order (the canonical order)."""
    if k < 1:
        raise ValueError("level k must be >= 1")
    return [ThetaIndex(k, j) for j in itertools.product(range(k), repeat=lattice.m)]


def basis_array(lattice: Lattice, k: int) -> np.ndarray:
    """Lexicographic basis indices as an integer array of shape (k^m, m)."""
    grids = np.meshgrid(*([np.arange(k)] * lattice.m), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=-1)


def _gaussian_tail(a: float, d0: np.ndarray) -> np.ndarray:
    # sum_{i>=0} exp(-a (d0+i)^2) <= exp(-a d0^2) / (1 - exp(-2 a d0)), d0 > 0
    with np.errstate(over="ignore", under="ignore"):
        return np.exp(-a * d0 * d0) / (-np.expm1(-2.0 * a * d0))


def _summation_box(lattice, k, j_lo, j_hi, eta, policy):
    """Per-coordinate ranges for n plus a certified absolute tail bound.

    The term magnitude is exactly
        exp(pi k eta.X^{-1}.eta) * exp(-(pi/k) w X w^T),  w = j + k n + k X^{-1} eta,
    and X >= lam_min I bounds it by a product of coordinate Gaussians in n
    centered at -c, c = j/k + X^{-1} eta.
    """
    d = lattice.X_inv @ eta
    log_pref = math.pi * k * float(eta @ d)
    a = math.pi * lattice.lam_min * k
    c_lo = j_lo / k + d
    c_hi = j_hi / k + d
    log_tol = math.log(policy.tail_tol)
    for radius in range(policy.max_radius + 1):
        n_lo = np.floor(-c_hi).astype(int) - radius
        n_hi = np.ceil(-c_lo).astype(int) + radius
        d_right = n_hi + 1 + c_lo
        d_left = -(n_lo - 1 + c_hi)
        if np.any(d_right <= 0.0) or np.any(d_left <= 0.0):
            continue
        tails = _gaussian_tail(a, d_right) + _gaussian_tail(a, d_left)
        counts = (n_hi - n_lo + 1).astype(float)
        # prod(S+T) - prod(S), accumulated without cancellation
        diff, prod_s = 0.0, 1.0
        for s_a, t_a in zip(counts, tails):
            diff = diff * (s_a + t_a) + prod_s * t_a
            prod_s *= s_a
        if diff == 0.0 or log_pref + math.log(diff) <= log_tol:
            return n_lo, n_hi
    raise TruncationOverflowError(
        f"theta truncation radius exceeds max_radius={policy.max_radius} "
        f"(k={k}, Im z={eta.tolist()})"
    )


def _term_exponents(lattice, k, j_arr, z, policy):
    """Complex exponents of the truncated lattice sum, shape (B, n_terms)."""
    z = np.asarray(z, dtype=complex).reshape(lattice.m)
    j_arr = np.asarray(j_arr, dtype=float).reshape(-1, lattice.m)
    n_lo, n_hi = _summation_box(
        lattice, k, j_arr.min(axis=0), j_arr.max(axis=0), z.imag, policy
    )
    axes = [np.arange(lo, hi + 1) for lo, hi in zip(n_lo, n_hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    n_pts = np.stack([g.reshape(-1) for g in mesh], axis=-1).astype(float)
    a = j_arr[:, None, :] + k * n_pts[None, :, :]
    quad = np.einsum("btm,mn,btn->bt", a, lattice.Z, a)
    return (1j * math.pi / k) * quad + 2j * math.pi * (a @ z)


def theta_eval_scaled(lattice, idx, z, policy=DEFAULT_POLICY):
    """Evaluate theta_j(z) as (mantissa, log_scale) with value mantissa*exp(log_scale).

    The split avoids overflow: |theta_j| can reach exp(pi k y^2) for Im z
    away from the real axis.
    """
    expo = _term_exponents(lattice, idx.k, np.array([idx.j]), z, policy)[0]
    scale = float(expo.real.max())
    mant = complex(np.exp(expo - scale).sum())
    return mant, scale


def theta_eval(lattice, idx, z, policy=DEFAULT_POLICY) -> complex:
    """theta_j(z), truncated so the dropped tail is below policy.tail_tol.

    May overflow to inf for extreme Im z at large k; use
    :func:`theta_eval_scaled` in that regime.
    """
    mant, scale = theta_eval_scaled(lattice, idx, z, policy)
    return mant * math.exp(scale) if scale < 700.0 else mant * np.exp(scale)


def theta_log_abs_sq(lattice, k, j_arr, z, policy=DEFAULT_POLICY) -> np.ndarray:
    """log |theta_j(z)|^2 for a batch of indices j_arr of shape (B, m)."""
    expo = _term_exponents(lattice, k, j_arr, z, policy)
    scale = expo.real.max(axis=1)
    mant = np.exp(expo - scale[:, None]).sum(axis=1)
    with np.errstate(divide="ignore"):
        return 2.0 * scale + 2.0 * np.log(np.abs(mant))


def hermitian_log_norm_sq(lattice, idx, z, potential, policy=DEFAULT_POLICY) -> float:
    """log of |theta_j(z)|^2 e^{-k phi(y)}, the pointwise h^k norm squared."""
    if potential.lattice != lattice:
        raise LatticeError("potential is attached to a different lattice")
    _, y = lattice.coordinates(np.asarray(z, dtype=complex).reshape(lattice.m))
    log_sq = theta_log_abs_sq(lattice, idx.k, np.array([idx.j]), z, policy)[0]
    return float(log_sq - idx.k * potential.phi(y))


def hermitian_norm_sq(lattice, idx, z, potential, policy=DEFAULT_POLICY) -> float:
    """|theta_j(z)|^2_{h^k} = |theta_j(z)|^2 e^{-k phi(Im-coordinate of z)}.

    Exactly invariant under z -> z + lambda for lattice vectors lambda.
    """
    return math.exp(hermitian_log_norm_sq(lattice, idx, z, potential, policy))
