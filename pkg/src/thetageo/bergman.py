"""Bergman geodesics, their complete asymptotics, and Bergman-kernel sums.

The Bergman geodesic at level k between the endpoint metrics is the
one-parameter diagonal rescaling of the normalized theta basis,

    phi_k(t,z) = (1/k) log sum_j (rho_0(j)/rho_1(j))^t |theta_j(z)|^2
                 e^{-k phi_0(y)} / rho_0(j)  +  phi_0(y),

returned here in full-potential gauge (the trailing phi_0 term) so that
phi_k - phi_t is gauge free.  All sums over j run in log space: the terms
span hundreds of orders of magnitude at k = 256.  The deviation from the
exact geodesic expands as (m/k) log k + (1/k) log R_inf(mu_t, t) + O(k^-2),
which expansion_fit verifies coefficient by coefficient.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import CrossCheckError
from .fitting import AsymptoticFit, fit_inverse_powers
from .geodesic import GeodesicSegment
from .lattice import DEFAULT_POLICY, basis_array, theta_log_abs_sq
from .norming import DEFAULT_QUAD, norming_at_time, norming_batch, ratio_Rinf
from .potential import KahlerPotential, PeriodicPotential

__all__ = [
    "BergmanGeodesic",
    "bergman_potential",
    "error_field",
    "expansion_fit",
    "weyl_apply",
    "bernstein_sum",
    "bernstein_limit_point",
    "riemann_sum",
    "riemann_aliasing",
    "bergman_density",
]

CROSS_CHECK_TOL = 1e-9


def _logsumexp(x: np.ndarray) -> float:
    top = x.max()
    if not np.isfinite(top):
        return float(top)
    return float(top + math.log(np.exp(x - top).sum()))


class BergmanGeodesic:
    """Level-k Bergman geodesic data: endpoint norming constants plus the segment."""

    def __init__(self, seg: GeodesicSegment, k: int, quad=DEFAULT_QUAD, policy=DEFAULT_POLICY):
        self.seg = seg
        self.k = int(k)
        self.lattice = seg.lattice
        self.quad = quad
        self.policy = policy
        self.j_arr = basis_array(self.lattice, self.k)
        self.log_rho0 = np.log(norming_batch(seg.path.phi0, self.k, self.j_arr, quad))
        self.log_rho1 = np.log(norming_batch(seg.path.phi1, self.k, self.j_arr, quad))
        # unit-mass volume normalization: without it the density sums tend
        # to k^m / symplectic_volume and a -log(vol)/k gauge term pollutes
        # the expansion coefficients
        self.log_vol = math.log(self.lattice.symplectic_volume)
        self._log_rho_t: dict[float, np.ndarray] = {}

    def log_rho_at(self, t: float) -> np.ndarray:
        """log rho_k(., t) along the geodesic, cached per t."""
        if t not in self._log_rho_t:
            self._log_rho_t[t] = np.log(
                norming_at_time(self.seg, t, self.k, self.j_arr, self.quad)
            )
        return self._log_rho_t[t]

    def theta_log_sq(self, z) -> np.ndarray:
        return theta_log_abs_sq(self.lattice, self.k, self.j_arr, z, self.policy)


def bergman_potential(bg: BergmanGeodesic, t: float, z) -> float:
    """phi_k(t, z) in full-potential gauge."""
    log_sq = bg.theta_log_sq(z)
    log_weights = t * (bg.log_rho0 - bg.log_rho1) - bg.log_rho0 + bg.log_vol
    return _logsumexp(log_sq + log_weights) / bg.k


def error_field(bg: BergmanGeodesic, t: float, z, cross_check: bool = False) -> float:
    """phi_k(t,z) - phi_t(z), the quantity with the (m/k) log k asymptotics.

    With ``cross_check`` the same number is recomputed through the ratio
    form sum_j R_k(j,t) |theta_j|^2_{h_t^k} / rho_k(j,t), with rho_k(.,t)
    from an independent quadrature at the geodesic-time potential; the two
    routes must agree to 1e-9.
    """
    z = np.asarray(z, dtype=complex).reshape(bg.lattice.m)
    _, y = bg.lattice.coordinates(z)
    phi_t = bg.seg.potential(t, y)
    log_sq = bg.theta_log_sq(z)
    log_weights = t * (bg.log_rho0 - bg.log_rho1) - bg.log_rho0 + bg.log_vol
    value = _logsumexp(log_sq + log_weights) / bg.k - phi_t
    if cross_check:
        log_rho_t = bg.log_rho_at(t)
        log_rk = log_rho_t - (1.0 - t) * bg.log_rho0 - t * bg.log_rho1
        other = (
            _logsumexp(log_rk + log_sq - bg.k * phi_t - log_rho_t + bg.log_vol) / bg.k
        )
        if abs(other - value) > CROSS_CHECK_TOL:
            raise CrossCheckError(
                f"error-field routes disagree at t={t}: {value!r} vs {other!r}"
            )
    return float(value)


def expansion_fit(bg_ladder, t: float, z, order: int | None = None) -> AsymptoticFit:
    """Fit the error field minus (m/k) log k against powers of 1/k.

    The fitted k^{-1} coefficient has the independent target
    log R_inf(mu_t(y), t); the fitted constant must vanish (there is no
    k^0 term in the expansion).  Both are stored on the returned fit.
    The default order uses the full resolving power of the ladder (an
    interpolatory fit), which keeps truncation bias out of the k^{-1}
    coefficient.
    """
    if order is None:
        order = min(len(bg_ladder) - 1, 4)
    if len(bg_ladder) < order + 1:
        raise ValueError("ladder too short for the requested fit order")
    seg = bg_ladder[0].seg
    m = seg.lattice.m
    z = np.asarray(z, dtype=complex).reshape(m)
    _, y = seg.lattice.coordinates(z)
    ks = np.array([bg.k for bg in bg_ladder], dtype=float)
    errors = np.array([error_field(bg, t, z) for bg in bg_ladder])
    data = errors - (m / ks) * np.log(ks)
    fit = fit_inverse_powers(ks, data, order)
    _, mu_t = seg.invert(t, y)
    fit.target = math.log(ratio_Rinf(seg, mu_t, t))
    fit.meta.update({"t": t, "y": y.tolist(), "errors": errors})
    return fit


def weyl_apply(f: PeriodicPotential, k: int, j) -> complex:
    """Eigenvalue of the quantized multiplier: sum_n f_hat(n) e^{-2 pi i n.j/k}.

    Equals f(-j/k); the translation operator acts on theta_j(z + x) by the
    root of unity e^{-2 pi i j/k} per coordinate.
    """
    j = np.asarray(j, dtype=float).reshape(f.m)
    if f.is_zero:
        return 0.0 + 0.0j
    return complex((f.coeffs * np.exp(-2j * math.pi * (f.freqs @ (j / k)))).sum())


def bernstein_limit_point(K: KahlerPotential, y) -> np.ndarray:
    """nu(y) = y + X^{-1} grad psi(y), the sampling-limit point of the sums.

    This is the moment map in unit-period normalization: the geodesic-side
    moment coordinates are mu = 4 pi X nu.
    """
    y = np.asarray(y, dtype=float)
    return y + K.psi.grad(y) @ K.lattice.X_inv


def bernstein_sum(
    K: KahlerPotential,
    k: int,
    f: PeriodicPotential,
    z,
    quad=DEFAULT_QUAD,
    policy=DEFAULT_POLICY,
    log_rho: np.ndarray | None = None,
) -> float:
    """(1/k^m) sum_j f(-j/k) |theta_j(z)|^2_{h^k} / ||theta_j||^2_{h^k}.

    Converges to f(nu(y)) with an O(1/k) remainder; see
    :func:`bernstein_limit_point` for the evaluation point.
    """
    lattice = K.lattice
    z = np.asarray(z, dtype=complex).reshape(lattice.m)
    _, y = lattice.coordinates(z)
    j_arr = basis_array(lattice, k)
    if log_rho is None:
        log_rho = np.log(norming_batch(K, k, j_arr, quad))
    log_w = (
        theta_log_abs_sq(lattice, k, j_arr, z, policy)
        - k * K.phi(y)
        - log_rho
        + math.log(lattice.symplectic_volume)
    )
    vals = f(-j_arr / k)
    return float((vals * np.exp(log_w)).sum() / k**lattice.m)


def riemann_sum(f: PeriodicPotential, k: int) -> float:
    """(1/k^m) sum over j in (Z/kZ)^m of f(j/k), in fixed lexicographic order."""
    grids = np.meshgrid(*([np.arange(k) / k] * f.m), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    return float(f(pts).sum() / k**f.m)


def riemann_aliasing(f: PeriodicPotential, k: int) -> float:
    """sum_n f_hat(k n): the exact value of the equispaced average.

    For a trigonometric polynomial of degree below k this is f_hat(0), the
    integral of f over the unit cell.
    """
    if f.is_zero:
        return 0.0
    hits = np.all(np.mod(f.freqs.astype(int), k) == 0, axis=1)
    return float(f.coeffs[hits].sum().real)


def bergman_density(
    K: KahlerPotential,
    k: int,
    z,
    quad=DEFAULT_QUAD,
    policy=DEFAULT_POLICY,
    log_rho: np.ndarray | None = None,
) -> float:
    """Diagonal Bergman density sum_j |theta_j(z)|^2_{h^k} / ||theta_j||^2_{h^k}.

    k^{-m} times this tends to 1 with an O(1/k) remainder (exponentially
    small for the flat metric); its integral against the volume form is
    exactly the dimension k^m.
    """
    lattice = K.lattice
    z = np.asarray(z, dtype=complex).reshape(lattice.m)
    _, y = lattice.coordinates(z)
    j_arr = basis_array(lattice, k)
    if log_rho is None:
        log_rho = np.log(norming_batch(K, k, j_arr, quad))
    log_w = (
        theta_log_abs_sq(lattice, k, j_arr, z, policy)
        - k * K.phi(y)
        - log_rho
        + math.log(lattice.symplectic_volume)
    )
    return float(np.exp(log_w).sum())
