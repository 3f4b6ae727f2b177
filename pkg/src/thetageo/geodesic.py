"""Legendre duality and the exact geodesic between invariant Kahler potentials.

The symplectic potential u(mu) = mu.y - phi(y) at mu = grad phi(y) linearizes
the geodesic equation: with u_t = (1-t) u_0 + t u_1 the path
phi_t = L^{-1} u_t solves phi_tt = grad(phi_t-dot)^T (Hess phi_t)^{-1}
grad(phi_t-dot).  Both directions of the transform are computed on demand by
damped Newton; nothing is tabulated.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NoConvergenceError
from .potential import FOUR_PI, TWO_PI, KahlerPotential, PotentialPath

__all__ = [
    "solve_gradient",
    "legendre",
    "SymplecticDual",
    "GeodesicSegment",
    "inverse_legendre",
    "moment_map",
    "geodesic_check",
]

DEFAULT_TOL = 1e-12
MAX_ITER = 100


def _norms(r):
    return np.sqrt((r * r).sum(axis=-1))


def solve_gradient(K: KahlerPotential, mu, tol: float = DEFAULT_TOL, y0=None) -> np.ndarray:
    """Solve grad phi(y) = mu by damped Newton, batched over rows of mu.

    Global convergence follows from the uniform positivity certificate of
    Hess phi; the flat-case inverse y = X^{-1} mu / (4 pi) seeds the
    iteration unless ``y0`` is given.
    """
    mu = np.asarray(mu, dtype=float)
    single = mu.ndim == 1
    mu = np.atleast_2d(mu)
    if y0 is None:
        y = (mu @ K.lattice.X_inv) / FOUR_PI
    else:
        y = np.array(np.atleast_2d(y0), dtype=float, copy=True)
    res = K.grad(y) - mu
    rnorm = _norms(res)
    for _ in range(MAX_ITER):
        active = rnorm > tol
        if not active.any():
            return y[0] if single else y
        ya = y[active]
        step = np.linalg.solve(K.hess(ya), res[active][..., None])[..., 0]
        alpha = np.ones(len(ya))
        base = rnorm[active]
        for _ in range(60):
            y_try = ya - alpha[:, None] * step
            r_try = _norms(K.grad(y_try) - mu[active])
            good = r_try <= (1.0 - 0.25 * alpha) * base
            if good.all():
                break
            alpha = np.where(good, alpha, 0.5 * alpha)
        y[active] = ya - alpha[:, None] * step
        res = K.grad(y) - mu
        rnorm = _norms(res)
    if (rnorm > tol).any():
        raise NoConvergenceError(
            f"gradient inversion stalled at residual {rnorm.max():.3e} (tol {tol:.1e})"
        )
    return y[0] if single else y


def legendre(K: KahlerPotential, mu, tol: float = DEFAULT_TOL):
    """Legendre transform: returns (u(mu), y(mu)) with grad phi(y) = mu."""
    mu = np.asarray(mu, dtype=float).reshape(K.m)
    y = solve_gradient(K, mu, tol=tol)
    u = float(mu @ y - K.phi(y))
    return u, y


class SymplecticDual:
    """Legendre dual u of one Kahler potential, evaluated implicitly."""

    def __init__(self, K: KahlerPotential, tol: float = DEFAULT_TOL):
        self.K = K
        self.tol = tol

    def point(self, mu, y0=None) -> np.ndarray:
        """y(mu) = grad_mu u, the inverse moment map (batched)."""
        return solve_gradient(self.K, mu, tol=self.tol, y0=y0)

    def value(self, mu, y=None) -> np.ndarray:
        """u(mu) = mu.y(mu) - phi(y(mu)) (batched)."""
        mu = np.asarray(mu, dtype=float)
        if y is None:
            y = self.point(mu)
        return (mu * y).sum(axis=-1) - self.K.phi(y)

    def hessian(self, mu, y=None) -> np.ndarray:
        """Hess_mu u = (Hess_y phi)^{-1} at y(mu) (batched)."""
        if y is None:
            y = self.point(mu)
        return np.linalg.inv(self.K.hess(y))


class GeodesicSegment:
    """Exact geodesic phi_t = L^{-1}((1-t) u_0 + t u_1) between two potentials."""

    def __init__(self, path: PotentialPath, tol: float = DEFAULT_TOL):
        self.path = path
        self.lattice = path.lattice
        self.tol = tol
        self.dual0 = SymplecticDual(path.phi0, tol)
        self.dual1 = SymplecticDual(path.phi1, tol)

    def dual_value(self, t: float, mu) -> np.ndarray:
        """u_t(mu) = (1-t) u_0(mu) + t u_1(mu) (batched over rows of mu)."""
        mu = np.asarray(mu, dtype=float)
        return (1.0 - t) * self.dual0.value(mu) + t * self.dual1.value(mu)

    def dual_hessian(self, t: float, mu) -> np.ndarray:
        """Hess_mu u_t = (1-t) Hess u_0 + t Hess u_1 (batched)."""
        return (1.0 - t) * self.dual0.hessian(mu) + t * self.dual1.hessian(mu)

    def invert(self, t: float, y, tol: float | None = None):
        """Solve grad_mu u_t(mu) = y; returns (phi_t(y), mu) batched.

        phi_t(y) = sup_mu (mu.y - u_t(mu)) is the inverse Legendre
        transform of the blended dual.
        """
        tol = self.tol if tol is None else tol
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        y = np.atleast_2d(y)
        K0, K1 = self.path.phi0, self.path.phi1
        mu = (1.0 - t) * K0.grad(y) + t * K1.grad(y)
        y0 = self.dual0.point(mu)
        y1 = self.dual1.point(mu)

        def residual(y0_, y1_):
            return (1.0 - t) * y0_ + t * y1_ - y

        res = residual(y0, y1)
        rnorm = _norms(res)
        for _ in range(MAX_ITER):
            if not (rnorm > tol).any():
                break
            jac = (1.0 - t) * np.linalg.inv(K0.hess(y0)) + t * np.linalg.inv(K1.hess(y1))
            step = np.linalg.solve(jac, res[..., None])[..., 0]
            alpha = np.ones(len(y))
            for _ in range(60):
                mu_try = mu - alpha[:, None] * step
                y0 = self.dual0.point(mu_try, y0=y0)
                y1 = self.dual1.point(mu_try, y0=y1)
                r_try = _norms(residual(y0, y1))
                good = r_try <= (1.0 - 0.25 * alpha) * rnorm
                done = good | (rnorm <= tol)
                if done.all():
                    break
                alpha = np.where(done, alpha, 0.5 * alpha)
            mu = mu - alpha[:, None] * step
            y0 = self.dual0.point(mu, y0=y0)
            y1 = self.dual1.point(mu, y0=y1)
            res = residual(y0, y1)
            rnorm = _norms(res)
        if (rnorm > tol).any():
            raise NoConvergenceError(
                f"inverse Legendre stalled at residual {rnorm.max():.3e} (t={t})"
            )
        u0 = (mu * y0).sum(axis=-1) - K0.phi(y0)
        u1 = (mu * y1).sum(axis=-1) - K1.phi(y1)
        phi = (mu * y).sum(axis=-1) - ((1.0 - t) * u0 + t * u1)
        if single:
            return float(phi[0]), mu[0]
        return phi, mu

    def potential(self, t: float, y, tol: float | None = None):
        """phi_t(y); endpoint times reproduce phi_0 and phi_1."""
        return self.invert(t, y, tol)[0]

    def moment(self, t: float, y, tol: float | None = None):
        """mu_t(y) = grad phi_t(y), the time-t moment map."""
        return self.invert(t, y, tol)[1]

    def psi_density(self, t: float, y):
        """(psi_t(y), det Hess phi_t(y)) along the geodesic (batched).

        Endpoint times use the stored Fourier data directly; interior times
        go through the dual blend.
        """
        y = np.asarray(y, dtype=float)
        if t == 0.0 or t == 1.0:
            K = self.path.phi0 if t == 0.0 else self.path.phi1
            return K.psi(y), K.volume_density(y)
        phi, mu = self.invert(t, y)
        quad = np.einsum("...a,ab,...b->...", y, self.lattice.X, y)
        psi_t = (phi - TWO_PI * quad) / FOUR_PI
        dens = 1.0 / np.linalg.det(self.dual_hessian(t, mu))
        return psi_t, dens


def inverse_legendre(seg: GeodesicSegment, t: float, y, tol: float = DEFAULT_TOL) -> float:
    """phi_t(y) = sup_mu (mu.y - u_t(mu)) for a single point y."""
    y = np.asarray(y, dtype=float).reshape(seg.lattice.m)
    return float(seg.potential(t, y, tol))


def moment_map(K: KahlerPotential, y) -> np.ndarray:
    """mu = grad phi = 4 pi (X y + grad psi); shifts by 4 pi X e_alpha per period."""
    return K.grad(y)


def geodesic_check(seg: GeodesicSegment, t: float, y, h_t: float = 1e-3) -> float:
    """Finite-difference residual of phi_tt = grad(phi-dot)^T (Hess phi_t)^{-1} grad(phi-dot).

    Diagnostic only: O(h_t^2) for the exact geodesic, so it vanishes under
    refinement.  The metric contraction uses (Hess_y phi_t)^{-1}, i.e. the
    dual Hessian Hess_mu u_t, which is exact for the linear dual blend.
    """
    y = np.asarray(y, dtype=float).reshape(seg.lattice.m)
    phi_m, _ = seg.invert(t - h_t, y)
    phi_0, mu_0 = seg.invert(t, y)
    phi_p, _ = seg.invert(t + h_t, y)
    phi_tt = (phi_p - 2.0 * phi_0 + phi_m) / (h_t * h_t)
    mu_m = seg.invert(t - h_t, y)[1]
    mu_p = seg.invert(t + h_t, y)[1]
    grad_dot = (mu_p - mu_m) / (2.0 * h_t)
    contraction = float(grad_dot @ seg.dual_hessian(t, mu_0) @ grad_dot)
    return float(phi_tt - contraction)
