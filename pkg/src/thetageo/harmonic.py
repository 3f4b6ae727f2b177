"""Harmonic maps into the invariant metrics by Poisson extension of duals.

Boundary data assigns a Kahler potential to each point of the boundary of
the parameter domain N (the interval [0,1] or the closed unit disk).  The
harmonic map is built, not solved for: its Legendre dual at an interior
point q is the Poisson integral of the boundary duals,

    u(q, mu) = int_{dN} P(p, q) u_p(mu) dV(p),

which for the interval is the linear blend (1-t) u_0 + t u_1 of the
geodesic.  The level-k companion map weights each theta term by

    K_k(q, j) = exp( int_{dN} P(p,q) log(rho_k(j,q)/rho_k(j,p)) dV(p) ),

with the sign convention fixed by two forcing identities: constant
boundary data gives K_k = 1, and the interval case reduces to R_k(j,t).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BlendConvexityError, NoConvergenceError
from .fitting import AsymptoticFit, fit_inverse_powers
from .geodesic import DEFAULT_TOL, MAX_ITER, SymplecticDual, _norms
from .lattice import DEFAULT_POLICY, basis_array, theta_log_abs_sq
from .norming import DEFAULT_QUAD, QuadratureSpec, _quadrature, norming_batch
from .potential import FOUR_PI, TWO_PI, KahlerPotential

__all__ = [
    "BoundaryData",
    "PoissonKernel",
    "HarmonicMap",
    "harmonic_dual",
    "harmonic_potential",
    "kinf_ratio",
    "BoundaryNorming",
    "bergman_harmonic",
    "kk_weights",
    "harmonic_expansion_fit",
]


class PoissonKernel:
    """Closed-form boundary kernels: linear blend on [0,1], Poisson on the disk.

    Nonnegative, and its quadrature mass over the boundary is 1 (exactly for
    the interval, to spectral accuracy for the disk trapezoid).
    """

    def __init__(self, domain: str, points):
        if domain not in ("interval", "disk"):
            raise ValueError("domain must be 'interval' or 'disk'")
        self.domain = domain
        self.points = np.asarray(points, dtype=float)

    def weights(self, q) -> np.ndarray:
        """Kernel values times boundary quadrature weights at interior q."""
        if self.domain == "interval":
            t = float(q)
            if not 0.0 <= t <= 1.0:
                raise ValueError("interval parameter must lie in [0,1]")
            return np.array([1.0 - t, t])
        q = complex(q)
        if abs(q) >= 1.0:
            raise ValueError("disk parameter must satisfy |q| < 1")
        p = np.exp(1j * self.points)
        return (1.0 - abs(q) ** 2) / (len(self.points) * np.abs(p - q) ** 2)


class BoundaryData:
    """Boundary potentials on the interval endpoints or on Q disk angles."""

    def __init__(self, domain: str, points, potentials):
        self.domain = domain
        self.potentials = list(potentials)
        if not self.potentials:
            raise ValueError("boundary data needs at least one potential")
        first = self.potentials[0].lattice
        if any(K.lattice != first for K in self.potentials):
            raise ValueError("boundary potentials must share one lattice")
        self.lattice = first
        if domain == "interval":
            if len(self.potentials) != 2:
                raise ValueError("interval boundary has exactly two potentials")
            points = np.array([0.0, 1.0])
        else:
            points = np.asarray(points, dtype=float)
            Q = len(points)
            if Q < 16:
                raise ValueError("disk boundary needs at least 16 samples")
            if len(self.potentials) != Q:
                raise ValueError("one potential per boundary angle required")
            expected = 2.0 * math.pi * np.arange(Q) / Q
            if not np.allclose(points, expected, atol=1e-12):
                raise ValueError("disk angles must be equispaced starting at 0")
        self.kernel = PoissonKernel(domain, points)
        self.points = self.kernel.points

    @classmethod
    def interval(cls, phi0: KahlerPotential, phi1: KahlerPotential) -> "BoundaryData":
        return cls("interval", None, [phi0, phi1])

    @classmethod
    def disk(cls, potentials) -> "BoundaryData":
        Q = len(potentials)
        angles = 2.0 * math.pi * np.arange(Q) / Q
        return cls("disk", angles, potentials)

    @property
    def m(self) -> int:
        return self.lattice.m


class HarmonicMap:
    """Harmonic extension of boundary Legendre duals plus its inversion."""

    def __init__(self, bd: BoundaryData, tol: float = DEFAULT_TOL):
        self.bd = bd
        self.lattice = bd.lattice
        self.tol = tol
        self.duals = [SymplecticDual(K, tol) for K in bd.potentials]
        self._certified: set = set()

    def weights(self, q) -> np.ndarray:
        return self.bd.kernel.weights(q)

    def dual(self, q, mu) -> np.ndarray:
        """u(q, mu), the Poisson blend of boundary dual values (batched)."""
        w = self.weights(q)
        mu = np.asarray(mu, dtype=float)
        vals = np.stack([d.value(mu) for d in self.duals])
        return np.tensordot(w, vals, axes=(0, 0))

    def dual_hessian(self, q, mu) -> np.ndarray:
        """Hess_mu u(q, .) = Poisson blend of the boundary dual Hessians."""
        w = self.weights(q)
        hs = np.stack([d.hessian(mu) for d in self.duals])
        return np.tensordot(w, hs, axes=(0, 0))

    def certify_blend(self, q, grid_per_dim: int = 9) -> None:
        """Positivity of Hess_mu u(q,.) on a moment grid, cached per q."""
        key = (complex(q)) if self.bd.domain == "disk" else float(q)
        if key in self._certified:
            return
        m = self.lattice.m
        axes = [np.arange(grid_per_dim) / grid_per_dim] * m
        mesh = np.meshgrid(*axes, indexing="ij")
        nu = np.stack([g.reshape(-1) for g in mesh], axis=-1)
        mu = FOUR_PI * (nu @ self.lattice.X)
        eigs = np.linalg.eigvalsh(self.dual_hessian(q, mu))
        if float(eigs[..., 0].min()) <= 0.0:
            raise BlendConvexityError(f"blended dual not convex at q={q!r}")
        self._certified.add(key)

    def invert(self, q, y):
        """Solve grad_mu u(q, mu) = y; returns (phi(q,y), mu) batched."""
        self.certify_blend(q)
        w = self.weights(q)
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        y = np.atleast_2d(y)
        grads = np.stack([K.grad(y) for K in self.bd.potentials])
        mu = np.tensordot(w, grads, axes=(0, 0))
        pts = [d.point(mu) for d in self.duals]

        def residual(pts_):
            return np.tensordot(w, np.stack(pts_), axes=(0, 0)) - y

        res = residual(pts)
        rnorm = _norms(res)
        for _ in range(MAX_ITER):
            if not (rnorm > self.tol).any():
                break
            hs = np.stack(
                [np.linalg.inv(K.hess(p)) for K, p in zip(self.bd.potentials, pts)]
            )
            jac = np.tensordot(w, hs, axes=(0, 0))
            step = np.linalg.solve(jac, res[..., None])[..., 0]
            alpha = np.ones(len(y))
            for _ in range(60):
                mu_try = mu - alpha[:, None] * step
                pts = [d.point(mu_try, y0=p) for d, p in zip(self.duals, pts)]
                good = _norms(residual(pts)) <= (1.0 - 0.25 * alpha) * rnorm
                done = good | (rnorm <= self.tol)
                if done.all():
                    break
                alpha = np.where(done, alpha, 0.5 * alpha)
            mu = mu - alpha[:, None] * step
            pts = [d.point(mu, y0=p) for d, p in zip(self.duals, pts)]
            res = residual(pts)
            rnorm = _norms(res)
        if (rnorm > self.tol).any():
            raise NoConvergenceError(f"harmonic inversion stalled at q={q!r}")
        u_vals = np.stack(
            [
                (mu * p).sum(axis=-1) - K.phi(p)
                for K, p in zip(self.bd.potentials, pts)
            ]
        )
        phi = (mu * y).sum(axis=-1) - np.tensordot(w, u_vals, axes=(0, 0))
        if single:
            return float(phi[0]), mu[0]
        return phi, mu

    def potential(self, q, y):
        return self.invert(q, y)[0]

    def psi_density(self, q, y):
        """(psi_q(y), det Hess phi_q(y)) for the interior potential (batched)."""
        y = np.asarray(y, dtype=float)
        phi, mu = self.invert(q, y)
        quad = np.einsum("...a,ab,...b->...", y, self.lattice.X, y)
        psi_q = (phi - TWO_PI * quad) / FOUR_PI
        dens = 1.0 / np.linalg.det(self.dual_hessian(q, mu))
        return psi_q, dens


def harmonic_dual(bd: BoundaryData, q, mu) -> float:
    """u(q, mu) for a single moment point."""
    mu = np.asarray(mu, dtype=float).reshape(bd.m)
    return float(HarmonicMap(bd).dual(q, mu))


def harmonic_potential(bd: BoundaryData, q, y) -> float:
    """phi(q, y), the inverse Legendre transform of the blended dual."""
    y = np.asarray(y, dtype=float).reshape(bd.m)
    return float(HarmonicMap(bd).invert(q, y)[0])


def kinf_ratio(bd: BoundaryData, q, x, hm: HarmonicMap | None = None) -> float:
    """K_inf(q, x) = exp(1/2 int P(p,q) log(det Hess u_p(x)/det Hess u_q(x)) dV).

    Equals R_inf(x, t) for the interval at q = t, and 1 for constant
    boundary data: the orientation (blend determinant in the denominator)
    is forced by those two identities, matching the stationary-phase
    orientation of :func:`thetageo.norming.ratio_Rinf`.
    """
    hm = hm or HarmonicMap(bd)
    x = np.asarray(x, dtype=float).reshape(bd.m)
    w = hm.weights(q)
    log_dets = np.array([math.log(np.linalg.det(d.hessian(x))) for d in hm.duals])
    log_det_q = math.log(np.linalg.det(hm.dual_hessian(q, x)))
    return math.exp(0.5 * float((w * (log_dets - log_det_q)).sum()))


class BoundaryNorming:
    """log rho_k(j, p) over all boundary samples at one level k, cached."""

    def __init__(self, bd: BoundaryData, k: int, quad: QuadratureSpec = DEFAULT_QUAD):
        self.bd = bd
        self.k = int(k)
        self.quad = quad
        self.j_arr = basis_array(bd.lattice, k)
        self.log_rho = np.stack(
            [np.log(norming_batch(K, self.k, self.j_arr, quad)) for K in bd.potentials]
        )

    def log_weights(self, hm: HarmonicMap, q) -> np.ndarray:
        """log K-weights of the level-k sum: -sum_i w_i(q) log rho_k(j, p_i)."""
        return -np.tensordot(hm.weights(q), self.log_rho, axes=(0, 0))


def _norming_at_map(hm: HarmonicMap, q, k: int, j_arr, quad: QuadratureSpec) -> np.ndarray:
    def weight(grid):
        psi_q, dens = hm.psi_density(q, grid)
        return np.exp(-4.0 * k * math.pi * psi_q) * dens

    return _quadrature(weight, hm.lattice.X, k, j_arr, quad)


def kk_weights(
    bd: BoundaryData,
    k: int,
    q,
    quad: QuadratureSpec = DEFAULT_QUAD,
    hm: HarmonicMap | None = None,
    bn: BoundaryNorming | None = None,
) -> np.ndarray:
    """K_k(q, j) over the basis; equals R_k(j, t) for the interval at q = t."""
    hm = hm or HarmonicMap(bd)
    bn = bn or BoundaryNorming(bd, k, quad)
    log_rho_q = np.log(_norming_at_map(hm, q, k, bn.j_arr, quad))
    w = hm.weights(q)
    return np.exp(float(w.sum()) * log_rho_q + bn.log_weights(hm, q))


def bergman_harmonic(
    bd: BoundaryData,
    k: int,
    q,
    z,
    quad: QuadratureSpec = DEFAULT_QUAD,
    policy=DEFAULT_POLICY,
    hm: HarmonicMap | None = None,
    bn: BoundaryNorming | None = None,
) -> float:
    """phi_k(q, z), the level-k harmonic companion map, full-potential gauge.

    Evaluated through the boundary-only form
    phi(q,z) + (1/k) log sum_j exp(-int P log rho_k(j,p)) |theta_j(z)|^2 e^{-k phi(q,y)};
    the interior norming constants cancel between K_k and the normalized
    density, so they are never computed here.
    """
    hm = hm or HarmonicMap(bd)
    bn = bn or BoundaryNorming(bd, k, quad)
    lattice = bd.lattice
    z = np.asarray(z, dtype=complex).reshape(lattice.m)
    _, y = lattice.coordinates(z)
    phi_q = float(hm.invert(q, y)[0])
    log_sq = theta_log_abs_sq(lattice, k, bn.j_arr, z, policy)
    terms = (
        bn.log_weights(hm, q)
        + log_sq
        - k * phi_q
        + math.log(lattice.symplectic_volume)
    )
    top = terms.max()
    return phi_q + (top + math.log(np.exp(terms - top).sum())) / k


def harmonic_expansion_fit(
    bd: BoundaryData,
    k_ladder,
    q,
    z,
    quad: QuadratureSpec = DEFAULT_QUAD,
    policy=DEFAULT_POLICY,
    order: int = 3,
) -> AsymptoticFit:
    """Fit phi_k(q,z) - phi(q,z) - (m/k) log k in powers of 1/k.

    The fitted k^{-1} coefficient targets log K_inf(q, x) at the interior
    moment point x = grad phi_q(y).
    """
    hm = HarmonicMap(bd)
    lattice = bd.lattice
    m = lattice.m
    z = np.asarray(z, dtype=complex).reshape(m)
    _, y = lattice.coordinates(z)
    phi_q, mu_q = hm.invert(q, y)
    ks = np.array([int(k) for k in k_ladder], dtype=float)
    errors = []
    for k in k_ladder:
        bn = BoundaryNorming(bd, int(k), quad)
        errors.append(bergman_harmonic(bd, int(k), q, z, quad, policy, hm, bn) - phi_q)
    data = np.array(errors) - (m / ks) * np.log(ks)
    fit = fit_inverse_powers(ks, data, order)
    fit.target = math.log(kinf_ratio(bd, q, mu_q, hm))
    fit.meta.update({"q": q, "y": y.tolist(), "errors": np.array(errors)})
    return fit
