"""Norming constants rho_k(j,t) of the theta basis and their ratio diagnostics.

rho_k(j,t) = ||theta_j||^2_{h_t^k} reduces to a lattice-periodized Gaussian
integral over the unit cell,

    rho = int_{[0,1]^m} sum_n exp(-2 k pi (y + j/k + n) X (y + j/k + n)^T)
          * exp(-4 k pi psi_t(y)) det Hess phi_t(y) dy,

evaluated by the composite trapezoid rule, which is spectrally accurate for
smooth periodic integrands.  The ratio R_k(j,t) = rho_t / (rho_0^{1-t}
rho_1^t) converges to the stationary-phase limit R_inf(mu,t), a
square-rooted determinant ratio of dual Hessians, at mu = -4 pi X j/k
reduced into the fundamental cell.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError
from .fitting import AsymptoticFit, fit_inverse_powers
from .geodesic import GeodesicSegment
from .lattice import DEFAULT_POLICY, Lattice, ThetaIndex, _summation_box, basis_array
from .potential import FOUR_PI, TWO_PI, KahlerPotential

__all__ = [
    "QuadratureSpec",
    "norming_constant",
    "norming_batch",
    "norming_at_time",
    "NormingTable",
    "build_norming_table",
    "gram_matrix",
    "ratio_Rk",
    "ratio_Rinf",
    "index_moment",
    "regularity_gap",
    "regularity_check",
]

CONVERGENCE_RTOL = 1e-10


@dataclass(frozen=True)
class QuadratureSpec:
    """Trapezoid points per dimension and the lattice-image radius.

    ``points_per_dim=None`` resolves to max(64, ceil(8 sqrt(k))): the
    integrand's Gaussian factor has width 1/sqrt(k), so the point count
    must grow like sqrt(k) to stay spectrally converged.
    """

    points_per_dim: int | None = None
    periodization_radius: int = 3

    def __post_init__(self):
        if self.points_per_dim is not None and self.points_per_dim < 16:
            raise ValueError("points_per_dim must be >= 16")
        if self.periodization_radius < 1:
            raise ValueError("periodization_radius must be >= 1")

    def resolve(self, k: int) -> int:
        if self.points_per_dim is not None:
            return self.points_per_dim
        return max(64, int(math.ceil(8.0 * math.sqrt(k))))

    def scaled(self, factor: float, k: int) -> "QuadratureSpec":
        return QuadratureSpec(
            points_per_dim=max(16, int(round(self.resolve(k) * factor))),
            periodization_radius=self.periodization_radius + (1 if factor > 1 else 0),
        )


DEFAULT_QUAD = QuadratureSpec()


def _unit_grid(points: int, m: int) -> np.ndarray:
    axes = [np.arange(points) / points] * m
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=-1)


def _image_offsets(radius: int, m: int) -> np.ndarray:
    axes = [np.arange(-radius - 1, radius + 2)] * m
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=-1).astype(float)


def _periodized_gaussian(X, k, centers, grid, offsets):
    """sum_n exp(-2 k pi (y + c + n) X (y + c + n)^T), shape (B, G)."""
    n_b, n_g = len(centers), len(grid)
    out = np.empty((n_b, n_g))
    chunk = max(1, int(4_000_000 // max(1, n_g * len(offsets))))
    for start in range(0, n_b, chunk):
        c = centers[start : start + chunk]
        s = grid[None, :, None, :] + c[:, None, None, :] + offsets[None, None, :, :]
        q = np.einsum("bgim,mn,bgin->bgi", s, X, s)
        out[start : start + chunk] = np.exp(-2.0 * k * math.pi * q).sum(axis=2)
    return out


def _quadrature(K_weight, X, k, j_arr, quad):
    """Shared core: mean over the unit cell of gaussian * weight."""
    m = X.shape[0]
    points = quad.resolve(k)
    grid = _unit_grid(points, m)
    weight = K_weight(grid)
    centers = np.asarray(j_arr, dtype=float).reshape(-1, m) / k
    r = quad.periodization_radius
    if np.array_equal(X, np.diag(np.diag(X))):
        # diagonal X: the image sum factorizes, so contract one coordinate
        # table per axis instead of materializing the (centers, grid) product
        images = np.arange(-r - 1, r + 2, dtype=float)
        axis_pts = np.arange(points) / points
        acc = weight.reshape((points,) * m)
        inv_maps = []
        for alpha in range(m):
            uniq, inv = np.unique(centers[:, alpha], return_inverse=True)
            s = axis_pts[None, :, None] + uniq[:, None, None] + images[None, None, :]
            table = np.exp(-2.0 * k * math.pi * X[alpha, alpha] * s * s).sum(axis=2)
            acc = np.tensordot(acc, table.T, axes=([0], [0]))
            inv_maps.append(inv)
        return acc[tuple(inv_maps)] / points**m
    gauss = _periodized_gaussian(X, k, centers, grid, _image_offsets(r, m))
    return gauss @ weight / len(grid)


def norming_batch(K: KahlerPotential, k: int, j_arr, quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """rho_k(j) for a batch of index rows j_arr, fixed potential."""

    def weight(grid):
        return np.exp(-4.0 * k * math.pi * K.psi(grid)) * K.volume_density(grid)

    return _quadrature(weight, K.lattice.X, k, j_arr, quad)


def norming_at_time(seg: GeodesicSegment, t: float, k: int, j_arr, quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """rho_k(j, t) along the geodesic; interior t goes through Legendre duality."""
    if t == 0.0:
        return norming_batch(seg.path.phi0, k, j_arr, quad)
    if t == 1.0:
        return norming_batch(seg.path.phi1, k, j_arr, quad)

    def weight(grid):
        psi_t, dens = seg.psi_density(t, grid)
        return np.exp(-4.0 * k * math.pi * psi_t) * dens

    return _quadrature(weight, seg.lattice.X, k, j_arr, quad)


def norming_constant(
    K: KahlerPotential,
    k: int,
    j,
    quad: QuadratureSpec = DEFAULT_QUAD,
    check: bool = True,
) -> float:
    """||theta_j||^2_{h^k} for one index; optionally verified under refinement.

    With ``check=True`` the point count is doubled and the two values must
    agree to 1e-10 relative, otherwise QuadratureError is raised.
    """
    j = j.j if isinstance(j, ThetaIndex) else j
    value = float(norming_batch(K, k, np.atleast_2d(j), quad)[0])
    if check:
        fine = QuadratureSpec(2 * quad.resolve(k), quad.periodization_radius)
        refined = float(norming_batch(K, k, np.atleast_2d(j), fine)[0])
        if abs(refined - value) > CONVERGENCE_RTOL * abs(refined):
            raise QuadratureError(
                f"norming quadrature not converged at k={k}, j={j}: "
                f"{value!r} vs {refined!r} under doubling"
            )
    return value


class NormingTable:
    """rho_k(j, t) over the full level-k basis and a fixed t grid."""

    def __init__(self, seg: GeodesicSegment, k: int, t_grid, rho, quad: QuadratureSpec):
        self.seg = seg
        self.k = k
        self.t_grid = np.asarray(t_grid, dtype=float)
        self.j_arr = basis_array(seg.lattice, k)
        self.rho = np.asarray(rho, dtype=float)
        self.quad = quad
        if self.rho.shape != (len(self.j_arr), len(self.t_grid)):
            raise ValueError("rho array shape mismatch")
        if np.any(self.rho <= 0.0):
            raise ValueError("norming constants must be strictly positive")

    def _t_index(self, t: float) -> int:
        hits = np.nonzero(self.t_grid == t)[0]
        if len(hits) == 0:
            raise KeyError(f"t={t} not in table grid")
        return int(hits[0])

    def _j_index(self, j) -> int:
        j = np.asarray(j.j if isinstance(j, ThetaIndex) else j, dtype=int).reshape(-1)
        flat = 0
        for a in j:
            flat = flat * self.k + int(a) % self.k
        return flat

    def rho_at(self, j, t: float) -> float:
        return float(self.rho[self._j_index(j), self._t_index(t)])

    def ratio_Rk(self, j, t: float) -> float:
        """R_k(j,t) = rho(j,t) / (rho(j,0)^{1-t} rho(j,1)^t); 1 at t in {0,1}."""
        row = self.rho[self._j_index(j)]
        i0, i1 = self._t_index(0.0), self._t_index(1.0)
        it = self._t_index(t)
        if it == i0 or it == i1:
            return 1.0
        return float(self.rho[self._j_index(j), it] / (row[i0] ** (1.0 - t) * row[i1] ** t))

    def ratios_at(self, t: float) -> np.ndarray:
        """R_k(., t) over the whole basis in lexicographic order."""
        i0, i1 = self._t_index(0.0), self._t_index(1.0)
        it = self._t_index(t)
        if it == i0:
            return np.ones(len(self.j_arr))
        if it == i1:
            return np.ones(len(self.j_arr))
        return self.rho[:, it] / (self.rho[:, i0] ** (1.0 - t) * self.rho[:, i1] ** t)

    def to_csv(self, path_or_buf) -> None:
        """Columns: k, j components, t, rho, Rk, Rinf (at the reduced moment)."""
        buf = path_or_buf if hasattr(path_or_buf, "write") else io.StringIO()
        m = self.seg.lattice.m
        header = ["k"] + [f"j{a}" for a in range(m)] + ["t", "rho", "Rk", "Rinf"]
        buf.write(",".join(header) + "\n")
        mu = index_moment(self.seg.lattice, self.k, self.j_arr)
        for it, t in enumerate(self.t_grid):
            rinf = ratio_Rinf(self.seg, mu, float(t))
            ratios = self.ratios_at(float(t))
            for ij, j in enumerate(self.j_arr):
                row = [f"{self.k}"] + [f"{int(a)}" for a in j]
                row += [
                    f"{t:.16e}",
                    f"{self.rho[ij, it]:.16e}",
                    f"{ratios[ij]:.16e}",
                    f"{rinf[ij]:.16e}",
                ]
                buf.write(",".join(row) + "\n")
        if buf is not path_or_buf:
            with open(path_or_buf, "w", encoding="utf-8") as fh:
                fh.write(buf.getvalue())


def build_norming_table(
    seg: GeodesicSegment, k: int, t_grid, quad: QuadratureSpec = DEFAULT_QUAD
) -> NormingTable:
    """Tabulate rho_k(j, t) over the full basis; endpoints must be present."""
    t_grid = np.asarray(t_grid, dtype=float)
    if 0.0 not in t_grid or 1.0 not in t_grid:
        raise ValueError("t grid must contain both endpoints 0 and 1")
    j_arr = basis_array(seg.lattice, k)
    rho = np.stack(
        [norming_at_time(seg, float(t), k, j_arr, quad) for t in t_grid], axis=1
    )
    return NormingTable(seg, k, t_grid, rho, quad)


def ratio_Rk(table: NormingTable, j, t: float) -> float:
    """Free-function alias of NormingTable.ratio_Rk."""
    return table.ratio_Rk(j, t)


def ratio_Rinf(seg: GeodesicSegment, mu, t: float):
    """Stationary-phase limit of R_k at the moment point mu.

    R_inf(mu,t) = ((det Hess u_0)^{1-t} (det Hess u_1)^t / det Hess u_t)^{1/2},
    the Hessians taken with respect to mu (each is the inverse of the
    corresponding Hess_y phi at its Legendre point).  4 pi X-periodic in mu,
    identically 1 at the endpoints and for flat endpoint pairs.

    Note the orientation: the Laplace prefactor of the norming integral is
    (det Hess u)^{-1/2}, so the dual-Hessian determinant of the blend sits
    in the denominator; by concavity of log det this makes R_inf <= 1, and
    it is the orientation the ratios R_k actually converge to.
    """
    mu = np.asarray(mu, dtype=float)
    single = mu.ndim == 1
    mu = np.atleast_2d(mu)
    h0 = seg.dual0.hessian(mu)
    h1 = seg.dual1.hessian(mu)
    d0, d1 = np.linalg.det(h0), np.linalg.det(h1)
    dt = np.linalg.det((1.0 - t) * h0 + t * h1)
    out = np.sqrt(d0 ** (1.0 - t) * d1**t / dt)
    return float(out[0]) if single else out


def index_moment(lattice: Lattice, k: int, j_arr) -> np.ndarray:
    """mu = -4 pi X (j/k) reduced mod 4 pi X into the fundamental cell.

    The reduction uses the 4 pi X-periodicity of R_inf; the raw points
    -4 pi X j/k exit the cell for j > 0.
    """
    j_arr = np.atleast_2d(np.asarray(j_arr, dtype=float))
    nu = (-j_arr / k) % 1.0
    return FOUR_PI * (nu @ lattice.X)


def regularity_gap(seg: GeodesicSegment, k: int, t: float, quad: QuadratureSpec = DEFAULT_QUAD):
    """max over j of |R_k(j,t) - R_inf(mu_j,t)| plus the per-index arrays."""
    j_arr = basis_array(seg.lattice, k)
    rho_t = norming_at_time(seg, t, k, j_arr, quad)
    rho_0 = norming_batch(seg.path.phi0, k, j_arr, quad)
    rho_1 = norming_batch(seg.path.phi1, k, j_arr, quad)
    rk = rho_t / (rho_0 ** (1.0 - t) * rho_1**t)
    rinf = ratio_Rinf(seg, index_moment(seg.lattice, k, j_arr), t)
    return float(np.abs(rk - rinf).max()), rk, rinf


def regularity_check(
    seg: GeodesicSegment,
    k_ladder,
    t: float,
    nu_target=None,
    j_selector=None,
    quad: QuadratureSpec = DEFAULT_QUAD,
    order: int = 2,
) -> AsymptoticFit:
    """Fit R_k(j_k,t)/R_inf - 1 against powers of 1/k along a ladder.

    ``j_selector`` maps k to an index row; the default rounds nu_target*k
    so that -4 pi X j/k tracks one fixed reduced moment as closely as the
    integer grid allows.  The fitted constant term must vanish: R_k has no
    k^0 correction beyond R_inf itself.
    """
    k_ladder = [int(k) for k in k_ladder]
    if len(k_ladder) < 4:
        raise ValueError("ladder needs at least 4 levels")
    m = seg.lattice.m
    if j_selector is None:
        nu = np.zeros(m) if nu_target is None else np.asarray(nu_target, dtype=float)

        def j_selector(k):
            return np.round(nu * k).astype(int) % k

    data = []
    for k in k_ladder:
        j = np.asarray(j_selector(k), dtype=int).reshape(1, m)
        rho_t = norming_at_time(seg, t, k, j, quad)[0]
        rho_0 = norming_batch(seg.path.phi0, k, j, quad)[0]
        rho_1 = norming_batch(seg.path.phi1, k, j, quad)[0]
        rk = rho_t / (rho_0 ** (1.0 - t) * rho_1**t)
        rinf = ratio_Rinf(seg, index_moment(seg.lattice, k, j)[0], t)
        data.append(rk / rinf - 1.0)
    fit = fit_inverse_powers(np.array(k_ladder, dtype=float), np.array(data), order)
    fit.meta["t"] = t
    fit.meta["values"] = np.array(data)
    return fit


def _x_factor_table(f_lo: int, f_hi: int, points: int) -> np.ndarray:
    """Trapezoid quadrature of exp(2 pi i f x) over [0,1] for each integer f."""
    f = np.arange(f_lo, f_hi + 1)
    s = np.arange(points) / points
    return np.exp(2j * math.pi * np.outer(f, s)).mean(axis=1)


def gram_matrix(
    K: KahlerPotential,
    k: int,
    quad: QuadratureSpec = DEFAULT_QUAD,
    policy=DEFAULT_POLICY,
) -> np.ndarray:
    """Hermitian Gram matrix <theta_l, theta_j>_{h^k} by honest quadrature.

    The double integral over the fundamental domain [0,1]^m x [0,1]^m is
    organized by the integer supports a = l + k n, b = j + k p of the two
    truncated theta series; the x and y trapezoid factors are then shared
    across index pairs.  Off-diagonals vanish to quadrature accuracy, which
    is the orthogonality check this function exists for.  Period matrices
    with nonzero real part are supported for m = 1 only.
    """
    lattice = K.lattice
    m = lattice.m
    B = lattice.Z.real
    has_B = bool(np.any(B != 0.0))
    if has_B and m > 1:
        raise NotImplementedError("gram_matrix with Re Z != 0 is limited to m = 1")
    points = quad.resolve(k)
    grid = _unit_grid(points, m)
    weight = (
        np.exp(
            -2.0 * k * math.pi * np.einsum("ga,ab,gb->g", grid, lattice.X, grid)
            - 4.0 * k * math.pi * K.psi(grid)
        )
        * K.volume_density(grid)
    )

    # integer support box valid for every basis index and every grid point
    corners = _unit_grid(2, m) * 2.0  # the 2^m corners of [0,1]^m
    eta_max_quad = float(np.einsum("ga,ab,gb->g", corners, lattice.X, corners).max())
    j_lo = np.zeros(m)
    j_hi = np.full(m, float(k - 1) + k)  # c = j/k + y, y in [0,1): fold y into j/k
    n_lo, n_hi = _summation_box(lattice, k, j_lo, j_hi, np.zeros(m), policy)
    # widen the certified box by the worst-case prefactor exp(pi k y X y)
    extra = int(math.ceil(math.sqrt(eta_max_quad / lattice.lam_min))) + 1
    n_lo, n_hi = n_lo - extra, n_hi + extra

    axes = [np.arange(k * lo, k * hi + k) for lo, hi in zip(n_lo, n_hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    support = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    # prune terms whose magnitude |amp_a e^{2 pi i a.z}| stays far below the
    # tail tolerance over the whole cell: that magnitude is bounded by
    # exp(pi k y X y) exp(-(pi lam/k) |a + k y|^2) with y in [0,1]^m
    dist = np.maximum(0.0, np.maximum(support, -support - k)).astype(float)
    log_bound = math.pi * k * eta_max_quad - (math.pi * lattice.lam_min / k) * (dist**2).sum(
        axis=1
    )
    keep = log_bound >= math.log(policy.tail_tol) - 14.0
    support = support[keep]
    amp = np.exp(
        (1j * math.pi / k) * np.einsum("am,mn,an->a", support + 0.0, lattice.Z, support + 0.0)
    )
    n_sup = len(support)

    # x factors per coordinate, product over coordinates for each pair (a,b)
    tx_pairs = np.ones((n_sup, n_sup), dtype=complex)
    for alpha in range(m):
        av = support[:, alpha]
        f_lo, f_hi = int(av.min() - av.max()), int(av.max() - av.min())
        table = _x_factor_table(f_lo, f_hi, points)
        tx_pairs *= table[av[:, None] - av[None, :] - f_lo]

    # y factors indexed by s = a + b (and d = a - b when Re Z != 0)
    s_axes = [np.arange(2 * int(av.min()), 2 * int(av.max()) + 1) for av in support.T]
    if not has_B:
        s_mesh = np.meshgrid(*s_axes, indexing="ij")
        s_vals = np.stack([g.reshape(-1) for g in s_mesh], axis=-1).astype(float)
        ty = np.empty(len(s_vals))
        chunk = max(1, int(4_000_000 // len(grid)))
        for start in range(0, len(s_vals), chunk):
            sv = s_vals[start : start + chunk]
            expo = -TWO_PI * (sv @ lattice.X) @ grid.T
            ty[start : start + chunk] = np.exp(expo) @ weight / len(grid)
        shape = [len(ax) for ax in s_axes]
        strides = np.cumprod([1] + shape[::-1][:-1])[::-1]
        s_pair = support[:, None, :] + support[None, :, :]
        idx = np.zeros((n_sup, n_sup), dtype=int)
        for alpha in range(m):
            idx += (s_pair[:, :, alpha] - int(s_axes[alpha][0])) * int(strides[alpha])
        ty_pairs = ty[idx]
    else:
        s_ax = s_axes[0]
        av = support[:, 0]
        d_ax = np.arange(int(av.min() - av.max()), int(av.max() - av.min()) + 1)
        expo = (
            (2j * math.pi * float(B[0, 0])) * d_ax[None, :, None]
            - TWO_PI * float(lattice.X[0, 0]) * s_ax[:, None, None]
        ) * grid[None, None, :, 0]
        ty2 = np.exp(expo) @ weight / len(grid)
        s_pair = av[:, None] + av[None, :] - int(s_ax[0])
        d_pair = av[:, None] - av[None, :] - int(d_ax[0])
        ty_pairs = ty2[s_pair, d_pair]

    pair_vals = (amp[:, None] * amp.conj()[None, :]) * tx_pairs * ty_pairs
    proj = np.zeros((k**m, n_sup))
    flat = np.zeros(n_sup, dtype=int)
    for alpha in range(m):
        flat = flat * k + np.mod(support[:, alpha], k)
    proj[flat, np.arange(n_sup)] = 1.0
    return proj @ pair_vals @ proj.T
