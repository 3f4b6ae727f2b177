"""Exact and Bergman geodesics of invariant Kahler metrics on abelian varieties.

The library builds the level-k theta bases of a principally polarized
abelian variety, the exact Monge-Ampere geodesic between two invariant
Kahler potentials through Legendre duality, the Bergman geodesics induced
by the normalized theta embeddings, and Poisson-integral harmonic maps for
interval and disk parameter domains.  The convergence of the Bergman
objects to the exact ones, including the complete expansion in powers of
1/k, is verified numerically by the bundled diagnostics.
"""

from .bergman import (
    BergmanGeodesic,
    bergman_density,
    bergman_potential,
    bernstein_limit_point,
    bernstein_sum,
    error_field,
    expansion_fit,
    riemann_aliasing,
    riemann_sum,
    weyl_apply,
)
from .errors import (
    BlendConvexityError,
    ConfigError,
    ConvexityError,
    CrossCheckError,
    FitConditioningError,
    LatticeError,
    NoConvergenceError,
    QuadratureError,
    ThetaGeoError,
    TruncationOverflowError,
)
from .fitting import AsymptoticFit, fit_inverse_powers, power_law_slope
from .geodesic import (
    GeodesicSegment,
    SymplecticDual,
    geodesic_check,
    inverse_legendre,
    legendre,
    moment_map,
    solve_gradient,
)
from .harmonic import (
    BoundaryData,
    BoundaryNorming,
    HarmonicMap,
    PoissonKernel,
    bergman_harmonic,
    harmonic_dual,
    harmonic_expansion_fit,
    harmonic_potential,
    kinf_ratio,
    kk_weights,
)
from .lattice import (
    Lattice,
    ThetaIndex,
    TruncationPolicy,
    hermitian_norm_sq,
    theta_basis,
    theta_eval,
    theta_eval_scaled,
    theta_log_abs_sq,
)
from .norming import (
    NormingTable,
    QuadratureSpec,
    build_norming_table,
    gram_matrix,
    index_moment,
    norming_constant,
    ratio_Rinf,
    ratio_Rk,
    regularity_check,
    regularity_gap,
)
from .potential import KahlerPotential, PeriodicPotential, PotentialPath

__version__ = "0.1.0"
