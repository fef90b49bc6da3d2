"""Numerical laboratory for Dirichlet heat semigroups on collapsing tubes.

The package builds the rescaled tube geometry around a closed submanifold,
assembles the weighted Laplacians of the product and induced metrics on
tensor grids, renormalizes by the fiber ground energy, and studies the
collapse limit through semigroup sweeps, resolvents, and conditioned
Brownian motion.
"""

__version__ = "0.1.0"

from .errors import (
    CoercivityViolation,
    ConfigError,
    DegenerateConditioning,
    EmptyEnsemble,
    FocalRadiusExceeded,
    LowEffectiveSampleSize,
    ResolutionError,
    StepSizeError,
    TubelabError,
)
from .geometry import (
    CircleInPlane,
    CometricAt,
    CurveInSpace,
    SyntheticFiberModel,
    TubePoint,
    cometric,
    constant_curve,
    density_rho,
    ellipse_curve,
    jacobi_endomorphism,
    potential_U,
    potential_U_fd,
    sampled_curve,
    weingarten,
)
from .fiber import (
    FiberSpectrum,
    Projection,
    bessel_j0_first_zero,
    extract_fb,
    fiber_spectrum,
    make_fiber_grid,
    multiplet_projection,
    project_E0,
    rotation_fields,
)
from .discretize import (
    DiscreteOperator,
    ProductGrid,
    assemble_form,
    assemble_operator,
    build_grid,
    random_fields,
    renormalize,
    residual_h1_bound,
    residual_r_eps,
    sobolev_norm,
)
from .semigroup import (
    Propagator,
    SweepResult,
    conditional_flow_operator,
    convergence_sweep,
    limit_propagate,
    phi_functional,
    propagate,
    resolvent_minimizer,
)
from .stochastic import (
    MarginalEstimate,
    PathEnsemble,
    circle_heat_oracle,
    marginal_estimate,
    planar_bm_angle_cos,
    sample_conditioned,
)
