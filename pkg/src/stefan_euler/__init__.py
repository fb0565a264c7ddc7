"""Euler scheme toolkit for the probabilistic supercooled Stefan problem.

Two engines approximate the discrete free boundary (the loss curve): a
counter-keyed particle Monte Carlo system and a deterministic
density-evolution grid oracle.  On top of them sit explicit local
convergence-rate bounds with their admissible time window, a physical
jump-size resolver, and mesh-refinement study drivers.
"""

from .analysis import (
    ConvergenceReport,
    GridEngine,
    ParticleEngine,
    RateFit,
    continuity_probe_times,
    convergence_study,
    fit_rate,
    fit_rate_with_reference,
    m1_graph_distance,
    m1_pointwise_check,
    sup_error,
)
from .bounds import (
    RateBoundConstants,
    RateBoundTerms,
    TabulatedSubDensity,
    bound_window,
    comparison_integral,
    comparison_integral_inv,
    jump_witness,
    margin_integral,
    margin_integral_inv,
    modulus_of_continuity,
    physical_jump_size,
    rate_bound,
    rate_bound_constants,
    rate_bound_terms,
    simplified_rate_bound,
    std_normal_cdf,
    std_normal_quantile,
)
from .curves import LossCurve, refinement_factor, step_count
from .errors import (
    BoundVacuous,
    DegenerateInput,
    DomainError,
    EngineError,
    InvalidGrid,
    InvalidMesh,
    MeshMismatch,
    NonpositiveConstant,
    NoValidSupport,
    OutOfRange,
    StefanError,
    ValidationError,
    WindowExceeded,
)
from .grid import (
    SurvivorDensity,
    convolve_step,
    initial_survivor_density,
    one_step_oracle,
    run_grid_scheme,
)
from .laws import (
    ConstantMargin,
    GammaLaw,
    MarginProfile,
    MonomialDeficitLaw,
    MonomialMargin,
    TabulatedLaw,
    TabulatedMargin,
    default_deficit_coefficient,
    solve_support_bound,
    tabulated_from_csv,
    uniform_law,
)
from .particle import ParticleEnsemble, particle_scaling_study, run_particle_scheme
from .rng import RandomStream

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
