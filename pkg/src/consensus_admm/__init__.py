"""Decentralized consensus ADMM: engines, rate certificates, experiments."""

from .admm import (
    AdmmConfig,
    AdmmState,
    ContractionError,
    GNorm,
    InvariantViolation,
    KktResidualError,
    ReferenceSolution,
    Trajectory,
    full_constraint_matrices,
    reference_solution,
    run,
    step_full,
    step_simplified,
)
from .dgd import MixingMatrix, metropolis_weights, run_dgd
from .experiments import (
    ExperimentConfig,
    Instance,
    ResultRow,
    best_practical_c,
    build_instance,
    config_hash,
    run_experiment,
)
from .objectives import (
    CustomLocal,
    ObjectiveProfile,
    ObjectiveSet,
    QuadraticLocal,
    centralized_solve,
    generate,
    gradient,
    profile,
    shape_condition,
)
from .rates import (
    RateBundle,
    RateReport,
    c_t,
    delta,
    delta_t,
    empirical_rates,
    mu_star,
    rate_bundle,
    rho_from_delta,
)
from .spectral import GraphSpectra, IncidenceSet, build_incidence, pinv_apply_Lminus, spectra
from .topology import (
    NetworkMetrics,
    Topology,
    bipartite,
    grid3d,
    metrics,
    random_connected,
    special,
)

__all__ = [name for name in dir() if not name.startswith("_")]
