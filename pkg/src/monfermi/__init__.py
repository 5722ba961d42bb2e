"""Monitored free fermions on a disordered chain.

Gaussian-state trajectory simulation of a tight-binding chain under weak
continuous occupation monitoring, with the analysis stack used to map its
entanglement phases: entropy scaling fits, data collapses, and an exact
small-system reference implementation for validation.
"""

__version__ = "0.1.0"

from .analysis import (
    BoundaryPoint,
    CftFit,
    CollapseResult,
    ParamSeries,
    collapse_charge,
    collapse_cost,
    collapse_entropy,
    conformal_abscissa,
    fit_half_chain_charge,
    fit_profile_charge,
    phase_boundary,
)
from .config import RunConfig, config_hash, load_run_config
from .engine import (
    EnsembleResult,
    EnsembleStats,
    EvolutionSchedule,
    NoiseSource,
    TrajectoryRecord,
    disorder_seed,
    dt_convergence_check,
    generate_noise,
    run_ensemble,
    run_trajectory,
    saturation_average,
)
from .errors import DegenerateStateError, ParameterError
from .gaussian import (
    apply_step,
    autocorrelation,
    connected_correlation,
    correlation_matrix,
    entanglement_entropy,
    entropy_profile,
    neel_state,
    orbital_densities,
    renormalize,
)
from .model import (
    DisorderRealization,
    ModelSpec,
    build_hamiltonian,
    make_propagator,
    sample_disorder,
)

__all__ = [
    "__version__",
    "BoundaryPoint",
    "CftFit",
    "CollapseResult",
    "DegenerateStateError",
    "DisorderRealization",
    "EnsembleResult",
    "EnsembleStats",
    "EvolutionSchedule",
    "ModelSpec",
    "NoiseSource",
    "ParamSeries",
    "ParameterError",
    "RunConfig",
    "TrajectoryRecord",
    "apply_step",
    "autocorrelation",
    "build_hamiltonian",
    "collapse_charge",
    "collapse_cost",
    "collapse_entropy",
    "config_hash",
    "conformal_abscissa",
    "connected_correlation",
    "correlation_matrix",
    "disorder_seed",
    "dt_convergence_check",
    "entanglement_entropy",
    "entropy_profile",
    "fit_half_chain_charge",
    "fit_profile_charge",
    "generate_noise",
    "load_run_config",
    "make_propagator",
    "neel_state",
    "orbital_densities",
    "phase_boundary",
    "renormalize",
    "run_ensemble",
    "run_trajectory",
    "sample_disorder",
    "saturation_average",
]
