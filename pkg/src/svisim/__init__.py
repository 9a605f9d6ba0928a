"""Simulation library for constrained stochastic systems.

The package simulates coupled diffusions whose states are confined by
convex potentials (reflection at a boundary, soft penalties) using
splitting schemes built on proximal maps, together with an experiment
harness for convergence, penalization and perturbation studies, and a
CLI (``svi-sim``) that writes deterministic report bundles.
"""
from .coefficients import (
    ControlProcess,
    PathView,
    ProbeReport,
    XCoefficients,
    XMeta,
    YCoefficients,
    YMeta,
    constant_view,
    pair_grid_sampler,
    pair_random_sampler,
    probe_holder,
    probe_monotone_drift,
)
from .exceptions import (
    ConfigError,
    DomainError,
    NumericalError,
    PerturbationRejected,
    SviSimError,
    TrendAssertionError,
)
from .experiments import (
    ExperimentReport,
    MCStats,
    PerturbationSpec,
    RateFit,
    SimulateResult,
    cauchy_refinement,
    fit_rate,
    mc_stats,
    pairwise_sum,
    perturbation_sweep,
    simulate_paths,
    yosida_sweep,
)
from .models import (
    ModelInstance,
    build_model,
    make_heston_path_dependent,
    make_reflected_slv,
    model_names,
    run_model_probes,
)
from .paths import (
    CorrelationSpec,
    MeshGrid,
    SamplePath,
    SeedSpec,
    coarsen_increments,
    compose_driver,
    dyadic_ladder,
    generate_increment_block,
    generate_increments,
)
from .potentials import (
    AbsValue,
    BoxIndicator,
    ConvexPotential,
    HalfLineIndicator,
    MoreauEnvelope,
    Separable,
    SubgradientWitness,
    potential_from_config,
    potential_to_config,
    subgradient_witness,
)
from .solver import (
    BoundaryActivity,
    Projection,
    ProxStep,
    ReflectionRecord,
    SimOutput,
    Yosida,
    boundary_activity,
    check_complementarity,
    complementarity_slack_batch,
    decomposition_residual_x,
    decomposition_residual_y,
    domain_violation_counts,
    picard_y,
    picard_y_batch,
    scheme_from_config,
    scheme_to_config,
    solve_x,
    solve_x_batch,
    solve_y,
    solve_y_batch,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # potentials
    "ConvexPotential", "BoxIndicator", "HalfLineIndicator", "AbsValue",
    "Separable", "MoreauEnvelope", "SubgradientWitness", "subgradient_witness",
    "potential_to_config", "potential_from_config",
    # paths and drivers
    "MeshGrid", "SamplePath", "CorrelationSpec", "SeedSpec",
    "generate_increments", "generate_increment_block", "compose_driver",
    "coarsen_increments", "dyadic_ladder",
    # coefficients
    "PathView", "constant_view", "XCoefficients", "YCoefficients",
    "XMeta", "YMeta", "ControlProcess", "ProbeReport",
    "pair_grid_sampler", "pair_random_sampler",
    "probe_monotone_drift", "probe_holder",
    # models
    "ModelInstance", "build_model", "model_names", "run_model_probes",
    "make_heston_path_dependent", "make_reflected_slv",
    # solver
    "ProxStep", "Projection", "Yosida", "scheme_from_config", "scheme_to_config",
    "ReflectionRecord", "SimOutput", "solve_x", "solve_x_batch",
    "solve_y", "solve_y_batch", "picard_y", "picard_y_batch",
    "check_complementarity", "complementarity_slack_batch",
    "boundary_activity", "BoundaryActivity",
    "decomposition_residual_x", "decomposition_residual_y",
    "domain_violation_counts",
    # experiments
    "MCStats", "mc_stats", "pairwise_sum", "RateFit", "fit_rate",
    "ExperimentReport", "PerturbationSpec", "cauchy_refinement",
    "yosida_sweep", "perturbation_sweep", "simulate_paths", "SimulateResult",
    # errors
    "SviSimError", "DomainError", "NumericalError", "ConfigError",
    "PerturbationRejected", "TrendAssertionError",
]
