"""Distributed Kiefer-Wolfowitz zeroth-order optimization over unreliable networks.

Networked nodes minimize the sum of their local strongly convex costs using
only noisy function values: each iteration combines neighborhood averaging
over a randomly sampled communication graph with a step against a two-point
finite-difference gradient estimate. The package bundles the simulation
engine, centralized baselines, a Monte Carlo experiment harness with
log-log rate estimation, and a CLI.
"""

from .estimator import (
    KWGradientEstimate,
    ScheduleViolationError,
    WeightSchedule,
    kw_gradient,
    validate_schedule,
)
from .graphs import (
    GeometricGraphSpec,
    Graph,
    GraphGenerationError,
    RandomNetworkModel,
    algebraic_connectivity,
    expected_laplacian,
    generate_auto_radius_graph,
    generate_geometric_graph,
    laplacian_of,
    sample_network,
)
from .objectives import (
    ConvergenceError,
    DatasetSpec,
    GaussianNoise,
    LocalObjective,
    LogisticL2,
    Quadratic,
    ZerothOrderOracle,
    generate_dataset,
    solve_ground_truth,
    sum_objectives,
)
from .optimizer import (
    AlgorithmConfig,
    CentralizedConfig,
    DistributedState,
    DivergenceError,
    distributed_step,
    distributed_step_nodewise,
    network_average,
    run_centralized,
    run_distributed,
)
from .experiment import (
    ExperimentPlan,
    RateFit,
    RateFitError,
    RunTrace,
    TraceRecorder,
    avg_gap_sq,
    disagreement_sq,
    estimate_rate,
    geometric_grid,
    monte_carlo,
    monte_carlo_centralized,
    mse_across_nodes,
    tail_window,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
