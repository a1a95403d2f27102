"""Consensus + innovations optimization over sampled networks.

Every node holds a local iterate. One iteration draws a network realization,
averages each iterate toward its sampled neighbors (consensus, weight
beta_k), and takes a step against the node's two-point gradient estimate
(innovations, weight alpha_k). All nodes update synchronously from the same
pre-step state.

``run_distributed`` is the engine; it evaluates all nodes' probe batches in
one stacked pass when the objectives are homogeneous, which is what makes
long Monte Carlo experiments affordable. ``distributed_step`` /
``distributed_step_nodewise`` expose a single iteration in matrix and
per-node form for verification.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import rng as streams
from .estimator import ScheduleViolationError, WeightSchedule, kw_gradient, probe_points, validate_schedule
from .graphs import Graph, RandomNetworkModel, laplacian_of, sample_network
from .objectives import (
    GaussianNoise,
    LocalObjective,
    LogisticL2,
    Quadratic,
    ZerothOrderOracle,
    _sigmoid,
    sum_objectives,
)


class DivergenceError(RuntimeError):
    """A non-finite iterate appeared; carries where it happened."""

    def __init__(self, iteration: int, node: int, run_index: int | None = None):
        self.iteration = iteration
        self.node = node
        self.run_index = run_index
        where = f"iteration {iteration}, node {node}"
        if run_index is not None:
            where += f", run {run_index}"
        super().__init__(f"non-finite iterate at {where}")


@dataclass
class DistributedState:
    """Stacked iterates, one row per node, after ``iteration`` steps."""

    iterates: np.ndarray
    iteration: int


@dataclass
class AlgorithmConfig:
    """Everything one distributed run depends on, randomness included."""

    network: RandomNetworkModel
    objectives: Sequence[LocalObjective]
    noise: GaussianNoise
    schedule: WeightSchedule
    initial_iterates: np.ndarray
    max_iterations: int
    seed: int


@dataclass
class CentralizedConfig:
    """Single-node baseline: ``kwsa-fusion`` queries the summed objective with
    the two-point scheme; ``sgd-fusion`` descends along analytic gradients of
    uniformly sampled data points with step alpha0/(N(k+1))."""

    mode: str
    objectives: Sequence[LocalObjective]
    noise: GaussianNoise
    schedule: WeightSchedule
    initial_point: np.ndarray
    max_iterations: int
    seed: int


Observer = Callable[[DistributedState, int], None]


def min_strong_convexity(objectives: Sequence[LocalObjective]) -> float:
    return min(obj.strong_convexity_bounds()[0] for obj in objectives)


def network_average(state: DistributedState) -> np.ndarray:
    """Arithmetic mean of the node iterates."""
    return state.iterates.mean(axis=0)


def _node_gradients(
    state: DistributedState,
    spacing: float,
    oracles: Sequence[ZerothOrderOracle],
    noise_rngs: Sequence[np.random.Generator],
) -> np.ndarray:
    grads = np.empty_like(state.iterates)
    for i, oracle in enumerate(oracles):
        grads[i] = kw_gradient(oracle, state.iterates[i], spacing, noise_rngs[i]).value
    return grads


def _check_finite(iterates: np.ndarray, iteration: int) -> None:
    if not np.isfinite(iterates).all():
        bad = int(np.where(~np.isfinite(iterates).all(axis=1))[0][0])
        raise DivergenceError(iteration, bad)


def distributed_step(
    state: DistributedState,
    k: int,
    net: Graph,
    oracles: Sequence[ZerothOrderOracle],
    schedule: WeightSchedule,
    noise_rngs: Sequence[np.random.Generator],
) -> DistributedState:
    """One synchronous iteration in stacked (Laplacian) form.

    ``net`` is this iteration's sampled graph; ``noise_rngs`` holds one
    stream per node, consumed in node order.
    """
    alpha, beta, spacing = schedule.at(k)
    grads = _node_gradients(state, spacing, oracles, noise_rngs)
    lap = laplacian_of(net)
    new = state.iterates - beta * (lap @ state.iterates) - alpha * grads
    _check_finite(new, k)
    return DistributedState(new, k + 1)


def distributed_step_nodewise(
    state: DistributedState,
    k: int,
    net: Graph,
    oracles: Sequence[ZerothOrderOracle],
    schedule: WeightSchedule,
    noise_rngs: Sequence[np.random.Generator],
) -> DistributedState:
    """Same iteration written per node: explicit neighborhood sums."""
    alpha, beta, spacing = schedule.at(k)
    grads = _node_gradients(state, spacing, oracles, noise_rngs)
    x = state.iterates
    new = np.empty_like(x)
    for i in range(len(x)):
        disagreement = sum((x[i] - x[j] for j in net.neighbors(i)), np.zeros(x.shape[1]))
        new[i] = x[i] - beta * disagreement - alpha * grads[i]
    _check_finite(new, k)
    return DistributedState(new, k + 1)


def _stacked_values(objectives: Sequence[LocalObjective]):
    """Batched evaluator ``(probes (N,m,d), sq (N,m)) -> values (N,m)`` for
    homogeneous objective lists, or None if shapes force the per-node path."""
    if all(isinstance(o, LogisticL2) for o in objectives):
        shapes = {o.features.shape for o in objectives}
        if len(shapes) == 1:
            feats_t = np.ascontiguousarray(
                np.stack([o.features for o in objectives]).transpose(0, 2, 1)
            )
            labels = np.stack([o.labels for o in objectives])[:, None, :]
            ridges = np.array([[o.ridge] for o in objectives])

            def values(probes, sq):
                logits = np.matmul(probes[:, :, :-1], feats_t)
                logits += probes[:, :, -1:]
                out = np.logaddexp(0.0, -(labels * logits)).sum(axis=2)
                out += 0.5 * ridges * sq
                return out

            return values
    if all(isinstance(o, Quadratic) for o in objectives):
        hessians = np.stack([o.hessian for o in objectives])
        linears = np.stack([o.linear for o in objectives])[:, :, None]

        def values(probes, sq):
            out = 0.5 * (np.matmul(probes, hessians) * probes).sum(axis=2)
            out -= np.matmul(probes, linears)[:, :, 0]
            return out

        return values
    return None


def _check_schedule(schedule: WeightSchedule, objectives: Sequence[LocalObjective]) -> None:
    violations = validate_schedule(schedule, min_strong_convexity(objectives))
    if violations:
        raise ScheduleViolationError(violations)


def _check_shapes(config: AlgorithmConfig) -> tuple[int, int]:
    initial = np.asarray(config.initial_iterates, dtype=float)
    n = config.network.base_graph.num_nodes
    if len(config.objectives) != n:
        raise ValueError(f"{len(config.objectives)} objectives for a {n}-node network")
    dims = {obj.dimension for obj in config.objectives}
    if len(dims) != 1:
        raise ValueError(f"objectives disagree on dimension: {sorted(dims)}")
    d = dims.pop()
    if initial.shape != (n, d):
        raise ValueError(f"initial iterates must have shape {(n, d)}, got {initial.shape}")
    if config.max_iterations < 0:
        raise ValueError("max_iterations must be >= 0")
    return n, d


def run_distributed(config: AlgorithmConfig, observer: Observer | None = None) -> DistributedState:
    """Run the full consensus + innovations recursion.

    One network realization is sampled per iteration from the config's
    link-failure model. ``observer`` (if any) is invoked at every iteration
    k = 0..K with the current state and the total number of oracle queries
    made so far; observers must not mutate the state they are passed. The
    trajectory is a pure function of ``config.seed``.

    Raises ``DivergenceError`` if any iterate turns non-finite and
    ``ScheduleViolationError`` if the weight schedule is inadmissible
    against the smallest local strong-convexity modulus.
    """
    _check_schedule(config.schedule, config.objectives)
    return _engine(config, observer)


def _engine(config: AlgorithmConfig, observer: Observer | None) -> DistributedState:
    n, d = _check_shapes(config)
    schedule = config.schedule
    noise = config.noise
    net_rng = streams.network_stream(config.seed)
    node_rngs = streams.noise_streams(config.seed, n)
    x = np.asarray(config.initial_iterates, dtype=float).copy()
    if observer is not None:
        observer(DistributedState(x, 0), 0)

    values = _stacked_values(config.objectives)
    if values is None:
        # Mixed objective kinds: fall back to the per-node step. Stream
        # consumption is identical, only the evaluation batching differs.
        oracles = [ZerothOrderOracle(obj, noise) for obj in config.objectives]
        state = DistributedState(x, 0)
        model = config.network
        for k in range(config.max_iterations):
            state = distributed_step(state, k, sample_network(model, net_rng), oracles, schedule, node_rngs)
            if observer is not None:
                observer(state, sum(o.query_count for o in oracles))
        return state

    edge_array = config.network.base_graph.edge_array
    p_fail = config.network.p_fail
    offsets = np.zeros((2 * d, d))
    idx = np.arange(d)
    offsets[2 * idx, idx] = 1.0
    offsets[2 * idx + 1, idx] = -1.0
    lap = np.zeros((n, n))
    queries_per_iter = 2 * d * n
    sigma_only = noise.state_coeff == 0.0

    for k in range(config.max_iterations):
        alpha, beta, spacing = schedule.at(k)
        draws = net_rng.random(len(edge_array))
        kept = edge_array[draws >= p_fail]
        lap.fill(0.0)
        if len(kept):
            lap[kept[:, 0], kept[:, 1]] = -1.0
            lap[kept[:, 1], kept[:, 0]] = -1.0
            np.fill_diagonal(lap, -lap.sum(axis=1))

        probes = x[:, None, :] + spacing * offsets
        sq = np.square(probes).sum(axis=2)
        vals = values(probes, sq)
        if sigma_only:
            for i in range(n):
                vals[i] += noise.sigma * node_rngs[i].standard_normal(2 * d)
        else:
            scale = np.sqrt(noise.state_coeff * sq + noise.sigma**2)
            for i in range(n):
                vals[i] += scale[i] * node_rngs[i].standard_normal(2 * d)
        grads = (vals[:, 0::2] - vals[:, 1::2]) / (2.0 * spacing)

        new = x - beta * (lap @ x) - alpha * grads
        if not np.isfinite(new).all():
            _check_finite(new, k)
        x = new
        if observer is not None:
            observer(DistributedState(x, k + 1), queries_per_iter * (k + 1))
    return DistributedState(x, config.max_iterations)


def run_centralized(config: CentralizedConfig, observer: Observer | None = None) -> DistributedState:
    """Run a fusion-node baseline; the returned state has a single row.

    ``kwsa-fusion`` is exactly the single-node distributed recursion applied
    to the summed objective (2d noisy queries per iteration), so it shares
    the engine and the stream derivation with ``run_distributed``. The
    schedule is validated against the local objectives' moduli, not the
    (N-fold larger) modulus of their sum.
    """
    _check_schedule(config.schedule, config.objectives)
    if config.mode == "kwsa-fusion":
        inner = AlgorithmConfig(
            network=RandomNetworkModel(Graph(1, frozenset()), 0.0),
            objectives=[sum_objectives(list(config.objectives))],
            noise=config.noise,
            schedule=config.schedule,
            initial_iterates=np.asarray(config.initial_point, dtype=float)[None, :],
            max_iterations=config.max_iterations,
            seed=config.seed,
        )
        return _engine(inner, observer)
    if config.mode != "sgd-fusion":
        raise ValueError(f"unknown centralized mode {config.mode!r}")
    return _run_sgd_fusion(config, observer)


def _run_sgd_fusion(config: CentralizedConfig, observer: Observer | None) -> DistributedState:
    if not all(isinstance(obj, LogisticL2) for obj in config.objectives):
        raise ValueError("sgd-fusion needs per-datapoint structure: logistic objectives only")
    objectives: list[LogisticL2] = list(config.objectives)
    n = len(objectives)
    y = np.asarray(config.initial_point, dtype=float).copy()
    draw_rng = streams.noise_stream(config.seed, 0)
    counts = np.array([len(obj.labels) for obj in objectives])
    ridge_total = float(sum(obj.ridge for obj in objectives))
    homogeneous = len({obj.features.shape for obj in objectives}) == 1
    if homogeneous:
        feats = np.stack([obj.features for obj in objectives])
        labels = np.stack([obj.labels for obj in objectives])
    if observer is not None:
        observer(DistributedState(y[None, :], 0), 0)

    node_idx = np.arange(n)
    for k in range(config.max_iterations):
        step = config.schedule.at(k)[0] / n
        if homogeneous:
            picks = draw_rng.integers(0, counts[0], size=n)
            rows = feats[node_idx, picks]
            labs = labels[node_idx, picks]
        else:
            picks = [int(draw_rng.integers(0, c)) for c in counts]
            rows = np.stack([obj.features[j] for obj, j in zip(objectives, picks)])
            labs = np.array([obj.labels[j] for obj, j in zip(objectives, picks)])
        margins = labs * (rows @ y[:-1] + y[-1])
        # one sampled point stands in for the node's n_i-point sum
        coeff = -labs * _sigmoid(-margins) * counts
        grad = np.empty_like(y)
        grad[:-1] = coeff @ rows
        grad[-1] = coeff.sum()
        grad += ridge_total * y
        y = y - step * grad
        if not np.isfinite(y).all():
            raise DivergenceError(k, 0)
        if observer is not None:
            observer(DistributedState(y[None, :], k + 1), 0)
    return DistributedState(y[None, :], config.max_iterations)
