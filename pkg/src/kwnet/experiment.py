"""Monte Carlo harness, convergence metrics, and log-log rate estimation.

A run is summarized by three per-iteration quantities against the known
minimizer ``x_star`` of the summed objectives:

* ``mse_across_nodes``  -- (1/N) sum_i ||x_i - x_star||^2
* ``disagreement_sq``   -- sum_i ||x_i - mean_j x_j||^2
* ``avg_gap_sq``        -- ||mean_i x_i - x_star||^2

They satisfy mse = avg_gap_sq + disagreement_sq / N exactly. Traces are
recorded on a geometric iteration grid so that log-log rate fits see a
uniform point density in log k.
"""

from __future__ import annotations

import csv
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rng as streams
from .graphs import RandomNetworkModel
from .optimizer import (
    AlgorithmConfig,
    CentralizedConfig,
    DistributedState,
    DivergenceError,
    run_centralized,
    run_distributed,
)


class RateFitError(ValueError):
    """The requested rate fit is undefined on the given series."""


TRACE_COLUMNS = ("k", "mse", "disagreement_sq", "avg_gap_sq", "queries")


def mse_across_nodes(state: DistributedState, x_star: np.ndarray) -> float:
    """Mean squared distance of the node iterates from the minimizer."""
    diff = state.iterates - x_star
    if state.iterates.shape[1] != len(x_star):
        raise ValueError(f"x_star has length {len(x_star)}, iterates are {state.iterates.shape}")
    return float(np.square(diff).sum() / len(diff))


def disagreement_sq(state: DistributedState) -> float:
    """Squared norm of the stacked deviations from the network average."""
    centered = state.iterates - state.iterates.mean(axis=0)
    return float(np.square(centered).sum())


def avg_gap_sq(state: DistributedState, x_star: np.ndarray) -> float:
    """Squared distance of the network average from the minimizer."""
    return float(np.square(state.iterates.mean(axis=0) - x_star).sum())


def geometric_grid(max_iterations: int, growth: float = 1.05) -> np.ndarray:
    """Recording grid: 0, the powers ceil(growth^m), and the final iteration."""
    ks = {0, max_iterations}
    value = 1.0
    while value <= max_iterations:
        ks.add(math.ceil(value))
        value *= growth
    return np.array(sorted(k for k in ks if k <= max_iterations), dtype=np.int64)


@dataclass
class RunTrace:
    """Metric series sampled on a (possibly thinned) iteration grid."""

    iterations: np.ndarray
    mse: np.ndarray
    disagreement_sq: np.ndarray
    avg_gap_sq: np.ndarray
    queries: np.ndarray


class TraceRecorder:
    """Observer that computes the standard metrics on a recording grid."""

    def __init__(self, x_star: np.ndarray, grid: np.ndarray):
        self.x_star = np.asarray(x_star, dtype=float)
        self.grid = np.asarray(grid, dtype=np.int64)
        self._grid_set = set(self.grid.tolist())
        self._rows: list[tuple[int, float, float, float, int]] = []

    def __call__(self, state: DistributedState, total_queries: int) -> None:
        if state.iteration not in self._grid_set:
            return
        self._rows.append(
            (
                state.iteration,
                mse_across_nodes(state, self.x_star),
                disagreement_sq(state),
                avg_gap_sq(state, self.x_star),
                total_queries,
            )
        )

    def trace(self) -> RunTrace:
        rows = np.array(self._rows, dtype=float)
        return RunTrace(
            iterations=rows[:, 0].astype(np.int64),
            mse=rows[:, 1],
            disagreement_sq=rows[:, 2],
            avg_gap_sq=rows[:, 3],
            queries=rows[:, 4].astype(np.int64),
        )


@dataclass
class ExperimentPlan:
    """A Monte Carlo sweep over link-failure probabilities.

    Run r of every sweep uses the stream split (seed, r), so the sweeps for
    different ``p_fail`` values share their noise realizations and differ
    only through the link-failure thresholding.
    """

    base: AlgorithmConfig
    num_runs: int
    p_fail_values: tuple[float, ...]
    x_star: np.ndarray
    window: float = 0.5

    def __post_init__(self):
        if self.num_runs < 1:
            raise ValueError(f"num_runs must be >= 1, got {self.num_runs}")
        if not 0.0 < self.window <= 1.0:
            raise ValueError(f"window must lie in (0, 1], got {self.window}")


def _mean_traces(traces: Sequence[RunTrace]) -> RunTrace:
    # Fixed run-index summation order; results do not depend on completion order.
    mse = sum(t.mse for t in traces) / len(traces)
    dis = sum(t.disagreement_sq for t in traces) / len(traces)
    gap = sum(t.avg_gap_sq for t in traces) / len(traces)
    return RunTrace(traces[0].iterations.copy(), mse, dis, gap, traces[0].queries.copy())


def _single_run(args: tuple[AlgorithmConfig, np.ndarray, np.ndarray, int]) -> RunTrace:
    config, x_star, grid, run_index = args
    recorder = TraceRecorder(x_star, grid)
    try:
        run_distributed(config, recorder)
    except DivergenceError as err:
        raise DivergenceError(err.iteration, err.node, run_index) from err
    return recorder.trace()


def monte_carlo(plan: ExperimentPlan, parallel_width: int = 1) -> dict[float, RunTrace]:
    """Mean metric trace per link-failure probability.

    Aggregation is the arithmetic mean over runs in run-index order; the
    result is independent of ``parallel_width``.
    """
    grid = geometric_grid(plan.base.max_iterations)
    jobs = []
    for p_fail in plan.p_fail_values:
        network = RandomNetworkModel(plan.base.network.base_graph, p_fail)
        for run in range(plan.num_runs):
            config = replace(
                plan.base, network=network, seed=streams.split_seed(plan.base.seed, run)
            )
            jobs.append((config, plan.x_star, grid, run))
    if parallel_width > 1:
        with ProcessPoolExecutor(max_workers=parallel_width) as pool:
            results = list(pool.map(_single_run, jobs))
    else:
        results = [_single_run(job) for job in jobs]
    aggregated = {}
    for index, p_fail in enumerate(plan.p_fail_values):
        chunk = results[index * plan.num_runs : (index + 1) * plan.num_runs]
        aggregated[p_fail] = _mean_traces(chunk)
    return aggregated


def monte_carlo_centralized(
    base: CentralizedConfig, num_runs: int, x_star: np.ndarray, parallel_width: int = 1
) -> RunTrace:
    """Mean metric trace of the centralized baseline over ``num_runs`` runs."""
    grid = geometric_grid(base.max_iterations)
    traces = []
    for run in range(num_runs):
        config = replace(base, seed=streams.split_seed(base.seed, run))
        recorder = TraceRecorder(x_star, grid)
        try:
            run_centralized(config, recorder)
        except DivergenceError as err:
            raise DivergenceError(err.iteration, err.node, run) from err
        traces.append(recorder.trace())
    return _mean_traces(traces)


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through (log10(k+1), log10(value))."""

    slope: float
    intercept: float
    r_squared: float


def estimate_rate(iterations: np.ndarray, values: np.ndarray, window: float = 0.5) -> RateFit:
    """Fit the decay exponent of a metric series on its log-log tail.

    ``window`` is the fraction of the log10(k+1) span, measured from the
    large-k end, over which the line is fitted. Fewer than 10 points or any
    nonpositive value in the window raises ``RateFitError``.
    """
    if not 0.0 < window <= 1.0:
        raise ValueError(f"window must lie in (0, 1], got {window}")
    ks = np.asarray(iterations, dtype=float)
    vals = np.asarray(values, dtype=float)
    log_k = np.log10(ks + 1.0)
    cut = log_k.max() - window * (log_k.max() - log_k.min())
    mask = log_k >= cut
    if mask.sum() < 10:
        raise RateFitError(f"need >= 10 points in the fit window, got {int(mask.sum())}")
    if (vals[mask] <= 0.0).any():
        raise RateFitError("nonpositive values in the fit window; rate undefined")
    x = log_k[mask]
    y = np.log10(vals[mask])
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = y - y.mean()
    ss_tot = float(total @ total)
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - float(residual @ residual) / ss_tot
    return RateFit(float(slope), float(intercept), r_squared)


def tail_window(max_iterations: int, min_k: int) -> float:
    """Window fraction for ``estimate_rate`` selecting iterations k >= min_k."""
    hi = math.log10(max_iterations + 1.0)
    return 1.0 - math.log10(min_k + 1.0) / hi


def write_trace_csv(trace: RunTrace, path: str | Path) -> None:
    """CSV with header ``k,mse,disagreement_sq,avg_gap_sq,queries``.

    Floats are written in shortest round-trip form, so identical traces
    produce byte-identical files.
    """
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for row in zip(trace.iterations, trace.mse, trace.disagreement_sq, trace.avg_gap_sq, trace.queries):
            writer.writerow([int(row[0]), repr(float(row[1])), repr(float(row[2])), repr(float(row[3])), int(row[4])])


def read_trace_csv(path: str | Path) -> RunTrace:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [(int(r[0]), float(r[1]), float(r[2]), float(r[3]), int(r[4])) for r in reader]
    columns = list(zip(*rows))
    return RunTrace(
        iterations=np.array(columns[0], dtype=np.int64),
        mse=np.array(columns[1]),
        disagreement_sq=np.array(columns[2]),
        avg_gap_sq=np.array(columns[3]),
        queries=np.array(columns[4], dtype=np.int64),
    )


def content_hash(path: str | Path) -> str:
    """Git-style blob hash (sha1 over ``blob <len>\\0<bytes>``)."""
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
