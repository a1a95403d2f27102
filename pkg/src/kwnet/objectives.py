"""Local objective functions, the noisy zeroth-order oracle, and test problems.

Two objective families are supported: positive-definite quadratics and
l2-regularized logistic losses. Both are strongly convex with Lipschitz
gradients and expose the same small interface (``evaluate``,
``evaluate_batch``, ``gradient``, ``strong_convexity_bounds``), which is all
the optimization layers rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np


class ConvergenceError(RuntimeError):
    """Raised when the reference solver exhausts its iteration budget."""


def _sigmoid(t: np.ndarray) -> np.ndarray:
    # Stable logistic function: never exponentiates a positive argument.
    out = np.empty_like(t, dtype=float)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    expt = np.exp(t[~pos])
    out[~pos] = expt / (1.0 + expt)
    return out


@dataclass(frozen=True)
class Quadratic:
    """f(x) = 0.5 x'Hx - b'x with H symmetric positive definite."""

    hessian: np.ndarray
    linear: np.ndarray

    def __post_init__(self):
        hess = np.atleast_2d(np.asarray(self.hessian, dtype=float))
        lin = np.atleast_1d(np.asarray(self.linear, dtype=float))
        if hess.shape != (len(lin), len(lin)):
            raise ValueError(f"hessian shape {hess.shape} does not match b of length {len(lin)}")
        if not np.allclose(hess, hess.T, rtol=0.0, atol=1e-12):
            raise ValueError("hessian must be symmetric")
        if np.linalg.eigvalsh(hess)[0] <= 0.0:
            raise ValueError("hessian must be positive definite")
        object.__setattr__(self, "hessian", hess)
        object.__setattr__(self, "linear", lin)

    @property
    def dimension(self) -> int:
        return len(self.linear)

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        _check_dim(points.shape[-1], self.dimension)
        return 0.5 * ((points @ self.hessian) * points).sum(axis=1) - points @ self.linear

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.evaluate_batch(np.asarray(x, dtype=float)[None, :])[0])

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _check_dim(len(x), self.dimension)
        return self.hessian @ x - self.linear

    def hessian_at(self, x: np.ndarray) -> np.ndarray:
        return self.hessian

    def strong_convexity_bounds(self) -> tuple[float, float]:
        eigenvalues = np.linalg.eigvalsh(self.hessian)
        return float(eigenvalues[0]), float(eigenvalues[-1])


@dataclass(frozen=True)
class LogisticL2:
    """l2-regularized logistic loss over one node's data.

    f(x) = sum_j log(1 + exp(-label_j (w'a_j + b))) + ridge/2 ||x||^2 with
    x = (w, b); the intercept is the last coordinate.
    """

    features: np.ndarray
    labels: np.ndarray
    ridge: float

    def __post_init__(self):
        feats = np.atleast_2d(np.asarray(self.features, dtype=float))
        labs = np.atleast_1d(np.asarray(self.labels, dtype=float))
        if feats.shape[0] != len(labs):
            raise ValueError(f"{feats.shape[0]} feature rows but {len(labs)} labels")
        if not np.all(np.abs(labs) == 1.0):
            raise ValueError("labels must be +1 or -1")
        if self.ridge <= 0.0:
            raise ValueError(f"ridge coefficient must be positive, got {self.ridge}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def dimension(self) -> int:
        return self.features.shape[1] + 1

    def _margins(self, points: np.ndarray) -> np.ndarray:
        # label * (w'a + b), one row per query point
        logits = points[:, :-1] @ self.features.T + points[:, -1:]
        return self.labels * logits

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        _check_dim(points.shape[-1], self.dimension)
        losses = np.logaddexp(0.0, -self._margins(points)).sum(axis=1)
        return losses + 0.5 * self.ridge * np.square(points).sum(axis=1)

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.evaluate_batch(np.asarray(x, dtype=float)[None, :])[0])

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _check_dim(len(x), self.dimension)
        margins = self._margins(x[None, :])[0]
        weights = -self.labels * _sigmoid(-margins)
        grad = np.empty_like(x)
        grad[:-1] = weights @ self.features
        grad[-1] = weights.sum()
        return grad + self.ridge * x

    def hessian_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        margins = self._margins(x[None, :])[0]
        sig = _sigmoid(margins)
        curvature = sig * (1.0 - sig)
        augmented = np.hstack([self.features, np.ones((len(self.labels), 1))])
        return (augmented * curvature[:, None]).T @ augmented + self.ridge * np.eye(self.dimension)

    def strong_convexity_bounds(self) -> tuple[float, float]:
        augmented = np.hstack([self.features, np.ones((len(self.labels), 1))])
        gram_top = float(np.linalg.eigvalsh(augmented.T @ augmented)[-1])
        return float(self.ridge), float(self.ridge + 0.25 * gram_top)


LocalObjective = Union[Quadratic, LogisticL2]


def _check_dim(got: int, expected: int) -> None:
    if got != expected:
        raise ValueError(f"dimension mismatch: got {got}, objective expects {expected}")


@dataclass(frozen=True)
class GaussianNoise:
    """Zero-mean Gaussian measurement noise, optionally state-scaled.

    Conditional variance at query point x is ``state_coeff * ||x||^2 +
    sigma^2``; ``state_coeff = 0`` gives plain i.i.d. noise.
    """

    sigma: float
    state_coeff: float = 0.0

    def __post_init__(self):
        if self.sigma < 0.0 or self.state_coeff < 0.0:
            raise ValueError("sigma and state_coeff must be nonnegative")

    def variance_bound(self, x: np.ndarray) -> float:
        return float(self.state_coeff * np.square(np.asarray(x, dtype=float)).sum() + self.sigma**2)

    def draw(self, rng: np.random.Generator, x: np.ndarray) -> float:
        if self.state_coeff == 0.0:
            scale = self.sigma
        else:
            scale = np.sqrt(self.state_coeff * np.square(np.asarray(x, dtype=float)).sum() + self.sigma**2)
        return float(scale * rng.standard_normal())

    def draw_batch(self, rng: np.random.Generator, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.state_coeff == 0.0:
            scale = self.sigma
        else:
            scale = np.sqrt(self.state_coeff * np.square(points).sum(axis=1) + self.sigma**2)
        return scale * rng.standard_normal(len(points))


class ZerothOrderOracle:
    """Noisy function-value oracle for one objective.

    Counts every query. A batched query consumes the noise stream exactly as
    the same sequence of scalar queries would (bit-identical noise draws);
    the deterministic parts of the values may differ from the scalar path by
    floating-point roundoff because the evaluation is vectorized.
    """

    def __init__(self, objective: LocalObjective, noise: GaussianNoise):
        self.objective = objective
        self.noise = noise
        self.query_count = 0

    def query(self, x: np.ndarray, rng: np.random.Generator) -> float:
        x = np.asarray(x, dtype=float)
        _check_dim(len(x), self.objective.dimension)
        self.query_count += 1
        return float(self.objective.evaluate(x) + self.noise.draw(rng, x))

    def query_batch(self, points: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        _check_dim(points.shape[-1], self.objective.dimension)
        self.query_count += len(points)
        return self.objective.evaluate_batch(points) + self.noise.draw_batch(rng, points)


@dataclass(frozen=True)
class DatasetSpec:
    """Shape of the synthetic logistic classification problem."""

    num_nodes: int
    points_per_node: int
    feature_dim: int
    kappa: float

    def __post_init__(self):
        if self.num_nodes < 1 or self.points_per_node < 1 or self.feature_dim < 1:
            raise ValueError(f"num_nodes, points_per_node and feature_dim must be >= 1: {self}")
        if self.kappa <= 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")


def generate_dataset(spec: DatasetSpec, rng: np.random.Generator) -> list[LogisticL2]:
    """Synthetic per-node logistic datasets with node-dependent feature scale.

    A ground-truth separator (weights plus intercept, all standard normal) is
    drawn once. At node i (1-based) each feature entry is a standard normal
    plus a uniform draw on [0, 5i]; labels are the sign of the separator
    applied to the features with standard normal label noise, ties mapping
    to +1.
    """
    d = spec.feature_dim + 1
    separator = rng.standard_normal(d)
    objectives = []
    for node in range(1, spec.num_nodes + 1):
        shape = (spec.points_per_node, spec.feature_dim)
        features = rng.standard_normal(shape) + rng.uniform(0.0, 5.0 * node, shape)
        label_noise = rng.standard_normal(spec.points_per_node)
        scores = features @ separator[:-1] + separator[-1] + label_noise
        labels = np.where(scores >= 0.0, 1.0, -1.0)
        objectives.append(LogisticL2(features, labels, spec.kappa))
    return objectives


def sum_objectives(objectives: list[LocalObjective]) -> LocalObjective:
    """Collapse same-kind objectives into the single objective of their sum."""
    if not objectives:
        raise ValueError("need at least one objective")
    dims = {obj.dimension for obj in objectives}
    if len(dims) != 1:
        raise ValueError(f"objectives disagree on dimension: {sorted(dims)}")
    if all(isinstance(obj, Quadratic) for obj in objectives):
        return Quadratic(
            sum(obj.hessian for obj in objectives),
            sum(obj.linear for obj in objectives),
        )
    if all(isinstance(obj, LogisticL2) for obj in objectives):
        return LogisticL2(
            np.vstack([obj.features for obj in objectives]),
            np.concatenate([obj.labels for obj in objectives]),
            sum(obj.ridge for obj in objectives),
        )
    raise ValueError("cannot sum a mixed list of objective kinds")


def solve_ground_truth(
    objectives: list[LocalObjective],
    tol: float,
    initial: np.ndarray | None = None,
    max_iterations: int = 10_000_000,
) -> np.ndarray:
    """Minimizer of the summed objectives, to gradient norm <= tol.

    Damped Newton with Armijo backtracking: deterministic, monotone in the
    objective, and the minimizer is unique by strong convexity. Exceeding
    ``max_iterations`` raises ``ConvergenceError``.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    total = sum_objectives(objectives) if len(objectives) > 1 else objectives[0]
    d = total.dimension
    x = np.zeros(d) if initial is None else np.asarray(initial, dtype=float).copy()
    _check_dim(len(x), d)
    for _ in range(max_iterations):
        grad = total.gradient(x)
        if np.linalg.norm(grad) <= tol:
            return x
        direction = np.linalg.solve(total.hessian_at(x), grad)
        fx = total.evaluate(x)
        slope = grad @ direction
        step = 1.0
        while total.evaluate(x - step * direction) > fx - 1e-4 * step * slope:
            step *= 0.5
            if step < 1e-12:
                break
        x = x - step * direction
    raise ConvergenceError(
        f"gradient norm still above {tol} after {max_iterations} iterations"
    )


def save_node_dataset(objective: LogisticL2, path: str | Path) -> None:
    """Columnar text dump: header ``d n kappa``, then one ``label a_1 ...`` row per point."""
    n, _ = objective.features.shape
    lines = [f"{objective.dimension} {n} {objective.ridge!r}"]
    for label, row in zip(objective.labels, objective.features):
        lines.append(" ".join([f"{int(label)}"] + [repr(float(v)) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_node_dataset(path: str | Path) -> LogisticL2:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    d, n, kappa = lines[0].split()
    d, n = int(d), int(n)
    labels = np.empty(n)
    features = np.empty((n, d - 1))
    if len(lines) - 1 != n:
        raise ValueError(f"{path}: header promises {n} rows, found {len(lines) - 1}")
    for row, line in enumerate(lines[1:]):
        parts = line.split()
        labels[row] = float(parts[0])
        features[row] = [float(v) for v in parts[1:]]
    return LogisticL2(features, labels, float(kappa))
