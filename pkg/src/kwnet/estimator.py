"""Decaying weight schedules and the two-point finite-difference gradient estimator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objectives import ZerothOrderOracle


class ScheduleViolationError(ValueError):
    """Raised when an optimizer run is configured with an invalid schedule."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class WeightSchedule:
    """Power-law weights: step alpha0/(k+1), consensus beta0/(k+1)^tau,
    probe spacing c0/(k+1)^delta.

    ``alpha0``/``beta0`` may be zero to switch the innovation or consensus
    term off; ``delta`` and ``tau`` are range-checked by
    ``validate_schedule`` rather than at construction so that invalid
    configurations can be reported instead of raised.
    """

    alpha0: float
    beta0: float
    c0: float
    delta: float
    tau: float

    def __post_init__(self):
        if self.alpha0 < 0.0 or self.beta0 < 0.0:
            raise ValueError("alpha0 and beta0 must be nonnegative")
        if self.c0 <= 0.0:
            raise ValueError(f"c0 must be positive, got {self.c0}")

    def at(self, k: int) -> tuple[float, float, float]:
        """(alpha_k, beta_k, c_k) for iteration k >= 0."""
        if k < 0:
            raise ValueError(f"iteration index must be >= 0, got {k}")
        base = k + 1.0
        return (self.alpha0 / base, self.beta0 / base**self.tau, self.c0 / base**self.delta)


def validate_schedule(schedule: WeightSchedule, mu: float) -> list[str]:
    """Check the step-size summability and contraction conditions.

    Returns the list of violated conditions (empty means the schedule is
    admissible) given ``mu``, the smallest strong-convexity modulus among
    the local objectives.
    """
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    violations = []
    if schedule.delta <= 0.0:
        violations.append(f"delta must be positive, got {schedule.delta}")
    if schedule.delta >= 0.5:
        violations.append(
            f"summability violated: sum alpha_k^2/c_k^2 requires delta < 1/2, got {schedule.delta}"
        )
    if not 0.0 < schedule.tau < 1.0:
        violations.append(f"tau must lie in (0, 1), got {schedule.tau}")
    if mu * schedule.alpha0 >= 1.0:
        violations.append(f"mu*alpha0 must be < 1, got {mu * schedule.alpha0}")
    return violations


@dataclass(frozen=True)
class KWGradientEstimate:
    """Result of one two-point-per-dimension gradient estimate."""

    value: np.ndarray
    spacing_used: float
    queries_made: int


def probe_points(x: np.ndarray, spacing: float) -> np.ndarray:
    """The 2d query points x +- spacing*e_j, dimension-major, plus before minus."""
    d = len(x)
    points = np.tile(x, (2 * d, 1))
    idx = np.arange(d)
    points[2 * idx, idx] += spacing
    points[2 * idx + 1, idx] -= spacing
    return points


def kw_gradient(
    oracle: ZerothOrderOracle,
    x: np.ndarray,
    spacing: float,
    rng: np.random.Generator,
) -> KWGradientEstimate:
    """Two-point symmetric-difference gradient estimate from noisy values.

    Component j is (f^(x + spacing e_j) - f^(x - spacing e_j)) / (2 spacing),
    using two fresh oracle queries per dimension with independent noise
    draws. Queries are issued dimension-major, plus before minus, so a fixed
    stream state reproduces the estimate exactly.
    """
    if spacing <= 0.0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    x = np.asarray(x, dtype=float)
    values = oracle.query_batch(probe_points(x, spacing), rng)
    estimate = (values[0::2] - values[1::2]) / (2.0 * spacing)
    return KWGradientEstimate(estimate, spacing, 2 * len(x))
