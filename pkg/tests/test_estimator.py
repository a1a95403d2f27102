import numpy as np
import pytest

from kwnet.estimator import (
    KWGradientEstimate,
    WeightSchedule,
    kw_gradient,
    probe_points,
    validate_schedule,
)
from kwnet.objectives import GaussianNoise, LogisticL2, Quadratic, ZerothOrderOracle


def rng(seed=0):
    return np.random.default_rng(seed)


PAPER_SCHEDULE = WeightSchedule(alpha0=1.0, beta0=1.0 / 7.0, c0=1.0, delta=0.25, tau=0.5)


class _Cubic:
    """One-dimensional f(x) = x^3 for checking the spacing-squared bias."""

    dimension = 1

    def evaluate_batch(self, points):
        return points[:, 0] ** 3

    def evaluate(self, x):
        return float(x[0] ** 3)


class TestWeightSchedule:
    def test_values_at_zero(self):
        assert PAPER_SCHEDULE.at(0) == (1.0, 1.0 / 7.0, 1.0)

    def test_values_at_fifteen(self):
        # 16^(1/2) = 4 and 16^(1/4) = 2 are exact in floating point
        assert PAPER_SCHEDULE.at(15) == (1.0 / 16.0, 1.0 / 28.0, 0.5)

    def test_values_at_255(self):
        assert PAPER_SCHEDULE.at(255) == (1.0 / 256.0, 1.0 / 112.0, 0.25)

    def test_strictly_decreasing(self):
        triples = [PAPER_SCHEDULE.at(k) for k in range(50)]
        for earlier, later in zip(triples, triples[1:]):
            assert later[0] < earlier[0]
            assert later[1] < earlier[1]
            assert later[2] < earlier[2]

    def test_step_to_spacing_ratios_vanish(self):
        # alpha_k/c_k and alpha_k/c_k^2 must tend to zero for valid schedules
        a0, _, c0 = PAPER_SCHEDULE.at(0)
        a9, _, c9 = PAPER_SCHEDULE.at(10**9)
        assert a9 / c9 < 1e-6 * (a0 / c0)
        assert a9 / c9**2 < 1e-6 * (a0 / c0**2)

    def test_zero_alpha_and_beta_allowed(self):
        s = WeightSchedule(0.0, 0.0, 1.0, 0.25, 0.5)
        assert s.at(3) == (0.0, 0.0, 1.0 / 4.0**0.25)

    def test_nonpositive_c0_rejected(self):
        with pytest.raises(ValueError, match="c0"):
            WeightSchedule(1.0, 1.0, 0.0, 0.25, 0.5)

    def test_negative_iteration_rejected(self):
        with pytest.raises(ValueError):
            PAPER_SCHEDULE.at(-1)


class TestValidateSchedule:
    def test_paper_schedule_is_admissible(self):
        assert validate_schedule(PAPER_SCHEDULE, mu=0.3) == []

    def test_summability_violation(self):
        bad = WeightSchedule(1.0, 1.0, 1.0, 0.6, 0.5)
        report = validate_schedule(bad, mu=0.3)
        assert len(report) == 1 and "summability" in report[0]

    def test_contraction_violation(self):
        report = validate_schedule(PAPER_SCHEDULE, mu=2.0)
        assert any("mu*alpha0" in line for line in report)

    def test_reports_every_violation(self):
        bad = WeightSchedule(1.0, 1.0, 1.0, -0.1, 1.5)
        report = validate_schedule(bad, mu=3.0)
        assert len(report) == 3

    def test_nonpositive_mu_rejected(self):
        with pytest.raises(ValueError, match="mu"):
            validate_schedule(PAPER_SCHEDULE, mu=0.0)


class TestKWGradient:
    def test_probe_point_order(self):
        x = np.array([1.0, 2.0])
        probes = probe_points(x, 0.5)
        assert probes.tolist() == [
            [1.5, 2.0], [0.5, 2.0],  # +e_1 then -e_1
            [1.0, 2.5], [1.0, 1.5],
        ]

    @pytest.mark.parametrize("spacing", [1.0, 0.1, 0.001])
    def test_exact_on_quadratics(self, spacing):
        gen = rng(21)
        m = gen.standard_normal((4, 4))
        obj = Quadratic(m @ m.T + np.eye(4), gen.standard_normal(4))
        oracle = ZerothOrderOracle(obj, GaussianNoise(0.0))
        for _ in range(20):
            x = gen.standard_normal(4)
            est = kw_gradient(oracle, x, spacing, rng(0))
            grad = obj.gradient(x)
            assert np.abs(est.value - grad).max() <= 1e-10 * max(1.0, np.abs(grad).max())

    def test_cubic_bias_is_spacing_squared(self):
        oracle = ZerothOrderOracle(_Cubic(), GaussianNoise(0.0))
        est = kw_gradient(oracle, np.array([1.0]), 0.1, rng(0))
        assert est.value[0] == pytest.approx(3.01, abs=1e-12)  # 3x^2 + c^2

    def test_bias_bound_on_logistic(self):
        gen = rng(5)
        feats = gen.standard_normal((8, 3)) * 2.0
        labels = np.where(gen.standard_normal(8) >= 0, 1.0, -1.0)
        obj = LogisticL2(feats, labels, 0.3)
        mu, lip = obj.strong_convexity_bounds()
        oracle = ZerothOrderOracle(obj, GaussianNoise(0.0))
        for spacing in (0.5, 0.1):
            for _ in range(20):
                x = gen.standard_normal(4)
                est = kw_gradient(oracle, x, spacing, rng(0))
                bound = spacing * (lip - mu) / 2.0 + 1e-12
                assert np.abs(est.value - obj.gradient(x)).max() <= bound

    def test_query_accounting(self):
        oracle = ZerothOrderOracle(Quadratic(np.eye(3), np.zeros(3)), GaussianNoise(1.0))
        est = kw_gradient(oracle, np.zeros(3), 0.5, rng(0))
        assert isinstance(est, KWGradientEstimate)
        assert est.queries_made == 6
        assert oracle.query_count == 6
        kw_gradient(oracle, np.zeros(3), 0.5, rng(0))
        assert oracle.query_count == 12

    def test_noise_statistics_over_many_estimates(self):
        # component variance sigma^2/(2 c^2); mean within bias bound + CLT band
        sigma, spacing, reps = 2.0, 0.5, 100_000
        obj = LogisticL2(np.array([[1.5]]), np.array([1.0]), 0.3)
        oracle = ZerothOrderOracle(obj, GaussianNoise(sigma))
        mu, lip = obj.strong_convexity_bounds()
        x = np.array([0.3])
        gen = rng(77)
        estimates = np.array([kw_gradient(oracle, x, spacing, gen).value[0] for _ in range(reps)])
        target_var = sigma**2 / (2.0 * spacing**2)
        assert estimates.var() == pytest.approx(target_var, rel=0.05)
        bias_bound = spacing * (lip - mu) / 2.0
        clt_band = 4.0 * np.sqrt(target_var / reps)
        assert abs(estimates.mean() - obj.gradient(x)[0]) <= bias_bound + clt_band

    def test_nonpositive_spacing_rejected(self):
        oracle = ZerothOrderOracle(Quadratic(np.eye(2), np.zeros(2)), GaussianNoise(0.0))
        with pytest.raises(ValueError, match="spacing"):
            kw_gradient(oracle, np.zeros(2), 0.0, rng(0))
