import math

import numpy as np
import pytest

from kwnet.objectives import (
    ConvergenceError,
    DatasetSpec,
    GaussianNoise,
    LogisticL2,
    Quadratic,
    ZerothOrderOracle,
    generate_dataset,
    load_node_dataset,
    save_node_dataset,
    solve_ground_truth,
    sum_objectives,
)


def rng(seed=0):
    return np.random.default_rng(seed)


def random_quadratic(d, seed, mu_floor=0.5):
    gen = rng(seed)
    m = gen.standard_normal((d, d))
    hess = m @ m.T + mu_floor * np.eye(d)
    return Quadratic(hess, gen.standard_normal(d))


def random_logistic(d, n, seed, ridge=0.3):
    gen = rng(seed)
    feats = gen.standard_normal((n, d - 1)) * 2.0
    labels = np.where(gen.standard_normal(n) >= 0, 1.0, -1.0)
    return LogisticL2(feats, labels, ridge)


def central_difference(obj, x, h=1e-5):
    grad = np.empty(len(x))
    for j in range(len(x)):
        e = np.zeros(len(x))
        e[j] = h
        grad[j] = (obj.evaluate(x + e) - obj.evaluate(x - e)) / (2 * h)
    return grad


class TestEvaluate:
    def test_quadratic_minimum_at_zero(self):
        obj = Quadratic(np.eye(3), np.zeros(3))
        assert obj.evaluate(np.zeros(3)) == 0.0

    def test_quadratic_arithmetic(self):
        obj = Quadratic(2 * np.eye(2), np.array([2.0, 0.0]))
        assert obj.evaluate(np.array([1.0, 0.0])) == pytest.approx(-1.0, abs=1e-15)

    def test_logistic_zero_features_at_origin(self):
        obj = LogisticL2(np.zeros((1, 2)), np.array([1.0]), 0.3)
        assert obj.evaluate(np.zeros(3)) == pytest.approx(math.log(2.0), abs=1e-15)

    def test_dimension_mismatch(self):
        obj = Quadratic(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError, match="dimension mismatch"):
            obj.evaluate(np.zeros(3))

    def test_batch_matches_scalar(self):
        obj = random_logistic(4, 6, seed=3)
        points = rng(5).standard_normal((8, 4))
        batch = obj.evaluate_batch(points)
        assert batch == pytest.approx([obj.evaluate(p) for p in points], abs=1e-12)

    def test_logistic_stable_at_large_arguments(self):
        obj = random_logistic(3, 5, seed=1)
        value = obj.evaluate(np.array([1e4, -1e4, 1e3]))
        assert np.isfinite(value)


class TestGradient:
    def test_identity_quadratic(self):
        obj = Quadratic(np.eye(2), np.zeros(2))
        x = np.array([3.0, -1.0])
        assert obj.gradient(x).tolist() == [3.0, -1.0]

    def test_logistic_single_point_at_origin(self):
        a = np.array([0.7, -1.2])
        for label in (1.0, -1.0):
            obj = LogisticL2(a[None, :], np.array([label]), 0.3)
            expected = np.append(-label * a / 2.0, -label / 2.0)
            assert obj.gradient(np.zeros(3)) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_central_differences(self, seed):
        for obj in (random_quadratic(3, seed), random_logistic(4, 6, seed)):
            x = rng(seed + 50).standard_normal(obj.dimension)
            grad = obj.gradient(x)
            fd = central_difference(obj, x)
            assert grad == pytest.approx(fd, rel=1e-6, abs=1e-6)


class TestStrongConvexityBounds:
    def test_diagonal_quadratic(self):
        obj = Quadratic(np.diag([1.0, 5.0]), np.zeros(2))
        assert obj.strong_convexity_bounds() == (1.0, 5.0)

    def test_identity(self):
        obj = Quadratic(np.eye(3), np.zeros(3))
        mu, lip = obj.strong_convexity_bounds()
        assert mu == pytest.approx(1.0, abs=1e-12)
        assert lip == pytest.approx(1.0, abs=1e-12)

    def test_logistic_zero_features_intercept_only(self):
        # all-ones augmented Gram has top eigenvalue n (eigensolver gives 7.0)
        n, kappa = 7, 0.3
        obj = LogisticL2(np.zeros((n, 2)), np.ones(n), kappa)
        mu, lip = obj.strong_convexity_bounds()
        assert mu == kappa
        assert lip == pytest.approx(kappa + 0.25 * n, abs=1e-9)

    @pytest.mark.parametrize("seed", range(3))
    def test_hessian_bounds_hold_empirically(self, seed):
        for obj in (random_quadratic(3, seed), random_logistic(4, 8, seed)):
            mu, lip = obj.strong_convexity_bounds()
            gen = rng(seed + 9)
            for _ in range(20):
                x = gen.standard_normal(obj.dimension)
                y = gen.standard_normal(obj.dimension)
                gap = np.linalg.norm(obj.gradient(x) - obj.gradient(y))
                dist = np.linalg.norm(x - y)
                assert mu * dist - 1e-9 <= gap <= lip * dist + 1e-9


class TestNoiseAndOracle:
    def test_zero_noise_query_is_exact(self):
        obj = random_quadratic(3, 2)
        oracle = ZerothOrderOracle(obj, GaussianNoise(0.0))
        x = np.array([0.3, -0.4, 1.0])
        assert oracle.query(x, rng(0)) == obj.evaluate(x)

    def test_counter_increments(self):
        oracle = ZerothOrderOracle(random_quadratic(2, 1), GaussianNoise(1.0))
        gen = rng(0)
        oracle.query(np.zeros(2), gen)
        assert oracle.query_count == 1
        oracle.query_batch(np.zeros((5, 2)), gen)
        assert oracle.query_count == 6

    def test_noise_mean_clt_band(self):
        obj = Quadratic(np.eye(2), np.zeros(2))
        oracle = ZerothOrderOracle(obj, GaussianNoise(1.0))
        x = np.array([0.5, 0.5])
        draws = oracle.query_batch(np.tile(x, (100_000, 1)), rng(123)) - obj.evaluate(x)
        assert abs(draws.mean()) <= 4.0 / math.sqrt(100_000)

    def test_state_scaled_variance(self):
        noise = GaussianNoise(0.0, state_coeff=1.0)
        x = np.array([2.0, 0.0])  # ||x|| = 2 so variance should be 4
        assert noise.variance_bound(x) == 4.0
        draws = noise.draw_batch(rng(7), np.tile(x, (100_000, 1)))
        assert draws.var() == pytest.approx(4.0, rel=0.1)

    def test_batch_equals_scalar_sequence(self):
        # identical stream consumption (bit-equal noise), values to roundoff
        obj = random_logistic(3, 4, seed=8)
        noise = GaussianNoise(0.7, state_coeff=0.2)
        points = rng(3).standard_normal((6, 3))
        batch_noise = noise.draw_batch(rng(99), points)
        gen = rng(99)
        scalar_noise = np.array([noise.draw(gen, p) for p in points])
        assert np.array_equal(batch_noise, scalar_noise)

        batch_oracle = ZerothOrderOracle(obj, noise)
        scalar_oracle = ZerothOrderOracle(obj, noise)
        batch = batch_oracle.query_batch(points, rng(55))
        gen = rng(55)
        scalars = np.array([scalar_oracle.query(p, gen) for p in points])
        assert batch == pytest.approx(scalars, abs=1e-12)
        assert batch_oracle.query_count == scalar_oracle.query_count == 6

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            GaussianNoise(-1.0)


class TestGenerateDataset:
    def test_paper_scale_shapes(self):
        objs = generate_dataset(DatasetSpec(10, 10, 4, 0.3), rng(5))
        assert len(objs) == 10
        for obj in objs:
            assert obj.features.shape == (10, 4)
            assert set(np.unique(obj.labels)) <= {-1.0, 1.0}
            assert obj.ridge == 0.3

    def test_feature_scale_grows_with_node_index(self):
        objs = generate_dataset(DatasetSpec(10, 50, 3, 0.3), rng(6))
        assert objs[9].features.mean() > objs[0].features.mean() + 10

    def test_zero_feature_dim_rejected(self):
        with pytest.raises(ValueError):
            DatasetSpec(3, 5, 0, 0.3)

    def test_same_seed_bit_identical(self):
        spec = DatasetSpec(4, 6, 3, 0.5)
        a = generate_dataset(spec, rng(9))
        b = generate_dataset(spec, rng(9))
        for one, two in zip(a, b):
            assert np.array_equal(one.features, two.features)
            assert np.array_equal(one.labels, two.labels)


class TestSumObjectives:
    def test_quadratic_sum(self):
        objs = [random_quadratic(3, s) for s in range(3)]
        total = sum_objectives(objs)
        x = rng(1).standard_normal(3)
        assert total.evaluate(x) == pytest.approx(sum(o.evaluate(x) for o in objs), rel=1e-12)

    def test_logistic_sum(self):
        objs = [random_logistic(4, 5, s) for s in range(3)]
        total = sum_objectives(objs)
        assert total.ridge == pytest.approx(0.9)
        x = rng(2).standard_normal(4)
        assert total.evaluate(x) == pytest.approx(sum(o.evaluate(x) for o in objs), rel=1e-12)

    def test_mixed_kinds_rejected(self):
        with pytest.raises(ValueError, match="mixed"):
            sum_objectives([random_quadratic(3, 0), random_logistic(3, 4, 0)])


class TestSolveGroundTruth:
    def test_mean_of_offsets(self):
        bs = [np.array([1.0, 2.0]), np.array([3.0, -2.0]), np.array([-1.0, 3.0])]
        objs = [Quadratic(np.eye(2), b) for b in bs]
        x = solve_ground_truth(objs, tol=1e-12)
        assert x == pytest.approx(np.mean(bs, axis=0), abs=1e-10)

    def test_diagonal_closed_form(self):
        x = solve_ground_truth([Quadratic(np.diag([2.0, 4.0]), np.array([2.0, 4.0]))], tol=1e-12)
        assert x == pytest.approx([1.0, 1.0], abs=1e-10)

    def test_unique_minimizer_from_different_starts(self):
        objs = generate_dataset(DatasetSpec(3, 8, 3, 0.3), rng(12))
        tol = 1e-10
        a = solve_ground_truth(objs, tol=tol)
        b = solve_ground_truth(objs, tol=tol, initial=10.0 * np.ones(4))
        assert np.linalg.norm(a - b) <= 10 * tol

    def test_result_is_fixed_point(self):
        objs = [random_quadratic(3, s) for s in range(2)]
        tol = 1e-9
        x = solve_ground_truth(objs, tol=tol)
        total_grad = sum(o.gradient(x) for o in objs)
        mu = min(o.strong_convexity_bounds()[0] for o in objs)
        lip_sum = sum(o.strong_convexity_bounds()[1] for o in objs)
        assert np.linalg.norm(total_grad / lip_sum) <= tol / mu

    def test_iteration_cap(self):
        with pytest.raises(ConvergenceError):
            solve_ground_truth([random_quadratic(3, 1)], tol=1e-14, max_iterations=1)


class TestDatasetSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        obj = generate_dataset(DatasetSpec(1, 7, 3, 0.3), rng(3))[0]
        path = tmp_path / "node_00.txt"
        save_node_dataset(obj, path)
        loaded = load_node_dataset(path)
        assert np.array_equal(loaded.features, obj.features)
        assert np.array_equal(loaded.labels, obj.labels)
        assert loaded.ridge == obj.ridge

    def test_header_format(self, tmp_path):
        obj = LogisticL2(np.zeros((2, 3)), np.array([1.0, -1.0]), 0.25)
        path = tmp_path / "node.txt"
        save_node_dataset(obj, path)
        assert path.read_text().splitlines()[0] == "4 2 0.25"
