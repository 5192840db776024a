import math

import numpy as np
import pytest

from synthdb.core import Dataset
from synthdb.noise import rng_stream
from synthdb.queries import (GaussianKernelQuery, error_metrics, evaluate_query,
                             knorm_estimate, load_queries, random_queries,
                             save_queries)


def _single_kernel(center, sigma, weight=1.0, certified=False):
    return GaussianKernelQuery(np.atleast_2d(center), np.array([weight]), sigma,
                               norm_certified=certified)


class TestEvaluateQuery:
    def test_kernel_at_its_center(self):
        q = _single_kernel([0.2, -0.3], sigma=1.0)
        db = Dataset(np.array([[0.2, -0.3]]), stage="normalized")
        assert evaluate_query(q, db) == pytest.approx(1.0)

    def test_distance_sqrt2_sigma(self):
        sigma = 0.5
        center = np.zeros(2)
        point = np.array([[sigma, sigma]])  # squared distance 2 sigma^2
        q = _single_kernel(center, sigma)
        assert evaluate_query(q, point) == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_zero_weights(self):
        q = GaussianKernelQuery(np.zeros((3, 2)), np.zeros(3), 1.0)
        assert evaluate_query(q, np.array([[0.1, 0.2]])) == 0.0

    def test_rejects_empty_db(self):
        with pytest.raises(ValueError):
            evaluate_query(_single_kernel([0.0], 1.0), np.empty((0, 1)))

    def test_affine_in_empirical_distribution(self):
        rng = np.random.default_rng(0)
        q = _single_kernel(rng.uniform(-1, 1, 3), 2.0)
        a = rng.uniform(-1, 1, (20, 3))
        b = rng.uniform(-1, 1, (20, 3))
        mixed = evaluate_query(q, np.vstack([a, b]))
        split = 0.5 * (evaluate_query(q, a) + evaluate_query(q, b))
        assert mixed == pytest.approx(split, abs=1e-12)

    def test_nonnegative_weights_bound(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            alpha = rng.random(5)
            q = GaussianKernelQuery(rng.uniform(-1, 1, (5, 2)), alpha, 1.5)
            val = evaluate_query(q, rng.uniform(-1, 1, (30, 2)))
            assert 0.0 <= val <= alpha.sum() + 1e-12


class TestRandomQueries:
    def test_workload_shape(self):
        qs = random_queries(25, 10, 4, 2.0, rng_stream(0, "q"))
        assert len(qs) == 25
        assert all(q.centers.shape == (10, 4) for q in qs)
        assert all(np.all(np.abs(q.centers) <= 1) for q in qs)
        assert all(np.all((q.weights >= 0) & (q.weights <= 1)) for q in qs)

    def test_norm_certified_rescaling(self):
        qs = random_queries(25, 10, 2, 2.0, rng_stream(1, "q"), norm_certified=True)
        for q in qs:
            assert q.weights.sum() == pytest.approx(1.0)
            assert q.norm_certified

    def test_json_round_trip(self, tmp_path):
        qs = random_queries(5, 3, 2, 4.0, rng_stream(2, "q"))
        path = tmp_path / "workload.json"
        save_queries(path, qs)
        back = load_queries(path)
        assert len(back) == 5
        for a, b in zip(qs, back):
            np.testing.assert_array_equal(a.centers, b.centers)
            np.testing.assert_array_equal(a.weights, b.weights)
            assert a.sigma == b.sigma


class TestKnormEstimate:
    def test_order_zero_bounded_by_weight_norm(self):
        rng = np.random.default_rng(3)
        alpha = rng.random(4)
        alpha /= alpha.sum()
        q = GaussianKernelQuery(rng.uniform(-1, 1, (4, 2)), alpha, 2.0,
                                norm_certified=True)
        assert knorm_estimate(q, 0) <= 1.0 + 1e-9

    def test_zero_query(self):
        q = GaussianKernelQuery(np.zeros((2, 2)), np.zeros(2), 1.0)
        assert knorm_estimate(q, 3) == 0.0

    def test_rejects_high_order(self):
        with pytest.raises(ValueError):
            knorm_estimate(_single_kernel([0.0], 1.0), 7)

    def test_smooth_regime_within_certificate(self):
        q = _single_kernel([0.1, -0.2], sigma=2.0, certified=True)
        assert knorm_estimate(q, 4) <= 1.05

    def test_rough_regime_violates_certificate(self):
        q = _single_kernel([0.1, -0.2], sigma=0.5, certified=True)
        assert knorm_estimate(q, 4) > 1.0

    def test_matches_analytic_fourth_derivative(self):
        # d^4/dx^4 exp(-x^2/(2 s^2)) at 0 equals 3/s^4
        sigma = 1.2
        q = _single_kernel([0.0], sigma=sigma)
        est = knorm_estimate(q, 4, h=5e-3)
        assert est == pytest.approx(3.0 / sigma ** 4, rel=1e-3)


class TestErrorMetrics:
    def test_direct_arithmetic(self):
        rep = error_metrics([0.5], [0.45])
        assert rep.worst_abs == pytest.approx(0.05)
        assert rep.worst_rel == pytest.approx(0.1)
        assert rep.query_count == 1 and rep.rel_excluded == 0

    def test_identical_vectors(self):
        rep = error_metrics([0.3, 0.7], [0.3, 0.7])
        assert rep.worst_abs == 0.0 and rep.worst_rel == 0.0

    def test_exclusion_below_floor(self):
        rep = error_metrics([0.0, 0.5], [0.1, 0.5])
        assert rep.rel_excluded == 1
        assert rep.worst_abs == pytest.approx(0.1)
        assert rep.worst_rel == 0.0  # only the nonzero-truth query counts

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            error_metrics([0.1], [0.1, 0.2])

    def test_median_rel(self):
        rep = error_metrics([1.0, 1.0, 1.0], [1.1, 1.2, 1.3])
        assert rep.median_rel == pytest.approx(0.2)
