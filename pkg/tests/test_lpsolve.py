import numpy as np
import pytest

from synthdb.basis import (MomentVector, build_design_matrix, enumerate_basis,
                           round_moment_vector)
from synthdb.core import Lattice
from synthdb.lpsolve import (ProbabilityVector, solve_l1_fit,
                             solve_standard_form, to_standard_form)

from lp_oracles import simplex_grid_minimum, vertex_enumeration_minimum


def _design(W, lattice=None):
    """Wrap a raw coefficient matrix as a DesignMatrix-shaped object."""
    from synthdb.basis import BasisSet, DesignMatrix
    k, n = W.shape
    basis = BasisSet(t=max(k, 1), d=1, indices=tuple((i,) for i in range(k)))
    support = np.linspace(-0.9, 0.9, n).reshape(-1, 1)
    return DesignMatrix(basis, support, W, lattice=lattice)


def _moments(values, lattice=None):
    kind = "rounded" if lattice is not None else "noisy"
    return MomentVector(np.asarray(values, dtype=float), kind=kind, lattice=lattice)


def _random_lattice_instance(rng, lat, max_support=8, max_basis=6):
    n = int(rng.integers(1, max_support + 1))
    k = int(rng.integers(1, max_basis + 1))
    W = np.round(rng.uniform(-1, 1, size=(k, n)) * lat.L) / lat.L
    b = np.round(rng.uniform(-1, 1, size=k) * lat.L) / lat.L
    return W, b


class TestStandardForm:
    def test_single_entry_example(self):
        lat = Lattice(2)
        lp = to_standard_form(_design(np.array([[1.0]]), lat), _moments([0.5], lat), lat)
        np.testing.assert_array_equal(lp.A, [[2, 2, -2], [1, 0, 0]])
        np.testing.assert_array_equal(lp.b, [1, 1])
        np.testing.assert_array_equal(lp.c, [0, 1, 1])

    def test_zero_moments_rhs(self):
        lat = Lattice(4)
        lp = to_standard_form(_design(np.zeros((3, 2)), lat), _moments([0, 0, 0], lat), lat)
        np.testing.assert_array_equal(lp.b, [0, 0, 0, 1])

    def test_shape(self):
        lat = Lattice(8)
        W = np.round(np.random.default_rng(0).uniform(-1, 1, (4, 6)) * 8) / 8
        lp = to_standard_form(_design(W, lat), _moments(np.zeros(4), lat), lat)
        assert lp.A.shape == (5, 6 + 8)
        assert np.abs(lp.A).max() <= lat.L

    def test_rejects_off_lattice(self):
        lat = Lattice(4)
        with pytest.raises(ValueError):
            to_standard_form(_design(np.array([[0.3]]), lat), _moments([0.25], lat), lat)

    def test_dump_round_trip_text(self, tmp_path):
        lat = Lattice(2)
        lp = to_standard_form(_design(np.array([[1.0]]), lat), _moments([0.5], lat), lat)
        path = tmp_path / "lp.txt"
        lp.dump(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "2 3 2"
        assert lines[1] == "2 2 -2"
        assert lines[-1] == "0 1 1"


class TestSolveL1Fit:
    def test_exact_column_match(self):
        rng = np.random.default_rng(1)
        W = rng.uniform(-1, 1, size=(4, 6))
        j = 3
        fit = solve_l1_fit(_design(W), _moments(W[:, j]))
        assert fit.objective == pytest.approx(0.0, abs=1e-12)
        assert fit.status == "optimal"
        np.testing.assert_allclose(W @ fit.distribution.weights, W[:, j], atol=1e-9)

    def test_single_column(self):
        fit = solve_l1_fit(_design(np.array([[1.0], [0.0]])), _moments([1.0, 0.0]))
        assert fit.distribution.weights[0] == pytest.approx(1.0)
        assert fit.objective == pytest.approx(0.0, abs=1e-12)

    def test_two_column_interpolation(self):
        fit = solve_l1_fit(_design(np.array([[1.0, -1.0]])), _moments([0.5]))
        assert fit.objective == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(fit.distribution.weights, [0.75, 0.25], atol=1e-9)

    def test_uniform_returned_when_degenerate(self):
        # constant row: every simplex point is optimal, keep maximum entropy
        fit = solve_l1_fit(_design(np.ones((1, 5))), _moments([1.0]))
        np.testing.assert_allclose(fit.distribution.weights, np.full(5, 0.2), atol=1e-12)

    def test_zero_column_allowed(self):
        W = np.array([[0.0, 0.5], [0.0, -0.5]])
        fit = solve_l1_fit(_design(W), _moments([0.0, 0.0]))
        assert fit.objective <= 1e-12

    def test_feasibility_residuals(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            W = rng.uniform(-1, 1, size=(rng.integers(1, 6), rng.integers(1, 9)))
            b = rng.uniform(-1, 1, size=W.shape[0])
            fit = solve_l1_fit(_design(W), _moments(b))
            w = fit.distribution.weights
            assert abs(w.sum() - 1.0) <= 1e-9
            assert np.min(w) >= 0.0
            assert fit.objective == pytest.approx(np.abs(W @ w - b).sum(), abs=1e-9)

    def test_optimality_not_worse_than_empirical(self):
        # the fitted value never exceeds the residual of any feasible point
        rng = np.random.default_rng(3)
        for _ in range(10):
            W = rng.uniform(-1, 1, size=(4, 7))
            b = rng.uniform(-1, 1, size=4)
            fit = solve_l1_fit(_design(W), _moments(b))
            for _ in range(50):
                u = rng.dirichlet(np.ones(7))
                assert fit.objective <= np.abs(W @ u - b).sum() + 1e-9

    def test_dual_certificate(self):
        rng = np.random.default_rng(4)
        W = rng.uniform(-1, 1, size=(5, 9))
        b = rng.uniform(-1, 1, size=5)
        fit = solve_l1_fit(_design(W), _moments(b))
        assert fit.certified
        assert fit.min_reduced_cost >= -1e-7
        assert abs(fit.dual_gap) <= 1e-7 * (1 + abs(fit.objective))

    def test_iteration_limit_returns_feasible_flagged(self):
        rng = np.random.default_rng(5)
        W = rng.uniform(-1, 1, size=(4, 12))
        b = rng.uniform(-1, 1, size=4)
        fit = solve_l1_fit(_design(W), _moments(b), max_iter=0)
        assert fit.degraded and fit.status == "iteration_limit"
        w = fit.distribution.weights
        assert abs(w.sum() - 1.0) <= 1e-9 and np.min(w) >= 0


class TestOracleEquivalence:
    def test_matches_vertex_enumeration(self):
        rng = np.random.default_rng(6)
        lat = Lattice(64)
        for _ in range(20):
            W, b = _random_lattice_instance(rng, lat)
            fit = solve_l1_fit(_design(W, lat), _moments(b, lat))
            oracle = vertex_enumeration_minimum(W, b)
            assert fit.objective == pytest.approx(oracle, abs=1e-7)

    def test_matches_simplex_grid_small(self):
        rng = np.random.default_rng(7)
        lat = Lattice(32)
        for _ in range(8):
            W, b = _random_lattice_instance(rng, lat, max_support=3, max_basis=4)
            fit = solve_l1_fit(_design(W, lat), _moments(b, lat))
            oracle = simplex_grid_minimum(W, b, resolution=200)
            assert fit.objective <= oracle + 1e-9
            assert oracle - fit.objective <= 1e-2


class TestIntegerScaling:
    def test_integer_form_matches_unscaled_optimum(self):
        # the L*I residual blocks make the integer form's objective equal
        # to the unscaled L1 objective; optima must agree to 1e-9
        rng = np.random.default_rng(8)
        lat = Lattice(16)
        for _ in range(10):
            W, b = _random_lattice_instance(rng, lat, max_support=6, max_basis=4)
            design = _design(W, lat)
            moments = _moments(b, lat)
            fit = solve_l1_fit(design, moments, prefer_uniform=False)
            x, scaled_obj = solve_standard_form(to_standard_form(design, moments, lat))
            assert scaled_obj == pytest.approx(fit.objective, abs=1e-9)
            u = x[:W.shape[1]]
            assert np.abs(W @ u - b).sum() == pytest.approx(fit.objective, abs=1e-9)


class TestProbabilityVector:
    def test_tiny_negative_clamped(self):
        pv = ProbabilityVector(np.zeros((2, 1)), np.array([1.0 + 5e-13, -5e-13]))
        assert pv.weights[1] == 0.0
        assert pv.weights.sum() == pytest.approx(1.0)

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            ProbabilityVector(np.zeros((2, 1)), np.array([0.7, -0.1]))
        with pytest.raises(ValueError):
            ProbabilityVector(np.zeros((2, 1)), np.array([0.7, 0.2]))
        with pytest.raises(ValueError):
            ProbabilityVector(np.zeros((2, 1)), np.array([1.0]))
