import math
from fractions import Fraction

import numpy as np
import pytest

from synthdb.core import (ChebGrid, Dataset, Lattice, PrivacyBudget,
                          derive_params_approx, derive_params_pure, discretize,
                          grid_points, normalize_dataset)


class TestDeriveParams:
    def test_pure_hand_arithmetic(self):
        p = derive_params_pure(256, 1, 2)
        assert (p.t, p.N, p.m, p.L) == (4, 16, 16384, 64)
        assert p.mode == "pure"

    def test_pure_high_precision_oracle_case(self):
        # 10000^(13/8) = 3162277.66...; ceiling checked against mpmath
        p = derive_params_pure(10000, 2, 4)
        assert (p.t, p.N, p.m, p.L) == (4, 100, 3162278, 1000)

    def test_pure_rejects_small_n(self):
        with pytest.raises(ValueError):
            derive_params_pure(1, 1, 1)

    @pytest.mark.parametrize("n,d,K", [(0, 1, 1), (10, 0, 1), (10, 1, 0), (10, -2, 3)])
    def test_rejects_nonpositive(self, n, d, K):
        with pytest.raises(ValueError):
            derive_params_pure(n, d, K)

    def test_approx_example(self):
        p = derive_params_approx(10 ** 4, 1, 2, math.exp(-1.0))
        assert (p.t, p.N, p.m) == (14, 194, 10 ** 8)
        assert p.L == 2683
        assert p.mode == "approx"

    def test_approx_small_n(self):
        assert derive_params_approx(256, 1, 2, math.exp(-1.0)).t == 5  # 256^(2/7)=4.88

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.1, 2.0])
    def test_approx_rejects_bad_delta(self, delta):
        with pytest.raises(ValueError):
            derive_params_approx(10 ** 4, 1, 2, delta)

    def test_near_integer_snap(self):
        # 256^(7/4) = 2^14 exactly; float pow overshoots by a few ulps
        assert derive_params_pure(256, 1, 2).m == 16384


class TestChebGrid:
    @pytest.mark.parametrize("N", [1, 2, 3, 7, 16, 101, 4096, 10 ** 6])
    def test_exact_rational_reconstruction(self, N):
        g = ChebGrid(N)
        ks = [0, 1, N // 2, N - 2, N - 1] if N > 1 else [0]
        for k in sorted(set(max(0, k) for k in ks)):
            assert g.values[k] == float(Fraction(2 * k + 1 - N, N))

    def test_values_strictly_inside_and_increasing(self):
        for N in (1, 2, 5, 64):
            v = ChebGrid(N).values
            assert np.all(v > -1) and np.all(v < 1)
            assert np.all(np.diff(v) > 0)

    def test_snap_tie_upward(self):
        g = ChebGrid(4)
        assert g.snap(np.array([0.0]))[0] == 0.25
        assert g.snap(np.array([1.0]))[0] == 0.75
        assert g.snap(np.array([-0.25]))[0] == -0.25

    def test_snap_within_one_over_n(self):
        rng = np.random.default_rng(0)
        for N in (1, 3, 16, 257):
            g = ChebGrid(N)
            z = rng.uniform(-1, 1, size=500)
            assert np.max(np.abs(z - g.snap(z))) <= 1.0 / N + 1e-15

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError):
            ChebGrid(0)


class TestLattice:
    def test_membership_exact(self):
        lat = Lattice(64)
        assert lat.contains(np.arange(-64, 65) / 64.0)
        assert not lat.contains(np.array([1.0 / 128]))
        assert not lat.contains(np.array([1.5]))

    def test_step(self):
        assert Lattice(4).step == 0.25


class TestNormalize:
    def test_affine_map_examples(self):
        raw = Dataset(np.array([[5.0], [10.0], [12.0], [0.0]]), stage="raw")
        out = normalize_dataset(raw, [(0.0, 10.0)])
        assert out.points[:, 0].tolist() == [0.0, 1.0, 1.0, -1.0]
        assert out.stage == "normalized"
        assert out.ranges == ((0.0, 10.0),)

    def test_identity_on_unit_range(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-1, 1, size=(50, 3))
        pts[0] = [-1, 1, 0]  # span the full range exactly
        pts[1] = [1, -1, 0.5]
        raw = Dataset(pts, stage="raw")
        out = normalize_dataset(raw, [(-1.0, 1.0)] * 3)
        np.testing.assert_allclose(out.points, pts, rtol=0, atol=1e-15)

    def test_rejects_degenerate_range(self):
        raw = Dataset(np.array([[1.0]]), stage="raw")
        with pytest.raises(ValueError):
            normalize_dataset(raw, [(2.0, 2.0)])
        with pytest.raises(ValueError):
            normalize_dataset(raw, [(3.0, 1.0)])

    def test_rejects_non_raw(self):
        d = Dataset(np.array([[0.0]]), stage="normalized")
        with pytest.raises(ValueError):
            normalize_dataset(d, [(-1.0, 1.0)])


class TestDiscretize:
    def test_idempotent(self):
        rng = np.random.default_rng(2)
        data = Dataset(rng.uniform(-1, 1, size=(200, 2)), stage="normalized")
        g = ChebGrid(9)
        once = discretize(data, g)
        twice = discretize(once, g)
        np.testing.assert_array_equal(once.points, twice.points)

    def test_stage_and_grid_recorded(self):
        data = Dataset(np.array([[0.3, -0.4]]), stage="normalized")
        out = discretize(data, ChebGrid(8))
        assert out.stage == "discretized"
        assert out.grid.N == 8
        assert out.grid.contains(out.points)

    def test_rejects_raw(self):
        with pytest.raises(ValueError):
            discretize(Dataset(np.array([[0.0]]), stage="raw"), ChebGrid(4))


class TestDataset:
    def test_bounds_enforced_past_raw(self):
        Dataset(np.array([[1.5]]), stage="raw")  # fine
        with pytest.raises(ValueError):
            Dataset(np.array([[1.5]]), stage="normalized")

    def test_discretized_requires_grid_membership(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[0.3]]), stage="discretized", grid=ChebGrid(4))

    def test_shape_accessors(self):
        d = Dataset(np.zeros((5, 3)), stage="normalized")
        assert (d.n, d.d) == (5, 3)

    def test_points_immutable(self):
        d = Dataset(np.zeros((2, 2)), stage="normalized")
        with pytest.raises(ValueError):
            d.points[0, 0] = 1.0


class TestPrivacyBudget:
    def test_validation(self):
        with pytest.raises(ValueError):
            PrivacyBudget(epsilon=0.0)
        with pytest.raises(ValueError):
            PrivacyBudget(epsilon=1.0, delta=1.0)
        with pytest.raises(ValueError):
            PrivacyBudget(epsilon=1.0, pca_fraction=1.0)

    def test_split_shares(self):
        b = PrivacyBudget(epsilon=2.0, delta=0.5, pca_fraction=0.5)
        mom, psi, ctr = b.split_for_acceleration()
        assert mom.epsilon == pytest.approx(1.0)
        assert psi.epsilon == pytest.approx(0.8)
        assert ctr.epsilon == pytest.approx(0.2)
        assert mom.delta == pytest.approx(0.25)
        assert psi.epsilon + ctr.epsilon + mom.epsilon == pytest.approx(b.epsilon)
        assert psi.delta + ctr.delta + mom.delta == pytest.approx(b.delta)


def test_grid_points_row_major():
    pts = grid_points(ChebGrid(2), 2)
    v = ChebGrid(2).values
    expect = np.array([[v[0], v[0]], [v[0], v[1]], [v[1], v[0]], [v[1], v[1]]])
    np.testing.assert_array_equal(pts, expect)
