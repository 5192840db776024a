"""Core domain types and parameter derivation.

The mechanism operates on databases of n points in [-1,1]^d.  Everything
downstream is controlled by four integers derived from (n, d, K) and the
privacy regime:

    t  per-axis degree bound of the cosine-product basis,
    N  per-axis resolution of the discretization grid,
    m  number of points in the released synthetic database,
    L  denominator of the rounding lattice {i/L}.

All types here are immutable and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

STAGES = ("raw", "normalized", "discretized")

_SNAP_RTOL = 1e-9  # near-integer guard applied before every ceiling


def _ceil_snapped(x: float) -> int:
    """Ceiling with a relative snap so 16384.000000000004 -> 16384."""
    r = round(x)
    if abs(x - r) <= _SNAP_RTOL * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
        raise ValueError("points must form a nonempty n x d array")
    out = np.array(pts, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ChebGrid:
    """Per-axis discretization grid a_k = (2k+1-N)/N, k = 0..N-1."""

    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("grid resolution N must be a positive integer")

    @property
    def values(self) -> np.ndarray:
        k = np.arange(self.N, dtype=np.float64)
        v = (2.0 * k + 1.0 - self.N) / self.N
        v.setflags(write=False)
        return v

    def snap(self, coords: np.ndarray) -> np.ndarray:
        """Nearest grid value per coordinate, ties resolved upward."""
        z = np.asarray(coords, dtype=np.float64)
        k = np.floor((z * self.N + self.N - 1.0) / 2.0 + 0.5)
        k = np.clip(k, 0, self.N - 1)
        return (2.0 * k + 1.0 - self.N) / self.N

    def contains(self, coords: np.ndarray) -> bool:
        z = np.asarray(coords, dtype=np.float64)
        return bool(np.all(self.snap(z) == z))


@dataclass(frozen=True)
class Lattice:
    """Rounding lattice {i/L : i = -L..L} with exact membership tests."""

    L: int

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("lattice denominator L must be a positive integer")

    @property
    def step(self) -> float:
        return 1.0 / self.L

    def contains(self, values) -> bool:
        v = np.asarray(values, dtype=np.float64)
        if np.any(np.abs(v) > 1.0):
            return False
        i = np.rint(v * self.L)
        return bool(np.all(i / self.L == v))


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of points with provenance.

    stage tracks how far the points are through the pipeline: "raw" input,
    "normalized" into [-1,1]^d, or "discretized" onto a ChebGrid.  Bounds
    are enforced for every stage past raw; grid membership is enforced for
    discretized data.
    """

    points: np.ndarray
    stage: str = "raw"
    ranges: tuple | None = None
    grid: ChebGrid | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", _as_points(self.points))
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.stage != "raw" and np.any(np.abs(self.points) > 1.0):
            raise ValueError("normalized data must lie in [-1,1]^d")
        if self.stage == "discretized":
            if self.grid is None:
                raise ValueError("discretized data must carry its grid")
            if not self.grid.contains(self.points):
                raise ValueError("discretized data must lie on the grid")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class PrivacyBudget:
    """Privacy budget (epsilon, delta); delta = 0 means pure DP.

    In accelerated runs the subspace stage consumes pca_fraction of the
    budget and the moment release the rest; delta splits the same way.
    """

    epsilon: float
    delta: float = 0.0
    pca_fraction: float = 0.5

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("delta must lie in [0, 1)")
        if not 0.0 <= self.pca_fraction < 1.0:
            raise ValueError("pca_fraction must lie in [0, 1)")

    @property
    def pure(self) -> bool:
        return self.delta == 0.0

    def split_for_acceleration(self) -> tuple["PrivacyBudget", "PrivacyBudget", "PrivacyBudget"]:
        """(moment, subspace-iteration, center) budgets.

        The PCA share is split 80/20 between the subspace iteration and the
        private center estimate.
        """
        f = self.pca_fraction
        if f == 0.0:
            raise ValueError("pca_fraction is 0; no budget reserved for the PCA stage")
        mom = replace(self, epsilon=(1 - f) * self.epsilon, delta=(1 - f) * self.delta)
        psi = replace(self, epsilon=0.8 * f * self.epsilon, delta=0.8 * f * self.delta)
        ctr = replace(self, epsilon=0.2 * f * self.epsilon, delta=0.2 * f * self.delta)
        return mom, psi, ctr


@dataclass(frozen=True)
class MechanismParams:
    """Derived mechanism sizes plus the optional accelerated block (C, R)."""

    t: int
    N: int
    m: int
    L: int
    mode: str
    C: int | None = None
    R: int | None = None

    def __post_init__(self):
        if self.mode not in ("pure", "approx"):
            raise ValueError(f"unknown mode {self.mode!r}")
        for name in ("t", "N", "m", "L"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if (self.C is None) != (self.R is None):
            raise ValueError("C and R must be set together")
        if self.R is not None:
            if self.R < 1 or self.C < 1:
                raise ValueError("C and R must be positive")

    @property
    def accelerated(self) -> bool:
        return self.C is not None

    def with_subset(self, C: int, R: int, d: int) -> "MechanismParams":
        if R > self.t ** d:
            raise ValueError(f"basis subset R={R} exceeds t^d={self.t ** d}")
        if C > self.N ** d:
            raise ValueError(f"grid subset C={C} exceeds N^d={self.N ** d}")
        return replace(self, C=C, R=R)


def _validate_ndk(n: int, d: int, K) -> None:
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    if int(d) != d or d < 1:
        raise ValueError("d must be a positive integer")
    if K < 1:
        raise ValueError("K must be >= 1")


def derive_params_pure(n: int, d: int, K) -> MechanismParams:
    """Sizes for the pure-DP regime.

    t = ceil(n^{1/(2d+K)}), N = ceil(n^{K/(2d+K)}),
    m = ceil(n^{1+(K+1)/(2d+K)}), L = ceil(n^{(d+K)/(2d+K)}).
    """
    _validate_ndk(n, d, K)
    q = 2 * d + K
    return MechanismParams(
        t=_ceil_snapped(n ** (1.0 / q)),
        N=_ceil_snapped(n ** (K / q)),
        m=_ceil_snapped(n ** (1.0 + (K + 1.0) / q)),
        L=_ceil_snapped(n ** ((d + K) / q)),
        mode="pure",
    )


def derive_params_approx(n: int, d: int, K, delta: float) -> MechanismParams:
    """Sizes for the (epsilon, delta) regime; log means natural log."""
    _validate_ndk(n, d, K)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    q = 3 * d + 2 * K
    ln = math.log(1.0 / delta)

    def term(num_n: float, num_log: float) -> int:
        return _ceil_snapped(math.exp((num_n * math.log(n) - num_log * math.log(ln)) / q))

    return MechanismParams(
        t=term(2.0, 1.0),
        N=term(2.0 * K, K),
        m=term(4.0 * d + 4.0 * K + 2.0, 2.0 * d + 2.0 * K + 1.0),
        L=term(2.0 * d + 2.0 * K, d + K),
        mode="approx",
    )


def derive_params(n: int, d: int, K, budget: PrivacyBudget) -> MechanismParams:
    """Dispatch on the budget: delta = 0 selects the pure-DP sizes."""
    if budget.pure:
        return derive_params_pure(n, d, K)
    return derive_params_approx(n, d, K, budget.delta)


def normalize_dataset(raw: Dataset, ranges) -> Dataset:
    """Affine map of each attribute from [lo, hi] onto [-1, 1], then clamp.

    Values outside the declared range are clamped to the boundary.  The
    ranges are recorded on the returned dataset so the mapping can be
    inverted or audited later.
    """
    if raw.stage != "raw":
        raise ValueError("normalize_dataset expects a raw dataset")
    rng = [(float(lo), float(hi)) for lo, hi in ranges]
    if len(rng) != raw.d:
        raise ValueError(f"expected {raw.d} ranges, got {len(rng)}")
    for lo, hi in rng:
        if not hi > lo:
            raise ValueError(f"degenerate range ({lo}, {hi})")
    lo = np.array([r[0] for r in rng])
    hi = np.array([r[1] for r in rng])
    scaled = 2.0 * (raw.points - lo) / (hi - lo) - 1.0
    return Dataset(np.clip(scaled, -1.0, 1.0), stage="normalized", ranges=tuple(rng))


def discretize(data: Dataset, grid: ChebGrid) -> Dataset:
    """Replace every coordinate by the nearest grid value (ties upward)."""
    if data.stage == "raw":
        raise ValueError("normalize before discretizing")
    return Dataset(grid.snap(data.points), stage="discretized", ranges=data.ranges, grid=grid)


def grid_points(grid: ChebGrid, d: int) -> np.ndarray:
    """Full tensor grid A^d as an (N^d, d) array, row-major axis order."""
    if d < 1:
        raise ValueError("d must be positive")
    axes = np.meshgrid(*([grid.values] * d), indexing="ij")
    pts = np.stack([a.reshape(-1) for a in axes], axis=1)
    pts.setflags(write=False)
    return pts
