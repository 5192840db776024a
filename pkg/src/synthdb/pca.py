"""Private subspace iteration and grid-subset construction.

The accelerated mechanism restricts the LP support to C points sampled
from a low-dimensional ellipsoid: axes are private top-k eigenvectors of
the data covariance (noisy power iteration with per-step Gram-Schmidt),
radii are square roots of private eigenvalue estimates, and the center is
a private mean.  A uniform sample of the full grid is kept as a baseline.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import ChebGrid, Dataset, PrivacyBudget
from .noise import laplace_vector

EIGENVALUE_FLOOR = 1e-6  # prevents zero-radius ellipsoid axes


@dataclass(frozen=True)
class CovarianceMatrix:
    """Biased covariance (1/n) sum x x^T - mean mean^T of a dataset."""

    matrix: np.ndarray
    n: int

    def __post_init__(self):
        a = np.array(np.asarray(self.matrix, dtype=np.float64))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("covariance must be square")
        if np.max(np.abs(a - a.T)) > 1e-12:
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(a).min() < -1e-10:
            raise ValueError("covariance must be positive semidefinite")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def sensitivity_bound(self) -> float:
        """Spectral-norm change when one point of the dataset is swapped."""
        return 5.0 * self.d / self.n


def covariance(data: Dataset) -> CovarianceMatrix:
    if data.n < 2:
        raise ValueError("covariance needs at least two points")
    x = data.points
    mean = x.mean(axis=0)
    second = x.T @ x / data.n
    a = second - np.outer(mean, mean)
    return CovarianceMatrix(0.5 * (a + a.T), n=data.n)


def gram_schmidt(m: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Orthonormalize columns; numerically dependent columns are resampled
    from a standard normal (with a warning) so the output always has full
    column rank."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a d x k matrix")
    d, k = a.shape
    if k > d:
        raise ValueError("cannot orthonormalize more columns than rows")
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([d, k])))
    q = np.zeros((d, k))
    for j in range(k):
        col = a[:, j].copy()
        for attempt in range(50):
            for _ in range(2):  # reorthogonalize once; classic MGS fix
                for i in range(j):
                    col -= (q[:, i] @ col) * q[:, i]
            norm = np.linalg.norm(col)
            if norm > 1e-12:
                break
            warnings.warn(f"column {j} numerically dependent; resampled", RuntimeWarning)
            col = rng.standard_normal(d)
        else:
            raise np.linalg.LinAlgError("could not produce an independent column")
        q[:, j] = col / norm
    return q


@dataclass(frozen=True)
class PrivateSubspace:
    """Private top-k axes, eigenvalue estimates, and ellipsoid center."""

    axes: np.ndarray          # d x k, orthonormal columns
    eigenvalues: np.ndarray   # k, nonnegative, nonincreasing
    center: np.ndarray        # d
    noise_kind: str

    def __post_init__(self):
        x = np.array(np.asarray(self.axes, dtype=np.float64))
        lam = np.array(np.asarray(self.eigenvalues, dtype=np.float64))
        ctr = np.array(np.asarray(self.center, dtype=np.float64))
        if np.max(np.abs(x.T @ x - np.eye(x.shape[1]))) > 1e-9:
            raise ValueError("axes must be orthonormal")
        if np.any(lam < 0) or np.any(np.diff(lam) > 1e-12):
            raise ValueError("eigenvalue estimates must be nonnegative, nonincreasing")
        if ctr.shape != (x.shape[0],):
            raise ValueError("center dimension must match the axes")
        for arr in (x, lam, ctr):
            arr.setflags(write=False)
        object.__setattr__(self, "axes", x)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "center", ctr)

    @property
    def k(self) -> int:
        return self.axes.shape[1]


def psi_noise_scale(noise_kind: str, d: int, k: int, iterations: int,
                    n: int, epsilon: float, delta: float = 0.0) -> float:
    """Per-iteration noise scale for the private subspace iteration.

    gaussian: 5 d sqrt(4 k L ln(1/delta)) / (n epsilon)   [(eps, delta)-DP]
    laplace:  50 d^{3/2} k L / (n epsilon)                [pure eps-DP]
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if noise_kind == "gaussian":
        if not 0.0 < delta < 1.0:
            raise ValueError("gaussian subspace noise requires delta in (0, 1)")
        return 5.0 * d * math.sqrt(4.0 * k * iterations * math.log(1.0 / delta)) / (n * epsilon)
    if noise_kind == "laplace":
        return 50.0 * d ** 1.5 * k * iterations / (n * epsilon)
    raise ValueError(f"unknown noise kind {noise_kind!r}")


def psi(data: Dataset, k: int, iterations: int, budget: PrivacyBudget,
        noise_kind: str, rng: np.random.Generator,
        sigma_override: float | None = None) -> PrivateSubspace:
    """Noisy power iteration with per-step Gram-Schmidt.

    Each step computes A X + ||X||_inf G with fresh d x k noise G, then
    re-orthonormalizes.  Eigenvalues are estimated from the column norms of
    the final noisy iterate, so the output is post-processing of private
    quantities.  sigma_override forces the noise scale (0 gives exact power
    iteration; test use only).
    """
    if iterations < 1:
        raise ValueError("need at least one iteration")
    d = data.d
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}]")
    if k > d / 2:
        warnings.warn(f"k={k} exceeds d/2={d / 2}; convergence guarantees weaken",
                      RuntimeWarning)
    if sigma_override is not None:
        if sigma_override < 0:
            raise ValueError("noise scale cannot be negative")
        sigma = float(sigma_override)
    else:
        sigma = psi_noise_scale(noise_kind, d, k, iterations, data.n,
                                budget.epsilon, budget.delta)
    a = covariance(data).matrix
    x, w = subspace_iteration(a, k, iterations, sigma, noise_kind, rng)
    lam = estimate_eigenvalues(w)
    order = np.argsort(-lam, kind="stable")
    return PrivateSubspace(axes=x[:, order], eigenvalues=lam[order],
                           center=np.zeros(d), noise_kind=noise_kind)


def subspace_iteration(matrix: np.ndarray, k: int, iterations: int, sigma: float,
                       noise_kind: str, rng: np.random.Generator):
    """Noisy power-iteration core on a symmetric matrix.

    Returns (X, W): the orthonormal iterate after the last step and the
    last un-orthonormalized iterate (whose column norms estimate the top
    eigenvalues).  sigma = 0 gives exact subspace iteration.
    """
    a = np.asarray(matrix, dtype=np.float64)
    d = a.shape[0]
    x = gram_schmidt(rng.standard_normal((d, k)), rng)
    w = None
    for _ in range(iterations):
        w = a @ x
        if sigma > 0:
            if noise_kind == "gaussian":
                g = sigma * rng.standard_normal((d, k))
            else:
                g = laplace_vector(sigma, (d, k), rng)
            w = w + np.max(np.abs(x)) * g
        x = gram_schmidt(w, rng)
    return x, w


def estimate_eigenvalues(last_iterate: np.ndarray) -> np.ndarray:
    """Column norms of the final noisy iterate (private estimator)."""
    w = np.asarray(last_iterate, dtype=np.float64)
    return np.linalg.norm(w, axis=0)


def exact_eigenvalues(a: np.ndarray, axes: np.ndarray) -> np.ndarray:
    """sqrt(x^T A^2 x) per column.  Touches the raw covariance, so this is
    a test-only oracle, never released."""
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(axes, dtype=np.float64)
    ax = a @ x
    return np.sqrt(np.einsum("ij,ij->j", ax, ax))


def private_mean(data: Dataset, epsilon_mean: float, rng: np.random.Generator) -> np.ndarray:
    """Mean + Laplace(2d / (n epsilon)) per coordinate, clamped to the cube.

    Per-coordinate sensitivity is 2/n; the factor d pays for composing the
    d coordinate releases.
    """
    if not epsilon_mean > 0:
        raise ValueError("epsilon must be positive")
    scale = 2.0 * data.d / (data.n * epsilon_mean)
    noisy = data.points.mean(axis=0) + laplace_vector(scale, data.d, rng)
    return np.clip(noisy, -1.0, 1.0)


@dataclass(frozen=True)
class EllipsoidSubset:
    """Candidate LP support points in [-1,1]^d (clipped); pre_clip keeps the
    raw samples for membership checks."""

    points: np.ndarray
    pre_clip: np.ndarray

    def __post_init__(self):
        pts = np.array(np.asarray(self.points, dtype=np.float64))
        raw = np.array(np.asarray(self.pre_clip, dtype=np.float64))
        if pts.shape != raw.shape or pts.ndim != 2:
            raise ValueError("points and pre_clip must be matching n x d arrays")
        if np.any(np.abs(pts) > 1.0):
            raise ValueError("clipped points must lie in [-1,1]^d")
        pts.setflags(write=False)
        raw.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "pre_clip", raw)

    def __len__(self) -> int:
        return len(self.points)


def sample_ellipsoid(subspace: PrivateSubspace, count: int,
                     rng: np.random.Generator) -> EllipsoidSubset:
    """Uniform sample of the solid k-dimensional ellipsoid.

    Radii are sqrt(max(eigenvalue, floor)) along the private axes; the
    remaining d-k directions have radius zero, so points lie on the affine
    subspace through the center.  Samples are generated as normalized
    Gaussians scaled by U^{1/k} (uniform in the unit ball), mapped through
    the axes, recentered, then clipped to the cube.
    """
    if count < 1:
        raise ValueError("count must be positive")
    k = subspace.k
    radii = np.sqrt(np.maximum(subspace.eigenvalues, EIGENVALUE_FLOOR))
    g = rng.standard_normal((count, k))
    norms = np.maximum(np.linalg.norm(g, axis=1), 1e-300)
    ball = g * (rng.random(count) ** (1.0 / k) / norms)[:, None]
    raw = subspace.center + (ball * radii) @ subspace.axes.T
    return EllipsoidSubset(points=np.clip(raw, -1.0, 1.0), pre_clip=raw)


def ellipsoid_membership(subspace: PrivateSubspace, points: np.ndarray) -> np.ndarray:
    """sum_s ((x - center) . axis_s)^2 / radius_s^2 per point (<= 1 inside)."""
    radii_sq = np.maximum(subspace.eigenvalues, EIGENVALUE_FLOOR)
    proj = (np.asarray(points, dtype=np.float64) - subspace.center) @ subspace.axes
    return (proj ** 2 / radii_sq).sum(axis=1)


def uniform_hypercube_subset(grid: ChebGrid, d: int, count: int,
                             rng: np.random.Generator) -> EllipsoidSubset:
    """Baseline subset: count i.i.d. uniform draws (with replacement) from
    the full N^d grid."""
    if count < 1:
        raise ValueError("count must be positive")
    idx = rng.integers(0, grid.N, size=(count, d))
    pts = grid.values[idx]
    return EllipsoidSubset(points=pts, pre_clip=pts)


def with_center(subspace: PrivateSubspace, center: np.ndarray) -> PrivateSubspace:
    return replace(subspace, center=np.asarray(center, dtype=np.float64))
