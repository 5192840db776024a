"""End-to-end synthetic-database release.

Pipeline: derive sizes -> discretize -> basis moments -> Laplace noise ->
lattice rounding -> L1 fit over the grid (or a private grid subset) ->
i.i.d. sampling from the fitted distribution.  Noise injection is the
single privacy barrier; everything after it is post-processing, and the
sampler sees only the fitted distribution and the requested size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import pca
from .basis import (BasisSet, DesignMatrix, MomentVector, build_design_matrix,
                    compute_moments, enumerate_basis, round_moment_vector)
from .core import (ChebGrid, Dataset, Lattice, MechanismParams, PrivacyBudget,
                   _ceil_snapped, derive_params, discretize, grid_points)
from .lpsolve import L1FitResult, ProbabilityVector, solve_l1_fit
from .noise import NoiseSpec, moment_noise_scale, privatize_moments, rng_stream

DEFAULT_FEASIBILITY_BOUND = 10 ** 6
SUBSET_SOURCES = ("pca_ellipsoid", "uniform_hypercube")


class FeasibilityError(ValueError):
    """Raised when the exact LP would be too large; use run_accelerated."""


@dataclass(frozen=True)
class SyntheticDatabase:
    points: np.ndarray
    params: MechanismParams
    seed: int
    budget: PrivacyBudget

    def __post_init__(self):
        pts = np.array(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2:
            raise ValueError("synthetic points must form an m x d array")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class RunArtifacts:
    """Intermediate values kept for diagnostics and tests.  Contains the
    noise-free moments, so a report built from it is not private."""

    params: MechanismParams
    basis: BasisSet
    grid: ChebGrid
    lattice: Lattice
    true_moments: MomentVector
    noisy_moments: MomentVector
    rounded_moments: MomentVector
    design: DesignMatrix
    rounded_design: DesignMatrix
    fit: L1FitResult
    synthetic_points: np.ndarray
    smoothness_bound: float = 1.0


@dataclass(frozen=True)
class DiagnosticsReport:
    """Observed error-budget terms for one run.

    noise_l1 reveals the realized noise vector magnitude, so a report is
    diagnostic output for testing, not part of the private release.
    """

    noise_l1: float
    lp_objective: float
    sampling_linf: float
    rounding_bound: float
    discretization_bound: float
    formula_m: int
    realized_m: int
    support_size: int
    lp_degraded: bool
    lp_certified: bool
    artifacts: Optional[RunArtifacts] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("noise_l1", "lp_objective", "sampling_linf",
                     "rounding_bound", "discretization_bound"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def to_dict(self) -> dict:
        return {"noise_l1": self.noise_l1,
                "lp_objective": self.lp_objective,
                "sampling_linf": self.sampling_linf,
                "rounding_bound": self.rounding_bound,
                "discretization_bound": self.discretization_bound,
                "formula_m": self.formula_m,
                "realized_m": self.realized_m,
                "support_size": self.support_size,
                "lp_degraded": self.lp_degraded,
                "lp_certified": self.lp_certified}


def sample_synthetic(u_star: ProbabilityVector, m: int, rng: np.random.Generator) -> np.ndarray:
    """m i.i.d. draws from the fitted distribution (repeats allowed)."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m == 0:
        return np.empty((0, u_star.support.shape[1]))
    idx = rng.choice(len(u_star), size=m, p=u_star.weights)
    return u_star.support[idx]


def error_diagnostics(artifacts: RunArtifacts | None) -> DiagnosticsReport:
    """Error-decomposition terms recomputed from retained run artifacts."""
    if artifacts is None:
        raise ValueError("diagnostics need retained run artifacts")
    basis_count = artifacts.basis.count
    noise_l1 = float(np.abs(artifacts.noisy_moments.values
                            - artifacts.true_moments.values).sum())
    if len(artifacts.synthetic_points):
        synth_moments = compute_moments(artifacts.synthetic_points, artifacts.basis,
                                        kind="synthetic")
        expected = artifacts.design.values @ artifacts.fit.distribution.weights
        sampling_linf = float(np.max(np.abs(synth_moments.values - expected)))
    else:
        sampling_linf = 0.0
    d = artifacts.basis.d
    return DiagnosticsReport(
        noise_l1=noise_l1,
        lp_objective=artifacts.fit.objective,
        sampling_linf=sampling_linf,
        rounding_bound=basis_count / artifacts.lattice.L,
        discretization_bound=d * artifacts.smoothness_bound / artifacts.grid.N,
        formula_m=artifacts.params.m,
        realized_m=len(artifacts.synthetic_points),
        support_size=artifacts.design.support.shape[0],
        lp_degraded=artifacts.fit.degraded,
        lp_certified=artifacts.fit.certified,
        artifacts=artifacts)


def _release(data: Dataset, params: MechanismParams, basis: BasisSet,
             support: np.ndarray, mom_budget: PrivacyBudget, seed: int,
             budget: PrivacyBudget, m_max: int | None,
             strict_sensitivity: bool, retain_artifacts: bool):
    """Shared back half of both runs: moments -> noise -> rounding -> LP ->
    sampling -> diagnostics."""
    grid = ChebGrid(params.N)
    lattice = Lattice(params.L)
    discretized = discretize(data, grid)

    true_moments = compute_moments(discretized, basis)
    scale = moment_noise_scale(params.mode, basis.count, data.n,
                               mom_budget.epsilon, mom_budget.delta,
                               strict_sensitivity=strict_sensitivity)
    spec = NoiseSpec("laplace", scale, stream="moments")
    noisy = privatize_moments(true_moments, spec, rng_stream(seed, spec.stream))
    rounded = round_moment_vector(noisy, lattice)

    design = build_design_matrix(basis, support)
    fit = solve_l1_fit(design.rounded(lattice), rounded)

    realized_m = params.m if m_max is None else min(params.m, int(m_max))
    if realized_m < 1:
        raise ValueError("m_max must allow at least one synthetic point")
    points = sample_synthetic(fit.distribution, realized_m, rng_stream(seed, "sampling"))

    artifacts = RunArtifacts(params=params, basis=basis, grid=grid, lattice=lattice,
                             true_moments=true_moments, noisy_moments=noisy,
                             rounded_moments=rounded, design=design,
                             rounded_design=design.rounded(lattice), fit=fit,
                             synthetic_points=points)
    report = error_diagnostics(artifacts)
    if not retain_artifacts:
        report = DiagnosticsReport(**{**report.to_dict(), "artifacts": None})
    sdb = SyntheticDatabase(points=points, params=params, seed=seed, budget=budget)
    return sdb, report


def run_full(data: Dataset, K, budget: PrivacyBudget, seed: int = 0,
             m_max: int | None = None,
             feasibility_bound: int = DEFAULT_FEASIBILITY_BOUND,
             strict_sensitivity: bool = False,
             retain_artifacts: bool = False):
    """Exact mechanism: full basis, LP over the entire N^d grid.

    Pure DP when budget.delta is 0, otherwise the (epsilon, delta) variant.
    Refuses to build LPs past the feasibility bound; large instances belong
    to run_accelerated.
    """
    if data.stage == "raw":
        raise ValueError("normalize the dataset before running the mechanism")
    params = derive_params(data.n, data.d, K, budget)
    if params.N ** data.d > feasibility_bound or params.t ** data.d > feasibility_bound:
        raise FeasibilityError(
            f"exact LP needs {params.N ** data.d} columns and {params.t ** data.d} rows; "
            f"bound is {feasibility_bound}.  Use run_accelerated for this instance.")
    basis = enumerate_basis(params.t, data.d)
    support = grid_points(ChebGrid(params.N), data.d)
    return _release(data, params, basis, support, budget, seed, budget,
                    m_max, strict_sensitivity, retain_artifacts)


def default_subset_size(n: int, d: int, K, mode: str) -> int:
    """Default truncated-basis size: half of n^{d/(2d+K)} (pure) or of
    n^{2d/(3d+2K)} (approx), the smoothness K standing in for sigma^2."""
    if mode == "pure":
        return max(1, _ceil_snapped(0.5 * n ** (d / (2.0 * d + K))))
    return max(1, _ceil_snapped(0.5 * n ** (2.0 * d / (3.0 * d + 2.0 * K))))


def default_subspace_dim(d: int) -> int:
    return min(max(1, d // 2), 5)


def run_accelerated(data: Dataset, K, budget: PrivacyBudget, C: int,
                    R_override: int | None = None,
                    subset_source: str = "pca_ellipsoid",
                    seed: int = 0,
                    subspace_dim: int | None = None,
                    psi_iterations: int = 10,
                    m_max: int | None = None,
                    strict_sensitivity: bool = False,
                    retain_artifacts: bool = False):
    """Accelerated mechanism: R lowest-degree basis functions, LP support
    restricted to C grid-subset points.

    With subset_source="pca_ellipsoid" the subset is sampled from the
    private PCA ellipsoid (which consumes budget.pca_fraction of the budget
    before the moment release); "uniform_hypercube" samples the grid
    uniformly and spends everything on moments.  Sampled points are snapped
    onto the grid and deduplicated so design columns stay grid evaluations.
    """
    if data.stage == "raw":
        raise ValueError("normalize the dataset before running the mechanism")
    if subset_source not in SUBSET_SOURCES:
        raise ValueError(f"subset_source must be one of {SUBSET_SOURCES}")
    if C < 1:
        raise ValueError("subset size C must be positive")
    params = derive_params(data.n, data.d, K, budget)
    grid = ChebGrid(params.N)

    R = R_override if R_override is not None else default_subset_size(
        data.n, data.d, K, params.mode)
    R = max(1, min(int(R), params.t ** data.d))
    C = min(int(C), params.N ** data.d)
    params = params.with_subset(C=C, R=R, d=data.d)

    if subset_source == "pca_ellipsoid":
        mom_budget, psi_budget, ctr_budget = budget.split_for_acceleration()
        k = subspace_dim if subspace_dim is not None else default_subspace_dim(data.d)
        noise_kind = "laplace" if budget.pure else "gaussian"
        subspace = pca.psi(data, k, psi_iterations, psi_budget, noise_kind,
                           rng_stream(seed, "psi"))
        center = pca.private_mean(data, ctr_budget.epsilon, rng_stream(seed, "center"))
        subspace = pca.with_center(subspace, center)
        sampled = pca.sample_ellipsoid(subspace, C, rng_stream(seed, "subset")).points
    else:
        mom_budget = budget
        sampled = pca.uniform_hypercube_subset(grid, data.d, C,
                                               rng_stream(seed, "subset")).points

    support = np.unique(grid.snap(sampled), axis=0)
    basis = enumerate_basis(params.t, data.d, R)
    return _release(data, params, basis, support, mom_budget, seed, budget,
                    m_max, strict_sensitivity, retain_artifacts)
