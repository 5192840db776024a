"""L1-residual fit over the probability simplex.

Solves   min_u || W u - b ||_1   s.t.  u >= 0,  sum(u) = 1
by splitting the residual into nonnegative parts v - w = b - W u and
minimizing sum(v + w) with a dense revised simplex.  With lattice-rounded
inputs the problem also has an all-integer standard form obtained by
scaling with the lattice denominator L; that form is what external
solvers consume for cross-checks.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .basis import DesignMatrix, MomentVector
from .core import Lattice

_FEAS_TOL = 1e-9
_DEGENERATE_STREAK = 12  # consecutive zero-step pivots before Bland's rule


class SimplexError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProbabilityVector:
    """Nonnegative weights over an explicit support, summing to 1."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        sup = np.array(np.asarray(self.support, dtype=np.float64))
        if sup.ndim == 1:
            sup = sup.reshape(-1, 1)
        w = np.array(np.asarray(self.weights, dtype=np.float64))
        if w.ndim != 1 or len(w) != sup.shape[0]:
            raise ValueError("need one weight per support point")
        if np.any(w < -1e-12):
            raise ValueError("weights must be nonnegative")
        w = np.clip(w, 0.0, None)
        total = w.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total}, expected 1")
        w /= total
        sup.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class StandardLP:
    """All-integer equality form: max/min c.x s.t. A x = b, x >= 0.

    A = [[L W', L I, -L I], [1^T, 0, 0]], b = [L b'; 1], c = [0; 1; 1],
    so every entry is an integer bounded by L in magnitude.  The objective
    must be minimized for the fit to match the residual problem.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    scale: int

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    def dumps(self) -> str:
        """Plain-text fixed format: dimensions header, then row-major ints."""
        out = io.StringIO()
        out.write(f"{self.n_rows} {self.n_cols} {self.scale}\n")
        for row in self.A:
            out.write(" ".join(str(int(v)) for v in row) + "\n")
        out.write(" ".join(str(int(v)) for v in self.b) + "\n")
        out.write(" ".join(str(int(v)) for v in self.c) + "\n")
        return out.getvalue()

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())


def _lattice_ints(values: np.ndarray, lat: Lattice, what: str) -> np.ndarray:
    scaled = np.asarray(values, dtype=np.float64) * lat.L
    ints = np.rint(scaled)
    if np.max(np.abs(scaled - ints)) > 1e-6 or np.max(np.abs(ints)) > lat.L:
        raise ValueError(f"{what} entries are not on the lattice")
    return ints.astype(np.int64)


def to_standard_form(design: DesignMatrix, moments: MomentVector, lat: Lattice) -> StandardLP:
    """Integer-exact standard form of the L1 fit (multiply through by L)."""
    W = _lattice_ints(design.values, lat, "design matrix")
    bhat = _lattice_ints(moments.values, lat, "moment vector")
    if len(bhat) != W.shape[0]:
        raise ValueError("moment vector length must equal design row count")
    k, n = W.shape
    eye = lat.L * np.eye(k, dtype=np.int64)
    top = np.hstack([W, eye, -eye])
    bottom = np.zeros((1, n + 2 * k), dtype=np.int64)
    bottom[0, :n] = 1
    A = np.vstack([top, bottom])
    b = np.concatenate([bhat, [1]])
    c = np.concatenate([np.zeros(n, dtype=np.int64), np.ones(2 * k, dtype=np.int64)])
    return StandardLP(A=A, b=b, c=c, scale=lat.L)


@dataclass(frozen=True)
class L1FitResult:
    distribution: ProbabilityVector
    objective: float
    dual: np.ndarray
    iterations: int
    status: str          # "optimal" or "iteration_limit"
    degraded: bool
    dual_gap: float
    min_reduced_cost: float

    @property
    def certified(self) -> bool:
        """Dual feasibility and strong duality both hold within 1e-7."""
        return self.min_reduced_cost >= -1e-7 and abs(self.dual_gap) <= 1e-7 * (1.0 + abs(self.objective))


def _revised_simplex(A, b, c, basis, max_iter, tol):
    """Phase-2 revised simplex from a starting basis.

    Dantzig pricing with first-index ties; switches to Bland's rule after a
    streak of degenerate pivots.  Returns (x, y, basis, iterations, status).
    """
    m, n = A.shape
    basis = list(basis)
    bland = False
    stalled = 0
    iterations = 0
    while True:
        B = A[:, basis]
        try:
            x_b = np.linalg.solve(B, b)
            y = np.linalg.solve(B.T, c[basis])
        except np.linalg.LinAlgError as exc:
            raise SimplexError("singular working basis") from exc
        if iterations >= max_iter:
            return _assemble(n, basis, x_b), y, basis, iterations, "iteration_limit"
        z = c - A.T @ y
        z[basis] = 0.0
        if bland:
            candidates = np.nonzero(z < -tol)[0]
            if candidates.size == 0:
                return _assemble(n, basis, x_b), y, basis, iterations, "optimal"
            enter = int(candidates[0])
        else:
            enter = int(np.argmin(z))
            if z[enter] >= -tol:
                return _assemble(n, basis, x_b), y, basis, iterations, "optimal"
        direction = np.linalg.solve(B, A[:, enter])
        positive = np.nonzero(direction > tol)[0]
        if positive.size == 0:
            raise SimplexError("unbounded direction in a bounded fit problem")
        ratios = x_b[positive] / direction[positive]
        theta = ratios.min()
        near = positive[ratios <= theta + 1e-12]
        leave_pos = int(near[np.argmin([basis[i] for i in near])])
        if theta <= tol:
            stalled += 1
            if stalled >= _DEGENERATE_STREAK:
                bland = True
        else:
            stalled = 0
        basis[leave_pos] = enter
        iterations += 1


def _assemble(n, basis, x_b):
    x = np.zeros(n)
    x[basis] = np.clip(x_b, 0.0, None)
    return x


def _crash_basis(W, bhat):
    """Point-mass start: the support column with the smallest L1 residual
    is basic in the simplex row; residual signs pick v_r or w_r per row."""
    k, n = W.shape
    j0 = int(np.argmin(np.abs(W - bhat[:, None]).sum(axis=0)))
    resid = bhat - W[:, j0]
    basis = [j0]
    for r in range(k):
        basis.append(n + r if resid[r] >= 0 else n + k + r)
    return basis


def solve_standard_form(lp: StandardLP, max_iter: int = 50_000):
    """Minimize c.x over the integer standard form; returns (x, objective)."""
    A = lp.A.astype(np.float64)
    b = lp.b.astype(np.float64)
    c = lp.c.astype(np.float64)
    k = lp.n_rows - 1
    n = lp.n_cols - 2 * k
    basis = _crash_basis(A[:k, :n] / lp.scale, b[:k] / lp.scale)
    tol = 1e-9 * max(1.0, float(np.abs(A).max()))
    x, y, basis, iters, status = _revised_simplex(A, b, c, basis, max_iter, tol)
    if status != "optimal":
        raise SimplexError(f"no optimum within {max_iter} iterations")
    return x, float(c @ x)


def solve_l1_fit(design: DesignMatrix, moments: MomentVector,
                 max_iter: int = 50_000, prefer_uniform: bool = True) -> L1FitResult:
    """Best simplex-constrained L1 fit of the design matrix to the moments.

    Runs the revised simplex from a point-mass starting basis.  When the
    uniform distribution over the support is already optimal (degenerate
    objectives, common with very few basis rows), the uniform vector is
    returned instead of an arbitrary vertex; set prefer_uniform=False to
    always return the simplex vertex.
    """
    W = design.values
    bhat = np.asarray(moments.values, dtype=np.float64)
    k, n = W.shape
    if n < 1:
        raise ValueError("design matrix needs at least one column")
    if len(bhat) != k:
        raise ValueError("moment vector length must equal design row count")
    A = np.vstack([np.hstack([W, np.eye(k), -np.eye(k)]),
                   np.concatenate([np.ones(n), np.zeros(2 * k)])[None, :]])
    b = np.concatenate([bhat, [1.0]])
    c = np.concatenate([np.zeros(n), np.ones(2 * k)])
    x, y, final_basis, iters, status = _revised_simplex(
        A, b, c, _crash_basis(W, bhat), max_iter, _FEAS_TOL)
    u = x[:n]
    objective = float(np.abs(W @ u - bhat).sum())
    z_min = float(np.min(c - A.T @ y))
    gap = float(c @ x - b @ y)
    degraded = status != "optimal"

    if prefer_uniform and not degraded:
        u0 = np.full(n, 1.0 / n)
        obj0 = float(np.abs(W @ u0 - bhat).sum())
        if obj0 <= objective + 1e-9 * (1.0 + objective):
            u, objective = u0, obj0

    dist = ProbabilityVector(design.support, u)
    return L1FitResult(distribution=dist, objective=objective, dual=y,
                       iterations=iters, status=status, degraded=degraded,
                       dual_gap=gap, min_reduced_cost=z_min)
