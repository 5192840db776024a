"""Smooth-query toolkit: Gaussian-kernel workloads and error metrics.

A query averages f(x) = sum_j alpha_j exp(-||x - x_j||^2 / (2 sigma^2))
over a database.  With ||alpha||_1 <= 1 and smoothness order up to
sigma^2, all partial derivatives of f stay bounded by 1, which is the
regime the release mechanism targets; the raw workload (alpha_j in [0,1],
unscaled) is kept as well since worst-case benchmarks commonly use it.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

REL_ERROR_FLOOR = 1e-12  # |true| below this is excluded from relative error


@dataclass(frozen=True)
class GaussianKernelQuery:
    centers: np.ndarray   # J x d
    weights: np.ndarray   # J
    sigma: float
    norm_certified: bool = False

    def __post_init__(self):
        ctr = np.array(np.asarray(self.centers, dtype=np.float64))
        if ctr.ndim == 1:
            ctr = ctr.reshape(1, -1)
        w = np.array(np.asarray(self.weights, dtype=np.float64)).reshape(-1)
        if len(w) != ctr.shape[0]:
            raise ValueError("need one weight per kernel center")
        if not self.sigma > 0:
            raise ValueError("bandwidth sigma must be positive")
        if self.norm_certified and np.abs(w).sum() > 1.0 + 1e-12:
            raise ValueError("norm-certified queries require ||weights||_1 <= 1")
        ctr.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "centers", ctr)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """f at one point or a batch of points."""
        pts = np.asarray(x, dtype=np.float64)
        squeeze = pts.ndim == 1
        if squeeze:
            pts = pts.reshape(1, -1)
        sq = ((pts[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        vals = np.exp(-sq / (2.0 * self.sigma ** 2)) @ self.weights
        return float(vals[0]) if squeeze else vals


def evaluate_query(query: GaussianKernelQuery, db) -> float:
    """Exact average of the query function over the database points."""
    pts = db.points if hasattr(db, "points") else np.asarray(db, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.shape[0] == 0:
        raise ValueError("cannot evaluate a query on an empty database")
    return float(np.mean(query(pts)))


def random_queries(count: int, kernels: int, d: int, sigma: float,
                   rng: np.random.Generator, norm_certified: bool = False):
    """i.i.d. workload: weights uniform in [0,1], centers uniform in the cube.

    norm_certified rescales each weight vector to unit L1 norm so the
    smoothness certificate applies; the raw variant leaves weights as drawn
    (L1 norm up to `kernels`).
    """
    if count < 1:
        raise ValueError("count must be positive")
    out = []
    for _ in range(count):
        alpha = rng.random(kernels)
        if norm_certified:
            alpha = alpha / max(alpha.sum(), 1e-300)
        centers = rng.uniform(-1.0, 1.0, size=(kernels, d))
        out.append(GaussianKernelQuery(centers, alpha, sigma, norm_certified=norm_certified))
    return out


_CENTRAL_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
    5: ((-3, -2, -1, 1, 2, 3), (-0.5, 2.0, -2.5, 2.5, -2.0, 0.5)),
    6: ((-3, -2, -1, 0, 1, 2, 3), (1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0)),
}


def knorm_estimate(query: GaussianKernelQuery, order: int, h: float = 1e-2) -> float:
    """Numerical sup of |partial derivatives| up to the given total order.

    Central differences on a 20-per-axis search lattice over at most three
    active dimensions (others held at the kernel centers), plus the centers
    themselves.  With more than three dimensions the result is a lower
    bound on the true sup, which is what the smoothness check needs.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order > 6:
        raise ValueError("central differences beyond order 6 are unstable")
    if not h > 0:
        raise ValueError("step size must be positive")
    d = query.d
    active = min(d, 3)

    lattice_1d = np.linspace(-1.0, 1.0, 20)
    if d <= 3:
        mesh = np.meshgrid(*([lattice_1d] * d), indexing="ij")
        locations = np.stack([m.reshape(-1) for m in mesh], axis=1)
        locations = np.vstack([locations, query.centers])
    else:
        blocks = []
        mesh = np.meshgrid(*([lattice_1d] * active), indexing="ij")
        lattice_active = np.stack([m.reshape(-1) for m in mesh], axis=1)
        for center in query.centers:
            block = np.tile(center, (len(lattice_active), 1))
            block[:, :active] = lattice_active
            blocks.append(block)
        locations = np.vstack(blocks + [query.centers])

    best = 0.0
    for ks in itertools.product(range(order + 1), repeat=active):
        if sum(ks) > order:
            continue
        offsets, weights = zip(*(_CENTRAL_STENCILS[k] for k in ks))
        denom = h ** sum(ks)
        total = np.zeros(len(locations))
        for combo in itertools.product(*(range(len(o)) for o in offsets)):
            shift = np.zeros(d)
            coeff = 1.0
            for axis in range(active):
                shift[axis] = offsets[axis][combo[axis]] * h
                coeff *= weights[axis][combo[axis]]
            total += coeff * query(locations + shift)
        best = max(best, float(np.max(np.abs(total))) / denom)
    return best


@dataclass(frozen=True)
class ErrorReport:
    """Per-query absolute/relative errors with worst-case summaries.

    Relative error is |true - synthetic| / |true|; queries with |true|
    below the floor are excluded from the relative statistics and counted.
    """

    abs_errors: np.ndarray
    rel_errors: np.ndarray   # NaN where excluded
    worst_abs: float
    worst_rel: float
    query_count: int
    rel_excluded: int

    @property
    def median_rel(self) -> float:
        vals = self.rel_errors[~np.isnan(self.rel_errors)]
        return float(np.median(vals)) if len(vals) else math.nan


def error_metrics(true_answers, synth_answers) -> ErrorReport:
    t = np.asarray(true_answers, dtype=np.float64)
    s = np.asarray(synth_answers, dtype=np.float64)
    if t.shape != s.shape or t.ndim != 1:
        raise ValueError("answer vectors must be 1-d and of equal length")
    abs_err = np.abs(t - s)
    rel_err = np.full_like(abs_err, np.nan)
    ok = np.abs(t) >= REL_ERROR_FLOOR
    rel_err[ok] = abs_err[ok] / np.abs(t[ok])
    worst_rel = float(np.max(rel_err[ok])) if ok.any() else math.nan
    return ErrorReport(abs_errors=abs_err, rel_errors=rel_err,
                       worst_abs=float(abs_err.max()) if len(t) else math.nan,
                       worst_rel=worst_rel, query_count=len(t),
                       rel_excluded=int((~ok).sum()))


def save_queries(path, queries) -> None:
    """JSON workload serialization (centers, weights, sigma per query)."""
    payload = [{"sigma": q.sigma,
                "norm_certified": q.norm_certified,
                "weights": q.weights.tolist(),
                "centers": q.centers.tolist()} for q in queries]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_queries(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return [GaussianKernelQuery(np.array(q["centers"]), np.array(q["weights"]),
                                q["sigma"], norm_certified=q.get("norm_certified", False))
            for q in payload]
