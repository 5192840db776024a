"""Tensor-product Chebyshev (cosine) basis.

A basis function is indexed by a d-tuple r with 0 <= r_i <= t-1 and maps
x in [-1,1]^d to prod_i T_{r_i}(x_i), where T_k(x) = cos(k arccos x).
Evaluation uses the three-term recurrence T_{k+1} = 2x T_k - T_{k-1}
(via numpy's Chebyshev Vandermonde) rather than the cos/arccos
composition, which loses precision near the endpoints.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.chebyshev import chebvander

from .core import Lattice

MOMENT_KINDS = ("true", "noisy", "rounded", "synthetic")


def _low_degree_indices(t: int, d: int, count: int):
    """First `count` multi-indices ordered by (|r|_1, lexicographic)."""
    out = []
    total = 0
    while len(out) < count:
        # compositions of `total` into d parts, each < t, in lex order
        def rec(prefix, remaining, axes_left):
            if len(out) >= count:
                return
            if axes_left == 1:
                if remaining <= t - 1:
                    out.append(prefix + (remaining,))
                return
            for v in range(min(remaining, t - 1) + 1):
                rec(prefix + (v,), remaining - v, axes_left - 1)
                if len(out) >= count:
                    return

        rec((), total, d)
        total += 1
        if total > d * (t - 1):
            break
    return out


@dataclass(frozen=True)
class BasisSet:
    """Ordered multi-indices; full {0..t-1}^d or a low-degree truncation."""

    t: int
    d: int
    indices: tuple
    truncated: bool = False

    @property
    def count(self) -> int:
        return len(self.indices)

    def __len__(self) -> int:
        return len(self.indices)


def enumerate_basis(t: int, d: int, R: int | None = None) -> BasisSet:
    """Full basis in row-major order, or the R lowest-degree indices.

    The truncated ordering is |r|_1 ascending with lexicographic ties, so
    (0,...,0) always comes first.
    """
    if t < 1 or d < 1:
        raise ValueError("t and d must be positive")
    if R is None:
        idx = tuple(itertools.product(range(t), repeat=d))
        return BasisSet(t=t, d=d, indices=idx, truncated=False)
    if R < 1 or R > t ** d:
        raise ValueError(f"R must lie in [1, t^d] = [1, {t ** d}]")
    return BasisSet(t=t, d=d, indices=tuple(_low_degree_indices(t, d, R)), truncated=True)


def _cheb_tables(points: np.ndarray, degree: int) -> np.ndarray:
    """T_k(x) for k = 0..degree along each axis; shape (d, npoints, degree+1)."""
    pts = np.asarray(points, dtype=np.float64)
    return np.stack([chebvander(pts[:, i], degree) for i in range(pts.shape[1])])


def cheb_eval(index, x) -> float:
    """prod_i T_{r_i}(x_i) for a single point x in [-1,1]^d."""
    xv = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if len(index) != xv.shape[0]:
        raise ValueError("index and point dimensions differ")
    tables = _cheb_tables(xv.reshape(1, -1), max(index))
    out = 1.0
    for axis, k in enumerate(index):
        out *= tables[axis, 0, k]
    return float(out)


@dataclass(frozen=True)
class MomentVector:
    """Per-basis-function averages, aligned with a BasisSet."""

    values: np.ndarray
    kind: str
    lattice: Lattice | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.kind not in MOMENT_KINDS:
            raise ValueError(f"unknown moment kind {self.kind!r}")
        if self.kind in ("true", "synthetic") and np.any(np.abs(vals) > 1.0 + 1e-9):
            raise ValueError("true/synthetic moments must lie in [-1, 1]")
        if self.kind == "rounded":
            if self.lattice is None or not self.lattice.contains(vals):
                raise ValueError("rounded moments must lie on the lattice")

    def __len__(self) -> int:
        return len(self.values)


def compute_moments(data, basis: BasisSet, kind: str = "true") -> MomentVector:
    """Average of each basis function over the data points.

    Summation runs over points in dataset order (numpy's deterministic
    pairwise reduction), so results are reproducible bit-for-bit.
    """
    pts = data.points if hasattr(data, "points") else np.asarray(data, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.shape[0] == 0:
        raise ValueError("cannot compute moments of an empty dataset")
    if pts.shape[1] != basis.d:
        raise ValueError("dataset dimension does not match basis")
    tables = _cheb_tables(pts, basis.t - 1)
    vals = np.empty(basis.count)
    for j, r in enumerate(basis.indices):
        prod = tables[0, :, r[0]].copy()
        for axis in range(1, basis.d):
            prod *= tables[axis, :, r[axis]]
        vals[j] = prod.mean()
    return MomentVector(vals, kind=kind)


@dataclass(frozen=True)
class DesignMatrix:
    """Basis functions (rows) evaluated at support points (columns)."""

    basis: BasisSet
    support: np.ndarray
    values: np.ndarray
    lattice: Lattice | None = None  # set when entries are rounded

    def __post_init__(self):
        sup = np.array(np.asarray(self.support, dtype=np.float64), dtype=np.float64)
        if sup.ndim == 1:
            sup = sup.reshape(-1, 1)
        sup.setflags(write=False)
        vals = np.array(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.basis.count, sup.shape[0]):
            raise ValueError("design matrix shape must be (basis count, support size)")

    @property
    def shape(self):
        return self.values.shape

    def rounded(self, lat: Lattice) -> "DesignMatrix":
        return DesignMatrix(self.basis, self.support,
                            round_to_lattice(self.values, lat), lattice=lat)


def build_design_matrix(basis: BasisSet, support) -> DesignMatrix:
    """Entry (r, k) = basis function r evaluated at support point k."""
    sup = np.asarray(support, dtype=np.float64)
    if sup.ndim == 1:
        sup = sup.reshape(-1, 1)
    if np.any(np.abs(sup) > 1.0):
        raise ValueError("support points must lie in [-1,1]^d")
    if sup.shape[1] != basis.d:
        raise ValueError("support dimension does not match basis")
    tables = _cheb_tables(sup, basis.t - 1)
    vals = np.empty((basis.count, sup.shape[0]))
    for j, r in enumerate(basis.indices):
        prod = tables[0, :, r[0]].copy()
        for axis in range(1, basis.d):
            prod *= tables[axis, :, r[axis]]
        vals[j] = prod
    return DesignMatrix(basis, sup, vals)


def round_to_lattice(values, lat: Lattice):
    """Clamp to [-1,1], then snap to the nearest i/L with ties upward.

    Clamping first is safe: exact moments always lie in [-1,1], so pulling
    a noisy value back to the boundary can only reduce its error.
    """
    v = np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0)
    out = np.floor(v * lat.L + 0.5) / lat.L
    if np.ndim(values) == 0:
        return float(out)
    return out


def round_moment_vector(mv: MomentVector, lat: Lattice) -> MomentVector:
    return MomentVector(round_to_lattice(mv.values, lat), kind="rounded", lattice=lat)
