"""Calibrated noise, reproducible RNG streams, and an empirical DP audit.

Stream derivation: one root seed; every component derives its own stream
from the key "part0/part1/..." hashed with SHA-256.  Adding parallelism
therefore never reorders anyone else's draws.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .basis import MomentVector

_MASK64 = (1 << 64) - 1


def derive_seed(root_seed: int, *path) -> int:
    """Stable 64-bit subseed for a (root seed, path) pair."""
    key = "/".join(str(p) for p in path)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    word = int.from_bytes(digest[:8], "little")
    return (int(root_seed) ^ word) & _MASK64


def rng_stream(root_seed: int, *path) -> np.random.Generator:
    """Independent generator for the stream named by `path`."""
    key = "/".join(str(p) for p in path)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 8], "little") for i in range(0, 32, 8)]
    ss = np.random.SeedSequence([int(root_seed) & _MASK64, *words])
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class NoiseSpec:
    """Noise family, scale, and the stream key that owns the draws."""

    kind: str
    scale: float
    stream: str = "moments"

    def __post_init__(self):
        if self.kind not in ("laplace", "gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")


def moment_noise_scale(mode: str, basis_count: int, n: int, epsilon: float,
                       delta: float = 0.0, strict_sensitivity: bool = False) -> float:
    """Laplace scale for releasing `basis_count` moments.

    pure:   basis_count / (n epsilon)
    approx: sqrt(basis_count * ln(1/delta)) / (n epsilon)

    basis_count is t^d for the full basis and R for a truncated one (only
    the released moments consume budget).  strict_sensitivity doubles the
    scale to account for the worst-case per-moment sensitivity 2/n instead
    of 1/n; default off.
    """
    if basis_count < 1:
        raise ValueError("basis_count must be positive")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if mode == "pure":
        scale = basis_count / (n * epsilon)
    elif mode == "approx":
        if not 0.0 < delta < 1.0:
            raise ValueError("approx mode requires delta in (0, 1)")
        scale = math.sqrt(basis_count * math.log(1.0 / delta)) / (n * epsilon)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return 2.0 * scale if strict_sensitivity else scale


def _laplace(scale: float, rng: np.random.Generator, size=None):
    # inverse CDF: u uniform in (-1/2, 1/2), x = sign(u) * scale * ln(1 - 2|u|)
    u = rng.random(size) - 0.5
    arg = np.maximum(-2.0 * np.abs(u), np.nextafter(-1.0, 0.0))
    return np.sign(u) * scale * np.log1p(arg)


def laplace_sample(scale: float, rng: np.random.Generator) -> float:
    if not scale > 0:
        raise ValueError("scale must be positive")
    return float(_laplace(scale, rng))


def laplace_vector(scale: float, size, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. Laplace(scale) draws of the given size or shape."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    return _laplace(scale, rng, size)


def gaussian_vector(scale: float, size, rng: np.random.Generator) -> np.ndarray:
    if not scale > 0:
        raise ValueError("scale must be positive")
    return scale * rng.standard_normal(size)


def privatize_moments(b: MomentVector, spec: NoiseSpec, rng: np.random.Generator) -> MomentVector:
    """Add independent noise per entry; output kind is "noisy"."""
    if spec.kind == "laplace":
        noise = _laplace(spec.scale, rng, len(b))
    else:
        noise = gaussian_vector(spec.scale, len(b), rng)
    return MomentVector(b.values + noise, kind="noisy")


def epsilon_audit(release, data, data_neighbor, samples: int, bins: int,
                  rng: np.random.Generator | None = None) -> float:
    """Empirical privacy-loss estimate for a scalar randomized release.

    Draws `samples` outputs on each of the two neighbor datasets, bins them
    over the pooled observed range, and returns the max over bins of
    ln(p_hat(D) / p_hat(D')) with add-one smoothing.  A diagnostic for
    tests; never part of the release path.
    """
    if samples < 10_000:
        raise ValueError("audit needs at least 10^4 samples per database")
    if bins < 1:
        raise ValueError("bins must be positive")
    if rng is None:
        rng = rng_stream(0, "epsilon-audit")
    out_a = np.array([release(data, rng) for _ in range(samples)])
    out_b = np.array([release(data_neighbor, rng) for _ in range(samples)])
    lo = min(out_a.min(), out_b.min())
    hi = max(out_a.max(), out_b.max())
    if hi == lo:
        return 0.0
    edges = np.linspace(lo, hi, bins + 1)
    edges[-1] = np.nextafter(hi, np.inf)
    count_a, _ = np.histogram(out_a, bins=edges)
    count_b, _ = np.histogram(out_b, bins=edges)
    p_a = (count_a + 1.0) / (samples + bins)
    p_b = (count_b + 1.0) / (samples + bins)
    return float(np.max(np.log(p_a / p_b)))
