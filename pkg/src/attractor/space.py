"""
Ambient space R^d: vectors, inner product, norm, and domain descriptions.

Vectors are plain one-dimensional ``float64`` numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError

Vector = np.ndarray

#: default absolute tolerance on norms
DEFAULT_TOL = 1e-9

#: spacing of the dyadic lattice used by the default samplers
SAMPLE_SPACING = 1.0 / 64.0


def as_vector(x, dim: int | None = None) -> Vector:
    """Convert a scalar or sequence to a finite 1-d float64 array."""
    v = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"expected a non-empty 1-d vector, got shape {v.shape}")
    if dim is not None and v.size != dim:
        raise DimensionError(f"expected dimension {dim}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"vector has non-finite coordinates: {v}")
    return v


def inner(x: Vector, y: Vector) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(np.dot(x, y))


def norm(x: Vector) -> float:
    x = np.asarray(x, dtype=np.float64)
    return math.sqrt(float(np.dot(x, x)))


def sqdist(x: Vector, y: Vector) -> float:
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return float(np.dot(d, d))


def dyadic_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Points lo, lo+step, ..., hi (inclusive) as an (n, 1) array."""
    n = int(round((hi - lo) / step))
    return (lo + step * np.arange(n + 1, dtype=np.float64)).reshape(-1, 1)


def box_sampler(dim: int, radius: float, accept: Callable[[Vector], bool] | None = None,
                spacing: float = SAMPLE_SPACING):
    """
    Seeded sampler of lattice points in the box [-radius, radius]^dim.

    Coordinates are integer multiples of ``spacing`` so that exact
    comparisons inside mappings (e.g. ``x == 1``) are hit with positive
    probability and are reproducible. Each point picks its own lattice
    from spacing, 2*spacing, 4*spacing, ... up to 1, so coarse values such
    as integers turn up far more often than on the fine lattice alone.
    ``accept`` filters out points that are not in the domain.
    """
    levels = max(0, int(round(-math.log2(spacing)))) + 1
    steps = spacing * 2.0 ** np.arange(levels)[::-1]
    ks = np.floor(radius / steps)

    def sample(seed: int, count: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        out = np.empty((count, dim))
        filled = 0
        while filled < count:
            n = 2 * (count - filled) + 8
            lv = rng.integers(0, levels, size=n)
            u = rng.random(size=(n, dim))
            k = ks[lv][:, None]
            draw = (np.floor(u * (2 * k + 1)) - k) * steps[lv][:, None]
            for p in draw:
                if accept is None or accept(p):
                    out[filled] = p
                    filled += 1
                    if filled == count:
                        break
        return out

    return sample


@dataclass(frozen=True)
class DomainSpec:
    """The subset C of R^d on which a mapping is defined.

    ``is_convex`` and ``maps_into_self`` are declarations, not verified
    facts; see :func:`spot_check_convexity` for a diagnostic.
    """

    dimension: int
    membership: Callable[[Vector], bool]
    sampler: Callable[[int, int], np.ndarray]
    is_convex: bool = True
    maps_into_self: bool = True
    radius: float = 4.0
    description: str = field(default="", compare=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise DimensionError("dimension must be >= 1")

    def contains(self, x: Vector) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return x.shape == (self.dimension,) and bool(np.all(np.isfinite(x))) and bool(self.membership(x))

    def sample(self, seed: int, count: int) -> np.ndarray:
        return self.sampler(seed, count)


def whole_space(dim: int, radius: float = 4.0) -> DomainSpec:
    return DomainSpec(
        dimension=dim,
        membership=lambda x: True,
        sampler=box_sampler(dim, radius),
        is_convex=True,
        maps_into_self=True,
        radius=radius,
        description=f"R^{dim}",
    )


def spot_check_convexity(domain: DomainSpec, samples: int = 1000, seed: int = 0):
    """
    Look for a pair x, y in C whose midpoint or a random convex combination
    leaves C. Returns the offending ``(x, y, point)`` or None.

    Diagnostic only: a None result is not a proof of convexity.
    """
    rng = np.random.default_rng(seed)
    pts = domain.sample(seed, 2 * samples)
    for x, y in zip(pts[:samples], pts[samples:]):
        for t in (0.5, rng.uniform()):
            p = t * x + (1 - t) * y
            if not domain.contains(p):
                return x, y, p
    # antipodal pairs catch holes at the center, e.g. R minus {0}
    for x in pts[:samples]:
        if domain.contains(-x) and not domain.contains(0.0 * x):
            return x, -x, 0.0 * x
    return None
