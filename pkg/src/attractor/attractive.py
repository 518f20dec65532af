"""
Outer approximation of the attractive-point set, metric projection onto it,
and the quasinonexpansive extension of a mapping.

For a generator x in C, the attractive-point inequality |Tx - z| <= |x - z|
expands to the half-space

    2 <x - Tx, z>  <=  |x|^2 - |Tx|^2,

so intersecting over finitely many generators gives a polyhedron that
contains A(T).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (AttractorEmpty, DegenerateConstraint, DimensionError,
                     NoGenerators, ProjectionNotConverged)
from .mappings import MappingSpec, evaluate
from .space import DEFAULT_TOL, Vector, as_vector, whole_space

logger = logging.getLogger(__name__)

DYKSTRA_MAX_ITER = 10_000
DYKSTRA_TOL = 1e-10
VACUOUS_REL = 1e-12
# cycles without progress before the feasibility pre-pass gives up
STALL_WINDOW = 200


@dataclass(frozen=True, eq=False)
class Halfspace:
    """{z : <a, z> <= b}."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = as_vector(self.a)
        if not np.any(a):
            raise DegenerateConstraint("half-space normal is zero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    def __eq__(self, other):
        return isinstance(other, Halfspace) and np.array_equal(self.a, other.a) and self.b == other.b

    def __hash__(self):
        return hash((tuple(self.a), self.b))

    def __repr__(self):
        return f"Halfspace(a={self.a.tolist()}, b={self.b!r})"


@dataclass(frozen=True, eq=False)
class HalfspaceSet:
    """Finite intersection of half-spaces together with its generators."""

    constraints: tuple
    generators: tuple
    dimension: int
    singleton_tol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "generators", tuple(as_vector(g) for g in self.generators))
        for h in self.constraints:
            if h.a.size != self.dimension:
                raise DimensionError(f"constraint of dimension {h.a.size} in a set of dimension {self.dimension}")

    def __len__(self):
        return len(self.constraints)

    def __eq__(self, other):
        return (isinstance(other, HalfspaceSet) and self.dimension == other.dimension
                and self.constraints == other.constraints
                and len(self.generators) == len(other.generators)
                and all(np.array_equal(g, h) for g, h in zip(self.generators, other.generators)))

    @cached_property
    def A(self) -> np.ndarray:
        return np.array([h.a for h in self.constraints]).reshape(len(self.constraints), self.dimension)

    @cached_property
    def b(self) -> np.ndarray:
        return np.array([h.b for h in self.constraints], dtype=np.float64)

    @cached_property
    def singleton(self) -> Vector | None:
        """
        The single point of the set, when it can be certified cheaply.

        Constraints whose normal has an (anti-parallel) opposite partner
        bound a slab; if those slabs all pass through one point z* and
        their normals span R^d, the set is contained in {z*}. It equals
        {z*} when every remaining constraint also holds at z*.
        """
        if not self.constraints:
            return None
        A, b = self.A, self.b
        unit = A / np.linalg.norm(A, axis=1, keepdims=True)
        cos = unit @ unit.T
        paired = np.any(cos <= -1.0 + 1e-12, axis=1)
        if not paired.any() or np.linalg.matrix_rank(A[paired]) < self.dimension:
            return None
        z, *_ = np.linalg.lstsq(A[paired], b[paired], rcond=None)
        slack = A @ z - b
        scale = self.singleton_tol * (1.0 + np.abs(b))
        if np.any(np.abs(slack[paired]) > scale) or np.any(slack > scale):
            return None
        return z + 0.0  # normalise -0.0

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "constraints": [{"a": h.a.tolist(), "b": h.b} for h in self.constraints],
            "generators": [g.tolist() for g in self.generators],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HalfspaceSet":
        return cls(
            tuple(Halfspace(np.asarray(c["a"], dtype=float), c["b"]) for c in data["constraints"]),
            tuple(np.asarray(g, dtype=float) for g in data["generators"]),
            int(data["dimension"]),
        )

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# -- construction --------------------------------------------------------


def halfspace_from_generator(T: MappingSpec, x, tol: float | None = None) -> Halfspace | None:
    """
    Half-space of attractive-point candidates induced by one x in C.

    Returns None when x is (numerically) a fixed point, since the induced
    constraint is then all of H. The default threshold is
    1e-12 * (1 + |x|).
    """
    x = as_vector(x, T.dimension)
    tx = evaluate(T, x)
    r = x - tx
    thresh = VACUOUS_REL * (1.0 + math.sqrt(float(x @ x))) if tol is None else tol
    if math.sqrt(float(r @ r)) < thresh:
        return None
    return Halfspace(2.0 * r, float(x @ x) - float(tx @ tx))


def build_attractor(T: MappingSpec, generators, tol: float | None = None) -> HalfspaceSet:
    gens = [as_vector(g, T.dimension) for g in generators]
    if not gens:
        raise NoGenerators("at least one generator is required")
    constraints = []
    for g in gens:
        h = halfspace_from_generator(T, g, tol)
        if h is not None:
            constraints.append(h)
    return HalfspaceSet(tuple(constraints), tuple(gens), T.dimension)


def member(S: HalfspaceSet, z, tol: float = DEFAULT_TOL) -> bool:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 0:
        z = z.reshape(1)
    if z.shape != (S.dimension,):
        raise DimensionError(f"point of shape {z.shape} vs set dimension {S.dimension}")
    if not S.constraints:
        return True
    return bool(np.all(S.A @ z <= S.b + tol))


# -- projection ----------------------------------------------------------


def project_halfspace(h: Halfspace, z) -> Vector:
    a = h.a
    aa = float(a @ a)
    if aa == 0.0:
        raise DegenerateConstraint("half-space normal is zero")
    z = np.asarray(z, dtype=np.float64)
    viol = float(a @ z) - h.b
    if viol <= 0.0:
        return z.copy()
    return z - (viol / aa) * a


def _violation(A, b, norms, x) -> float:
    """Largest distance from x to a violated half-space (0 if feasible)."""
    return max(0.0, float(np.max((A @ x - b) / norms)))


def _check_feasible(A, b, z, max_iter, tol):
    norms = np.sqrt(np.sum(A * A, axis=1))
    nrm2 = norms ** 2
    x = z.copy()
    best = _violation(A, b, norms, x)
    stalled = 0
    for _ in range(max_iter):
        if best <= tol:
            return
        for i in range(len(b)):
            v = A[i] @ x - b[i]
            if v > 0.0:
                x = x - (v / nrm2[i]) * A[i]
        res = _violation(A, b, norms, x)
        if res < best * (1.0 - 1e-9):
            best, stalled = res, 0
        else:
            stalled += 1
            if stalled >= STALL_WINDOW:
                break
    if best > tol:
        raise AttractorEmpty(f"alternating projections stalled at residual {best:.3e}")


def project_attractor(S: HalfspaceSet, z, max_iter: int = DYKSTRA_MAX_ITER,
                      tol: float = DYKSTRA_TOL) -> Vector:
    """
    Metric projection onto the polyhedron S by Dykstra's algorithm.

    Stops once one full sweep moves both the iterate and the correction
    terms by less than ``tol`` and the iterate violates no half-space by
    more than ``tol``. Dykstra can sit on an infeasible plateau for a few
    cycles while the corrections drift, so displacement alone is not enough.
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.size != S.dimension:
        raise DimensionError(f"point of dimension {z.size} vs set dimension {S.dimension}")
    if not S.constraints:
        return z.copy()
    if S.singleton is not None:
        return S.singleton.copy()
    A, b = S.A, S.b
    if np.all(A @ z <= b):
        return z.copy()
    _check_feasible(A, b, z, max_iter, tol)

    m = len(b)
    nrm2 = np.sum(A * A, axis=1)
    norms = np.sqrt(nrm2)
    x = z.copy()
    incr = np.zeros_like(A)
    for _ in range(max_iter):
        x_prev = x
        drift = 0.0
        for i in range(m):
            y = x + incr[i]
            v = A[i] @ y - b[i]
            x = y - (v / nrm2[i]) * A[i] if v > 0.0 else y
            new = y - x
            e = new - incr[i]
            drift += float(e @ e)
            incr[i] = new
        d = x - x_prev
        if (math.sqrt(float(d @ d)) < tol and math.sqrt(drift) < tol
                and _violation(A, b, norms, x) <= tol):
            return x
    res = _violation(A, b, norms, x)
    if res > tol:
        raise ProjectionNotConverged(f"Dykstra hit {max_iter} cycles with residual {res:.3e}")
    logger.warning("Dykstra hit the cycle cap; returning a feasible point")
    return x


# -- extension -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExtensionMapping:
    """T on C, projection onto the attractor approximation elsewhere."""

    inner: MappingSpec
    attractor: HalfspaceSet
    max_iter: int = DYKSTRA_MAX_ITER
    tol: float = DYKSTRA_TOL

    @property
    def dimension(self) -> int:
        return self.inner.dimension

    def __call__(self, x) -> Vector:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if self.inner.domain.contains(x):
            return np.asarray(self.inner.evaluate(x), dtype=np.float64)
        return project_attractor(self.attractor, x, self.max_iter, self.tol)

    def apply(self, x: Vector) -> tuple[Vector, bool]:
        """``(T~x, x in C)`` for a finite vector of the right shape; no checks."""
        if self.inner.domain.membership(x):
            return self.inner.evaluate(x), True
        return project_attractor(self.attractor, x, self.max_iter, self.tol), False

    def as_mapping(self) -> MappingSpec:
        """View as a MappingSpec on all of R^d, for the class verifiers."""
        dom = whole_space(self.dimension, self.inner.domain.radius)
        return MappingSpec(dom, self.__call__, f"extension[{self.inner.name}]")


def extend(T: MappingSpec, S: HalfspaceSet, max_iter: int = DYKSTRA_MAX_ITER,
           tol: float = DYKSTRA_TOL) -> ExtensionMapping:
    if S.dimension != T.dimension:
        raise DimensionError("attractor and mapping dimensions differ")
    return ExtensionMapping(T, S, max_iter, tol)


def scan_fixed_points(Tt, grid, tol: float = DEFAULT_TOL) -> list:
    """Grid points x with |Tt x - x| <= tol."""
    out = []
    for x in np.asarray(grid, dtype=np.float64).reshape(len(grid), -1):
        r = Tt(x) - x
        if math.sqrt(float(r @ r)) <= tol:
            out.append(x.copy())
    return out
