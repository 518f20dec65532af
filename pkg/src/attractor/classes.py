"""
Sample-based verification of mapping-class inequalities.

A ``satisfied`` verdict only means no violation was found among the sampled
pairs; a violated verdict carries a witness that reproduces the violation.

Search runs in two phases: seeded lattice sampling of C (the pair set is
closed under swapping and contains diagonal pairs), then, when sampling
found nothing, coordinate-perturbation refinement around the worst pair
with step halving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyReferenceSet
from .mappings import MappingSpec, evaluate
from .space import DEFAULT_TOL, Vector, as_vector

REFINE_ROUNDS = 20
REFINE_PASSES = 50


@dataclass(frozen=True)
class GHCoefficients:
    """(alpha, beta) of the generalized hybrid inequality."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("coefficients must be finite")


@dataclass(frozen=True)
class WMGHCoefficients:
    """The seven coefficients of the widely more generalized hybrid inequality."""

    alpha: float
    beta: float
    gamma: float
    delta: float
    epsilon: float
    zeta: float
    eta: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_tuple()):
            raise ValueError("coefficients must be finite")

    @classmethod
    def of(cls, values: Sequence[float]) -> "WMGHCoefficients":
        if len(values) != 7:
            raise ValueError(f"need 7 coefficients, got {len(values)}")
        return cls(*(float(v) for v in values))

    def as_tuple(self) -> tuple:
        return (self.alpha, self.beta, self.gamma, self.delta, self.epsilon, self.zeta, self.eta)


@dataclass(frozen=True)
class ClassVerdict:
    satisfied: bool
    witness: tuple | None
    max_violation: float
    samples_checked: int

    def to_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "witness": None if self.witness is None else [np.asarray(w).tolist() for w in self.witness],
            "max_violation": self.max_violation,
            "samples_checked": self.samples_checked,
        }


# -- coefficient algebra -------------------------------------------------


def gh_to_wmgh(c: GHCoefficients) -> WMGHCoefficients:
    """Embed (alpha, beta) as (alpha, 1-alpha, -beta, -(1-beta), 0, 0, 0)."""
    return WMGHCoefficients(c.alpha, 1 - c.alpha, -c.beta, -(1 - c.beta), 0.0, 0.0, 0.0)


def wmgh_condition_A(c: WMGHCoefficients) -> bool:
    return (c.alpha + c.beta + c.gamma + c.delta >= 0
            and c.alpha + c.gamma > 0
            and c.epsilon + c.eta >= 0)


def wmgh_condition_B(c: WMGHCoefficients) -> bool:
    return (c.alpha + c.beta + c.gamma + c.delta >= 0
            and c.alpha + c.beta > 0
            and c.zeta + c.eta >= 0)


def wmgh_swap(c: WMGHCoefficients) -> WMGHCoefficients:
    """Coefficients of the same inequality with x and y exchanged."""
    return WMGHCoefficients(c.alpha, c.gamma, c.beta, c.delta, c.zeta, c.epsilon, c.eta)


# -- inequality values ---------------------------------------------------


def _sq(v: np.ndarray) -> np.ndarray:
    return np.sum(v * v, axis=-1)


def _wmgh_terms(X, Y, TX, TY):
    rx = X - TX
    ry = Y - TY
    return np.stack([
        _sq(TX - TY), _sq(X - TY), _sq(TX - Y), _sq(X - Y),
        _sq(rx), _sq(ry), _sq(rx - ry),
    ], axis=-1)


def _rowsum(terms: np.ndarray) -> np.ndarray:
    # fsum is order independent, which keeps the x<->y swap symmetry exact
    return np.array([math.fsum(row) for row in np.atleast_2d(terms)])


def wmgh_value(c: WMGHCoefficients, x, y, Tx, Ty):
    """Left-hand side of the seven-term inequality (violated when > 0)."""
    terms = _wmgh_terms(*(np.atleast_2d(np.asarray(v, dtype=float)) for v in (x, y, Tx, Ty)))
    vals = _rowsum(terms * np.asarray(c.as_tuple()))
    return vals if np.ndim(x) > 1 else float(vals[0])


def gh_value(c: GHCoefficients, x, y, Tx, Ty):
    """alpha|Tx-Ty|^2 + (1-alpha)|x-Ty|^2 - beta|Tx-y|^2 - (1-beta)|x-y|^2."""
    X, Y, TX, TY = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (x, y, Tx, Ty))
    terms = np.stack([
        c.alpha * _sq(TX - TY),
        (1 - c.alpha) * _sq(X - TY),
        -c.beta * _sq(TX - Y),
        -(1 - c.beta) * _sq(X - Y),
    ], axis=-1)
    vals = _rowsum(terms)
    return vals if np.ndim(x) > 1 else float(vals[0])


def qne_value(x, z, Tx) -> float:
    """|Tx - z| - |x - z|."""
    return math.sqrt(float(_sq(np.asarray(Tx) - z))) - math.sqrt(float(_sq(np.asarray(x) - z)))


# -- sampling machinery --------------------------------------------------


def sample_pairs(T: MappingSpec, samples: int, seed: int):
    """
    Draw ``samples`` pairs from C x C.

    Returns ``(X, Y, TX, TY)``. Every off-diagonal pair (x, y) is followed
    later by (y, x), and about a tenth of the pairs are diagonal (x, x).
    """
    n_diag = max(1, samples // 10)
    half = (samples - n_diag) // 2
    n_diag = samples - 2 * half
    pts = T.domain.sample(seed, 2 * half + n_diag)
    tpts = np.array([T.evaluate(p) for p in pts]).reshape(pts.shape)
    a = np.arange(half)
    b = np.arange(half, 2 * half)
    dg = np.arange(2 * half, 2 * half + n_diag)
    i = np.concatenate([a, b, dg])
    j = np.concatenate([b, a, dg])
    return pts[i], pts[j], tpts[i], tpts[j]


def _refine(T: MappingSpec, objective: Callable, start: list[np.ndarray], best: float):
    """Greedy coordinate search maximising ``objective`` over points of C."""
    pts = [p.copy() for p in start]
    step = T.domain.radius / 8.0
    evals = 0
    radius = T.domain.radius
    for _ in range(REFINE_ROUNDS):
        improved, passes = True, 0
        while improved and passes < REFINE_PASSES:
            improved = False
            passes += 1
            for k in range(len(pts)):
                for coord in range(T.dimension):
                    for sign in (1.0, -1.0):
                        cand = pts[k].copy()
                        cand[coord] += sign * step
                        if abs(cand[coord]) > radius or not T.domain.contains(cand):
                            continue
                        trial = pts[:k] + [cand] + pts[k + 1:]
                        val = objective(*trial)
                        evals += 1
                        if val > best:
                            pts, best, improved = trial, val, True
        step /= 2.0
    return pts, best, evals


def _pair_check(T, value_fn, samples, seed, tol, extra_pairs=()):
    X, Y, TX, TY = sample_pairs(T, samples, seed)
    if extra_pairs:
        ex = np.array([as_vector(p, T.dimension) for pair in extra_pairs for p in pair]).reshape(-1, 2, T.dimension)
        tex = np.array([evaluate(T, p) for p in ex.reshape(-1, T.dimension)]).reshape(ex.shape)
        X = np.concatenate([ex[:, 0], X])
        Y = np.concatenate([ex[:, 1], Y])
        TX = np.concatenate([tex[:, 0], TX])
        TY = np.concatenate([tex[:, 1], TY])
    vals = value_fn(X, Y, TX, TY)
    checked = len(vals)
    bad = np.flatnonzero(vals > tol)
    if bad.size:
        k = int(bad[0])
        return ClassVerdict(False, (X[k].copy(), Y[k].copy()), float(vals.max()), checked)

    # symmetric objective so that swapped coefficient tuples refine identically
    rev = value_fn(Y, X, TY, TX)
    sym = np.maximum(vals, rev)
    k = int(np.argmax(sym))

    def objective(x, y):
        tx, ty = T.evaluate(x), T.evaluate(y)
        return max(float(value_fn(x[None], y[None], tx[None], ty[None])[0]),
                   float(value_fn(y[None], x[None], ty[None], tx[None])[0]))

    (x, y), best, evals = _refine(T, objective, [X[k], Y[k]], float(sym[k]))
    checked += 2 * evals
    maxv = max(float(vals.max()), best)
    if best > tol:
        tx, ty = T.evaluate(x), T.evaluate(y)
        forward = float(value_fn(x[None], y[None], tx[None], ty[None])[0])
        witness = (x, y) if forward > tol else (y, x)
        return ClassVerdict(False, witness, maxv, checked)
    return ClassVerdict(True, None, maxv, checked)


# -- public verifiers ----------------------------------------------------


def check_generalized_hybrid(T: MappingSpec, c: GHCoefficients, samples: int = 10_000,
                             seed: int = 0, tol: float = DEFAULT_TOL, extra_pairs=()) -> ClassVerdict:
    """Check the (alpha, beta)-generalized hybrid inequality on sampled pairs.

    ``max_violation`` is the largest left-minus-right value observed.
    """
    return _pair_check(T, lambda X, Y, TX, TY: gh_value(c, X, Y, TX, TY), samples, seed, tol, extra_pairs)


def check_wmgh(T: MappingSpec, c: WMGHCoefficients, samples: int = 10_000,
               seed: int = 0, tol: float = DEFAULT_TOL, extra_pairs=()) -> ClassVerdict:
    return _pair_check(T, lambda X, Y, TX, TY: wmgh_value(c, X, Y, TX, TY), samples, seed, tol, extra_pairs)


def check_quasinonexpansive_wrt(T: MappingSpec, F, samples: int = 10_000, seed: int = 0,
                                tol: float = DEFAULT_TOL, extra_points=()) -> ClassVerdict:
    """
    Check |Tx - z| <= |x - z| + tol for sampled x in C and every z in F.

    ``extra_points`` are checked first, in order, before the random
    samples. The witness of a violation is the first violating ``(x, z)``.
    """
    Z = [as_vector(z, T.dimension) for z in F]
    if not Z:
        raise EmptyReferenceSet("reference set F is empty")
    extra = []
    for p in extra_points:
        p = as_vector(p, T.dimension)
        evaluate(T, p)  # raises DomainViolation outside C
        extra.append(p)
    X = np.concatenate([np.array(extra).reshape(-1, T.dimension), T.domain.sample(seed, samples)])
    TX = np.array([T.evaluate(x) for x in X]).reshape(X.shape)
    Zs = np.array(Z)
    # (n_points, n_refs)
    vals = (np.sqrt(_sq(TX[:, None, :] - Zs[None, :, :]))
            - np.sqrt(_sq(X[:, None, :] - Zs[None, :, :])))
    checked = vals.size
    bad = np.argwhere(vals > tol)
    if bad.size:
        i, j = bad[0]
        return ClassVerdict(False, (X[i].copy(), Zs[j].copy()), float(vals.max()), checked)

    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    z = Zs[j]
    (x,), best, evals = _refine(T, lambda x: qne_value(x, z, T.evaluate(x)), [X[i]], float(vals[i, j]))
    checked += evals
    maxv = max(float(vals.max()), best)
    if best > tol:
        return ClassVerdict(False, (x, z.copy()), maxv, checked)
    return ClassVerdict(True, None, maxv, checked)


def is_attractive_point(T: MappingSpec, z, points, tol: float = DEFAULT_TOL) -> bool:
    """Deterministic check of |Tx - z| <= |x - z| + tol over the given x in C."""
    z = as_vector(z, T.dimension)
    for x in points:
        x = as_vector(x, T.dimension)
        if qne_value(x, z, T.evaluate(x)) > tol:
            return False
    return True
