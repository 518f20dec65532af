"""
Halpern-type and Mann-type iterations driven by the extension T~.

    Halpern:  x_{n+1} = a_n u + (1 - a_n) [b_n x_n + (1 - b_n) T~x_n]
    Mann:     x_{n+1} = a_n x_n + (1 - a_n) T~x_n

The runners always iterate T~ (never the raw mapping), so a run stays
well defined when an iterate leaves C. In finite dimension weak and strong
convergence coincide, so both runners report ordinary norm convergence.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .attractive import ExtensionMapping, HalfspaceSet, member
from .errors import NumericalDivergence
from .space import DEFAULT_TOL, Vector, as_vector

logger = logging.getLogger(__name__)

HALPERN_MAX_STEPS = 200_000
HALPERN_STOP_TOL = 1e-6
MANN_MAX_STEPS = 200_000
MANN_STOP_TOL = 1e-10


# -- schedules -----------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """
    Step-size sequence indexed from n = 1.

    ``power``: a (n + n0)^(-theta) with a in (0, 1], theta > 0, n0 >= 0.
    ``constant``: c in [0, 1].
    ``custom``: an arbitrary callable; its tail behaviour is undecidable.
    """

    family: str
    scale: float = 1.0
    exponent: float = 1.0
    shift: float = 0.0
    value: float = 0.0
    func: Callable[[int], float] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family == "power":
            if not (0.0 < self.scale <= 1.0):
                raise ValueError(f"power schedule scale must lie in (0, 1], got {self.scale}")
            if not self.exponent > 0.0:
                raise ValueError(f"power schedule exponent must be positive, got {self.exponent}")
            if not self.shift >= 0.0:
                raise ValueError(f"power schedule shift must be >= 0, got {self.shift}")
        elif self.family == "constant":
            if not (0.0 <= self.value <= 1.0):
                raise ValueError(f"constant schedule must lie in [0, 1], got {self.value}")
        elif self.family == "custom":
            if self.func is None:
                raise ValueError("custom schedule needs a callable")
        else:
            raise ValueError(f"unknown schedule family {self.family!r}")

    @classmethod
    def power(cls, scale: float = 1.0, exponent: float = 1.0, shift: float = 0.0) -> "Schedule":
        return cls("power", scale=float(scale), exponent=float(exponent), shift=float(shift))

    @classmethod
    def constant(cls, value: float) -> "Schedule":
        return cls("constant", value=float(value))

    @classmethod
    def custom(cls, func: Callable[[int], float]) -> "Schedule":
        return cls("custom", func=func)

    def __call__(self, n: int) -> float:
        if self.family == "power":
            return self.scale * (n + self.shift) ** (-self.exponent)
        if self.family == "constant":
            return self.value
        return float(self.func(n))

    def to_dict(self) -> dict:
        if self.family == "power":
            return {"family": "power", "scale": self.scale, "exponent": self.exponent, "shift": self.shift}
        if self.family == "constant":
            return {"family": "constant", "value": self.value}
        raise ValueError("custom schedules are not serializable")


@dataclass(frozen=True)
class Diagnostic:
    condition: str
    passed: bool | None  # None: not decidable
    reason: str

    def to_dict(self) -> dict:
        return {"condition": self.condition, "passed": self.passed, "reason": self.reason}


def _undecidable(name):
    return Diagnostic(name, None, "custom sequence: tail condition not decidable from finitely many terms")


def _liminf_product(s: Schedule, name: str) -> list[Diagnostic]:
    """liminf s_n (1 - s_n) > 0, plus its restatement via liminf/limsup."""
    if s.family == "custom":
        return [_undecidable(name)]
    if s.family == "power":
        return [Diagnostic(name, False, "power schedule tends to 0, so s_n (1 - s_n) -> 0")]
    c = s.value
    ok = 0.0 < c < 1.0
    return [
        Diagnostic(name, ok, f"constant {c!r}: s (1 - s) = {c * (1 - c)!r}"),
        Diagnostic(name + "_restated", c > 0.0 and c < 1.0,
                   f"liminf = {c!r} > 0 and limsup = {c!r} < 1 " + ("hold" if ok else "fail")),
    ]


def validate_halpern_schedules(alpha: Schedule, beta: Schedule) -> list[Diagnostic]:
    """
    Decide the Halpern hypotheses on the parametric families:
    a_n in (0, 1], a_n -> 0, sum a_n = inf, liminf b_n (1 - b_n) > 0.
    """
    out = []
    if alpha.family == "custom":
        out += [_undecidable("alpha_range"), _undecidable("alpha_to_zero"), _undecidable("alpha_divergent_sum")]
    elif alpha.family == "power":
        theta = alpha.exponent
        out.append(Diagnostic("alpha_range", True, "power schedule lies in (0, 1]"))
        out.append(Diagnostic("alpha_to_zero", True, f"(n + n0)^-{theta!r} -> 0"))
        out.append(Diagnostic("alpha_divergent_sum", theta <= 1.0,
                              f"sum of n^-{theta!r} " + ("diverges" if theta <= 1.0 else "converges")))
    else:
        c = alpha.value
        out.append(Diagnostic("alpha_range", c > 0.0, f"constant {c!r} " + ("in" if c > 0 else "not in") + " (0, 1]"))
        out.append(Diagnostic("alpha_to_zero", c == 0.0, f"constant {c!r} does not tend to 0" if c else "zero"))
        out.append(Diagnostic("alpha_divergent_sum", c > 0.0, f"sum of constant {c!r}"))
    out += _liminf_product(beta, "beta_liminf")
    return out


def validate_mann_schedule(alpha: Schedule) -> list[Diagnostic]:
    """liminf a_n (1 - a_n) > 0 for the Mann step sizes."""
    return _liminf_product(alpha, "alpha_liminf")


def schedules_pass(diagnostics: list[Diagnostic]) -> bool:
    return all(d.passed is True for d in diagnostics)


# -- traces --------------------------------------------------------------


@dataclass
class Verdict:
    converged: bool
    point: Vector | None
    reason: str

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "converged_to": None if self.point is None else self.point.tolist(),
            "reason": self.reason,
        }


@dataclass
class IterationTrace:
    """
    One run of a scheme. ``step_norms[k]`` and ``schedule_values[k]`` belong
    to the transition from iterate k to k + 1, so both are one shorter than
    ``iterates``. A missing beta (Mann) is stored as NaN.
    """

    scheme: str
    iterates: np.ndarray
    residuals: np.ndarray
    step_norms: np.ndarray
    schedule_values: np.ndarray
    anchor: Vector | None
    verdict: Verdict
    diagnostics: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    domain_exits: list = field(default_factory=list)
    limit_in_attractor: bool | None = None

    @property
    def dimension(self) -> int:
        return self.iterates.shape[1]

    def __len__(self):
        return len(self.iterates)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        d = self.dimension
        w.writerow(["n"] + [f"x_{i + 1}" for i in range(d)] + ["residual", "step_norm", "alpha_n", "beta_n"])

        def g(v):
            return "" if v is None or math.isnan(v) else format(float(v), ".17g")

        for k, x in enumerate(self.iterates):
            last = k == len(self.iterates) - 1
            row = [str(k + 1)] + [g(c) for c in x] + [g(self.residuals[k])]
            if last:
                row += ["", "", ""]
            else:
                a, b = self.schedule_values[k]
                row += [g(self.step_norms[k]), g(a), g(b)]
            w.writerow(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


# -- runners -------------------------------------------------------------


def _norm(v) -> float:
    return math.sqrt(float(v @ v))


def _domain_notes(Tt) -> list[str]:
    inner = getattr(Tt, "inner", None)
    if inner is None:
        return []
    notes = []
    if not inner.domain.is_convex:
        notes.append("domain declared non-convex: convexity hypothesis on C not met")
    if not inner.domain.maps_into_self:
        notes.append("mapping not declared to map C into itself")
    return notes


def _run(scheme, Tt, x1, step, alphas, betas, max_steps, stop_tol, anchor, diagnostics, notes):
    x = as_vector(x1, Tt.dimension)
    apply = getattr(Tt, "apply", None) or (lambda v: (Tt(v), True))
    tx, inside = apply(x)
    with np.errstate(over="ignore", invalid="ignore"):
        r0 = _norm(x - tx)
    xs, res, steps, sched = [x], [r0], [], []
    exits = [] if inside else [1]

    def partial(reason):
        return IterationTrace(scheme, np.array(xs), np.array(res), np.array(steps),
                              np.array(sched, dtype=float).reshape(-1, 2), anchor,
                              Verdict(False, None, reason), diagnostics, notes, exits)

    verdict = None
    with np.errstate(over="ignore", invalid="ignore"):
        verdict = _loop(step, apply, x, tx, xs, res, steps, sched, exits, alphas, betas,
                        max_steps, stop_tol, partial)
    if verdict is None:
        verdict = Verdict(False, None, f"max_steps={max_steps} reached; last residual {res[-1]:.3e}")
    trace = partial("")
    trace.verdict = verdict
    return trace


def _loop(step, apply, x, tx, xs, res, steps, sched, exits, alphas, betas, max_steps, stop_tol, partial):
    for n in range(1, max_steps + 1):
        a = alphas(n)
        b = betas(n) if betas is not None else math.nan
        x_new = step(x, tx, a, b)
        # overflow of the squared norm counts as divergence too
        if not math.isfinite(float(x_new @ x_new)):
            raise NumericalDivergence(n + 1, partial(f"non-finite iterate at step {n + 1}"))
        tx_new, inside = apply(x_new)
        d = x_new - tx_new
        r = math.sqrt(float(d @ d))
        d = x_new - x
        s = math.sqrt(float(d @ d))
        xs.append(x_new)
        res.append(r)
        steps.append(s)
        sched.append((a, b))
        if not inside:
            exits.append(n + 1)
        x, tx = x_new, tx_new
        if s < stop_tol and r < stop_tol:
            return Verdict(True, x.copy(), f"step norm and residual below {stop_tol:g} at iterate {n + 1}")
    return None


def run_halpern(Tt: ExtensionMapping, u, x1, alpha: Schedule, beta: Schedule,
                max_steps: int = HALPERN_MAX_STEPS, stop_tol: float = HALPERN_STOP_TOL) -> IterationTrace:
    """Anchored iteration; the limit is the projection of u onto the fixed-point set of T~."""
    u = as_vector(u, Tt.dimension)
    diagnostics = validate_halpern_schedules(alpha, beta)
    notes = _domain_notes(Tt)
    if not schedules_pass(diagnostics):
        failed = [d.condition for d in diagnostics if d.passed is not True]
        logger.warning("Halpern schedule conditions not met: %s; running anyway", ", ".join(failed))
        notes.append("schedule conditions not met: " + ", ".join(failed))

    def step(x, tx, a, b):
        return a * u + (1.0 - a) * (b * x + (1.0 - b) * tx)

    return _run("halpern", Tt, x1, step, alpha, beta, max_steps, stop_tol, u.copy(), diagnostics, notes)


def run_mann(Tt: ExtensionMapping, x1, alpha: Schedule, max_steps: int = MANN_MAX_STEPS,
             stop_tol: float = MANN_STOP_TOL, member_tol: float = DEFAULT_TOL) -> IterationTrace:
    """Averaged iteration; a converged limit is post-checked for membership in the attractor."""
    diagnostics = validate_mann_schedule(alpha)
    notes = _domain_notes(Tt)
    notes.append("weak convergence read as norm convergence (finite dimension)")
    if not schedules_pass(diagnostics):
        logger.warning("Mann schedule condition not met; running anyway")
        notes.append("schedule condition not met: alpha_liminf")

    def step(x, tx, a, b):
        return a * x + (1.0 - a) * tx

    trace = _run("mann", Tt, x1, step, alpha, None, max_steps, stop_tol, None, diagnostics, notes)
    S = getattr(Tt, "attractor", None)
    if trace.verdict.converged and S is not None:
        trace.limit_in_attractor = member(S, trace.verdict.point, member_tol)
    return trace


def residual_limit_check(trace: IterationTrace, S: HalfspaceSet, tol: float = DEFAULT_TOL) -> bool:
    """A converged limit must lie in the attractor approximation."""
    if not trace.verdict.converged or trace.verdict.point is None:
        return False
    return member(S, trace.verdict.point, tol)
