"""
Mappings T: C -> H and the registry of closed-form examples.

Registry entries are addressed by stable names, optionally with call-style
arguments, e.g. ``"contraction(0.5, 0)"`` or ``"rotation_2d(pi/3)"``.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError, DomainViolation, UnknownMapping
from .space import DomainSpec, Vector, as_vector, box_sampler, whole_space


@dataclass(frozen=True)
class MappingSpec:
    domain: DomainSpec
    evaluate: Callable[[Vector], Vector]
    name: str
    declared_classes: frozenset = frozenset()
    params: dict = field(default_factory=dict, compare=False)

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def __call__(self, x) -> Vector:
        return evaluate(self, x)


def evaluate(T: MappingSpec, x) -> Vector:
    """Return Tx, raising DomainViolation when x is not in C."""
    x = as_vector(x, T.dimension)
    if not T.domain.membership(x):
        raise DomainViolation(x)
    y = np.asarray(T.evaluate(x), dtype=np.float64)
    if y.shape != x.shape:
        raise DimensionError(f"{T.name} returned shape {y.shape} for input {x.shape}")
    return y


# -- concrete mappings ---------------------------------------------------


def paper_example() -> MappingSpec:
    """T on R minus {0}: T(1) = 1 and Tx = -x otherwise.

    F(T) = {1} while A(T) = {0}, so the extension has F = {0, 1}.
    """

    def T(x):
        # exact comparison on purpose; samplers emit representable points
        if x[0] == 1.0:
            return np.array([1.0])
        return -x

    def nonzero(x):
        return x[0] != 0.0

    dom = DomainSpec(
        dimension=1,
        membership=nonzero,
        sampler=box_sampler(1, 4.0, accept=nonzero),
        is_convex=False,
        maps_into_self=True,
        radius=4.0,
        description="R minus {0}",
    )
    return MappingSpec(dom, T, "paper_example", frozenset({"attractive_point"}))


def negation_d(d: int = 2) -> MappingSpec:
    d = int(d)
    return MappingSpec(
        whole_space(d),
        lambda x: -x,
        "negation_d",
        frozenset({"nonexpansive", "generalized_hybrid(1,0)", "quasinonexpansive"}),
        {"d": d},
    )


def rotation_2d(theta: float) -> MappingSpec:
    c, s = math.cos(theta), math.sin(theta)
    R = np.array([[c, -s], [s, c]])
    return MappingSpec(
        whole_space(2),
        lambda x: R @ x,
        "rotation_2d",
        frozenset({"nonexpansive", "generalized_hybrid(1,0)"}),
        {"theta": float(theta)},
    )


def contraction(c: float, p=0.0, d: int | None = None) -> MappingSpec:
    """Tx = p + c (x - p) with 0 <= c < 1."""
    if not 0.0 <= c < 1.0:
        raise ValueError(f"contraction factor must lie in [0, 1), got {c}")
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if d is not None and p.size == 1:
        p = np.full(int(d), p[0])
    p = as_vector(p)
    return MappingSpec(
        whole_space(p.size),
        lambda x: p + c * (x - p),
        "contraction",
        frozenset({"nonexpansive", "generalized_hybrid(1,0)", "quasinonexpansive"}),
        {"c": float(c), "p": p.tolist()},
    )


def ball_projection(r: float = 1.0, d: int = 2) -> MappingSpec:
    if r <= 0:
        raise ValueError("radius must be positive")
    d = int(d)

    def P(x):
        nx = math.sqrt(float(np.dot(x, x)))
        return x if nx <= r else (r / nx) * x

    return MappingSpec(
        whole_space(d),
        P,
        "ball_projection",
        frozenset({"nonexpansive", "generalized_hybrid(1,0)"}),
        {"r": float(r), "d": d},
    )


def halfplane_reflection(s: float = 1.0) -> MappingSpec:
    """Reflection (x1, x2) -> (x1, -x2) restricted to C = {x1 >= s}.

    C is convex and mapped into itself; A(T) is the whole line x2 = 0,
    most of which lies outside C when s > 0.
    """

    def inside(x):
        return x[0] >= s

    dom = DomainSpec(
        dimension=2,
        membership=inside,
        sampler=box_sampler(2, 4.0, accept=inside),
        is_convex=True,
        maps_into_self=True,
        radius=4.0,
        description=f"{{x1 >= {s}}}",
    )
    flip = np.array([1.0, -1.0])
    return MappingSpec(
        dom,
        lambda x: flip * x,
        "halfplane_reflection",
        frozenset({"nonexpansive", "generalized_hybrid(1,0)"}),
        {"s": float(s)},
    )


REGISTRY: dict[str, Callable[..., MappingSpec]] = {
    "paper_example": paper_example,
    "negation_d": negation_d,
    "rotation_2d": rotation_2d,
    "contraction": contraction,
    "ball_projection": ball_projection,
    "halfplane_reflection": halfplane_reflection,
}


# -- name parsing --------------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_NAMES = {"pi": math.pi, "π": math.pi, "e": math.e}


def _literal(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _literal(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_literal(node.left), _literal(node.right))
    if isinstance(node, (ast.Tuple, ast.List)):
        return [_literal(e) for e in node.elts]
    raise ValueError(f"unsupported expression: {ast.dump(node)}")


def parse_name(spec: str) -> tuple[str, list, dict]:
    """Split ``"name(a, b, k=v)"`` into name, positional and keyword args."""
    spec = spec.strip()
    if "(" not in spec:
        return spec, [], {}
    # "π" is not an identifier start in every context; normalise it
    tree = ast.parse(spec.replace("π", "pi"), mode="eval").body
    if not isinstance(tree, ast.Call) or not isinstance(tree.func, ast.Name):
        raise UnknownMapping(spec)
    args = [_literal(a) for a in tree.args]
    kwargs = {k.arg: _literal(k.value) for k in tree.keywords}
    return tree.func.id, args, kwargs


def registry_get(name: str, *args, **params) -> MappingSpec:
    """Look up a registry mapping by name.

    >>> registry_get("contraction(0.5, 0)")(4.0)
    array([2.])
    """
    try:
        base, pargs, kw = parse_name(name)
    except SyntaxError as exc:
        raise UnknownMapping(name) from exc
    if base not in REGISTRY:
        raise UnknownMapping(base)
    kw.update(params)
    try:
        return REGISTRY[base](*pargs, *args, **kw)
    except TypeError as exc:
        raise UnknownMapping(f"{name}: {exc}") from exc
