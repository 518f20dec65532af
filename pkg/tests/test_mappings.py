import math

import numpy as np
import pytest

from attractor.errors import DomainViolation, UnknownMapping
from attractor.mappings import REGISTRY, evaluate, parse_name, registry_get


def test_paper_example_values():
    T = registry_get("paper_example")
    assert evaluate(T, 1.0).tolist() == [1.0]
    assert evaluate(T, 0.5).tolist() == [-0.5]
    with pytest.raises(DomainViolation) as info:
        evaluate(T, 0.0)
    assert info.value.x.tolist() == [0.0]


def test_paper_example_negates_away_from_one():
    T = registry_get("paper_example")
    for x in T.domain.sample(3, 2000):
        if x[0] != 1.0:
            assert T(x)[0] == -x[0]


def test_registry_examples():
    assert registry_get("negation_d")(np.array([1.0, -2.0])).tolist() == [-1.0, 2.0]
    assert registry_get("contraction(0.5, 0)")(np.array([4.0])).tolist() == [2.0]
    np.testing.assert_allclose(registry_get("rotation_2d(π/2)")(np.array([1.0, 0.0])), [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(registry_get("rotation_2d", theta=math.pi / 2)([1.0, 0.0]), [0.0, 1.0], atol=1e-15)


def test_unknown_mapping():
    with pytest.raises(UnknownMapping):
        registry_get("nonexistent")
    with pytest.raises(UnknownMapping):
        registry_get("rotation_2d(1, 2, 3)")


def test_parse_name():
    assert parse_name("contraction(0.5, (1, 2))") == ("contraction", [0.5, [1, 2]], {})
    name, args, kw = parse_name("rotation_2d(theta=pi/3)")
    assert name == "rotation_2d" and kw["theta"] == pytest.approx(math.pi / 3)


def _instances():
    return [
        registry_get("paper_example"),
        registry_get("negation_d", d=3),
        registry_get("rotation_2d(pi/3)"),
        registry_get("contraction(0.5, (1, -1))"),
        registry_get("ball_projection(1.0, 3)"),
        registry_get("halfplane_reflection(1)"),
    ]


def test_registry_covers_all_names():
    assert {T.name for T in _instances()} == set(REGISTRY)


@pytest.mark.parametrize("T", _instances(), ids=lambda T: T.name)
def test_maps_into_self(T):
    assert T.domain.maps_into_self
    for x in T.domain.sample(11, 500):
        assert T.domain.contains(T(x))


@pytest.mark.parametrize("T", _instances(), ids=lambda T: T.name)
def test_deterministic_and_dimension_preserving(T):
    for x in T.domain.sample(5, 100):
        y1, y2 = T(x), T(x)
        assert y1.shape == x.shape
        assert np.array_equal(y1, y2)


def test_contraction_fixed_point_exact():
    p = np.array([0.75, -1.25])
    T = registry_get("contraction", 0.5, p)
    assert np.linalg.norm(T(p) - p) == 0.0


def test_rotation_nonexpansive():
    T = registry_get("rotation_2d(1.1)")
    pts = T.domain.sample(2, 2000)
    for x, y in zip(pts[:1000], pts[1000:]):
        assert np.linalg.norm(T(x) - T(y)) <= np.linalg.norm(x - y) + 1e-12


def test_contraction_rejects_bad_factor():
    with pytest.raises(ValueError):
        registry_get("contraction(1.0, 0)")
