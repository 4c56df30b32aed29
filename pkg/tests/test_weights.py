import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from bivtoda.errors import DomainError, ParameterError
from bivtoda.weights import (SQUARE, TRIANGLE, WeightSpec, build_quadrature,
                             evaluate_weight, normalization)

UNIFORM_SQ = WeightSpec(SQUARE)
UNIFORM_TR = WeightSpec(TRIANGLE)

exponent = st.floats(-0.9, 3.0)
time = st.floats(0.0, 2.0)


@st.composite
def specs(draw):
    family = draw(st.sampled_from([SQUARE, TRIANGLE]))
    names = ("alpha", "beta", "gamma", "delta") if family == SQUARE else ("a", "b", "c")
    return WeightSpec(family, {n: draw(exponent) for n in names}, draw(time))


def test_uniform_square_density():
    assert evaluate_weight(UNIFORM_SQ, 0.2, -0.3) == pytest.approx(0.25, rel=1e-14)


def test_uniform_triangle_density():
    assert evaluate_weight(UNIFORM_TR, 0.1, 0.1) == pytest.approx(2.0, rel=1e-14)


def test_deformed_square_density_at_origin():
    kappa = math.sinh(1.0) ** 2
    assert evaluate_weight(UNIFORM_SQ.with_time(1.0), 0.0, 0.0) == pytest.approx(
        0.25 / kappa, rel=1e-13)
    assert 0.25 / kappa == pytest.approx(0.18102, abs=5e-6)


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 2.5])
def test_square_kappa_closed_form(t):
    expected = 1.0 if t == 0 else (math.sinh(t) / t) ** 2
    assert normalization(UNIFORM_SQ.with_time(t)) == pytest.approx(expected, rel=1e-13)


def test_kappa_one_value():
    assert normalization(UNIFORM_SQ.with_time(1.0)) == pytest.approx(1.3810978, abs=5e-8)
    assert normalization(UNIFORM_TR) == 1.0


def test_triangle_kappa_against_dblquad():
    t = 0.7
    raw, _ = integrate.dblquad(lambda y, x: 2 * math.exp(-(x + y) * t), 0, 1,
                               0, lambda x: 1 - x, epsabs=1e-14, epsrel=1e-14)
    assert normalization(UNIFORM_TR.with_time(t)) == pytest.approx(raw, rel=1e-12)


def test_nonuniform_square_density_integrates_to_one():
    spec = WeightSpec(SQUARE, {"alpha": 1.0, "beta": 2.0, "gamma": 0.5}, 0.4)
    total, _ = integrate.dblquad(lambda y, x: evaluate_weight(spec, x, y),
                                 -1 + 1e-12, 1 - 1e-12, -1 + 1e-12, 1 - 1e-12,
                                 epsabs=1e-11)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_outside_domain():
    with pytest.raises(DomainError):
        evaluate_weight(UNIFORM_SQ, 1.5, 0.0)
    with pytest.raises(DomainError):
        evaluate_weight(UNIFORM_TR, 0.6, 0.6)


@pytest.mark.parametrize("bad", [{"alpha": -1.0}, {"beta": -1.5}, {"alpha": float("nan")}])
def test_non_integrable_exponents(bad):
    with pytest.raises(ParameterError):
        WeightSpec(SQUARE, bad)


def test_negative_time_and_unknown_family():
    with pytest.raises(ParameterError):
        WeightSpec(SQUARE, {}, -0.1)
    with pytest.raises(ParameterError):
        WeightSpec("disk")
    with pytest.raises(ParameterError):
        WeightSpec(TRIANGLE, {"alpha": 1})


def test_quadrature_examples():
    rule = build_quadrature(UNIFORM_SQ, 4)
    assert len(rule.weights) >= 9
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-13)
    assert rule.integrate(rule.x ** 2) == pytest.approx(1 / 3, rel=1e-13)
    tri = build_quadrature(UNIFORM_TR, 2)
    assert tri.integrate(tri.x) == pytest.approx(1 / 3, rel=1e-13)


def test_json_round_trip():
    spec = WeightSpec(TRIANGLE, {"a": 1, "c": 2.5}, 0.25)
    again = WeightSpec.from_json(spec.to_json())
    assert again == spec
    assert json.loads(spec.to_json()) == {"family": TRIANGLE,
                                          "params": {"a": 1.0, "b": 0.0, "c": 2.5},
                                          "t": 0.25}


@given(specs())
def test_rule_invariants(spec):
    rule = build_quadrature(spec, 6)
    assert np.all(rule.weights > 0)
    assert np.all(spec.contains(rule.x, rule.y, closed=True))
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)


@given(specs(), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_deformation_identity(spec, u, v):
    if spec.family == SQUARE:
        x, y = 2 * u - 1, 2 * v - 1
    else:
        x, y = u * (1 - v), v * (1 - u) * 0.99
    lhs = evaluate_weight(spec, x, y) * normalization(spec)
    rhs = math.exp(-(x + y) * spec.t) * evaluate_weight(spec.with_time(0.0), x, y)
    assert lhs == pytest.approx(rhs, rel=1e-13)


@given(st.floats(-0.9, 2), st.floats(-0.9, 2), st.floats(-0.9, 2), st.floats(-0.9, 2),
       st.floats(0.0, 2.0))
def test_square_kappa_factorizes(al, be, ga, de, t):
    from scipy.special import hyp1f1

    spec = WeightSpec(SQUARE, {"alpha": al, "beta": be, "gamma": ga, "delta": de}, t)

    # 1D mass of exp(-x t) against the normalized Jacobi weight on [-1, 1]
    def factor(p, q):
        return math.exp(t) * hyp1f1(q + 1, p + q + 2, -2 * t)

    assert normalization(spec) == pytest.approx(factor(al, be) * factor(ga, de), rel=1e-12)
