import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homog_lab.coefficients import (CoefficientField, Family, SymMatrix2, evaluate, lamination_direction,
                                    validate)

mus = st.floats(min_value=0.0, max_value=0.95)
dyadic = st.integers(min_value=-4096, max_value=4096).map(lambda k: k / 1024.0)


def fields():
    return [
        CoefficientField.identity(),
        CoefficientField.constant(2.0, 0.3, 1.0),
        CoefficientField.laminate(0.5),
        CoefficientField.trig_product(0.5),
        CoefficientField.rotated_laminate(0.5, math.pi / 4),
    ]


def test_laminate_values():
    f = CoefficientField.laminate(0.5)
    assert f.normalization == pytest.approx(1.5)
    a = evaluate(f, (0.0, 0.3))
    assert (a.a11, a.a12, a.a22) == pytest.approx((1.0, 0.0, 1.0))
    a = evaluate(f, (0.5, 0.0))
    assert a.a11 == pytest.approx(0.5 / 1.5)


def test_trig_product_values():
    f = CoefficientField.trig_product(0.5)
    a = evaluate(f, (0.25, 0.25))
    assert a.a11 == pytest.approx(1.0) and a.a22 == pytest.approx(1.0) and a.a12 == 0.0
    a = evaluate(f, (0.25, 0.75))
    assert a.a11 == pytest.approx(0.5 / 1.5)


def test_rotated_laminate_is_constant_along_layers():
    f = CoefficientField.rotated_laminate(0.5, math.pi / 4)
    t = np.linspace(0, 1, 17)
    # layers are lines y1 + y2 = const
    a11, _, _ = f.components(0.3 + t, 0.1 - t)
    assert np.ptp(a11) < 1e-12


def test_constant_field_is_not_rescaled_below_one():
    f = CoefficientField.constant(0.5, 0.1, 0.7)
    assert f.normalization == 1.0
    assert evaluate(f, (0.3, 0.9)) == SymMatrix2(0.5, 0.1, 0.7)
    g = CoefficientField.constant(2.0, 0.0, 1.0)
    assert evaluate(g, (0, 0)).a11 == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(mu=mus, y1=dyadic, y2=dyadic, k1=st.integers(-3, 3), k2=st.integers(-3, 3))
def test_periodicity_is_bitwise_at_dyadic_points(mu, y1, y2, k1, k2):
    for f in (CoefficientField.laminate(mu), CoefficientField.trig_product(mu),
              CoefficientField.rotated_laminate(mu, math.atan2(1, 2))):
        a = f.components(np.array(y1), np.array(y2))
        b = f.components(np.array(y1 + k1), np.array(y2 + k2))
        assert all(np.array_equal(u, v) for u, v in zip(a, b))


@settings(max_examples=40, deadline=None)
@given(mu=mus)
def test_validation_bounds(mu):
    for f in (CoefficientField.laminate(mu), CoefficientField.trig_product(mu)):
        rep = validate(f, 32)
        assert rep.elliptic
        assert rep.lambda_max <= 1.0 + 1e-12
        # profile 1 + mu * s with s in [-1, 1], divided by max(1, 1 + mu)
        assert rep.lambda_min >= (1.0 - mu) / max(1.0, 1.0 + mu) - 1e-12
        assert rep.periodicity_residual == 0.0
        assert rep.sample_count == 32 * 32


def test_lipschitz_estimate_laminate():
    # A = a I with |a'| <= 2 pi mu / N, so the Frobenius derivative is sqrt(2) |a'|;
    # the sampled difference quotient approaches that bound from below
    rep = validate(CoefficientField.laminate(0.5), 256)
    bound = math.sqrt(2) * 2 * math.pi * 0.5 / 1.5
    assert 0.99 * bound < rep.lipschitz_estimate <= bound


def test_validate_rejects_tiny_sample():
    with pytest.raises(ValueError):
        validate(CoefficientField.identity(), 8)


@pytest.mark.parametrize("spec", [f.to_spec() for f in fields()])
def test_spec_round_trip(spec):
    f = CoefficientField.from_spec(spec)
    assert f.to_spec() == spec
    assert CoefficientField.from_spec(f.to_spec()) == f


@pytest.mark.parametrize("spec", [
    {"family": "laminate"},
    {"family": "laminate", "mu": 1.0},
    {"family": "laminate", "mu": -0.1},
    {"family": "nope", "mu": 0.1},
    {"family": "trig_product", "mu": 0.5, "extra": 1},
    {"family": "constant", "a11": 1.0, "a12": 2.0, "a22": 1.0},
    {"family": "rotated_laminate", "mu": 0.5, "angle": 0.1234},
])
def test_bad_specs(spec):
    with pytest.raises(ValueError):
        CoefficientField.from_spec(spec)


def test_is_constant():
    assert CoefficientField.laminate(0.0).is_constant
    assert not CoefficientField.trig_product(0.2).is_constant
    assert CoefficientField.identity().is_constant
    assert CoefficientField.identity().family is Family.CONSTANT


@pytest.mark.parametrize("angle,expected", [
    (0.0, (1, 0)), (math.pi / 2, (0, 1)), (math.pi / 4, (1, 1)), (math.atan2(1, 2), (2, 1)),
    (math.atan2(-3, 2), (2, -3)),
])
def test_lamination_direction(angle, expected):
    assert lamination_direction(angle) == expected


sym = st.builds(
    lambda l1, l2, th: SymMatrix2.from_array(
        np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        @ np.diag([l1, l2])
        @ np.array([[math.cos(th), math.sin(th)], [-math.sin(th), math.cos(th)]])),
    st.floats(0.05, 5.0), st.floats(0.05, 5.0), st.floats(0.0, math.pi))


@settings(max_examples=80, deadline=None)
@given(m=sym)
def test_symmatrix_algebra(m):
    lo, hi = m.eigenvalues()
    w = np.linalg.eigvalsh(m.as_array())
    assert lo == pytest.approx(w[0], abs=1e-9) and hi == pytest.approx(w[1], abs=1e-9)
    assert m.is_positive_definite()
    assert np.allclose(m.inverse().as_array() @ m.as_array(), np.eye(2), atol=1e-9)
    s = m.sqrt().as_array()
    assert np.allclose(s @ s, m.as_array(), atol=1e-9)
    assert m.quadratic_form(1.0, 2.0) == pytest.approx(np.array([1, 2]) @ m.as_array() @ np.array([1, 2]))
