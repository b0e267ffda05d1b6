import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudoabel.model import (DarbouxSystem, DegenerateContactError, LeafBoundaryError, OneForm,
                              eval_log_H, find_center, find_turning_point, model_center,
                              model_center_value, model_system, omega_coefficients, omega_form)
from pseudoabel.poly import parse_poly


def test_omega_at_origin():
    A, B = omega_coefficients(model_system(0.3), (0.0, 0.0))
    assert A == pytest.approx(0.0)
    assert B == pytest.approx(0.3)


@pytest.mark.parametrize("eps", [0.05, 0.3, 1.0])
def test_omega_vanishes_at_center(eps):
    A, B = omega_coefficients(model_system(eps), model_center(eps))
    assert abs(A) < 1e-14 and abs(B) < 1e-14


def test_single_factor_form():
    # P0 dP1 + eps P1 dP0 for the model, coefficient by coefficient
    eps = 0.7
    s = model_system(eps)
    p0, p1 = s.p0, s.factors[0][0]
    w = omega_form(s, eps)
    assert w.a == p0 * p1.diff(0) + p1 * p0.diff(0) * eps
    assert w.b == p0 * p1.diff(1) + p1 * p0.diff(1) * eps


def test_log_H_value():
    v = eval_log_H(model_system(0.5), (0.0, 0.5))
    assert v.real == pytest.approx(math.log(0.5) * 1.5, abs=1e-12)
    assert v.imag == 0
    assert math.exp(v.real) == pytest.approx(0.353553, abs=1e-6)


def test_log_H_winding():
    s = model_system(0.5)
    base = eval_log_H(s, (0.0, 0.5))
    shifted = eval_log_H(s, (0.0, 0.5), windings=(0, 1))
    assert shifted - base == pytest.approx(2j * math.pi * 1.0)
    shifted = eval_log_H(s, (0.0, 0.5), windings=(1, 0))
    assert shifted - base == pytest.approx(2j * math.pi * 0.5)


def test_log_H_on_factor_zero():
    with pytest.raises(LeafBoundaryError):
        eval_log_H(model_system(0.4), (0.3, 1.0))


@given(st.floats(0.05, 1.0), st.floats(-0.6, 0.6), st.floats(0.4, 0.9),
       st.floats(0, 2 * math.pi))
@settings(max_examples=50, deadline=None)
def test_omega_is_scaled_dlogH(eps, x, y, phi):
    """omega = P0 M dlog H, checked by central differences of log H."""
    s = model_system(eps)
    if y - x * x < 0.05:
        return
    h = 1e-6
    d = (math.cos(phi), math.sin(phi))
    f = lambda u: eval_log_H(s, (x + u * d[0], y + u * d[1])).real
    fd = (f(h) - f(-h)) / (2 * h)
    A, B = omega_coefficients(s, (x, y))
    scale = float(s.p0(x, y) * s.M(x, y))
    want = (A * d[0] + B * d[1]) / scale
    assert fd == pytest.approx(want, rel=1e-7, abs=1e-8)


def test_find_center_example():
    c = find_center(model_system(0.5), (0.1, 0.3))
    assert c.kind == "center"
    assert c.location[0] == pytest.approx(0.0, abs=1e-12)
    assert c.location[1] == pytest.approx(1 / 3, abs=1e-12)
    assert c.value_t == pytest.approx((2 / 3) * 3**-0.5, rel=1e-12)


@pytest.mark.parametrize("eps", [0.01, 0.05, 0.1, 0.25, 0.5, 1.0])
def test_center_value_closed_form(eps):
    c = find_center(model_system(eps), (0.05, eps / (1 + eps) + 0.01))
    assert c.value_t == pytest.approx(model_center_value(eps), rel=1e-12)
    A, B = omega_coefficients(model_system(eps), c.location)
    assert math.hypot(A, B) <= 1e-10


def test_center_at_eps_one():
    assert find_center(model_system(1.0), (0.0, 0.4)).value_t == pytest.approx(0.25)


def test_center_values_increase_as_eps_shrinks():
    vals = [find_center(model_system(e), (0.0, e / (1 + e))).value_t for e in (0.1, 0.05, 0.01)]
    assert vals[0] < vals[1] < vals[2]


def test_turning_point_model():
    p = find_turning_point(model_system(0.2))
    assert p.kind == "tangency"
    assert np.allclose(p.location, (0.0, 0.0), atol=1e-12)


def test_turning_point_shifted():
    s = DarbouxSystem(parse_poly("y - (x-1)^2"), ((parse_poly("2 - y"), 1.5),), 0.5,
                      domain=(-1, 3, -0.5, 2.5))
    assert np.allclose(find_turning_point(s).location, (1.0, 0.0), atol=1e-10)


def test_cubic_contact_is_degenerate():
    s = DarbouxSystem(parse_poly("y - x^3"), ((parse_poly("1 - y"), 1.0),), 0.5,
                      domain=(-1.5, 1.5, -0.5, 1.5))
    with pytest.raises(DegenerateContactError):
        find_turning_point(s)


def test_invalid_systems():
    with pytest.raises(ValueError):
        DarbouxSystem(parse_poly("y"), ((parse_poly("1 - y"), -1.0),), 0.5)
    with pytest.raises(ValueError):
        DarbouxSystem(parse_poly("y"), ((parse_poly("1 - y"), 1.0),), -0.1)
    with pytest.raises(ValueError):
        DarbouxSystem(parse_poly("y"), (), 0.1)


def test_oneform_algebra():
    a = OneForm.parse("x", "y")
    b = OneForm.exact(parse_poly("x*y"))
    c = a + 2 * b
    assert c.a == parse_poly("x + 2*y")
    assert c.b == parse_poly("y + 2*x")
