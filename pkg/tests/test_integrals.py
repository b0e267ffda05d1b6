import math

import numpy as np
import pytest

from oracles import exact_form, green_oracle_x_dy
from pseudoabel.integrals import (IntegralResult, figure_eight_cycle, figure_eight_J,
                                  integrate_form_over_cycle, pseudo_abelian_I, variation_check)
from pseudoabel.model import OneForm, model_center_value, model_system
from pseudoabel.tracer import TPath, TraceOptions, trace_oval

X_DY = OneForm.parse("0", "x")
GENERIC = OneForm.parse("0", "x + 2*y")


@pytest.mark.parametrize("eps, t", [(1.0, 0.2), (0.5, 0.15)])
def test_matches_green_oracle(eps, t):
    s = model_system(eps)
    got = integrate_form_over_cycle(s, X_DY, trace_oval(s, t))
    want = green_oracle_x_dy(eps, t)
    assert got.value.real == pytest.approx(want, rel=1e-7)
    assert abs(got.value.imag) <= 1e-12


@pytest.mark.parametrize("F", ["x", "x*y", "x^3 - 2*x*y + y^2"])
def test_exact_forms_vanish_on_ovals(F):
    s = model_system(0.4)
    cyc = trace_oval(s, 0.5 * model_center_value(0.4))
    assert abs(integrate_form_over_cycle(s, exact_form(s, F), cyc).value) <= 1e-10


def test_exact_form_vanishes_on_lifted_cycle():
    eps = 0.2
    s = model_system(eps)
    t = 0.5 * model_center_value(eps)
    res = pseudo_abelian_I(s, exact_form(s, "x*y"), t, TPath.arc(t, 0, math.pi * eps))
    assert abs(res.value) <= 1e-10


def test_linearity():
    s = model_system(0.3)
    cyc = trace_oval(s, 0.4 * model_center_value(0.3))
    e1 = OneForm.parse("x*y", "x")
    e2 = OneForm.parse("y", "x^2 + y")
    a = 2.5
    i1 = integrate_form_over_cycle(s, e1, cyc)
    i2 = integrate_form_over_cycle(s, e2, cyc)
    comb = integrate_form_over_cycle(s, a * e1 + e2, cyc)
    bound = a * i1.error_estimate + i2.error_estimate + comb.error_estimate
    assert abs(comb.value - (a * i1.value + i2.value)) <= max(bound, 1e-13 * abs(comb.value))


def test_start_vertex_independence():
    s = model_system(0.5)
    cyc = trace_oval(s, 0.2)
    base = integrate_form_over_cycle(s, GENERIC, cyc)
    for k in (1, len(cyc) // 3, len(cyc) - 3):
        other = integrate_form_over_cycle(s, GENERIC, cyc.rotated(k))
        assert abs(other.value - base.value) <= 1e-9 * abs(base.value)


def test_reversal_negates():
    s = model_system(0.5)
    cyc = trace_oval(s, 0.2)
    a = integrate_form_over_cycle(s, GENERIC, cyc).value
    b = integrate_form_over_cycle(s, GENERIC, cyc.reversed()).value
    assert abs(a + b) <= 1e-12 * abs(a)


def test_real_t_gives_real_value():
    for eps in (0.1, 0.2, 0.5):
        s = model_system(eps)
        res = pseudo_abelian_I(s, GENERIC, 0.5 * model_center_value(eps))
        assert abs(res.value.imag) <= 1e-9


def test_constant_path_is_direct_integration():
    s = model_system(0.3)
    t = 0.3 * model_center_value(0.3)
    a = pseudo_abelian_I(s, GENERIC, t, TPath.constant(t))
    b = integrate_form_over_cycle(s, GENERIC, trace_oval(s, t))
    assert a.value == pytest.approx(b.value, abs=1e-14)


def test_schwarz_reflection():
    eps = 0.2
    s = model_system(eps)
    t = 0.5 * model_center_value(eps)
    base = trace_oval(s, t)
    up = pseudo_abelian_I(s, GENERIC, t, TPath.arc(t, 0, math.pi * eps), base_cycle=base)
    dn = pseudo_abelian_I(s, GENERIC, t, TPath.arc(t, 0, -math.pi * eps), base_cycle=base)
    gap = abs(up.value - dn.value.conjugate())
    assert gap <= max(2 * (up.error_estimate + dn.error_estimate), 1e-12 * abs(up.value))


def test_lift_path_homotopy():
    """Two t-paths with the same endpoints give the same integral."""
    eps = 0.2
    s = model_system(eps)
    te = model_center_value(eps)
    t0, t1 = 0.5 * te, 0.6 * te
    ang = 0.5 * math.pi * eps
    p1 = TPath.arc(t0, 0, ang) + TPath.radial(ang, t0, t1)
    p2 = TPath.radial(0, t0, t1) + TPath.arc(t1, 0, ang)
    a = pseudo_abelian_I(s, GENERIC, None, p1)
    b = pseudo_abelian_I(s, GENERIC, None, p2)
    assert abs(a.value - b.value) <= 1e-9 * abs(a.value)


def test_refined_trace_changes_nothing():
    s = model_system(0.2)
    t = 0.4 * model_center_value(0.2)
    a = pseudo_abelian_I(s, GENERIC, t * np.exp(0.1j))
    fine = TraceOptions(step_init=0.004, step_max=0.008)
    b = pseudo_abelian_I(s, GENERIC, t * np.exp(0.1j), opts=fine)
    assert abs(a.value - b.value) <= 1e-9 * abs(a.value)


# figure-eight -------------------------------------------------------------


def test_eight_is_closed_on_rotated_leaf():
    eps = 0.2
    s = model_system(eps)
    t = 0.5 * model_center_value(eps)
    cyc, geom = figure_eight_cycle(s, t)
    assert cyc.closure_residual <= 1e-8
    assert cyc.drift_residual <= 1e-8
    assert cyc.leaf_log_t == pytest.approx(math.log(t) + 1j * math.pi * eps)
    # both intersection points lie on P0 = 0 and on the eps = 0 level set
    for q in (geom.q_plus, geom.q_minus):
        assert abs(s.p0(*q)) <= 1e-12
        assert (1 - q[1]) == pytest.approx(t, rel=1e-12)


def test_eight_radius_homotopy():
    eps = 0.2
    s = model_system(eps)
    t = 0.5 * model_center_value(eps)
    a = figure_eight_J(s, GENERIC, t, radius_factor=0.25)
    b = figure_eight_J(s, GENERIC, t, radius_factor=0.3)
    assert abs(a.value - b.value) <= 1e-9


def test_eight_kills_exact_forms():
    s = model_system(0.2)
    t = 0.5 * model_center_value(0.2)
    assert abs(figure_eight_J(s, exact_form(s, "x^2*y - y"), t).value) <= 1e-10


def test_J_is_imaginary_on_model():
    s = model_system(0.4)
    J = figure_eight_J(s, GENERIC, 0.5 * model_center_value(0.4)).value
    assert abs(J.real) <= 1e-10 * abs(J)


def test_variation_example():
    eps = 0.2
    s = model_system(eps)
    rep = variation_check(s, GENERIC, 0.5 * model_center_value(eps))
    assert rep.residual <= 1e-6
    assert abs(rep.variation - rep.J.value) <= 1e-6 * abs(rep.J.value)


def test_variation_exact_eta():
    s = model_system(0.2)
    rep = variation_check(s, exact_form(s, "x*y"), 0.5 * model_center_value(0.2))
    assert abs(rep.variation) <= 1e-9
    assert abs(rep.J.value) <= 1e-9


def test_variation_needs_positive_eps():
    with pytest.raises(ValueError):
        variation_check(model_system(0.0), GENERIC, 0.3)


def test_result_arithmetic():
    a = IntegralResult(1 + 1j, 1e-12, 10)
    b = IntegralResult(2.0, 2e-12, 20)
    c = a - b
    assert c.value == -1 + 1j and c.error_estimate == pytest.approx(3e-12) and c.nodes == 30
    with pytest.raises(ValueError):
        IntegralResult(0, -1.0, 1)
