from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudoabel.poly import Poly, PolySyntaxError, parse_poly

X, Y = sp.symbols("x y")

coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=7)
terms = st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)), coeffs, max_size=5)
polys = terms.map(Poly)


def to_sympy(p: Poly):
    return sp.expand(sum(sp.Rational(c.numerator, c.denominator) * X**i * Y**j
                         for (i, j), c in p.terms.items()))


def test_reading_examples():
    assert parse_poly("y - x^2").terms == {(0, 1): 1, (2, 0): -1}
    assert parse_poly("1 - y").terms == {(0, 0): 1, (0, 1): -1}
    p = parse_poly("(1-y)*(y-x^2)")
    assert p.degree() == 3
    assert p[(2, 1)] == 1


def test_decimal_literals_are_exact():
    p = parse_poly("0.1*x + 2.5")
    assert p[(1, 0)] == Fraction(1, 10)
    assert p[(0, 0)] == Fraction(5, 2)


def test_implicit_product_and_powers():
    assert parse_poly("2x y^2") == parse_poly("2*x*y**2")
    assert parse_poly("-x^2") == Poly({(2, 0): -1})
    assert parse_poly("(x+y)^0") == Poly.const(1)


@pytest.mark.parametrize("text, fragment", [
    ("x^-1", "exponent"),
    ("x^1.5", "exponent"),
    ("x + z", "unknown identifier"),
    ("", "empty"),
    ("(x + y", ")"),
    ("x / y", "constant"),
])
def test_syntax_errors(text, fragment):
    with pytest.raises(PolySyntaxError) as exc:
        parse_poly(text)
    assert fragment in str(exc.value)


def test_error_reports_position():
    with pytest.raises(PolySyntaxError) as exc:
        parse_poly("x + y + w")
    assert exc.value.pos == 8


@given(polys, polys)
@settings(max_examples=60, deadline=None)
def test_arithmetic_matches_sympy(p, q):
    assert to_sympy(p + q) == sp.expand(to_sympy(p) + to_sympy(q))
    assert to_sympy(p * q) == sp.expand(to_sympy(p) * to_sympy(q))
    assert to_sympy(p - q) == sp.expand(to_sympy(p) - to_sympy(q))
    assert to_sympy(p.diff(0)) == sp.diff(to_sympy(p), X)
    assert to_sympy(p.diff(1)) == sp.diff(to_sympy(p), Y)


@given(polys)
@settings(max_examples=60, deadline=None)
def test_print_parse_roundtrip(p):
    assert parse_poly(str(p)) == p
    assert str(parse_poly(str(p))) == str(p)


@given(polys, coeffs, coeffs)
@settings(max_examples=40, deadline=None)
def test_exact_evaluation(p, a, b):
    want = to_sympy(p).subs({X: sp.Rational(a.numerator, a.denominator),
                            Y: sp.Rational(b.numerator, b.denominator)})
    got = p(a, b)
    assert isinstance(got, (Fraction, int))
    assert Fraction(got) == Fraction(int(want.p), int(want.q))


def test_zero_terms_are_dropped():
    p = parse_poly("x - x + y")
    assert p.terms == {(0, 1): 1}
    assert parse_poly("x - x").is_zero()


def test_vectorised_evaluation():
    p = parse_poly("y - x^2")
    xs = np.array([0.0, 1.0, 2.0])
    assert np.allclose(p(xs, xs), [0.0, 0.0, -2.0])
    z = p(1j, 0.5)
    assert z == pytest.approx(1.5)


def test_compose_and_shift():
    t, u = Poly.gens(("t", "u"))
    p = parse_poly("y - x^2")
    q = p.compose([t, t * t * u])
    assert q == t * t * u - t * t
    assert q.min_order(0) == 2
    assert q.shift_down(0, 2) == u - 1
    with pytest.raises(ValueError):
        q.shift_down(0, 3)
