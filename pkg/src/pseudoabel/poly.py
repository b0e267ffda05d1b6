"""Sparse multivariate polynomials with exact rational coefficients.

``Poly`` is the single representation used everywhere: two variables for the
phase-plane polynomials (``BivarPoly``), three for the family/blow-up
computations (``TriPoly``).  Coefficients are :class:`fractions.Fraction` when
the inputs are rational, and plain floats/complex otherwise.  A tiny
Pratt-style parser reads the textual input format of system files.
"""

from __future__ import annotations

import numbers
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "Poly",
    "BivarPoly",
    "TriPoly",
    "PolySyntaxError",
    "parse_poly",
    "XY",
]

XY = ("x", "y")


def _clean(c):
    """Normalise a coefficient: ints become Fractions, integral floats stay floats."""
    if isinstance(c, bool):
        c = int(c)
    if isinstance(c, int):
        return Fraction(c)
    return c


@dataclass(frozen=True)
class Poly:
    """Immutable sparse polynomial ``{exponent tuple: coefficient}``.

    Zero coefficients are never stored.  Variable names only matter for
    printing and parsing; arithmetic requires equal ``nvars``.
    """

    terms: Mapping[tuple, object]
    variables: tuple = XY

    def __post_init__(self):
        n = len(self.variables)
        clean = {}
        for exp, c in dict(self.terms).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != n:
                raise ValueError(f"exponent {exp} does not match variables {self.variables}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent {exp}")
            c = _clean(c)
            if c != 0:
                clean[exp] = clean.get(exp, 0) + c
                if clean[exp] == 0:
                    del clean[exp]
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "variables", tuple(self.variables))

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, variables=XY) -> "Poly":
        return cls({}, variables)

    @classmethod
    def const(cls, c, variables=XY) -> "Poly":
        return cls({(0,) * len(variables): c}, variables)

    @classmethod
    def var(cls, i: int, variables=XY) -> "Poly":
        exp = [0] * len(variables)
        exp[i] = 1
        return cls({tuple(exp): 1}, variables)

    @classmethod
    def gens(cls, variables=XY) -> list["Poly"]:
        return [cls.var(i, variables) for i in range(len(variables))]

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("polynomials live in different rings")
            return other
        if isinstance(other, numbers.Number):
            return Poly.const(other, self.variables)
        return NotImplemented

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return Poly(out, self.variables)

    __radd__ = __add__

    def __neg__(self):
        return Poly({e: -c for e, c in self.terms.items()}, self.variables)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Poly(out, self.variables)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Poly):
            if not other.is_constant() or other.is_zero():
                raise ZeroDivisionError("division only by nonzero constants")
            other = other.constant_term()
        if isinstance(other, int):
            other = Fraction(other)
        return Poly({e: c / other for e, c in self.terms.items()}, self.variables)

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers")
        result = Poly.const(1, self.variables)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, numbers.Number):
            other = Poly.const(other, self.variables)
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.variables, tuple(sorted(self.terms.items()))))

    # inspection ---------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self.terms)

    def constant_term(self):
        return self.terms.get((0,) * self.nvars, Fraction(0))

    def degree(self, i: int | None = None) -> int:
        if not self.terms:
            return -1
        if i is None:
            return max(sum(e) for e in self.terms)
        return max(e[i] for e in self.terms)

    def min_order(self, i: int) -> int:
        """Largest ``k`` such that ``var_i**k`` divides the polynomial."""
        if not self.terms:
            raise ValueError("zero polynomial has infinite order")
        return min(e[i] for e in self.terms)

    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.terms.values())

    def __getitem__(self, exp) -> object:
        return self.terms.get(tuple(exp), Fraction(0))

    # calculus / algebra -------------------------------------------------
    def diff(self, i: int) -> "Poly":
        out = {}
        for e, c in self.terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                out[tuple(ne)] = c * e[i]
        return Poly(out, self.variables)

    def shift_down(self, i: int, k: int) -> "Poly":
        """Divide by ``var_i**k``; raises if not divisible."""
        out = {}
        for e, c in self.terms.items():
            if e[i] < k:
                raise ValueError(f"not divisible by {self.variables[i]}^{k}")
            ne = list(e)
            ne[i] -= k
            out[tuple(ne)] = c
        return Poly(out, self.variables)

    def compose(self, subs: Sequence["Poly"]) -> "Poly":
        """Substitute polynomial ``subs[i]`` for variable ``i``."""
        if len(subs) != self.nvars:
            raise ValueError("need one substitution per variable")
        target = subs[0].variables
        result = Poly.zero(target)
        pow_cache: dict = {}

        def power(i, k):
            key = (i, k)
            if key not in pow_cache:
                pow_cache[key] = subs[i] ** k
            return pow_cache[key]

        for e, c in self.terms.items():
            term = Poly.const(c, target)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            result = result + term
        return result

    def with_variables(self, variables: Sequence[str]) -> "Poly":
        return Poly(self.terms, tuple(variables))

    def embed(self, nvars: int, positions: Sequence[int], variables) -> "Poly":
        """Map into a larger ring, sending variable ``j`` to ``positions[j]``."""
        out = {}
        for e, c in self.terms.items():
            ne = [0] * nvars
            for j, k in enumerate(e):
                ne[positions[j]] += k
            out[tuple(ne)] = c
        return Poly(out, variables)

    def map_coeffs(self, f) -> "Poly":
        return Poly({e: f(c) for e, c in self.terms.items()}, self.variables)

    # evaluation ---------------------------------------------------------
    def _float_terms(self):
        ft = self.__dict__.get("_ft")
        if ft is None:
            ft = [(complex(c) if isinstance(c, complex) else float(c),
                   tuple((i, k) for i, k in enumerate(e) if k))
                  for e, c in self.terms.items()]
            object.__setattr__(self, "_ft", ft)
        return ft

    def __call__(self, *args):
        if len(args) != self.nvars:
            raise TypeError(f"expected {self.nvars} arguments")
        if all(isinstance(a, (int, Fraction)) for a in args) and self.is_exact():
            total = Fraction(0)
            for e, c in self.terms.items():
                term = c
                for a, k in zip(args, e):
                    if k:
                        term *= Fraction(a) ** k
                total += term
            return total
        ft = self._float_terms()
        if any(isinstance(a, np.ndarray) for a in args):
            shape = np.broadcast(*args).shape
            coeff_type = complex if any(isinstance(c, complex) for c, _ in ft) else float
            dtype = np.result_type(*[np.asarray(a).dtype for a in args], coeff_type)
            total = np.zeros(shape, dtype=dtype)
            for c, idx in ft:
                term = c
                for i, k in idx:
                    term = term * args[i] ** k
                total = total + term
            return total
        total = 0.0
        for c, idx in ft:
            term = c
            for i, k in idx:
                term *= args[i] ** k
            total += term
        return total

    def abs_eval(self, *args):
        """Sum of |c| |x|^i |y|^j: the rounding scale of an evaluation."""
        return self.map_coeffs(lambda c: abs(complex(c)))(*[np.abs(a) for a in args])

    # printing -----------------------------------------------------------
    def sorted_terms(self) -> list:
        """Terms in canonical order: total degree descending, then lex descending."""
        return sorted(self.terms.items(), key=lambda it: (-sum(it[0]), tuple(-k for k in it[0])))

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.sorted_terms():
            mono = "*".join(
                v if k == 1 else f"{v}^{k}" for v, k in zip(self.variables, e) if k
            )
            neg, mag = _split_sign(c)
            if mono:
                coef = "" if mag == 1 else f"{_fmt_coeff(mag)}*"
                body = coef + mono
            else:
                body = _fmt_coeff(mag)
            parts.append(("- " if neg else "+ ") + body)
        s = " ".join(parts)
        return s[2:] if s.startswith("+ ") else "-" + s[2:]

    def __repr__(self) -> str:
        return f"Poly({str(self)!r}, variables={self.variables})"


def _split_sign(c):
    if isinstance(c, complex):
        return False, c
    return (c < 0), abs(c)


def _fmt_coeff(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"({c})"
    if isinstance(c, complex):
        return f"({c.real!r}{c.imag:+}j)"
    return repr(float(c))


BivarPoly = Poly
TriPoly = Poly


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------


class PolySyntaxError(ValueError):
    """Malformed polynomial text; ``pos`` is the 0-based character offset."""

    def __init__(self, message: str, text: str, pos: int):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}: {text!r}")


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise PolySyntaxError(f"unexpected character {text[bad]!r}", text, bad)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        val = m.group(kind)
        if kind == "op" and val == "**":
            val = "^"
        yield kind, val, start
        pos = m.end()
    yield "end", None, n


class _Parser:
    _BINARY = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}

    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.variables = tuple(variables)
        self.tokens = list(_tokenize(text))
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, msg, pos=None):
        raise PolySyntaxError(msg, self.text, self.tok[2] if pos is None else pos)

    def parse(self) -> Poly:
        if self.tok[0] == "end":
            self.error("empty expression")
        p = self.expr(0)
        if self.tok[0] != "end":
            self.error(f"unexpected token {self.tok[1]!r}")
        return p

    def expr(self, rbp: int) -> Poly:
        left = self.prefix()
        while True:
            kind, val, pos = self.tok
            if kind == "op" and val in self._BINARY and self._BINARY[val] > rbp:
                self.advance()
                if val == "^":
                    left = left ** self.exponent()
                    continue
                right = self.expr(self._BINARY[val])
                if val == "+":
                    left = left + right
                elif val == "-":
                    left = left - right
                elif val == "*":
                    left = left * right
                else:
                    if not right.is_constant():
                        self.error("division by a non-constant expression", pos)
                    if right.is_zero():
                        self.error("division by zero", pos)
                    left = left / right
            elif kind in ("num", "name") or (kind == "op" and val == "("):
                # implicit multiplication, e.g. "2x" or "(x)(y)"
                right = self.expr(self._BINARY["*"])
                left = left * right
            else:
                return left

    def exponent(self) -> int:
        kind, val, pos = self.tok
        sign = 1
        if kind == "op" and val == "-":
            self.error("negative exponent")
        if kind == "op" and val == "(":
            self.advance()
            n = self.exponent()
            if self.tok[1] != ")":
                self.error("expected ')'")
            self.advance()
            return n
        if kind != "num":
            self.error("exponent must be a nonnegative integer literal")
        self.advance()
        if not val.isdigit():
            self.error("fractional exponent", pos)
        return sign * int(val)

    def prefix(self) -> Poly:
        kind, val, pos = self.advance()
        if kind == "num":
            return Poly.const(Fraction(val), self.variables)
        if kind == "name":
            if val not in self.variables:
                self.error(f"unknown identifier {val!r}", pos)
            return Poly.var(self.variables.index(val), self.variables)
        if kind == "op" and val == "(":
            inner = self.expr(0)
            if self.tok[1] != ")":
                self.error("expected ')'")
            self.advance()
            return inner
        if kind == "op" and val in "+-":
            operand = self.expr(25)  # binds tighter than * but looser than ^
            return operand if val == "+" else -operand
        if kind == "end":
            self.error("unexpected end of expression", pos)
        self.error(f"unexpected token {val!r}", pos)


def parse_poly(text: str, variables: Sequence[str] = XY) -> Poly:
    """Parse an arithmetic expression into an expanded polynomial.

    Supports ``+ - * ^`` (``**`` accepted), parentheses, integer/decimal
    literals and division by constants (so ``1/2`` is a rational literal).
    Decimal literals are read exactly, e.g. ``0.1`` becomes ``1/10``.
    """
    return _Parser(text, variables).parse()
