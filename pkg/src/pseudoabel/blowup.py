"""Weighted family blow-up of the turning point in (x, y, eps)-space.

Charts of the (1:2:2) blow-up (any positive weights are accepted):

    U1: x = t1^wx,      y = t1^wy Y1,  eps = t1^we E1
    U2: x = t2^wx X2,   y = t2^wy,     eps = t2^we E2
    U3: x = t3^wx X3,   y = t3^wy Y3,  eps = t3^we

The foliation ``{omega_eps = 0, d eps = 0}`` is given by the 2-form
``sigma = omega_eps ^ d eps``; its pull-back divided by the largest common
power of the divisor coordinate is the strict transform ``sigma~``.

2-forms are stored in a per-chart basis ordered so the printed monomials
read like the classical formulas: U1 uses (E1, t1, Y1), U2 uses (E2, t2, X2),
U3 uses (t3, X3, Y3).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import ndimage

from .model import DarbouxSystem
from .poly import Poly, parse_poly

__all__ = [
    "Weights",
    "ChartPoint",
    "TwoForm3",
    "PullbackResult",
    "SingularFeature",
    "CHART_COORDS",
    "CHART_BASIS",
    "blow_down",
    "chart_transition",
    "family_omega",
    "toy_omega",
    "pullback_sigma",
    "singular_locus",
    "eval_s_integral",
    "center_family_s",
    "MODEL_GOLDENS",
    "TOY_BASIS",
    "golden_form",
    "toy_golden_form",
    "forms_equal",
]

XYE = ("x", "y", "eps")

# coordinate names of ChartPoint.coords (paper order)
CHART_COORDS = {
    "U1": ("Y1", "E1", "t1"),
    "U2": ("X2", "E2", "t2"),
    "U3": ("X3", "Y3", "t3"),
}
# basis order of TwoForm3 in each chart
CHART_BASIS = {
    "U1": ("E1", "t1", "Y1"),
    "U2": ("E2", "t2", "X2"),
    "U3": ("t3", "X3", "Y3"),
}


@dataclass(frozen=True)
class Weights:
    wx: int = 1
    wy: int = 2
    we: int = 2

    def __post_init__(self):
        if min(self.wx, self.wy, self.we) <= 0:
            raise ValueError("weights must be positive integers")

    def as_tuple(self):
        return (self.wx, self.wy, self.we)


@dataclass(frozen=True)
class ChartPoint:
    chart: str
    coords: tuple

    def __post_init__(self):
        if self.chart not in CHART_COORDS:
            raise ValueError(f"unknown chart {self.chart!r}")
        if len(self.coords) != 3:
            raise ValueError("chart points have three coordinates")

    def named(self) -> dict:
        return dict(zip(CHART_COORDS[self.chart], self.coords))

    @property
    def t(self):
        return self.coords[2]


def _chart_index(chart: str) -> int:
    return {"U1": 0, "U2": 1, "U3": 2}[chart]


def _projective(p: ChartPoint):
    """Weighted-projective representative (vx, vy, ve) of a chart point, plus t."""
    a, b, t = p.coords
    k = _chart_index(p.chart)
    if k == 0:
        v = (1, a, b)  # (1, Y1, E1)
    elif k == 1:
        v = (a, 1, b)  # (X2, 1, E2)
    else:
        v = (a, b, 1)  # (X3, Y3, 1)
    return v, t


def blow_down(p: ChartPoint, w: Weights = Weights()) -> tuple:
    """Image (x, y, eps) of a chart point under the blow-down map."""
    v, t = _projective(p)
    return tuple(vi * t**wi for vi, wi in zip(v, w.as_tuple()))


def _root(z, n):
    """Principal n-th root; positive on positive reals."""
    if isinstance(z, (int, float, Fraction)) and z > 0:
        return float(z) ** (1.0 / n)
    return cmath.exp(cmath.log(complex(z)) / n)


@dataclass(frozen=True)
class Transition:
    point: ChartPoint
    scale: complex  # lambda with v' = lambda^w . v and t' = t / lambda

    @property
    def deck_sign(self) -> int:
        """+1 when the principal root was real positive (no deck twist)."""
        lam = complex(self.scale)
        return 1 if abs(lam.imag) < 1e-15 * abs(lam) and lam.real > 0 else -1


def chart_transition(p: ChartPoint, target: str, w: Weights = Weights()) -> Transition:
    """Move a point to another chart using principal roots.

    The result satisfies ``blow_down(result) == blow_down(p)``.  The other
    preimage on the double cover is obtained with ``-scale`` (for the
    1:2:2 weights).
    """
    if target not in CHART_COORDS:
        raise ValueError(f"unknown chart {target!r}")
    v, t = _projective(p)
    k = _chart_index(target)
    ws = w.as_tuple()
    if v[k] == 0:
        raise ValueError(f"transition {p.chart} -> {target} undefined: coordinate vanishes")
    lam = _root(v[k], ws[k])
    lam = 1.0 / lam
    nv = [vi * lam**wi for vi, wi in zip(v, ws)]
    nt = t / lam
    nv = [_simplify(c) for c in nv]
    nt = _simplify(nt)
    if k == 0:
        coords = (nv[1], nv[2], nt)
    elif k == 1:
        coords = (nv[0], nv[2], nt)
    else:
        coords = (nv[0], nv[1], nt)
    return Transition(ChartPoint(target, coords), lam)


def _simplify(z):
    if isinstance(z, complex) and z.imag == 0:
        return z.real
    return z


# --------------------------------------------------------------------------
# 2-forms and pull-backs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoForm3:
    """``c12 dv1^dv2 + c13 dv1^dv3 + c23 dv2^dv3`` in the basis ``variables``."""

    c12: Poly
    c13: Poly
    c23: Poly
    variables: tuple

    def coefficients(self):
        return (self.c12, self.c13, self.c23)

    def coefficient(self, a: str, b: str) -> Poly:
        """Coefficient of ``da ^ db`` (sign flips for reversed order)."""
        i, j = self.variables.index(a), self.variables.index(b)
        if i == j:
            return Poly.zero(self.variables)
        sign = 1 if i < j else -1
        i, j = sorted((i, j))
        c = {(0, 1): self.c12, (0, 2): self.c13, (1, 2): self.c23}[(i, j)]
        return c * sign

    def matrix(self, *point) -> np.ndarray:
        """Antisymmetric 3x3 coefficient matrix at a point (basis order)."""
        a, b, c = (complex(q(*point)) for q in self.coefficients())
        return np.array([[0, a, b], [-a, 0, c], [-b, -c, 0]], dtype=complex)

    def __str__(self) -> str:
        v = self.variables
        parts = []
        for c, (i, j) in zip(self.coefficients(), [(0, 1), (0, 2), (1, 2)]):
            if not c.is_zero():
                parts.append(f"({c}) d{v[i]}^d{v[j]}")
        return " + ".join(parts) if parts else "0"


def family_omega(sys: DarbouxSystem) -> tuple[Poly, Poly]:
    """Coefficients (A, B) of omega_eps as polynomials in (x, y, eps)."""
    lift = lambda p: p.embed(3, (0, 1), XYE)
    p0 = lift(sys.p0)
    eps = Poly.var(2, XYE)
    om0 = sys.omega0
    M = lift(sys.M)
    A = p0 * lift(om0.a) + eps * M * p0.diff(0)
    B = p0 * lift(om0.b) + eps * M * p0.diff(1)
    return A, B


def toy_omega(a) -> tuple[Poly, Poly]:
    """``x d(1 - y + a x) + eps (1 - y + a x) dx`` in (x, y, eps)."""
    x, y, e = Poly.gens(XYE)
    L = 1 - y + x * a
    return x * L.diff(0) + e * L, x * L.diff(1)


def _chart_map(chart: str, w: Weights, names=None):
    names = names or CHART_BASIS[chart]
    u = Poly.gens(tuple(names))
    if chart == "U1":
        E, t, Y = u
        return (t**w.wx, t**w.wy * Y, t**w.we * E), 1
    if chart == "U2":
        E, t, X = u
        return (t**w.wx * X, t**w.wy, t**w.we * E), 1
    t, X, Y = u
    return (t**w.wx * X, t**w.wy * Y, t**w.we), 0


@dataclass(frozen=True)
class PullbackResult:
    form: TwoForm3
    divisor_order: int
    coefficient_orders: tuple
    chart: str
    weights: Weights


def pullback_sigma(omega, chart: str, w: Weights = Weights(), names: Sequence[str] | None = None
                   ) -> PullbackResult:
    """Strict transform of ``sigma = omega ^ d eps`` in one chart.

    ``omega`` is a :class:`DarbouxSystem` or a pair ``(A, B)`` of polynomials
    in (x, y, eps).  Returns the form divided by ``t^k`` with ``k`` the largest
    common divisor order, and the per-coefficient orders.
    """
    if isinstance(omega, DarbouxSystem):
        A, B = family_omega(omega)
    else:
        A, B = omega
    (fx, fy, fe), tpos = _chart_map(chart, w, names)
    As = A.compose([fx, fy, fe])
    Bs = B.compose([fx, fy, fe])
    coeffs = []
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        dxe = fx.diff(i) * fe.diff(j) - fx.diff(j) * fe.diff(i)
        dye = fy.diff(i) * fe.diff(j) - fy.diff(j) * fe.diff(i)
        coeffs.append(As * dxe + Bs * dye)
    orders = tuple(None if c.is_zero() else c.min_order(tpos) for c in coeffs)
    present = [o for o in orders if o is not None]
    if not present:
        raise ValueError("pulled-back form vanishes identically")
    k = min(present)
    reduced = [c if c.is_zero() else c.shift_down(tpos, k) for c in coeffs]
    variables = coeffs[0].variables
    return PullbackResult(TwoForm3(*reduced, variables), k, orders, chart, w)


# --------------------------------------------------------------------------
# singular locus
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SingularFeature:
    kind: str  # "curve" | "point"
    points: np.ndarray  # (m, 3) in basis order


def _polish(coeffs, grads, z, fixed=None, maxit=300):
    """Gauss-Newton (minimum-norm) onto the common zero set of the coefficients.

    ``fixed`` freezes one coordinate so that samples on a zero curve stay at
    their grid slice instead of drifting along the curve.
    """
    free = [k for k in range(3) if k != fixed]
    for _ in range(maxit):
        r = np.array([float(c(*z)) for c in coeffs])
        if not r.any():
            break
        J = np.array([[float(row[k](*z)) for k in free] for row in grads])
        dz = np.zeros(3)
        dz[free] = np.linalg.lstsq(J, -r, rcond=1e-12)[0]
        z = z + dz
        # keep going on small residuals: at a multiple root the residual is
        # tiny long before the position has converged
        if np.linalg.norm(dz) < 1e-14 * (1 + np.linalg.norm(z)):
            break
    r = np.array([float(c(*z)) for c in coeffs])
    return z, float(np.max(np.abs(r)))


def singular_locus(form: TwoForm3, region: Sequence[tuple], grid: int = 50,
                   residual_tol: float = 1e-11) -> list[SingularFeature]:
    """Common real zeros of the three coefficients inside a box.

    ``region`` gives ``(lo, hi)`` per basis variable.  Candidates are grid
    local minima of the coefficient norm, polished by Gauss-Newton and
    clustered; clusters with several aligned samples are reported as curves.
    """
    coeffs = [c for c in form.coefficients() if not c.is_zero()]
    if not coeffs:
        raise ValueError("form vanishes identically")
    axes = [np.linspace(lo, hi, grid) for lo, hi in region]
    G = np.meshgrid(*axes, indexing="ij")
    norm2 = sum(np.abs(c(*G)) ** 2 for c in coeffs)
    # a point on a zero curve is a local minimum transversally, i.e. in some
    # coordinate plane, though not necessarily along the curve itself
    plane_axis = np.full(norm2.shape, -1)
    for ax in range(3):
        fp = np.ones((3, 3, 3), dtype=bool)
        idx = [slice(None)] * 3
        idx[ax] = [0, 2]
        fp[tuple(idx)] = False
        is_min = norm2 == ndimage.minimum_filter(norm2, footprint=fp, mode="nearest")
        plane_axis[is_min & (plane_axis < 0)] = ax
    cutoff = np.quantile(norm2, 0.05)
    cand = np.argwhere((plane_axis >= 0) & (norm2 <= cutoff))
    grads = [[c.diff(k) for k in range(3)] for c in coeffs]
    spacing = max((hi - lo) / (grid - 1) for lo, hi in region)
    found = []
    for idx in cand:
        z0 = np.array([axes[k][idx[k]] for k in range(3)])
        # curve samples keep their grid slice; isolated points need all coordinates free
        for fixed in (plane_axis[tuple(idx)], None):
            z, res = _polish(coeffs, grads, z0, fixed=fixed)
            if res <= residual_tol and np.linalg.norm(z - z0) <= 3 * spacing:
                break
        else:
            continue
        inside = all(lo - 1e-9 <= z[k] <= hi + 1e-9 for k, (lo, hi) in enumerate(region))
        if inside and all(np.linalg.norm(z - f) > 0.3 * spacing for f in found):
            found.append(z)
    if not found:
        return []
    pts = np.array(found)
    # single-linkage clustering at a few grid spacings
    n = len(pts)
    labels = -np.ones(n, dtype=int)
    cur = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = cur
        while stack:
            j = stack.pop()
            d = np.linalg.norm(pts - pts[j], axis=1)
            for k in np.nonzero((d < 3 * spacing) & (labels < 0))[0]:
                labels[k] = cur
                stack.append(k)
        cur += 1
    out = []
    for lab in range(cur):
        P = pts[labels == lab]
        P = P[np.lexsort(P.T[::-1])]
        out.append(SingularFeature("curve" if len(P) >= 3 else "point", P))
    return out


# --------------------------------------------------------------------------
# first integral in chart U3
# --------------------------------------------------------------------------


def eval_s_integral(p: ChartPoint | tuple):
    """``s = (1 - t^2 Y)^(1/t^2) (Y - X^2)`` in chart U3, with its t -> 0 limit.

    Accepts a :class:`ChartPoint` in U3 or arrays ``(X3, Y3, t3)``.  The power
    is evaluated as ``exp(log1p(-t^2 Y) / t^2)`` so small ``t`` loses nothing;
    at ``t = 0`` the value is ``exp(-Y) (Y - X^2)``.
    """
    if isinstance(p, ChartPoint):
        if p.chart != "U3":
            raise ValueError("s is defined in chart U3")
        X, Y, t = p.coords
    else:
        X, Y, t = p
    X, Y, t = (np.asarray(v) for v in (X, Y, t))
    u = t * t
    base = -u * Y
    cplx = np.iscomplexobj(base) or np.iscomplexobj(X)
    if not cplx and np.any(1 + base < 0):
        raise ValueError("1 - t^2 Y < 0: outside the real branch")
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = np.where(u == 0, -Y, np.log1p(base) / np.where(u == 0, 1, u))
    s = np.exp(expo) * (Y - X * X)
    return s.item() if s.ndim == 0 else s


def center_family_s(t3):
    """s along the line of centers X3 = 0, Y3 = 1/(1 + t3^2)."""
    t3 = np.asarray(t3, dtype=float)
    return eval_s_integral((0.0 * t3, 1.0 / (1.0 + t3 * t3), t3))


# --------------------------------------------------------------------------
# reference forms for the model system
# --------------------------------------------------------------------------

# coefficients (c12, c13, c23) in the CHART_BASIS order
MODEL_GOLDENS = {
    "U1": ("2*(Y1 - 1)*(Y1 - E1 + E1*t1^2*Y1)",
           "t1*(Y1 - 1 - E1 + E1*t1^2*Y1)",
           "2*E1*(Y1 - 1 - E1 + E1*t1^2*Y1)"),
    "U2": ("2*(1 - X2^2)*(1 - E2 + E2*t2^2)",
           "2*(1 - t2^2)*X2*E2*t2",
           "4*(1 - t2^2)*X2*E2^2"),
    "U3": ("4*X3*(1 - t3^2*Y3)",
           "-2*(1 + X3^2 - Y3 - t3^2*Y3)",
           "0"),
}
TOY_BASIS = ("E", "x", "Y")
TOY_GOLDEN = ("-a - E - a*E*x + Y + E*x*Y", "x", "E")


def golden_form(chart: str) -> TwoForm3:
    """Reference strict transform of the model in ``chart``."""
    v = CHART_BASIS[chart]
    return TwoForm3(*(parse_poly(c, v) for c in MODEL_GOLDENS[chart]), v)


def toy_golden_form(a) -> TwoForm3:
    a = Fraction(a)
    subs = f"({a.numerator}/{a.denominator})"
    return TwoForm3(*(parse_poly(c.replace("a", subs), TOY_BASIS) for c in TOY_GOLDEN), TOY_BASIS)


def forms_equal(f: TwoForm3, g: TwoForm3) -> bool:
    """Exact coefficient equality (same basis)."""
    return f.variables == g.variables and all(
        (a - b).is_zero() for a, b in zip(f.coefficients(), g.coefficients()))
