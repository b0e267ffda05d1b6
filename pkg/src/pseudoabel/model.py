"""Darboux systems, the slow-fast family of forms and its first integral.

The family is

    omega_eps = P0 * sum_i a_i (M / P_i) dP_i + eps * M dP0,   M = prod P_i,

with multivalued first integral ``H_eps = prod P_i^{a_i} * P0^eps``.  All
pointwise evaluators accept complex points so the same code serves real ovals
and cycles lifted to complex leaves.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property

import numpy as np

from .poly import Poly, parse_poly

__all__ = [
    "DarbouxSystem",
    "OneForm",
    "CriticalPoint",
    "LeafBoundaryError",
    "ConvergenceError",
    "DegenerateContactError",
    "model_system",
    "model_center",
    "model_center_value",
    "omega_coefficients",
    "eval_log_H",
    "factor_logs",
    "grad_log_H",
    "find_center",
    "find_turning_point",
]

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50


class LeafBoundaryError(ValueError):
    """A factor of the first integral vanishes at the requested point."""


class ConvergenceError(RuntimeError):
    """Newton-type iteration failed to converge."""


class DegenerateContactError(ValueError):
    """The slow manifold has contact of order >= 3 with the fast foliation."""


@dataclass(frozen=True)
class OneForm:
    """Polynomial 1-form ``a dx + b dy``."""

    a: Poly
    b: Poly

    @classmethod
    def parse(cls, dx: str, dy: str) -> "OneForm":
        return cls(parse_poly(dx), parse_poly(dy))

    @classmethod
    def exact(cls, f: Poly) -> "OneForm":
        return cls(f.diff(0), f.diff(1))

    @property
    def degree(self) -> int:
        return max(self.a.degree(), self.b.degree())

    def __add__(self, other: "OneForm") -> "OneForm":
        return OneForm(self.a + other.a, self.b + other.b)

    def __mul__(self, c) -> "OneForm":
        return OneForm(self.a * c, self.b * c)

    __rmul__ = __mul__

    def __call__(self, x, y):
        return self.a(x, y), self.b(x, y)


@dataclass(frozen=True)
class DarbouxSystem:
    """The datum ``{P0, (P_i, a_i), eps}`` plus an optional perturbation form.

    ``domain`` is ``(xmin, xmax, ymin, ymax)`` and must contain the region
    bounded by the polycycle.
    """

    p0: Poly
    factors: tuple
    epsilon: float
    domain: tuple = (-2.0, 2.0, -1.0, 2.0)
    eta: OneForm | None = None

    def __post_init__(self):
        facs = tuple((p, float(a)) for p, a in self.factors)
        if not facs:
            raise ValueError("need at least one factor P_i")
        for _, a in facs:
            if not a > 0:
                raise ValueError(f"exponent a_i must be positive, got {a}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        object.__setattr__(self, "factors", facs)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "domain", tuple(float(v) for v in self.domain))

    def with_epsilon(self, eps: float) -> "DarbouxSystem":
        return replace(self, epsilon=eps)

    def with_eta(self, eta: OneForm) -> "DarbouxSystem":
        return replace(self, eta=eta)

    @property
    def polys(self) -> list[Poly]:
        """``[P0, P1, ..., Pk]``"""
        return [self.p0] + [p for p, _ in self.factors]

    @property
    def exponents(self) -> np.ndarray:
        """``[eps, a1, ..., ak]``, aligned with :attr:`polys`."""
        return np.array([self.epsilon] + [a for _, a in self.factors])

    @cached_property
    def M(self) -> Poly:
        m = Poly.const(1)
        for p, _ in self.factors:
            m = m * p
        return m

    @cached_property
    def _grads(self):
        return [(p.diff(0), p.diff(1)) for p in self.polys]

    @cached_property
    def omega(self) -> OneForm:
        """Polynomial coefficients of omega_eps (float exponents allowed)."""
        return omega_form(self, self.epsilon)

    @cached_property
    def omega0(self) -> OneForm:
        """omega_0 = M dH0/H0, the fast foliation."""
        a, b = Poly.zero(), Poly.zero()
        for i, (p, ai) in enumerate(self.factors):
            rest = Poly.const(_exact(ai))
            for j, (q, _) in enumerate(self.factors):
                if j != i:
                    rest = rest * q
            a = a + rest * p.diff(0)
            b = b + rest * p.diff(1)
        return OneForm(a, b)

    def in_domain(self, x, y) -> bool:
        x0, x1, y0, y1 = self.domain
        return x0 <= x <= x1 and y0 <= y <= y1


def _exact(a: float):
    f = Fraction(a)
    return f if f.denominator < 10**6 else a


def omega_form(sys: DarbouxSystem, eps) -> OneForm:
    """``omega_eps`` expanded polynomially; ``eps`` may be a number or a Poly."""
    dfast = sys.omega0
    p0 = sys.p0
    if not isinstance(eps, Poly):
        eps = _exact(eps) if isinstance(eps, float) else eps
    a = p0 * dfast.a + eps * sys.M * p0.diff(0)
    b = p0 * dfast.b + eps * sys.M * p0.diff(1)
    return OneForm(a, b)


def model_system(epsilon: float = 0.5, eta: OneForm | None = None) -> DarbouxSystem:
    """P0 = y - x^2, P1 = 1 - y, a1 = 1: the turning-point model."""
    return DarbouxSystem(
        p0=parse_poly("y - x^2"),
        factors=((parse_poly("1 - y"), 1.0),),
        epsilon=epsilon,
        domain=(-1.5, 1.5, -0.5, 1.5),
        eta=eta,
    )


def model_center(eps: float) -> tuple[float, float]:
    return 0.0, eps / (1.0 + eps)


def model_center_value(eps: float) -> float:
    """Closed form t_eps = (1+eps)^-1 (1+1/eps)^-eps for the model."""
    return (1.0 + eps) ** -1 * (1.0 + 1.0 / eps) ** -eps


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple
    value_t: float
    kind: str  # "center" | "saddle" | "tangency"
    residual: float = 0.0
    iterations: int = 0
    notes: tuple = ()


# --------------------------------------------------------------------------
# pointwise evaluators
# --------------------------------------------------------------------------


def omega_coefficients(sys: DarbouxSystem, point) -> tuple:
    """(A, B) with omega_eps = A dx + B dy at ``point``; purely polynomial."""
    x, y = point
    vals = [p(x, y) for p in sys.polys]
    grads = [(gx(x, y), gy(x, y)) for gx, gy in sys._grads]
    eps = sys.epsilon
    p0 = vals[0]
    k = len(sys.factors)
    A = 0.0
    B = 0.0
    for i in range(1, k + 1):
        rest = sys.factors[i - 1][1]
        for j in range(1, k + 1):
            if j != i:
                rest = rest * vals[j]
        A = A + p0 * rest * grads[i][0]
        B = B + p0 * rest * grads[i][1]
    m = 1.0
    for j in range(1, k + 1):
        m = m * vals[j]
    A = A + eps * m * grads[0][0]
    B = B + eps * m * grads[0][1]
    return A, B


def factor_logs(sys: DarbouxSystem, point, windings=None) -> np.ndarray:
    """Branch-tracked logarithms ``log P_j + 2 pi i w_j`` for ``[P0, P1, ...]``."""
    x, y = point
    out = np.empty(len(sys.polys), dtype=complex)
    for j, p in enumerate(sys.polys):
        v = p(x, y)
        if v == 0:
            raise LeafBoundaryError(f"factor {j} vanishes at {point}")
        out[j] = cmath.log(v)
    if windings is not None:
        out = out + 2j * math.pi * np.asarray(windings)
    return out


def eval_log_H(sys: DarbouxSystem, point, windings=None) -> complex:
    """log H_eps = eps log P0 + sum a_i log P_i on the branch fixed by ``windings``.

    ``windings`` lists one integer per factor in the order ``[P0, P1, ...]``;
    ``None`` means principal logarithms everywhere.
    """
    logs = factor_logs(sys, point, windings)
    return complex(np.dot(sys.exponents, logs))


def grad_log_H(sys: DarbouxSystem, point) -> tuple:
    """Holomorphic gradient (d/dx, d/dy) of log H_eps, i.e. omega_eps / (P0 M)."""
    x, y = point
    gx = 0.0
    gy = 0.0
    for e, p, (px, py) in zip(sys.exponents, sys.polys, sys._grads):
        v = p(x, y)
        if v == 0:
            raise LeafBoundaryError(f"factor vanishes at {point}")
        gx = gx + e * px(x, y) / v
        gy = gy + e * py(x, y) / v
    return gx, gy


def _jacobian(sys: DarbouxSystem, point):
    """Jacobian of (A, B) by exact polynomial derivatives."""
    om = sys.omega
    x, y = point
    return np.array(
        [
            [om.a.diff(0)(x, y), om.a.diff(1)(x, y)],
            [om.b.diff(0)(x, y), om.b.diff(1)(x, y)],
        ],
        dtype=float,
    )


def _newton_zero(sys, seed, tol=NEWTON_TOL, maxit=NEWTON_MAXIT):
    z = np.array(seed, dtype=float)
    A, B = omega_coefficients(sys, z)
    res = math.hypot(A, B)
    for it in range(1, maxit + 1):
        J = _jacobian(sys, z)
        try:
            step = np.linalg.solve(J, -np.array([A, B]))
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian at {z}") from exc
        lam = 1.0
        while True:
            trial = z + lam * step
            At, Bt = omega_coefficients(sys, trial)
            rt = math.hypot(At, Bt)
            if rt < res or lam < 1e-6:
                break
            lam *= 0.5
        z, A, B, res = trial, At, Bt, rt
        scale = 1.0 + np.abs(J).max() * (1.0 + np.abs(z).max())
        if res <= tol * scale or np.linalg.norm(lam * step) < 1e-15 * (1 + np.abs(z).max()):
            return z, res, it
    raise ConvergenceError(f"Newton did not converge from {seed} (residual {res:.3e})")


def _classify(sys, z) -> str:
    # linearisation of the dual field X = (B, -A)
    J = _jacobian(sys, z)
    L = np.array([J[1], -J[0]])
    det = np.linalg.det(L)
    if det < 0:
        return "saddle"
    return "center"


def find_center(sys: DarbouxSystem, seed) -> CriticalPoint:
    """Newton on omega_eps = 0 from ``seed``; classify and evaluate H_eps there."""
    if sys.epsilon <= 0:
        raise ValueError("find_center needs epsilon > 0")
    if not sys.in_domain(*seed):
        raise ValueError(f"seed {seed} outside domain")
    z, res, it = _newton_zero(sys, seed)
    if not sys.in_domain(*z):
        raise ConvergenceError(f"converged point {tuple(z)} left the domain")
    kind = _classify(sys, z)
    if kind != "center":
        raise ConvergenceError(f"critical point at {tuple(z)} is a {kind}, not a center")
    notes = []
    vals = [p(*z) for p in sys.polys]
    if any(v <= 0 for v in vals):
        notes.append("nonpositive factor at center: " + ", ".join(f"{v:.3g}" for v in vals))
        value = abs(math.exp(eval_log_H(sys, tuple(z)).real))
    else:
        value = math.exp(eval_log_H(sys, tuple(z)).real)
    return CriticalPoint((float(z[0]), float(z[1])), value, kind, res, it, tuple(notes))


def orient_factors(sys: DarbouxSystem, center: CriticalPoint) -> tuple[DarbouxSystem, list[str]]:
    """Negate factors that are negative at the center so the nest is {all P > 0}."""
    x, y = center.location
    report = []
    p0 = sys.p0
    if p0(x, y) < 0:
        p0 = -p0
        report.append("P0 negated")
    facs = []
    for i, (p, a) in enumerate(sys.factors, start=1):
        if p(x, y) < 0:
            p = -p
            report.append(f"P{i} negated")
        facs.append((p, a))
    return replace(sys, p0=p0, factors=tuple(facs)), report


def find_turning_point(sys: DarbouxSystem, grid: int = 41) -> CriticalPoint:
    """Tangency of {P0 = 0} with the fast foliation omega_0, with a contact-order check.

    Solves ``P0 = 0`` together with ``omega_0 wedge dP0 = 0`` by Newton from
    the best points of a grid scan of the domain.  Quadratic contact is
    verified by restricting P0 to the fast leaf through the point.
    """
    om0 = sys.omega0
    p0 = sys.p0
    wedge = om0.a * p0.diff(1) - om0.b * p0.diff(0)
    F = [p0, wedge]
    Jac = [[f.diff(0), f.diff(1)] for f in F]
    x0, x1, y0, y1 = sys.domain
    xs = np.linspace(x0, x1, grid)
    ys = np.linspace(y0, y1, grid)
    X, Y = np.meshgrid(xs, ys)
    merit = np.abs(p0(X, Y)) + np.abs(wedge(X, Y))
    order = np.argsort(merit, axis=None)[: 4 * grid]
    found: list = []
    for idx in order:
        z = np.array([X.flat[idx], Y.flat[idx]])
        ok = False
        for _ in range(NEWTON_MAXIT):
            r = np.array([f(*z) for f in F], dtype=float)
            if np.abs(r).max() < NEWTON_TOL:
                ok = True
                break
            J = np.array([[g(*z) for g in row] for row in Jac], dtype=float)
            try:
                z = z - np.linalg.lstsq(J, r, rcond=None)[0]
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(z)):
                break
        if ok and sys.in_domain(*z) and all(np.hypot(*(z - f)) > 1e-7 for f in found):
            found.append(z)
    if not found:
        raise ConvergenceError("no turning point in domain")
    z = found[0]
    notes = ()
    if len(found) > 1:
        notes = (f"{len(found)} turning points in domain; returning the first",)
    # contact order: P0 along the omega_0-leaf through z, parametrised by arc s
    # leaf tangent v = (b, -a) of omega_0; second-order term
    # d2/ds2 P0(z(s)) = v^T Hess(P0) v + grad(P0) . z''(s)
    a, b = om0.a(*z), om0.b(*z)
    v = np.array([b, -a], dtype=float)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise DegenerateContactError("fast foliation singular at the tangency")
    v /= nv
    second = _second_order_along_leaf(sys, z, v)
    scale = 1.0 + max(abs(float(c)) for c in p0.terms.values())
    if abs(second) < 1e-5 * scale:
        raise DegenerateContactError(f"contact at {tuple(z)} is not quadratic")
    return CriticalPoint((float(z[0]), float(z[1])), 0.0, "tangency", 0.0, 0, notes)


def _second_order_along_leaf(sys, z, v, h=1e-3):
    """Second derivative of P0 along the omega_0 leaf through z (Richardson-refined)."""

    def leaf_point(s):
        # integrate the unit dual field of omega_0 with RK4
        p = np.array(z, dtype=float)
        n = 8
        ds = s / n
        om0 = sys.omega0

        def f(q):
            w = np.array([om0.b(*q), -om0.a(*q)], dtype=float)
            w /= np.linalg.norm(w)
            if np.dot(w, v) < 0:
                w = -w
            return w

        for _ in range(n):
            k1 = f(p)
            k2 = f(p + 0.5 * ds * k1)
            k3 = f(p + 0.5 * ds * k2)
            k4 = f(p + ds * k3)
            p = p + ds / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return p

    def d2(hh):
        return (sys.p0(*leaf_point(hh)) - 2 * sys.p0(*z) + sys.p0(*leaf_point(-hh))) / hh**2

    return (4 * d2(h / 2) - d2(h)) / 3
