"""Counting zeros of t -> I_eps(t).

Three complementary tools: a real sign scan refined by root bracketing, the
argument principle over an annular sector Gamma in the t-plane, and the
reduction of arg-increments along the rays arg t = +-pi eps to sign changes
of Im I (equivalently of J).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .integrals import (IntegralResult, integrate_form_over_cycle, pseudo_abelian_I,
                        refine_cycle, variation_check)
from .model import DarbouxSystem, OneForm
from .tracer import TPath, TraceError, lift_cycle, locate_center, trace_oval

__all__ = [
    "Contour",
    "ZeroReport",
    "WindingResult",
    "SegmentCount",
    "WindingError",
    "center_value",
    "DirectEvaluator",
    "forced_zero_eta",
    "scan_zeros",
    "winding_number",
    "im_zero_count_on_segment",
    "estimate_leading_exponent",
]

NOISE_FACTOR = 10.0


class WindingError(RuntimeError):
    """A contour sample sits on a zero, or the winding cannot be certified."""


def center_value(sys: DarbouxSystem) -> float:
    return float(locate_center(sys).value_t)


@dataclass(frozen=True)
class Contour:
    """Boundary of the annular sector ``r <= |t| <= R, |arg t| <= half_angle``.

    Traversed positively: outer arc up, ray inward at ``+half_angle``, inner arc
    clockwise, ray outward at ``-half_angle``, outer arc back to ``R``.
    ``half_angle`` defaults to ``pi * epsilon``.
    """

    R_t_outer: float
    r_inner: float
    epsilon: float
    half_angle: float | None = None

    def __post_init__(self):
        if not 0 < self.r_inner < self.R_t_outer:
            raise ValueError("need 0 < r_inner < R_t_outer")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        h = self.angle
        if not 0 < h < math.pi:
            raise ValueError("half angle must lie in (0, pi)")

    @property
    def angle(self) -> float:
        return math.pi * self.epsilon if self.half_angle is None else float(self.half_angle)

    @classmethod
    def from_s_radius(cls, R_s: float, r_inner: float, epsilon: float, **kw) -> "Contour":
        """Outer radius given on the s-scale, translated by ``t = (eps s)^eps``."""
        return cls((epsilon * R_s) ** epsilon, r_inner, epsilon, **kw)

    def pieces(self) -> list[tuple]:
        h, R, r = self.angle, float(self.R_t_outer), float(self.r_inner)
        return [
            ("arc", R, 0.0, h),
            ("radial", h, R, r),
            ("arc", r, h, -h),
            ("radial", -h, r, R),
            ("arc", R, -h, 0.0),
        ]

    def validate_for(self, t_eps: float):
        if self.R_t_outer >= t_eps:
            raise ValueError(f"outer radius {self.R_t_outer} must stay below t_eps = {t_eps}")


def _sub_piece(p, a, b):
    if p[0] == "arc":
        _, r, t0, t1 = p
        return TPath.arc(r, t0 + a * (t1 - t0), t0 + b * (t1 - t0))
    _, phi, r0, r1 = p
    q = r1 / r0
    return TPath.radial(phi, r0 * q**a, r0 * q**b)


@dataclass
class ZeroReport:
    zeros: list  # (t, bracket width)
    count: int
    method: str
    identically_zero: bool
    epsilon: float = float("nan")
    t_eps: float = float("nan")
    samples: list = field(default_factory=list)  # (t, Re I, Im I, error, nodes)
    failures: list = field(default_factory=list)  # (t, message)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        ws = sorted(self.zeros)
        for (a, wa), (b, wb) in zip(ws, ws[1:]):
            if a + wa / 2 > b - wb / 2:
                raise ValueError("zero brackets overlap")
        if not self.identically_zero and self.count != len(self.zeros):
            raise ValueError("count must equal the number of zeros")

    def to_json(self) -> dict:
        return {
            "format": "pseudoabel.zeros/1",
            "method": self.method,
            "epsilon": self.epsilon,
            "t_eps": self.t_eps,
            "count": self.count,
            "identically_zero": self.identically_zero,
            "zeros": [{"t": t, "width": w} for t, w in self.zeros],
            "failures": [{"t": t, "error": m} for t, m in self.failures],
            "notes": list(self.notes),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def forced_zero_eta(sys: DarbouxSystem, t_mid: float, base: OneForm | None = None,
                    companion: OneForm | None = None) -> tuple[OneForm, float]:
    """``base - c companion`` with ``c`` chosen so that ``I`` vanishes at ``t_mid``.

    Defaults: ``base = x dy`` and ``companion = x y dy``.  (``dy`` itself is
    useless as a companion on x-symmetric systems: its integral vanishes.)
    """
    base = base or OneForm.parse("0", "x")
    companion = companion or OneForm.parse("0", "x*y")
    cyc = trace_oval(sys, t_mid)
    ib = integrate_form_over_cycle(sys, base, cyc).value.real
    ic = integrate_form_over_cycle(sys, companion, cyc).value.real
    if ic == 0:
        raise ValueError("companion integral vanishes at t_mid")
    c = ib / ic
    return base + companion * (-c), c


@dataclass(frozen=True)
class DirectEvaluator:
    """``t -> I(t)`` on the real axis; picklable so grids can run in worker processes."""

    sys: DarbouxSystem
    eta: OneForm
    tol: float = 1e-12

    def __call__(self, t: float) -> IntegralResult:
        return pseudo_abelian_I(self.sys, self.eta, t, tol=self.tol)


def _eval_real(args) -> tuple:
    evaluate, t = args
    try:
        r = evaluate(t)
        return (t, r.value.real, r.value.imag, r.error_estimate, r.nodes, None)
    except (TraceError, RuntimeError, ValueError) as exc:
        return (t, math.nan, math.nan, math.nan, 0, f"{type(exc).__name__}: {exc}")


def _sign(v, err):
    if not math.isfinite(v) or abs(v) <= NOISE_FACTOR * err:
        return 0
    return 1 if v > 0 else -1


def scan_zeros(sys: DarbouxSystem, eta: OneForm, t_lo: float, t_hi: float, grid_n: int = 32,
               tol: float = 1e-12, jobs: int = 1, t_eps: float | None = None,
               xtol_rel: float = 1e-8, evaluate=None) -> ZeroReport:
    """Sign scan of ``I`` on a uniform grid, then root refinement in each bracket.

    Values within ``NOISE_FACTOR`` times the quadrature error are treated as
    sign-indeterminate; brackets straddle them.  Only odd-multiplicity zeros
    are visible to a sign scan.  ``evaluate`` (``t -> IntegralResult``)
    replaces the direct evaluation, e.g. by a cached one.
    """
    evaluate = evaluate or DirectEvaluator(sys, eta, tol)
    if grid_n < 8:
        raise ValueError("grid_n must be at least 8")
    t_eps = center_value(sys) if t_eps is None else t_eps
    if not 0 < t_lo < t_hi < t_eps:
        raise ValueError(f"need 0 < t_lo < t_hi < t_eps = {t_eps}")
    ts = np.linspace(t_lo, t_hi, grid_n)
    args = [(evaluate, float(t)) for t in ts]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_eval_real, args))
    else:
        rows = [_eval_real(a) for a in args]
    samples = [(t, re, im, err, n) for t, re, im, err, n, msg in rows if msg is None]
    failures = [(t, msg) for t, *_, msg in rows if msg is not None]
    if not samples:
        raise RuntimeError("every grid evaluation failed")
    signs = [_sign(re, err) for _, re, _, err, _ in samples]
    notes = []
    if all(s == 0 for s in signs):
        return ZeroReport([], 0, "scan", True, sys.epsilon, t_eps, samples, failures,
                          ["all samples below the noise floor"])
    brackets = []
    last = None
    for (t, *_), s in zip(samples, signs):
        if s == 0:
            continue
        if last is not None and last[1] != s:
            brackets.append((last[0], t))
        last = (t, s)

    def f(t):
        return evaluate(t).value.real

    xtol = xtol_rel * t_eps
    zeros = []
    for a, b in brackets:
        try:
            root = brentq(f, a, b, xtol=xtol / 2)
            zeros.append((float(root), float(xtol)))
        except (TraceError, RuntimeError, ValueError) as exc:
            notes.append(f"refinement in [{a}, {b}] failed: {exc}")
            zeros.append(((a + b) / 2, b - a))
    return ZeroReport(zeros, len(zeros), "scan", False, sys.epsilon, t_eps, samples, failures, notes)


@dataclass(frozen=True)
class WindingResult:
    winding: int
    total_arg: float
    slack: float
    samples: int
    min_abs: float

    def __int__(self):
        return self.winding


def winding_number(sys: DarbouxSystem, eta: OneForm, contour: Contour, samples_per_side: int = 16,
                   tol: float = 1e-12, max_depth: int = 10) -> WindingResult:
    """Argument principle for ``I`` around ``contour``.

    One real oval at ``t = R`` is transported continuously along the whole
    contour; ``I`` is integrated at every sample.  Steps whose argument
    increment reaches ``pi/2`` are bisected.  The winding is certified when
    the summed relative quadrature error (a bound on the accumulated
    argument error) stays below ``pi/4``.
    """
    if samples_per_side < 1:
        raise ValueError("samples_per_side must be positive")
    base = trace_oval(sys, contour.R_t_outer)
    cur = base
    r0 = integrate_form_over_cycle(sys, eta, cur, tol=tol)
    z_prev = r0.value

    def check(res: IntegralResult):
        if abs(res.value) <= NOISE_FACTOR * res.error_estimate or res.value == 0:
            raise WindingError("contour sample lies on a zero of I; nudge the contour")

    check(r0)
    total = 0.0
    slack = r0.error_estimate / abs(z_prev)
    count = 1
    min_abs = abs(z_prev)

    def step(cyc, z0, piece, a, b, depth):
        nonlocal total, slack, count, min_abs
        cyc1 = refine_cycle(sys, lift_cycle(sys, cyc, _sub_piece(piece, a, b)))
        r1 = integrate_form_over_cycle(sys, eta, cyc1, tol=tol)
        check(r1)
        d = float(np.angle(r1.value / z0))
        if abs(d) >= math.pi / 2:
            if depth >= max_depth:
                raise WindingError("argument increment stays above pi/2 after refinement")
            m = (a + b) / 2
            cyc_m, z_m = step(cyc, z0, piece, a, m, depth + 1)
            return step(cyc_m, z_m, piece, m, b, depth + 1)
        total += d
        slack += 2 * r1.error_estimate / abs(r1.value)
        count += 1
        min_abs = min(min_abs, abs(r1.value))
        return cyc1, r1.value

    for piece in contour.pieces():
        n = samples_per_side
        for k in range(n):
            cur, z_prev = step(cur, z_prev, piece, k / n, (k + 1) / n, 0)
    if slack >= math.pi / 4:
        raise WindingError(f"argument slack {slack:.3g} too large to certify the winding")
    w = total / (2 * math.pi)
    k = int(round(w))
    if abs(total - 2 * math.pi * k) > math.pi / 4:
        raise WindingError(f"total argument {total:.6g} is not near a multiple of 2 pi")
    return WindingResult(k, total, slack, count, min_abs)


@dataclass(frozen=True)
class SegmentCount:
    count_im: int
    count_J: int
    ts: tuple
    im_values: tuple
    J_over_2i: tuple
    max_residual: float


def im_zero_count_on_segment(sys: DarbouxSystem, eta: OneForm, t_lo: float, t_hi: float,
                             n: int = 12, tol: float = 1e-12) -> SegmentCount:
    """Sign changes of ``Im I(t e^{i pi eps})`` and of ``J(t)/2i`` on ``[t_lo, t_hi]``.

    For a real form ``I(conj t) = conj I(t)``, so both functions coincide; the
    largest mismatch relative to ``|J|`` is returned as a cross-check.
    """
    if sys.epsilon <= 0:
        raise ValueError("segment counts need eps > 0")
    if n < 2 or not 0 < t_lo < t_hi:
        raise ValueError("bad segment")
    ts = np.linspace(t_lo, t_hi, n)
    ims, js, errs, jerrs = [], [], [], []
    resid = 0.0
    for t in ts:
        rep = variation_check(sys, eta, float(t))
        ims.append(rep.I_plus.value.imag)
        js.append((rep.J.value / 2j).real)
        errs.append(rep.I_plus.error_estimate)
        jerrs.append(rep.J.error_estimate)
        scale = max(abs(rep.J.value), 1e-300)
        resid = max(resid, abs(2j * rep.I_plus.value.imag - rep.J.value) / scale)

    def changes(vals, es):
        s = [_sign(v, e) for v, e in zip(vals, es)]
        s = [q for q in s if q != 0]
        return sum(1 for a, b in zip(s, s[1:]) if a != b)

    return SegmentCount(changes(ims, errs), changes(js, jerrs), tuple(map(float, ts)),
                        tuple(ims), tuple(js), resid)


def estimate_leading_exponent(samples) -> tuple[float, float]:
    """Least-squares slope of ``log|I|`` against ``log t``.

    Returns ``(beta, quality)`` with quality the RMS residual of the fit; a
    hidden ``log t`` factor shows up as a large residual.
    """
    samples = list(samples)
    if len(samples) < 4:
        raise ValueError("need at least 4 samples")
    t = np.array([s[0] for s in samples], dtype=float)
    v = np.array([complex(s[1]) for s in samples])
    if np.any(t <= 0) or np.any(v == 0):
        raise ValueError("samples must have t > 0 and I != 0")
    re = v.real
    if np.all(np.abs(v.imag) <= 1e-12 * np.abs(v)) and (np.any(re > 0) and np.any(re < 0)):
        raise ValueError("sign change within the sample range")
    X, Y = np.log(t), np.log(np.abs(v))
    beta, c = np.polyfit(X, Y, 1)
    res = Y - (beta * X + c)
    return float(beta), float(np.sqrt(np.mean(res**2)))
