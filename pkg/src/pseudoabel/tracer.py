"""Tracing real ovals and continuing cycles along complexified leaves.

A leaf is described by the value of ``log H_eps`` (a complex number); points
carry per-factor integer windings so ``log H_eps`` stays single valued along
continuous motion.  Everything here works with ``F(z) = log H_eps(z) - L``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import (
    ConvergenceError,
    CriticalPoint,
    DarbouxSystem,
    LeafBoundaryError,
    find_center,
    find_turning_point,
)

__all__ = [
    "Cycle",
    "TraceOptions",
    "TPath",
    "TraceError",
    "LeafEvaluator",
    "trace_oval",
    "continue_leaf_point",
    "continue_along_coordinate",
    "lift_cycle",
    "locate_center",
]

TWO_PI_I = 2j * math.pi


class TraceError(RuntimeError):
    """Tracing or continuation could not be completed."""


@dataclass(frozen=True)
class TraceOptions:
    step_init: float = 0.01
    step_min: float = 1e-7
    step_max: float = 0.02
    corrector_tol: float = 1e-13
    max_points: int = 20000
    max_turn: float = 0.04  # radians of tangent rotation per step
    min_points: int = 16

    def __post_init__(self):
        if not (0 < self.step_min <= self.step_init <= self.step_max):
            raise ValueError("need 0 < step_min <= step_init <= step_max")
        if self.corrector_tol <= 0 or self.max_points < self.min_points:
            raise ValueError("bad tolerances")


@dataclass(frozen=True)
class Cycle:
    """Closed polyline on one leaf; ``points[-1]`` repeats ``points[0]``.

    ``windings[k, j]`` is the branch index of factor ``j`` (order P0, P1, ...)
    at vertex ``k``.
    """

    points: np.ndarray  # (n, 2) complex
    windings: np.ndarray  # (n, k+1) int
    leaf_log_t: complex
    orientation: int = 1
    closure_residual: float = 0.0
    drift_residual: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        w = np.asarray(self.windings, dtype=int)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must be (n, 2)")
        if w.shape[0] != pts.shape[0]:
            raise ValueError("one winding row per vertex")
        if pts.shape[0] < 17:
            raise TraceError(f"cycle has only {pts.shape[0] - 1} distinct points (< 16)")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "windings", w)

    def __len__(self):
        return self.points.shape[0]

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    @property
    def t(self) -> complex:
        return complex(np.exp(self.leaf_log_t))

    def shoelace_area(self) -> float:
        x, y = self.x.real, self.y.real
        return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))

    def rotated(self, k: int) -> "Cycle":
        """Same cycle starting from vertex ``k``."""
        pts = np.concatenate([self.points[k:-1], self.points[: k + 1]])
        w = np.concatenate([self.windings[k:-1], self.windings[: k + 1]])
        return Cycle(pts, w, self.leaf_log_t, self.orientation, self.closure_residual, self.drift_residual)

    def reversed(self) -> "Cycle":
        return Cycle(self.points[::-1], self.windings[::-1], self.leaf_log_t, -self.orientation,
                     self.closure_residual, self.drift_residual)

    def to_json(self) -> dict:
        return {
            "format": "pseudoabel.cycle/1",
            "leaf_log_t": [self.leaf_log_t.real, self.leaf_log_t.imag],
            "orientation": self.orientation,
            "closure_residual": self.closure_residual,
            "drift_residual": self.drift_residual,
            "x": [[v.real, v.imag] for v in self.x],
            "y": [[v.real, v.imag] for v in self.y],
            "windings": self.windings.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Cycle":
        if doc.get("format") != "pseudoabel.cycle/1":
            raise ValueError("not a cycle document")
        x = np.array([complex(a, b) for a, b in doc["x"]])
        y = np.array([complex(a, b) for a, b in doc["y"]])
        return cls(
            np.stack([x, y], axis=1),
            np.array(doc["windings"], dtype=int),
            complex(*doc["leaf_log_t"]),
            int(doc["orientation"]),
            float(doc["closure_residual"]),
            float(doc["drift_residual"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())


# --------------------------------------------------------------------------
# vectorised leaf evaluation
# --------------------------------------------------------------------------


class LeafEvaluator:
    """Vectorised ``log H``, its gradient and the form ``eta / (P0 M)``."""

    def __init__(self, sys: DarbouxSystem):
        self.sys = sys
        self.polys = sys.polys
        self.grads = [(p.diff(0), p.diff(1)) for p in self.polys]
        self.expo = sys.exponents

    def values(self, x, y):
        return [p(x, y) for p in self.polys]

    def logs(self, x, y, ref=None):
        """Per-factor logs, unwrapped toward ``ref`` (same shape + factor axis)."""
        vals = self.values(x, y)
        out = []
        for j, v in enumerate(vals):
            v = np.asarray(v, dtype=complex)
            if np.any(v == 0):
                raise LeafBoundaryError(f"factor {j} vanishes on the path")
            lg = np.log(v)
            if ref is not None:
                k = np.round((ref[j] - lg).imag / (2 * math.pi))
                lg = lg + TWO_PI_I * k
            out.append(lg)
        return out

    def noise(self, x, y, vals=None):
        """Rounding floor of log H at (x, y) from cancellation inside each factor."""
        if vals is None:
            vals = self.values(x, y)
        u = 4 * np.finfo(float).eps
        return sum(e * u * p.abs_eval(x, y) / np.abs(v) for e, p, v in zip(self.expo, self.polys, vals))

    def log_H(self, logs):
        return sum(e * lg for e, lg in zip(self.expo, logs))

    def grad(self, x, y, vals=None):
        if vals is None:
            vals = self.values(x, y)
        gx = 0.0
        gy = 0.0
        for e, v, (px, py) in zip(self.expo, vals, self.grads):
            gx = gx + e * px(x, y) / v
            gy = gy + e * py(x, y) / v
        return gx, gy

    @staticmethod
    def windings_from_logs(x, y, logs, polys):
        w = []
        for lg, p in zip(logs, polys):
            principal = np.log(np.asarray(p(x, y), dtype=complex))
            w.append(np.round((lg - principal).imag / (2 * math.pi)).astype(int))
        return np.stack(w, axis=-1)

    def logs_from_windings(self, x, y, windings):
        w = np.asarray(windings)
        vals = self.values(x, y)
        return [np.log(np.asarray(v, dtype=complex)) + TWO_PI_I * w[..., j] for j, v in enumerate(vals)]


def drift_residual(sys: DarbouxSystem, points, windings, leaf_log_t) -> float:
    ev = LeafEvaluator(sys)
    logs = ev.logs_from_windings(points[:, 0], points[:, 1], windings)
    return float(np.max(np.abs(ev.log_H(logs) - leaf_log_t)))


# --------------------------------------------------------------------------
# real ovals
# --------------------------------------------------------------------------


def locate_center(sys: DarbouxSystem) -> CriticalPoint:
    """Find the center born at the turning point by Newton from nearby seeds."""
    tp = find_turning_point(sys)
    x0, y0 = tp.location
    eps = sys.epsilon
    scale = max(eps, 1e-3)
    for r in (1.0, 0.5, 2.0, 0.25, 4.0):
        for ang in np.linspace(0, 2 * math.pi, 16, endpoint=False):
            seed = (x0 + r * scale * math.cos(ang), y0 + r * scale * math.sin(ang))
            if not sys.in_domain(*seed):
                continue
            try:
                c = find_center(sys, seed)
            except (ConvergenceError, ValueError):
                continue
            if math.hypot(c.location[0] - x0, c.location[1] - y0) < 10 * scale + 0.5:
                return c
    raise ConvergenceError("no center found near the turning point")


def _log_H_real(sys, x, y):
    tot = 0.0
    for e, p in zip(sys.exponents, sys.polys):
        v = p(x, y)
        if v <= 0:
            return -math.inf
        tot += e * math.log(v)
    return tot


def _seed_on_ray(sys, center, log_t):
    xc, yc = center.location
    y_top = sys.domain[3]
    f = lambda yy: _log_H_real(sys, xc, yy) - log_t
    n = 2000
    ys = yc + (y_top - yc) * (np.arange(1, n + 1) / n) ** 2
    prev = yc
    if f(yc) <= 0:
        raise TraceError("level is not below the center value (t >= t_eps)")
    for yy in ys:
        if f(yy) < 0:
            lo, hi = prev, yy
            if not math.isfinite(f(hi)):
                # shrink hi back into the admissible region
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    if math.isfinite(f(mid)) and f(mid) < 0:
                        hi = mid
                        break
                    if math.isfinite(f(mid)):
                        lo = mid
                    else:
                        hi = mid
            return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        prev = yy
    raise TraceError("seed bisection failed: level not crossed on the vertical ray")


def _real_grad(sys, z):
    gx, gy = 0.0, 0.0
    for e, p in zip(sys.exponents, sys.polys):
        v = p(*z)
        gx += e * p.diff(0)(*z) / v
        gy += e * p.diff(1)(*z) / v
    return np.array([gx, gy])


def trace_oval(sys: DarbouxSystem, t: float, opts: TraceOptions | None = None,
               center: CriticalPoint | None = None) -> Cycle:
    """Counterclockwise real oval ``{H_eps = t}`` around the center.

    Tangent predictor along the dual field ``(B, -A)``, Newton corrector on
    ``log H_eps`` along the gradient, closure detected at the Poincare section
    given by the vertical ray above the center.
    """
    opts = opts or TraceOptions()
    if not t > 0:
        raise TraceError("t must be positive")
    if center is None:
        center = locate_center(sys)
    if t >= center.value_t:
        raise TraceError(f"t = {t} is not below the center value {center.value_t}")
    log_t = math.log(t)
    xc, yc = center.location
    y_seed = _seed_on_ray(sys, center, log_t)
    seed = np.array([xc, y_seed])
    if math.hypot(*(seed - center.location)) < 1e-6:
        raise TraceError("cycle degenerates at the center value")
    grads = [(p.diff(0), p.diff(1)) for p in sys.polys]

    def logH(z):
        return _log_H_real(sys, z[0], z[1])

    def grad(z):
        gx, gy = 0.0, 0.0
        for e, p, (px, py) in zip(sys.exponents, sys.polys, grads):
            v = p(*z)
            gx += e * px(*z) / v
            gy += e * py(*z) / v
        return np.array([gx, gy])

    def tangent(z):
        g = grad(z)
        v = np.array([g[1], -g[0]])  # dual direction, same line as (B, -A)
        v /= np.linalg.norm(v)
        # counterclockwise around the center
        r = z - np.array([xc, yc])
        if r[0] * v[1] - r[1] * v[0] < 0:
            v = -v
        return v

    ev = LeafEvaluator(sys)

    def floor(z):
        # rounding floor of log H: deep in the slow layer P0 is tiny and
        # log H cannot be resolved below u |terms of P0| / |P0|
        return 10 * opts.corrector_tol + 4 * float(ev.noise(z[0], z[1]))

    def newton(z):
        for _ in range(12):
            f = logH(z) - log_t
            if not math.isfinite(f):
                return None
            g = grad(z)
            dz = -f * g / np.dot(g, g)
            z = z + dz
            if np.linalg.norm(dz) <= 1e-15 * (1 + np.linalg.norm(z)) or abs(f) < opts.corrector_tol:
                f = logH(z) - log_t
                if math.isfinite(f) and abs(f) < floor(z):
                    return z
        return None

    def correct(z, z_prev, h):
        out = newton(z)
        if out is not None:
            return out
        # predictor left the admissible region (thin layer along the slow
        # manifold): bracketed solve along the normal of the previous point
        n = grad(z_prev)
        n /= np.linalg.norm(n)
        f = lambda lam: logH(z + lam * n) - log_t
        lo, hi = -h, h
        flo, fhi = f(lo), f(hi)
        for _ in range(40):
            if flo < 0 < fhi:
                break
            lo, hi = 2 * lo, 2 * hi
            flo, fhi = f(lo), f(hi)
        else:
            return None
        # -inf outside the region is fine for a sign-based bracket
        a, b = lo, hi
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = f(m)
            if math.isfinite(fm) and abs(fm) < 1e-3:
                break
            if fm < 0:
                a = m
            else:
                b = m
        return newton(z + m * n)

    pts = [seed]
    z = seed
    T = tangent(z)
    h = opts.step_init
    travelled = 0.0
    while True:
        if len(pts) > opts.max_points:
            raise TraceError(f"max_points exceeded at t={t} (too close to the polycycle?)")
        trial = correct(z + h * T, z, h)
        ok = trial is not None
        if ok:
            T_new = tangent(trial)
            turn = math.acos(max(-1.0, min(1.0, float(np.dot(T, T_new)))))
            dist = np.linalg.norm(trial - z)
            ok = turn <= opts.max_turn and dist <= 1.5 * h and np.dot(trial - z, T) > 0
        if not ok:
            h *= 0.5
            if h < opts.step_min:
                raise TraceError(f"step underflow while tracing t={t}")
            continue
        # section crossing: x passes xc going leftward->rightward? we move ccw,
        # so the return to the upper ray happens with x decreasing through xc
        crossed = (
            travelled > 4 * opts.step_max
            and z[0] > xc >= trial[0]
            and trial[1] > yc
            and z[1] > yc
        )
        if crossed:
            # land exactly on the section
            xa, xb = z[0] - xc, trial[0] - xc
            lam = xa / (xa - xb)
            guess = z + lam * (trial - z)
            f = lambda yy: _log_H_real(sys, xc, yy) - log_t
            try:
                lo, hi = guess[1] - 4 * h, guess[1] + 4 * h
                yy = brentq(f, lo, hi, xtol=1e-15) if f(lo) * f(hi) < 0 else guess[1]
            except ValueError:
                yy = guess[1]
            closure = abs(yy - y_seed)
            if np.linalg.norm(z - seed) > 1e-12:
                pts.append(seed.copy())
            else:
                pts[-1] = seed.copy()
            break
        travelled += np.linalg.norm(trial - z)
        pts.append(trial)
        z, T = trial, T_new
        if opts.step_init and T_new is not None:
            h = min(opts.step_max, h * 1.5)
    P = np.array(pts, dtype=complex)
    if len(P) < opts.min_points + 1:
        raise TraceError(f"cycle degenerated ({len(P) - 1} points)")
    logs = ev.logs(P[:, 0], P[:, 1])
    w = np.zeros((len(P), len(sys.polys)), dtype=int)
    drift = float(np.max(np.abs(ev.log_H(logs) - log_t)))
    return Cycle(P, w, complex(log_t), 1, float(closure), drift)


# --------------------------------------------------------------------------
# complex continuation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TPath:
    """Path in the t-plane, parametrised by s in [0, 1] through log t.

    ``pieces`` is a list of ``("arc", r, theta0, theta1)`` or
    ``("radial", phi, r0, r1)``; consecutive pieces must join.
    """

    pieces: tuple

    @classmethod
    def arc(cls, r: float, theta0: float, theta1: float) -> "TPath":
        return cls((("arc", float(r), float(theta0), float(theta1)),))

    @classmethod
    def radial(cls, phi: float, r0: float, r1: float) -> "TPath":
        if r0 <= 0 or r1 <= 0:
            raise ValueError("radial path must avoid t = 0")
        return cls((("radial", float(phi), float(r0), float(r1)),))

    @classmethod
    def constant(cls, t: complex) -> "TPath":
        return cls.arc(abs(t), np.angle(t), np.angle(t))

    def __add__(self, other: "TPath") -> "TPath":
        a, b = self.log_at(1.0), other.log_at(0.0)
        if abs(np.exp(a) - np.exp(b)) > 1e-12 * (1 + abs(np.exp(a))):
            raise ValueError("paths do not join")
        return TPath(self.pieces + other.pieces)

    def reversed(self) -> "TPath":
        out = []
        for p in reversed(self.pieces):
            if p[0] == "arc":
                out.append(("arc", p[1], p[3], p[2]))
            else:
                out.append(("radial", p[1], p[3], p[2]))
        return TPath(tuple(out))

    def _piece_log(self, p, s):
        if p[0] == "arc":
            _, r, a, b = p
            return math.log(r) + 1j * (a + s * (b - a))
        _, phi, r0, r1 = p
        return math.log(r0) + s * (math.log(r1) - math.log(r0)) + 1j * phi

    def _lengths(self):
        out = []
        for p in self.pieces:
            out.append(abs(self._piece_log(p, 1.0) - self._piece_log(p, 0.0)))
        return out

    def log_at(self, s: float) -> complex:
        """Continuous log t along the path (argument not reduced mod 2 pi)."""
        lens = self._lengths()
        total = sum(lens)
        if total == 0:
            return self._piece_log(self.pieces[0], 0.0)
        target = s * total
        acc = 0.0
        for p, L in zip(self.pieces, lens):
            if target <= acc + L or p is self.pieces[-1]:
                u = 0.0 if L == 0 else min(1.0, max(0.0, (target - acc) / L))
                return self._piece_log(p, u)
            acc += L
        return self._piece_log(self.pieces[-1], 1.0)

    @property
    def total_log_length(self) -> float:
        return sum(self._lengths())

    def __call__(self, s: float) -> complex:
        return complex(np.exp(self.log_at(s)))


def _newton_leaf(ev: LeafEvaluator, x, y, ref_logs, target, tol, maxit=8):
    """Vectorised minimal-norm Newton onto ``log H = target``.

    Returns (x, y, logs, ok mask, contraction ratio).
    """
    x = np.array(x, dtype=complex)
    y = np.array(y, dtype=complex)
    ok = np.zeros(x.shape, dtype=bool)
    first = None
    ratio = np.zeros(x.shape)
    logs = ev.logs(x, y, ref_logs)
    for it in range(maxit):
        F = ev.log_H(logs) - target
        vals = ev.values(x, y)
        gx, gy = ev.grad(x, y, vals)
        nrm = np.abs(gx) ** 2 + np.abs(gy) ** 2
        dx = -F * np.conj(gx) / nrm
        dy = -F * np.conj(gy) / nrm
        step = np.sqrt(np.abs(dx) ** 2 + np.abs(dy) ** 2)
        if first is None:
            first = step
        elif it == 1:
            ratio = np.where(first > 0, step / np.maximum(first, 1e-300), 0.0)
        x = x + dx
        y = y + dy
        logs = ev.logs(x, y, logs)
        F = ev.log_H(logs) - target
        ok = np.abs(F) <= tol + ev.noise(x, y)
        if ok.all():
            break
    return x, y, logs, ok, ratio


def _transport_field(ev: LeafEvaluator, x, y):
    """Holomorphic field ``w`` with ``dlog H (w) = 1``: ``w = g / (g . g)``.

    Unlike the minimal-norm direction ``conj(g)/|g|^2`` this depends
    holomorphically on the point, so transport along a t-path and back
    retraces the same vertices.
    """
    gx, gy = ev.grad(x, y)
    q = gx * gx + gy * gy
    return gx / q, gy / q


def _rk4(ev, x, y, dL):
    k1 = _transport_field(ev, x, y)
    k2 = _transport_field(ev, x + 0.5 * dL * k1[0], y + 0.5 * dL * k1[1])
    k3 = _transport_field(ev, x + 0.5 * dL * k2[0], y + 0.5 * dL * k2[1])
    k4 = _transport_field(ev, x + dL * k3[0], y + dL * k3[1])
    return (x + dL * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6,
            y + dL * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6)


def _polish_along_field(ev, x, y, logs, target, tol, maxit=6):
    """Newton along ``w`` onto the leaf ``target``; returns a per-point ok mask."""
    for _ in range(maxit):
        logs = ev.logs(x, y, logs)
        F = ev.log_H(logs) - target
        ok = np.abs(F) <= tol + ev.noise(x, y)
        if ok.all():
            return x, y, logs, ok
        wx, wy = _transport_field(ev, x, y)
        F = np.where(ok, 0, F)
        x, y = x - F * wx, y - F * wy
    logs = ev.logs(x, y, logs)
    F = ev.log_H(logs) - target
    return x, y, logs, np.abs(F) <= tol + ev.noise(x, y)


def _continue(sys, points, windings, log_start, log_target_fn, tol=1e-13,
              ds_init=1 / 64, ds_min=1e-9, max_move=None, pos_tol=1e-10):
    """Advance many leaf points along s -> log_target_fn(s), s in [0, 1].

    Each point follows the holomorphic field ``dz/dL = w(z)`` (RK4 with
    step doubling), then is polished onto the exact target leaf.  Step
    sizes are per point, so a few stiff points do not slow the rest.
    """
    ev = LeafEvaluator(sys)
    pts = np.asarray(points, dtype=complex)
    x, y = pts[:, 0].copy(), pts[:, 1].copy()
    logs = ev.logs_from_windings(x, y, windings)
    F0 = ev.log_H(logs) - log_start
    if np.max(np.abs(F0)) > 1e-7:
        raise TraceError(f"start points not on the initial leaf (|F| = {np.max(np.abs(F0)):.2e})")
    if max_move is None:
        span = np.ptp(x.real) + np.ptp(y.real) if len(x) > 1 else 1.0
        max_move = max(0.05 * span, 1e-3)
    n = len(x)
    logs = np.array(logs)  # (factor, point)
    s = np.zeros(n)
    ds = np.full(n, ds_init)
    L_cur = np.full(n, log_target_fn(0.0), dtype=complex) + (ev.log_H(logs) - log_target_fn(0.0))
    fn = lambda v: np.array([log_target_fn(float(u)) for u in v], dtype=complex)
    while True:
        act = np.flatnonzero(s < 1.0)
        if act.size == 0:
            break
        d = np.minimum(ds[act], 1.0 - s[act])
        ds[act] = d
        target = fn(s[act] + d)
        mid = fn(s[act] + 0.5 * d)
        xa, ya, La = x[act], y[act], L_cur[act]
        la = list(logs[:, act])
        good = np.zeros(act.size, dtype=bool)
        fac = np.full(act.size, 0.5)
        try:
            with np.errstate(all="ignore"):
                x1, y1 = _rk4(ev, xa, ya, target - La)
                xm, ym = _rk4(ev, xa, ya, mid - La)
                x2, y2 = _rk4(ev, xm, ym, target - mid)
                err = np.sqrt(np.abs(x2 - x1) ** 2 + np.abs(y2 - y1) ** 2)
                scale = 1 + np.sqrt(np.abs(x2) ** 2 + np.abs(y2) ** 2)
                move = np.sqrt(np.abs(x2 - xa) ** 2 + np.abs(y2 - ya) ** 2)
            cand = np.isfinite(err) & (err <= pos_tol * scale) & (move < max_move)
            with np.errstate(all="ignore"):
                ratio = np.where(np.isfinite(err), pos_tol * scale / np.maximum(err, 1e-300), 0.0)
            fac = np.clip(0.9 * ratio ** 0.2, 0.2, 4.0)
            if cand.any():
                c = np.flatnonzero(cand)
                # local extrapolation of the step-doubling pair
                xe = x2[c] + (x2[c] - x1[c]) / 15
                ye = y2[c] + (y2[c] - y1[c]) / 15
                nx, ny, nl, ok = _polish_along_field(ev, xe, ye, [l[c] for l in la],
                                                     target[c], tol)
                nl = np.array(nl)
                # guard against branch jumps: log changes must stay small
                jump = np.max(np.abs(nl - logs[:, act[c]]), axis=0)
                ok &= jump < 1.0
                good[c] = ok
                acc = act[c[ok]]
                x[acc], y[acc] = nx[ok], ny[ok]
                logs[:, acc] = nl[:, ok]
                L_cur[acc] = target[c[ok]]
        except (LeafBoundaryError, ZeroDivisionError):
            good[:] = False
        acc = act[good]
        s[acc] += ds[acc]
        s[acc] = np.where(1.0 - s[acc] < 1e-14, 1.0, s[acc])
        ds[act] *= np.where(good, fac, np.minimum(fac, 0.5))
        ds[act] = np.minimum(ds[act], 0.25)
        rej = act[~good]
        if rej.size and np.min(ds[rej]) < ds_min:
            k = rej[np.argmin(ds[rej])]
            raise TraceError(f"continuation step underflow at s={s[k]:.6f}")
    logs = list(logs)
    w = LeafEvaluator.windings_from_logs(x, y, logs, ev.polys)
    return np.stack([x, y], axis=1), w, logs


def continue_leaf_point(sys: DarbouxSystem, start, path: TPath, windings=None,
                        start_log: complex | None = None):
    """Continue one point of the leaf ``log H = log path(0)`` along ``path``.

    Returns ``(point, windings)`` on the final leaf ``log H = path.log_at(1)``.
    """
    nf = len(sys.polys)
    w = np.zeros((1, nf), dtype=int) if windings is None else np.atleast_2d(windings)
    L0 = path.log_at(0.0) if start_log is None else start_log
    offset = L0 - path.log_at(0.0)
    pts, w2, _ = _continue(sys, np.atleast_2d(np.asarray(start, dtype=complex)), w, L0,
                           lambda s: path.log_at(s) + offset)
    return (complex(pts[0, 0]), complex(pts[0, 1])), w2[0]


def lift_cycle(sys: DarbouxSystem, cycle: Cycle, path: TPath) -> Cycle:
    """Transport every vertex of ``cycle`` along ``path`` in the t-plane.

    The cycle's leaf value must match ``path(0)`` up to a multiple of
    ``2 pi i`` in log, and the lift lands on ``leaf_log_t + (log path(1) - log path(0))``.
    """
    L0 = cycle.leaf_log_t
    base = path.log_at(0.0)
    if abs(np.exp(L0) - np.exp(base)) > 1e-9 * abs(np.exp(base)):
        raise TraceError("cycle leaf does not match the start of the path")
    offset = L0 - base
    if path.total_log_length == 0:
        return cycle
    pts, w, logs = _continue(sys, cycle.points, cycle.windings, L0,
                             lambda s: path.log_at(s) + offset)
    L1 = path.log_at(1.0) + offset
    ev = LeafEvaluator(sys)
    drift = float(np.max(np.abs(ev.log_H(logs) - L1)))
    closure = float(np.linalg.norm(pts[0] - pts[-1]))
    return Cycle(pts, w, complex(L1), cycle.orientation, closure, drift)


def continue_along_coordinate(sys: DarbouxSystem, start, windings, leaf_log: complex,
                              direction, xi_path, n_steps: int = 64, tol: float = 1e-13):
    """Follow the leaf while the linear coordinate ``xi = direction . z`` traces ``xi_path``.

    ``xi_path(s)`` for s in [0, 1] is a complex path in the xi-line (for the
    model, ``direction = (1, 0)`` makes this the familiar x-plane path).
    Returns arrays of visited points and windings (including the start).
    """
    ev = LeafEvaluator(sys)
    d = np.asarray(direction, dtype=complex)
    z = np.asarray(start, dtype=complex).copy()
    logs = [np.asarray(l) for l in ev.logs_from_windings(z[0], z[1], windings)]
    if abs(ev.log_H(logs) - leaf_log) > 1e-8:
        raise TraceError("start point is not on the requested leaf")
    out_pts = [z.copy()]
    out_logs = [logs]
    s = 0.0
    ds = 1.0 / n_steps
    ds_max = ds
    while s < 1.0 - 1e-15:
        ds = min(ds, 1.0 - s)
        xi_t = xi_path(s + ds)
        # predictor: move along the leaf tangent to hit the new xi
        vals = ev.values(z[0], z[1])
        gx, gy = ev.grad(z[0], z[1], vals)
        tang = np.array([gy, -gx])
        denom = np.dot(d, tang)
        good = abs(denom) > 1e-14
        if good:
            zn = z + (xi_t - np.dot(d, z)) / denom * tang
            cur_logs = logs
            first = None
            for it in range(10):
                try:
                    cur_logs = ev.logs(zn[0], zn[1], cur_logs)
                except LeafBoundaryError:
                    good = False
                    break
                F = complex(ev.log_H(cur_logs) - leaf_log)
                G = complex(np.dot(d, zn) - xi_t)
                vals = ev.values(zn[0], zn[1])
                gx, gy = ev.grad(zn[0], zn[1], vals)
                J = np.array([[gx, gy], d], dtype=complex)
                try:
                    dz = np.linalg.solve(J, -np.array([F, G]))
                except np.linalg.LinAlgError:
                    good = False
                    break
                nd = np.linalg.norm(dz)
                if first is None:
                    first = nd
                elif it == 1 and first > 0 and nd > 0.5 * first:
                    good = False
                    break
                zn = zn + dz
                if nd < 1e-15 * (1 + np.linalg.norm(zn)):
                    break
            if good:
                cur_logs = ev.logs(zn[0], zn[1], cur_logs)
                F = abs(complex(ev.log_H(cur_logs) - leaf_log))
                jump = max(abs(complex(a - b)) for a, b in zip(cur_logs, logs))
                good = F < tol * 100 and jump < 0.5 and np.linalg.norm(zn - z) < 0.1
        if not good:
            ds *= 0.5
            if ds < 1e-9:
                raise TraceError(f"coordinate continuation failed at s={s:.6g}")
            continue
        z, logs = zn, cur_logs
        s += ds
        out_pts.append(z.copy())
        out_logs.append(logs)
        ds = min(ds * 1.5, ds_max)
    P = np.array(out_pts)
    W = np.array(
        [LeafEvaluator.windings_from_logs(p[0], p[1], lg, ev.polys) for p, lg in zip(P, out_logs)]
    )
    return P, W
