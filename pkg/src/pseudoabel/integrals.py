"""Pseudo-Abelian integrals over ovals, lifted ovals and figure-eight cycles.

Every integral is a path integral of the rational form ``eta / (P0 M)``
along a polyline whose segments are re-projected onto the leaf at each
quadrature node, so the path really lies on the (complex) leaf and the value
depends only on the homotopy class of the cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DarbouxSystem, OneForm
from .tracer import (
    Cycle,
    LeafEvaluator,
    TPath,
    TraceError,
    TraceOptions,
    _continue,
    continue_along_coordinate,
    lift_cycle,
    trace_oval,
)

__all__ = [
    "IntegralResult",
    "QuadratureError",
    "integrate_form_over_cycle",
    "pseudo_abelian_I",
    "figure_eight_cycle",
    "figure_eight_J",
    "variation_check",
    "VariationReport",
]


class QuadratureError(RuntimeError):
    """Quadrature did not reach the requested accuracy, or hit a pole."""


@dataclass(frozen=True)
class IntegralResult:
    value: complex
    error_estimate: float
    nodes: int

    def __post_init__(self):
        if self.error_estimate < 0:
            raise ValueError("negative error estimate")

    def __sub__(self, other: "IntegralResult") -> "IntegralResult":
        return IntegralResult(self.value - other.value, self.error_estimate + other.error_estimate,
                              self.nodes + other.nodes)

    def __add__(self, other: "IntegralResult") -> "IntegralResult":
        return IntegralResult(self.value + other.value, self.error_estimate + other.error_estimate,
                              self.nodes + other.nodes)


_GL_CACHE: dict = {}


def _gauss(n):
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


class _SegmentIntegrator:
    """Integrates ``eta/(P0 M)`` over leaf segments between polyline vertices."""

    def __init__(self, sys: DarbouxSystem, eta: OneForm, leaf_log: complex):
        self.sys = sys
        self.ev = LeafEvaluator(sys)
        self.eta = eta
        self.L = leaf_log

    def _tangent_scaled(self, z, d):
        gx, gy = self.ev.grad(z[:, 0], z[:, 1])
        v = np.stack([gy, -gx], axis=-1)
        c = (np.conj(v[:, 0]) * d[:, 0] + np.conj(v[:, 1]) * d[:, 1]) / (
            np.abs(v[:, 0]) ** 2 + np.abs(v[:, 1]) ** 2)
        return c[:, None] * v

    def project(self, za, zb, la, lb, s):
        """Leaf points over cubic Hermite guides between vertices; shapes (m, q)."""
        ev = self.ev
        d = zb - za  # (m, 2)
        Ta = self._tangent_scaled(za, d)
        Tb = self._tangent_scaled(zb, d)
        s2, s3 = s * s, s * s * s
        h00, h10, h01, h11 = 2 * s3 - 3 * s2 + 1, s3 - 2 * s2 + s, -2 * s3 + 3 * s2, s3 - s2
        d00, d10, d01, d11 = 6 * s2 - 6 * s, 3 * s2 - 4 * s + 1, -6 * s2 + 6 * s, 3 * s2 - 2 * s
        zl = (h00[None, :, None] * za[:, None, :] + h10[None, :, None] * Ta[:, None, :]
              + h01[None, :, None] * zb[:, None, :] + h11[None, :, None] * Tb[:, None, :])
        dl = (d00[None, :, None] * za[:, None, :] + d10[None, :, None] * Ta[:, None, :]
              + d01[None, :, None] * zb[:, None, :] + d11[None, :, None] * Tb[:, None, :])
        ref = [la[j][:, None] + s[None, :] * (lb[j] - la[j])[:, None] for j in range(len(la))]
        # fixed transversal direction per segment
        xm, ym = 0.5 * (za[:, 0] + zb[:, 0]), 0.5 * (za[:, 1] + zb[:, 1])
        gx, gy = ev.grad(xm, ym)
        n = np.stack([np.conj(gx), np.conj(gy)], axis=-1)
        n = n / np.sqrt(np.abs(n[:, 0]) ** 2 + np.abs(n[:, 1]) ** 2)[:, None]
        lam = np.zeros(zl.shape[:2], dtype=complex)
        x = zl[..., 0]
        y = zl[..., 1]
        logs = ref
        for _ in range(30):
            logs = ev.logs(x, y, logs)
            F = ev.log_H(logs) - self.L
            gx, gy = ev.grad(x, y)
            dF = gx * n[:, None, 0] + gy * n[:, None, 1]
            step = -F / dF
            lam = lam + step
            x = zl[..., 0] + lam * n[:, None, 0]
            y = zl[..., 1] + lam * n[:, None, 1]
            if np.max(np.abs(step)) < 1e-15 * (1 + np.max(np.abs(lam))) or np.max(np.abs(F)) < 1e-15:
                break
        logs = ev.logs(x, y, logs)
        F = ev.log_H(logs) - self.L
        if np.any(np.abs(F) > 1e-10 + 16 * ev.noise(x, y)):
            raise QuadratureError(f"leaf projection failed (|F| = {np.max(np.abs(F)):.2e})")
        gx, gy = ev.grad(x, y)
        gd = gx * dl[..., 0] + gy * dl[..., 1]
        gn = gx * n[:, None, 0] + gy * n[:, None, 1]
        lam_s = -gd / gn
        dx = dl[..., 0] + lam_s * n[:, None, 0]
        dy = dl[..., 1] + lam_s * n[:, None, 1]
        return x, y, dx, dy, logs

    def integrand(self, x, y, dx, dy):
        vals = self.ev.values(x, y)
        denom = vals[0]
        for v in vals[1:]:
            denom = denom * v
        if np.any(denom == 0):
            raise QuadratureError("pole of eta/(P0 M) on the integration path")
        return (self.eta.a(x, y) * dx + self.eta.b(x, y) * dy) / denom

    def segment_values(self, za, zb, la, lb, n):
        """Per-segment integral, integral of ``|f|``, and its rounding floor."""
        s, w = _gauss(n)
        x, y, dx, dy, _ = self.project(za, zb, la, lb, s)
        f = self.integrand(x, y, dx, dy)
        af = np.abs(f)
        u = np.finfo(float).eps
        cond = sum(u * p.abs_eval(x, y) / np.abs(p(x, y)) for p in self.ev.polys)
        return f @ w, af @ w, (af * cond) @ w

    def midpoints(self, za, zb, la, lb):
        x, y, _, _, logs = self.project(za, zb, la, lb, np.array([0.5]))
        return np.stack([x[:, 0], y[:, 0]], axis=-1), [lg[:, 0] for lg in logs]


def refine_cycle(sys: DarbouxSystem, cycle: Cycle, ratio: float = 3.0, passes: int = 8) -> Cycle:
    """Split polyline segments longer than ``ratio`` times the median length.

    New vertices are leaf points over the Hermite guide of the segment.  Used
    after transporting a cycle, which can stretch a few segments near branch
    points of the projection to the x, y plane.
    """
    ig = _SegmentIntegrator(sys, None, cycle.leaf_log_t)
    ev = ig.ev
    pts = cycle.points
    w = cycle.windings
    for _ in range(passes):
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        bad = np.nonzero(seg > ratio * np.median(seg))[0]
        if len(bad) == 0:
            break
        logs = [np.asarray(lg) for lg in ev.logs_from_windings(pts[:, 0], pts[:, 1], w)]
        mids, mlogs = ig.midpoints(pts[bad], pts[bad + 1], [lg[bad] for lg in logs],
                                   [lg[bad + 1] for lg in logs])
        mw = ev.windings_from_logs(mids[:, 0], mids[:, 1], mlogs, ev.polys)
        pts = np.insert(pts, bad + 1, mids, axis=0)
        w = np.insert(w, bad + 1, mw, axis=0)
    return Cycle(pts, w, cycle.leaf_log_t, cycle.orientation, cycle.closure_residual,
                 cycle.drift_residual)


def integrate_form_over_cycle(sys: DarbouxSystem, eta: OneForm, cycle: Cycle, tol: float = 1e-12,
                              n_gauss: int = 10, max_refine: int = 12) -> IntegralResult:
    """Composite Gauss-Legendre quadrature of ``eta/(P0 M)`` along ``cycle``.

    Each polyline segment is integrated with ``n_gauss`` and ``2 n_gauss``
    nodes; segments whose two values disagree by more than ``tol`` relative to
    the size of the integral are bisected (midpoints projected onto the leaf).
    """
    if eta is None:
        raise ValueError("no perturbation form eta given")
    ig = _SegmentIntegrator(sys, eta, cycle.leaf_log_t)
    ev = ig.ev
    pts = cycle.points
    logs = [np.asarray(lg) for lg in ev.logs_from_windings(pts[:, 0], pts[:, 1], cycle.windings)]
    za, zb = pts[:-1], pts[1:]
    la = [lg[:-1] for lg in logs]
    lb = [lg[1:] for lg in logs]
    lo, _, _ = ig.segment_values(za, zb, la, lb, n_gauss)
    hi, mag, noise = ig.segment_values(za, zb, la, lb, 2 * n_gauss)
    for _ in range(max_refine + 1):
        seg_err = np.abs(hi - lo)
        scale = max(float(np.sum(mag)), 1e-300)
        roundoff = max(1e-15 * scale * math.sqrt(len(hi)), float(np.sum(noise)))
        if float(np.sum(seg_err)) <= tol * scale:
            break
        # segments already at their rounding floor cannot improve
        bad = seg_err > np.maximum(tol * scale / len(hi), 16 * noise)
        if not bad.any():
            break
        idx = np.nonzero(bad)[0]
        keep = ~bad
        mids, mlogs = ig.midpoints(za[idx], zb[idx], [l[idx] for l in la], [l[idx] for l in lb])
        # children: [a, mid] and [mid, b]
        na = np.concatenate([za[idx], mids])
        nb = np.concatenate([mids, zb[idx]])
        nla = [np.concatenate([l[idx], m]) for l, m in zip(la, mlogs)]
        nlb = [np.concatenate([m, l[idx]]) for l, m in zip(lb, mlogs)]
        nlo, _, _ = ig.segment_values(na, nb, nla, nlb, n_gauss)
        nhi, nmag, nnoise = ig.segment_values(na, nb, nla, nlb, 2 * n_gauss)
        za = np.concatenate([za[keep], na])
        zb = np.concatenate([zb[keep], nb])
        la = [np.concatenate([l[keep], m]) for l, m in zip(la, nla)]
        lb = [np.concatenate([l[keep], m]) for l, m in zip(lb, nlb)]
        lo = np.concatenate([lo[keep], nlo])
        hi = np.concatenate([hi[keep], nhi])
        mag = np.concatenate([mag[keep], nmag])
        noise = np.concatenate([noise[keep], nnoise])
    else:
        err = float(np.sum(seg_err))
        if err > 1e3 * tol * scale:
            raise QuadratureError(f"quadrature error {err:.2e} above tolerance after refinement")
    total = complex(math.fsum(hi.real) + 1j * math.fsum(hi.imag))
    err = float(np.sum(seg_err)) + roundoff
    return IntegralResult(total, err, int(len(hi) * 3 * n_gauss))


def _real_axis_clean(res: IntegralResult) -> IntegralResult:
    v = res.value
    if abs(v.imag) < max(res.error_estimate, 1e-14 * abs(v)):
        v = complex(v.real, 0.0)
    return IntegralResult(v, res.error_estimate, res.nodes)


def pseudo_abelian_I(sys: DarbouxSystem, eta: OneForm, t: complex, t_path: TPath | None = None,
                     opts: TraceOptions | None = None, center=None, tol: float = 1e-12,
                     base_cycle: Cycle | None = None) -> IntegralResult:
    """``I_eps(t)``: trace the real oval at the path's base point, lift, integrate.

    Without ``t_path`` the base point is ``|t|`` and the path is the arc to
    ``arg t``.
    """
    if t_path is None:
        t = complex(t)
        t_path = TPath.arc(abs(t), 0.0, math.atan2(t.imag, t.real))
    t0 = t_path(0.0)
    if abs(t0.imag) > 1e-14 * abs(t0) or t0.real <= 0:
        raise ValueError("path must start on the positive real axis")
    if base_cycle is None:
        base_cycle = trace_oval(sys, t0.real, opts, center)
    cyc = refine_cycle(sys, lift_cycle(sys, base_cycle, t_path))
    res = integrate_form_over_cycle(sys, eta, cyc, tol=tol)
    if t_path.total_log_length == 0:
        res = _real_axis_clean(res)
    return res


# --------------------------------------------------------------------------
# figure-eight cycles
# --------------------------------------------------------------------------


def _slow_intersections(sys: DarbouxSystem, t: float, turning):
    """Real solutions of ``{H0 = t, P0 = 0}`` on both sides of the turning point."""
    p0 = sys.p0
    facs = sys.factors
    tx, ty = turning
    gx, gy = p0.diff(0)(tx, ty), p0.diff(1)(tx, ty)
    tang = np.array([gy, -gx], dtype=float)
    tang /= np.linalg.norm(tang)

    def F(z):
        h0 = sum(a * math.log(p(*z)) for p, a in facs) - math.log(t)
        return np.array([h0, p0(*z)])

    def J(z):
        row = np.zeros(2)
        for p, a in facs:
            v = p(*z)
            row += a * np.array([p.diff(0)(*z), p.diff(1)(*z)]) / v
        return np.array([row, [p0.diff(0)(*z), p0.diff(1)(*z)]])

    found = {}
    for side in (1, -1):
        for r in np.linspace(0.05, 2.0, 40):
            z = np.array([tx, ty]) + side * r * tang
            try:
                for _ in range(80):
                    f = F(z)
                    dz = np.linalg.solve(J(z), -f)
                    lam = 1.0
                    while lam > 1e-8:
                        trial = z + lam * dz
                        if all(p(*trial) > 0 for p, _ in facs) and (
                            np.abs(F(trial)).max() < np.abs(f).max() or lam < 1e-3
                        ):
                            break
                        lam *= 0.5
                    else:
                        raise ValueError
                    z = trial
                    if np.linalg.norm(lam * dz) < 1e-15 or np.abs(F(z)).max() < 1e-15:
                        break
                if np.abs(F(z)).max() > 1e-12:
                    continue
            except (ValueError, np.linalg.LinAlgError, ZeroDivisionError):
                continue
            if np.dot(z - np.array([tx, ty]), tang) * side > 0:
                found[side] = z
                break
    if len(found) != 2:
        raise TraceError("could not locate both intersections of the leaf with P0 = 0")
    return found[1], found[-1]


@dataclass(frozen=True)
class EightGeometry:
    q_plus: np.ndarray
    q_minus: np.ndarray
    base: np.ndarray
    direction: np.ndarray
    radius: float


def figure_eight_cycle(sys: DarbouxSystem, t: float, radius_factor: float = 0.25,
                       branch: int = 1, turning=None, steps_per_piece: int = 96):
    """Figure-eight cycle on the leaf ``log H = log t + i pi eps * branch``.

    The loops encircle the two points of ``{H0 = t} cap {P0 = 0}`` next to the
    turning point, in the linear coordinate xi along the chord
    ``q_minus -> q_plus``.  The path leaves the base point toward ``q_minus``,
    circles it counterclockwise, returns, then circles ``q_plus`` clockwise.
    With this orientation J equals ``I(t e^{i pi eps}) - I(t e^{-i pi eps})``.  Loop radius is ``radius_factor * |q_plus - q_minus|``.
    """
    from .model import find_turning_point

    if turning is None:
        turning = find_turning_point(sys).location
    qp, qm = _slow_intersections(sys, t, turning)
    chord = qp - qm
    dist = float(np.linalg.norm(chord))
    ell = chord / dist
    rho = radius_factor * dist
    facs = sys.factors
    # base point: chord midpoint, projected on {H0 = t} along grad H0
    b = 0.5 * (qp + qm)
    for _ in range(60):
        h0 = sum(a * math.log(p(*b)) for p, a in facs) - math.log(t)
        g = sum(a * np.array([p.diff(0)(*b), p.diff(1)(*b)]) / p(*b) for p, a in facs)
        db = -h0 * g / np.dot(g, g)
        b = b + db
        if np.linalg.norm(db) < 1e-15:
            break
    ev = LeafEvaluator(sys)
    target = math.log(t) + 1j * math.pi * sys.epsilon * branch
    nf = len(sys.polys)
    w0 = np.zeros((1, nf), dtype=int)
    lb = complex(ev.log_H(ev.logs(np.array([b[0]], dtype=complex), np.array([b[1]], dtype=complex)))[0])
    pts, w, _ = _continue(sys, np.array([b], dtype=complex), w0, lb, lambda s: lb + s * (target - lb))
    start = pts[0]
    wstart = w[0]
    xi_b = complex(np.dot(ell, start))
    xi_p = complex(np.dot(ell, qp))
    xi_m = complex(np.dot(ell, qm))
    pieces = [
        lambda s: xi_b + s * ((xi_p - rho) - xi_b),
        lambda s: xi_p + rho * np.exp(1j * (math.pi + 2 * math.pi * s)),
        lambda s: (xi_p - rho) + s * (xi_b - (xi_p - rho)),
        lambda s: xi_b + s * ((xi_m + rho) - xi_b),
        lambda s: xi_m + rho * np.exp(-1j * 2 * math.pi * s),
        lambda s: (xi_m + rho) + s * (xi_b - (xi_m + rho)),
    ]
    z, wz = start, wstart
    all_pts = [start[None, :]]
    all_w = [wstart[None, :]]
    for piece in pieces:
        P, W = continue_along_coordinate(sys, z, wz, target, ell, piece, n_steps=steps_per_piece)
        all_pts.append(P[1:])
        all_w.append(W[1:])
        z, wz = P[-1], W[-1]
    P = np.concatenate(all_pts)
    W = np.concatenate(all_w)
    closure = float(np.linalg.norm(P[-1] - P[0]))
    if closure > 1e-8 or np.any(W[-1] != W[0]):
        raise TraceError(f"figure-eight failed to close (gap {closure:.2e}, windings {W[-1]} vs {W[0]})")
    P[-1] = P[0]
    logs = ev.logs_from_windings(P[:, 0], P[:, 1], W)
    drift = float(np.max(np.abs(ev.log_H(logs) - target)))
    geom = EightGeometry(qp, qm, start, ell, rho)
    # built as (ccw around q_plus, cw around q_minus); the reverse is the
    # orientation matching the variation of I
    return Cycle(P, W, complex(target), 1, closure, drift).reversed(), geom


def figure_eight_J(sys: DarbouxSystem, eta: OneForm, t: float, radius_factor: float = 0.25,
                   tol: float = 1e-12, **kw) -> IntegralResult:
    """``J_eps(t)``: integral of ``eta/(P0 M)`` over the figure-eight cycle."""
    cyc, _ = figure_eight_cycle(sys, t, radius_factor=radius_factor, **kw)
    return integrate_form_over_cycle(sys, eta, cyc, tol=tol)


@dataclass(frozen=True)
class VariationReport:
    I_plus: IntegralResult
    I_minus: IntegralResult
    J: IntegralResult
    residual: float

    @property
    def variation(self) -> complex:
        return self.I_plus.value - self.I_minus.value


def variation_check(sys: DarbouxSystem, eta: OneForm, t: float, floor: float = 1e-12,
                    opts: TraceOptions | None = None, center=None) -> VariationReport:
    """Compare ``I(t e^{i pi eps}) - I(t e^{-i pi eps})`` against ``J(t)``.

    The two lifts start from one traced oval and run along opposite arcs; J is
    computed on an independently constructed figure-eight.
    """
    eps = sys.epsilon
    if eps <= 0:
        raise ValueError("variation is undefined for eps = 0 (degenerate foliation)")
    base = trace_oval(sys, t, opts, center)
    ip = pseudo_abelian_I(sys, eta, t, TPath.arc(t, 0.0, math.pi * eps), base_cycle=base)
    im = pseudo_abelian_I(sys, eta, t, TPath.arc(t, 0.0, -math.pi * eps), base_cycle=base)
    J = figure_eight_J(sys, eta, t)
    var = ip.value - im.value
    residual = abs(var - J.value) / max(abs(J.value), floor)
    return VariationReport(ip, im, J, residual)
