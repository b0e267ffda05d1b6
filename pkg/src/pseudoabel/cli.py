"""Command-line front end: ``pseudoabel <command> [options]``.

Every option can also be set through an environment variable named
``PSEUDOABEL_<OPTION>`` (for example ``PSEUDOABEL_T_GRID``); explicit flags win.

t-grids are relative to the center value t_eps: ``a:b:n`` is ``n`` evenly
spaced fractions from ``a`` to ``b``, ``a,b,c`` lists fractions, and an empty
string is an empty grid.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import blowup as bl
from .integrals import (IntegralResult, figure_eight_J, pseudo_abelian_I, variation_check)
from .io import LoadedSystem, SystemSpecError, atomic_write, fixture_path, load_system
from .model import DarbouxSystem, OneForm, eval_log_H, find_turning_point, model_center_value
from .tracer import Cycle, TraceError, locate_center, trace_oval
from .zeros import ZeroReport, forced_zero_eta, scan_zeros

log = logging.getLogger("pseudoabel")

ENV_PREFIX = "PSEUDOABEL_"
VERSION = "0.1.0"
CSV_COLUMNS = ("epsilon", "t", "re_I", "im_I", "error_estimate", "nodes")
DEFAULT_ETA = OneForm.parse("0", "x")

EXIT_OK, EXIT_FAIL, EXIT_SPEC = 0, 1, 2


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def parse_t_grid(spec: str) -> tuple[float, ...]:
    spec = spec.strip()
    if not spec:
        return ()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"t-grid {spec!r}: expected a:b:n")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ValueError("t-grid needs n >= 1")
        return tuple(float(v) for v in np.linspace(a, b, n))
    return tuple(float(v) for v in spec.split(","))


def parse_float_list(spec: str) -> tuple[float, ...]:
    return tuple(float(v) for v in spec.split(",") if v.strip())


@dataclass(frozen=True)
class JobConfig:
    system: str | None
    epsilons: tuple | None  # None: use the system file's value
    t_grid: tuple
    tol: float = 1e-12
    out: str | None = None
    jobs: int = 1
    cache: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.jobs < 1:
            raise ValueError("--jobs must be at least 1")
        if self.epsilons is not None and not self.epsilons:
            raise ValueError("epsilon grid is empty")
        if any(not 0 < f < 1 for f in self.t_grid):
            raise ValueError("t-grid fractions must lie in (0, 1)")

    def require_grid(self):
        if not self.t_grid:
            raise ValueError("t-grid is empty")


def _load(cfg: JobConfig) -> LoadedSystem:
    return load_system(cfg.system or fixture_path("model"))


def _systems(cfg: JobConfig, loaded: LoadedSystem) -> list[DarbouxSystem]:
    eps = cfg.epsilons if cfg.epsilons is not None else (loaded.system.epsilon,)
    return [loaded.system.with_epsilon(float(e)) for e in eps]


def _t_eps(sys: DarbouxSystem) -> float:
    return float(locate_center(sys).value_t)


def _eta(sys: DarbouxSystem) -> OneForm:
    return sys.eta if sys.eta is not None else DEFAULT_ETA


def _emit(cfg: JobConfig, text: str, suffix: str = ""):
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        atomic_write(str(cfg.out) + suffix, text)


def _fmt(v: float) -> str:
    return repr(float(v))


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[0]), _fmt(r[1]), _fmt(r[2]), _fmt(r[3]), _fmt(r[4]), int(r[5])])
    return buf.getvalue()


# --------------------------------------------------------------------------
# cache
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CachedEvaluator:
    """Real-axis ``I(t)`` with on-disk caching of ovals and integrals.

    Ovals are keyed by (system digest, eps, t); integrals additionally by the
    form and the tolerance.  Files are written atomically.
    """

    sys: DarbouxSystem
    eta: OneForm
    tol: float
    digest: str
    cache_dir: str | None

    def _key(self, *parts) -> str:
        text = "|".join([VERSION, self.digest, repr(self.sys.epsilon)] + [str(p) for p in parts])
        return hashlib.sha256(text.encode()).hexdigest()[:32]

    def cycle(self, t: float) -> Cycle:
        if self.cache_dir is None:
            return trace_oval(self.sys, t)
        path = Path(self.cache_dir) / "cycles" / f"{self._key('cycle', repr(t))}.json"
        if path.exists():
            return Cycle.from_json(json.loads(path.read_text()))
        cyc = trace_oval(self.sys, t)
        atomic_write(path, cyc.dumps())
        return cyc

    def __call__(self, t: float) -> IntegralResult:
        t = float(t)
        if self.cache_dir is None:
            return pseudo_abelian_I(self.sys, self.eta, t, tol=self.tol)
        key = self._key("I", repr(t), repr(self.tol), str(self.eta.a), str(self.eta.b))
        path = Path(self.cache_dir) / "integrals" / f"{key}.json"
        if path.exists():
            d = json.loads(path.read_text())
            return IntegralResult(complex(d["re"], d["im"]), d["err"], d["nodes"])
        res = pseudo_abelian_I(self.sys, self.eta, t, tol=self.tol, base_cycle=self.cycle(t))
        atomic_write(path, json.dumps({"re": res.value.real, "im": res.value.imag,
                                       "err": res.error_estimate, "nodes": res.nodes}))
        return res


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _grid_rows(cfg, loaded, func):
    rows = []
    for sys_e in _systems(cfg, loaded):
        te = _t_eps(sys_e)
        for f in cfg.t_grid:
            rows.append(func(sys_e, f * te))
    return rows


def cmd_integrate(cfg: JobConfig) -> int:
    cfg.require_grid()
    loaded = _load(cfg)

    def one(s, t):
        r = CachedEvaluator(s, _eta(s), cfg.tol, loaded.digest, cfg.cache)(t)
        return (s.epsilon, t, r.value.real, r.value.imag, r.error_estimate, r.nodes)

    _emit(cfg, _csv(_grid_rows(cfg, loaded, one)))
    return EXIT_OK


def cmd_eight(cfg: JobConfig) -> int:
    cfg.require_grid()
    loaded = _load(cfg)
    if any(s.epsilon <= 0 for s in _systems(cfg, loaded)):
        raise ValueError("figure-eight cycles need eps > 0")

    def one(s, t):
        r = figure_eight_J(s, _eta(s), t, tol=cfg.tol)
        return (s.epsilon, t, r.value.real, r.value.imag, r.error_estimate, r.nodes)

    _emit(cfg, _csv(_grid_rows(cfg, loaded, one)))
    return EXIT_OK


def cmd_variation(cfg: JobConfig) -> int:
    cfg.require_grid()
    loaded = _load(cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "t", "re_var", "im_var", "re_J", "im_J", "residual"])
    worst = 0.0
    for s in _systems(cfg, loaded):
        if s.epsilon <= 0:
            log.warning("eps = 0: degenerate foliation, variation skipped")
            continue
        te = _t_eps(s)
        for f in cfg.t_grid:
            rep = variation_check(s, _eta(s), f * te)
            v, j = rep.variation, rep.J.value
            worst = max(worst, rep.residual)
            w.writerow([_fmt(s.epsilon), _fmt(f * te), _fmt(v.real), _fmt(v.imag), _fmt(j.real),
                        _fmt(j.imag), _fmt(rep.residual)])
    _emit(cfg, buf.getvalue())
    return EXIT_OK if worst <= 1e-5 else EXIT_FAIL


def cmd_blowup(cfg: JobConfig) -> int:
    loaded = _load(cfg)
    charts = cfg.extra.get("charts") or ("U1", "U2", "U3")
    lines = []
    for ch in charts:
        r = bl.pullback_sigma(loaded.system, ch)
        orders = ", ".join("-" if o is None else str(o) for o in r.coefficient_orders)
        lines.append(f"{ch} [basis {', '.join(bl.CHART_BASIS[ch])}] order {r.divisor_order} "
                     f"(per coefficient: {orders})")
        lines.append(f"  {r.form}")
    _emit(cfg, "\n".join(lines) + "\n")
    return EXIT_OK


def _scan_one(args):
    s, eta, lo, hi, n, tol, digest, cache = args
    ev = CachedEvaluator(s, eta, tol, digest, cache)
    return scan_zeros(s, eta, lo, hi, n, tol=tol, evaluate=ev)


def cmd_scan(cfg: JobConfig) -> int:
    cfg.require_grid()
    if len(cfg.t_grid) < 8:
        raise ValueError("scan needs at least 8 grid points")
    loaded = _load(cfg)
    started = time.perf_counter()
    forced = cfg.extra.get("forced_zero")
    if forced is not None and not 0 < forced < 1:
        raise ValueError("--forced-zero must be a fraction of t_eps in (0, 1)")
    jobs = []
    for s in _systems(cfg, loaded):
        te = _t_eps(s)
        # with --forced-zero, eta is rebuilt per eps so that I vanishes at forced * t_eps
        eta = forced_zero_eta(s, forced * te)[0] if forced is not None else _eta(s)
        jobs.append((s, eta, cfg.t_grid[0] * te, cfg.t_grid[-1] * te, len(cfg.t_grid),
                     cfg.tol, loaded.digest, cfg.cache))
    reports: list[ZeroReport | str] = []
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            futures = [ex.submit(_scan_one, j) for j in jobs]
            for fu in futures:
                try:
                    reports.append(fu.result())
                except Exception as exc:  # partial results are still written
                    reports.append(f"{type(exc).__name__}: {exc}")
    else:
        for j in jobs:
            try:
                reports.append(_scan_one(j))
            except Exception as exc:
                reports.append(f"{type(exc).__name__}: {exc}")
    rows, summary = [], []
    for j, rep in zip(jobs, reports):
        eps = j[0].epsilon
        if isinstance(rep, str):
            summary.append({"epsilon": eps, "error": rep})
            continue
        for t, re, im, err, nodes in rep.samples:
            rows.append((eps, t, re, im, err, nodes))
        summary.append(rep.to_json())
    doc = {"format": "pseudoabel.scan/1", "system": loaded.name, "system_sha256": loaded.digest,
           "tol": cfg.tol, "forced_zero": forced, "t_grid": list(cfg.t_grid), "reports": summary,
           "counts": [r.get("count") for r in summary]}
    text_csv = _csv(rows)
    text_json = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if cfg.out is None:
        sys.stdout.write(text_csv)
        sys.stdout.write(text_json)
    else:
        _emit(cfg, text_csv, ".csv")
        _emit(cfg, text_json, ".json")
    log.info("scan finished in %.2f s", time.perf_counter() - started)
    failed = any(isinstance(r, str) for r in reports)
    return EXIT_FAIL if failed else EXIT_OK


# ---- portrait -------------------------------------------------------------


def _svg_path(points, to_px, close=False) -> str:
    segs = [f"{'M' if k == 0 else 'L'}{to_px(x, y)}" for k, (x, y) in enumerate(points)]
    return " ".join(segs) + (" Z" if close else "")


def render_portrait(sys_: DarbouxSystem, levels, grid: int = 400) -> tuple[str, list]:
    """SVG text and warnings for a phase portrait on the domain rectangle."""
    from skimage import measure

    x0, x1, y0, y1 = sys_.domain
    width = 600.0
    scale = width / (x1 - x0)
    height = scale * (y1 - y0)

    def to_px(x, y):
        return f"{(x - x0) * scale:.3f},{(y1 - y) * scale:.3f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width:.3f} {height:.3f}" '
           f'width="{width:.0f}" height="{height:.0f}">',
           f'<rect x="0" y="0" width="{width:.3f}" height="{height:.3f}" fill="white"/>']
    warnings = []
    center = None
    if sys_.epsilon > 0:
        try:
            center = locate_center(sys_)
        except Exception as exc:
            warnings.append(f"center not found: {exc}")
    for f in levels:
        if center is None:
            warnings.append(f"level {f}: no center, skipped")
            continue
        try:
            cyc = trace_oval(sys_, f * center.value_t)
        except (TraceError, RuntimeError) as exc:
            warnings.append(f"level {f}: {exc}")
            continue
        pts = [(p[0].real, p[1].real) for p in cyc.points[:-1]]
        out.append(f'<path class="level" data-level="{f!r}" fill="none" stroke="#1f77b4" '
                   f'stroke-width="1" d="{_svg_path(pts, to_px, close=True)}"/>')
    xs = np.linspace(x0, x1, grid)
    ys = np.linspace(y0, y1, grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    for k, p in enumerate(sys_.polys):
        vals = np.asarray(p(X, Y), dtype=float)
        parts = []
        for c in measure.find_contours(vals, 0.0):
            px = x0 + c[:, 0] * (x1 - x0) / (grid - 1)
            py = y0 + c[:, 1] * (y1 - y0) / (grid - 1)
            parts.append(_svg_path(zip(px, py), to_px))
        if parts:
            name = "P0" if k == 0 else f"P{k}"
            colour = "#d62728" if k == 0 else "#2ca02c"
            out.append(f'<path class="curve" data-poly="{name}" fill="none" stroke="{colour}" '
                       f'stroke-width="1.5" d="{" ".join(parts)}"/>')
    if center is not None:
        cx, cy = center.location
        out.append(f'<circle class="marker" data-kind="center" cx="{(cx - x0) * scale:.3f}" '
                   f'cy="{(y1 - cy) * scale:.3f}" r="4" fill="black"/>')
    try:
        tp = find_turning_point(sys_)
        tx, ty = tp.location
        out.append(f'<circle class="marker" data-kind="turning-point" cx="{(tx - x0) * scale:.3f}" '
                   f'cy="{(y1 - ty) * scale:.3f}" r="4" fill="none" stroke="black"/>')
    except Exception as exc:
        warnings.append(f"turning point not found: {exc}")
    out.append("</svg>")
    return "\n".join(out) + "\n", warnings


def cmd_portrait(cfg: JobConfig) -> int:
    loaded = _load(cfg)
    s = _systems(cfg, loaded)[0]
    svg, warnings = render_portrait(s, cfg.t_grid)
    for w in warnings:
        log.warning(w)
    _emit(cfg, svg)
    return EXIT_OK


# ---- verify -------------------------------------------------------------


def _is_model(s: DarbouxSystem) -> bool:
    from .poly import parse_poly

    return (len(s.factors) == 1 and (s.p0 - parse_poly("y - x^2")).is_zero()
            and (s.factors[0][0] - parse_poly("1 - y")).is_zero() and s.factors[0][1] == 1.0)


def run_checks(cfg: JobConfig, loaded: LoadedSystem) -> list[dict]:
    checks = []

    def add(name, status, detail=""):
        checks.append({"check": name, "status": status, "detail": detail})

    base = loaded.system
    model = _is_model(base)
    # pull-backs
    for ch in ("U1", "U2", "U3"):
        r = bl.pullback_sigma(base, ch)
        ok = r.divisor_order == 5
        detail = f"order {r.divisor_order}"
        if model:
            same = bl.forms_equal(r.form, bl.golden_form(ch))
            ok = ok and same
            detail += ", matches reference form" if same else ", differs from reference form"
        add(f"pullback {ch}", "pass" if ok else "fail", detail)
    toy = bl.pullback_sigma(bl.toy_omega(2), "U1", bl.Weights(1, 1, 1), names=bl.TOY_BASIS)
    ok = toy.divisor_order == 2 and bl.forms_equal(toy.form, bl.toy_golden_form(2))
    add("pullback toy (a=2)", "pass" if ok else "fail", f"order {toy.divisor_order}")
    # s-integral limits
    d = abs(bl.eval_s_integral((0.3, 0.8, 1e-4)) - bl.eval_s_integral((0.3, 0.8, 0.0)))
    add("s continuity at t3=0", "pass" if d <= 1e-6 else "fail", f"jump {d:.2e}")
    d = abs(bl.center_family_s(1e-3) - math.exp(-1))
    add("s at centers -> 1/e", "pass" if d <= 1e-6 else "fail", f"deviation {d:.2e}")
    # H o pi commutation
    if model:
        worst = 0.0
        for X in np.linspace(-0.6, 0.6, 4):
            for Y in np.linspace(0.5, 1.5, 4):
                for t3 in np.linspace(0.2, 0.7, 4):
                    p = bl.ChartPoint("U3", (X, Y, t3))
                    s_val = bl.eval_s_integral(p)
                    if s_val <= 0:
                        continue
                    x, y, e = bl.blow_down(p)
                    lhs = eval_log_H(base.with_epsilon(e), (x, y)).real
                    worst = max(worst, abs(lhs - e * math.log(e * s_val)))
        add("H o pi = (t3^2 s)^(t3^2)", "pass" if worst <= 1e-10 else "fail", f"max {worst:.2e}")
    else:
        add("H o pi = (t3^2 s)^(t3^2)", "skip", "formula specific to the model system")
    # variation identity
    for s in _systems(cfg, loaded):
        if s.epsilon <= 0:
            add(f"variation eps={s.epsilon}", "skip", "degenerate foliation (eps = 0)")
            continue
        te = _t_eps(s)
        if model:
            d = abs(te - model_center_value(s.epsilon)) / model_center_value(s.epsilon)
            add(f"center value eps={s.epsilon}", "pass" if d <= 1e-10 else "fail", f"rel {d:.2e}")
        for f in cfg.t_grid:
            try:
                rep = variation_check(s, _eta(s), f * te)
                st = "pass" if rep.residual <= 1e-5 else "fail"
                add(f"variation eps={s.epsilon} t/t_eps={f}", st, f"residual {rep.residual:.2e}")
            except Exception as exc:
                add(f"variation eps={s.epsilon} t/t_eps={f}", "fail", f"{type(exc).__name__}: {exc}")
    return checks


def cmd_verify(cfg: JobConfig) -> int:
    loaded = _load(cfg)
    checks = run_checks(cfg, loaded)
    lines = [f"{c['status'].upper():4s}  {c['check']}  {c['detail']}" for c in checks]
    sys.stdout.write("\n".join(lines) + "\n")
    failed = [c for c in checks if c["status"] == "fail"]
    if cfg.out is not None:
        doc = {"format": "pseudoabel.verify/1", "system": loaded.name, "checks": checks,
               "ok": not failed}
        atomic_write(cfg.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "verify": (cmd_verify, "run the identity suite", "0.3,0.5,0.7"),
    "portrait": (cmd_portrait, "write an SVG phase portrait", "0.1:0.9:8"),
    "scan": (cmd_scan, "count real zeros of I on a t-grid", "0.3:0.9:16"),
    "integrate": (cmd_integrate, "tabulate I(t)", "0.3:0.9:7"),
    "variation": (cmd_variation, "compare Var I with J", "0.3,0.5,0.7"),
    "blowup": (cmd_blowup, "print the strict transforms of the family", ""),
    "eight": (cmd_eight, "tabulate J(t) over figure-eight cycles", "0.3:0.9:7"),
}


def build_parser() -> argparse.ArgumentParser:
    env = os.environ
    p = argparse.ArgumentParser(prog="pseudoabel", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=VERSION)
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_, grid) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--system", default=env.get(ENV_PREFIX + "SYSTEM"),
                        help="system JSON file (default: the built-in model)")
        sp.add_argument("--epsilon", default=env.get(ENV_PREFIX + "EPSILON"),
                        help="comma-separated eps values (default: from the system file)")
        sp.add_argument("--t-grid", default=env.get(ENV_PREFIX + "T_GRID", grid),
                        help=f"fractions of t_eps (default {grid!r})")
        sp.add_argument("--tol", type=float, default=float(env.get(ENV_PREFIX + "TOL", 1e-12)))
        sp.add_argument("--out", default=env.get(ENV_PREFIX + "OUT"))
        sp.add_argument("--jobs", type=int, default=int(env.get(ENV_PREFIX + "JOBS", 1)))
        sp.add_argument("--cache", default=env.get(ENV_PREFIX + "CACHE"))
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "blowup":
            sp.add_argument("--chart", action="append", choices=("U1", "U2", "U3"))
        if name == "scan":
            sp.add_argument("--forced-zero", type=float, metavar="FRACTION",
                            default=env.get(ENV_PREFIX + "FORCED_ZERO"),
                            help="replace eta by x dy - c x y dy vanishing at FRACTION * t_eps")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = JobConfig(
            system=args.system,
            epsilons=parse_float_list(args.epsilon) if args.epsilon else None,
            t_grid=parse_t_grid(args.t_grid),
            tol=args.tol,
            out=args.out,
            jobs=args.jobs,
            cache=args.cache,
            extra={"charts": tuple(getattr(args, "chart", None) or ()),
                   "forced_zero": (None if getattr(args, "forced_zero", None) is None
                                   else float(args.forced_zero))},
        )
        return COMMANDS[args.command][0](cfg)
    except SystemSpecError as exc:
        print(f"error: invalid system file: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
