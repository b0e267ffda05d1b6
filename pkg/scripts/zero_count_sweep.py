"""Zero counts of I for a forced-zero form across eps.

For each eps the form is x dy - c x y dy with c fixed so that I vanishes at
``mid`` * t_eps.  With ``--fixed-from`` the constant is computed once at that
eps and reused everywhere, which shows how the zero drifts with eps.
"""

import argparse

from pseudoabel.model import model_center_value, model_system
from pseudoabel.zeros import forced_zero_eta, scan_zeros


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", default="0.1,0.15,0.2,0.3,0.4")
    ap.add_argument("--mid", type=float, default=0.5)
    ap.add_argument("--grid", type=int, default=16)
    ap.add_argument("--fixed-from", type=float, default=None, metavar="EPS")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    fixed = None
    if args.fixed_from is not None:
        e0 = args.fixed_from
        fixed, c = forced_zero_eta(model_system(e0), args.mid * model_center_value(e0))
        print(f"# fixed form from eps={e0}: c = {c:.12g}")
    print("epsilon,t_eps,count,zeros_over_t_eps,failures")
    for eps in (float(e) for e in args.eps.split(",")):
        s, te = model_system(eps), model_center_value(eps)
        eta = fixed or forced_zero_eta(s, args.mid * te)[0]
        rep = scan_zeros(s, eta, 0.3 * te, 0.9 * te, args.grid, jobs=args.jobs)
        zs = " ".join(f"{t / te:.8f}" for t, _ in rep.zeros)
        print(f"{eps},{te:.10f},{rep.count},{zs},{len(rep.failures)}")


if __name__ == "__main__":
    main()
