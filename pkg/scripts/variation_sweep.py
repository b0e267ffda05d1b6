"""Residual of Var I = J over an (eps, t) grid for the model with eta = (x + 2y) dy.

    python scripts/variation_sweep.py --eps 0.1,0.2,0.4 --frac 0.3,0.5,0.7
"""

import argparse
import csv
import sys
import time

from pseudoabel.integrals import variation_check
from pseudoabel.model import OneForm, model_center_value, model_system


def floats(text):
    return [float(v) for v in text.split(",")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=floats, default=[0.1, 0.2, 0.4])
    ap.add_argument("--frac", type=floats, default=[0.3, 0.5, 0.7])
    ap.add_argument("--eta", default="x + 2*y", help="dy coefficient of eta")
    args = ap.parse_args()
    eta = OneForm.parse("0", args.eta)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["epsilon", "t_over_t_eps", "abs_J", "residual", "seconds"])
    for eps in args.eps:
        s, te = model_system(eps), model_center_value(eps)
        for f in args.frac:
            t0 = time.perf_counter()
            rep = variation_check(s, eta, f * te)
            w.writerow([eps, f, f"{abs(rep.J.value):.6e}", f"{rep.residual:.3e}",
                        f"{time.perf_counter() - t0:.2f}"])


if __name__ == "__main__":
    main()
