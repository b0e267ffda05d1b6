"""Phase portraits of H = (1 - y)(y - x^2)^eps for a few eps, written as SVG."""

import argparse
from pathlib import Path

from pseudoabel.cli import render_portrait
from pseudoabel.io import atomic_write
from pseudoabel.model import model_system


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="portraits")
    ap.add_argument("--eps", default="0.1,0.5,1.0")
    ap.add_argument("--levels", type=int, default=8)
    args = ap.parse_args()
    levels = [(k + 1) / (args.levels + 1) for k in range(args.levels)]
    for eps in (float(e) for e in args.eps.split(",")):
        svg, warnings = render_portrait(model_system(eps), levels)
        path = Path(args.out) / f"model_eps{eps:g}.svg"
        atomic_write(path, svg)
        print(path, *(f"\n  warning: {w}" for w in warnings))


if __name__ == "__main__":
    main()
