"""Scan the control gain b and report where the controlled u_j becomes stable.

For each b the leading eigenvalue of the controlled linearisation at u_j is
computed with the selective kernel; the printed table is also written as CSV.

    python scripts/control_threshold_scan.py --j 2 --lam 4.5 --out scan.csv
"""

import argparse

import numpy as np

from chafee import ControlParams, find_equilibrium, selective_kernel, verdict


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--j", type=int, default=2)
    ap.add_argument("--lam", type=float, default=4.5)
    ap.add_argument("--b-min", type=float, default=-8.0)
    ap.add_argument("--b-max", type=float, default=0.0)
    ap.add_argument("--points", type=int, default=33)
    ap.add_argument("--n-modes", type=int, default=64)
    ap.add_argument("--out", default="control_scan.csv")
    args = ap.parse_args()

    N = args.n_modes
    u = find_equilibrium(args.lam, args.j, 1, N)
    h = selective_kernel(args.j, args.lam, N)
    threshold = None
    with open(args.out, "w") as fh:
        fh.write("b,margin,morse_index,stable\n")
        for b in np.linspace(args.b_max, args.b_min, args.points):
            v = verdict(u, args.lam, ControlParams(float(b), h), N)
            fh.write(f"{b:.17g},{v.margin:.17g},{v.morse_index},{int(v.stable)}\n")
            print(f"b={b:+8.4f}  margin={v.margin:+.6f}  morse={v.morse_index}")
            if v.stable and threshold is None:
                threshold = float(b)
    print(f"first stable gain on the grid: {threshold}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
