"""Stabilise u_2 (or any u_j) with a noninvasive selective kernel and plot the decay.

    python scripts/stabilization_demo.py --j 2 --lam 4.5 --b -4 --out stabilization.png
"""

import argparse
import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from chafee import selective_kernel
from chafee.cli import stabilization_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--j", type=int, default=2)
    ap.add_argument("--lam", type=float, default=4.5)
    ap.add_argument("--b", type=float, default=-4.0)
    ap.add_argument("--n-modes", type=int, default=64)
    ap.add_argument("--dt", type=float, default=1e-2)
    ap.add_argument("--T", type=float, default=200.0)
    ap.add_argument("--out", default="stabilization.png")
    args = ap.parse_args()

    N = args.n_modes
    summary, report, traj = stabilization_experiment(
        args.j, args.lam, args.b, selective_kernel(args.j, args.lam, N), N, 0.01, args.dt, args.T
    )
    print(json.dumps(summary, indent=2))

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(traj.times, traj.distances, label="|u(t) - u_j|")
    ax.semilogy(traj.times, [max(c, 1e-20) for c in traj.control_norms], label="|control term|")
    ax.set_xlabel("t")
    ax.set_title(f"j={args.j}, lambda={args.lam:g}, b={args.b:g}: {summary['controlled']}", fontsize=9)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
