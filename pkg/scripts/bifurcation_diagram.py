"""Bifurcation diagram: sup-norm of u_j against lambda, coloured by Morse index.

    python scripts/bifurcation_diagram.py --lambda-max 30 --out diagram.png
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from chafee import bifurcation_value, continue_branch


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambda-max", type=float, default=30.0)
    ap.add_argument("--steps", type=int, default=30)
    ap.add_argument("--n-modes", type=int, default=96)
    ap.add_argument("--out", default="bifurcation_diagram.png")
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([0, args.lambda_max], [0, 0], "k-", lw=1, label="u = 0")
    j = 1
    while bifurcation_value(j) < args.lambda_max:
        lam_j = bifurcation_value(j)
        start = lam_j + 1e-3 * max(1.0, lam_j)
        br = continue_branch(j, start, args.lambda_max, args.steps, args.n_modes)
        rows = br.diagram_rows()
        ax.plot([r[0] for r in rows], [r[2] for r in rows], "-", label=f"j={j} (Morse {br.morse_indices[-1]})")
        print(f"branch {j}: onset {lam_j:g}, sup|u| at lambda_max = {rows[-1][2]:.6f}")
        j += 1
    ax.set_xlabel("lambda")
    ax.set_ylabel("max |u|")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
