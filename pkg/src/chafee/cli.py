"""Command-line entry point: ``chafee <command> [options]``.

Exit codes: 0 success (or stabilised), 1 not stabilised, 2 solver failure,
3 invasive control, 4 blow-up, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .control import ControlParams, kernel_by_name, selective_kernel, theorem_kernel
from .equilibria import bifurcation_value, continue_branch, find_equilibrium
from .errors import BracketFailure, Blowup, InvasiveControl, NoBranch, NoConvergence
from .spectral import SpectralField, count_zeros, grid_points, sup_norm, synthesize, vertex_residual, write_field_csv
from .stability import assemble, spectrum, theorem_spectrum, verdict
from .timestepping import SimConfig, linear_regime_window, measure_decay_rate, simulate
from .verify import reports_to_json, run_suite, suite_ok

EXIT_OK, EXIT_UNSTABLE, EXIT_SOLVER, EXIT_INVASIVE, EXIT_BLOWUP, EXIT_USAGE = 0, 1, 2, 3, 4, 64

SOLVER_ERRORS = (NoConvergence, BracketFailure, NoBranch)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment. Keys use flag names."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _common(p):
    g = p.add_argument_group("global options")
    g.add_argument("--n-modes", type=positive_int, default=128, help="spectral truncation N")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", default=None, help="run directory (default: runs/<command>)")
    g.add_argument("--lambda-convention", choices=("eigen", "paper-literal"), default="eigen")
    g.add_argument("--config", default=None, help="key=value file; explicit flags take precedence")


def build_parser():
    parser = Parser(prog="chafee", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=Parser, required=True)
    subs = {}

    p = sub.add_parser("bifurcation", help="branches Gamma_j and the trivial branch up to lambda-max")
    p.add_argument("--lambda-max", type=float, default=10.0)
    p.add_argument("--steps", type=positive_int, default=40)
    subs["bifurcation"] = p

    p = sub.add_parser("equilibrium", help="one equilibrium u_j")
    p.add_argument("--j", type=positive_int, default=1)
    p.add_argument("--lam", type=float, default=10.0)
    p.add_argument("--sign", type=int, choices=(1, -1), default=1)
    subs["equilibrium"] = p

    p = sub.add_parser("spectrum", help="linearised spectrum at u_j (j=0: trivial state)")
    p.add_argument("--j", type=int, default=0)
    p.add_argument("--lam", type=float, default=10.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--kernel", default="identity")
    subs["spectrum"] = p

    p = sub.add_parser("simulate", help="time integration of the controlled equation")
    p.add_argument("--j", type=int, default=0, help="target branch (0: zero state)")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--kernel", default="identity")
    p.add_argument("--initial", default="sine:1:0.1")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--record-every", type=positive_int, default=100)
    p.add_argument("--snapshots", action="store_true", help="also write per-snapshot coefficient CSVs")
    subs["simulate"] = p

    p = sub.add_parser("stabilize", help="spectral and dynamical stabilisation test for u_j")
    p.add_argument("--j", type=positive_int, default=2)
    p.add_argument("--lam", type=float, default=4.5)
    p.add_argument("--b", type=float, default=-4.0)
    p.add_argument("--kernel", default="selective")
    p.add_argument("--eps", type=float, default=0.01, help="amplitude of the sin(x) perturbation")
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--T", type=float, default=200.0)
    subs["stabilize"] = p

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("--trials", type=positive_int, default=None)
    p.add_argument("--negative-controls", action="store_true")
    subs["verify"] = p

    p = sub.add_parser("reproduce", help="regenerate figure/theorem data")
    p.add_argument("target", choices=("fig1", "fig2", "theorem"))
    p.add_argument("--lambda-max", type=float, default=30.0, help="fig2 only")
    subs["reproduce"] = p

    for p in subs.values():
        _common(p)
    return parser, subs


def parse_args(argv):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        except UsageError as exc:
            parser.error(str(exc))
        sp = subs[args.command]
        known = {a.dest: a for a in sp._actions}
        unknown = sorted(set(cfg) - set(known))
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        for key, value in cfg.items():
            if isinstance(known[key], argparse._StoreTrueAction):
                cfg[key] = value.lower() in ("1", "true", "yes", "on")
        sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


class Run:
    """Run directory plus manifest bookkeeping."""

    def __init__(self, args):
        self.args = args
        self.dir = Path(args.out_dir or f"runs/{args.command}")
        self.dir.mkdir(parents=True, exist_ok=True)
        self.outputs = []
        self.started = time.strftime("%Y-%m-%dT%H:%M:%S%z")

    def path(self, name):
        p = self.dir / name
        self.outputs.append(str(p))
        return p

    def write_json(self, name, doc):
        with open(self.path(name), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def finish(self, status):
        params = {k: v for k, v in vars(self.args).items()}
        manifest = {
            "command": self.args.command,
            "parameters": params,
            "version": __version__,
            "seed": self.args.seed,
            "started": self.started,
            "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "outputs": self.outputs,
            "exit_code": status,
        }
        with open(self.dir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return status


def _kernel(args, N, j=None):
    return kernel_by_name(args.kernel, N, lam=args.lam, j=j)


def _target(args, N):
    if args.j <= 0:
        return SpectralField.zeros(N)
    return find_equilibrium(args.lam, args.j, 1, N)


def trivial_morse(lam, N):
    return spectrum(assemble(SpectralField.zeros(N), lam), with_zero_counts=False).morse_index


def cmd_bifurcation(args, run):
    N = args.n_modes
    lam_max = args.lambda_max
    js = []
    j = 1
    while bifurcation_value(j, args.lambda_convention) < lam_max:
        js.append(j)
        j += 1

    def branch(j):
        lam_j = bifurcation_value(j, args.lambda_convention)
        lams = np.linspace(lam_j, lam_max, args.steps + 1)[1:]
        return continue_branch(j, float(lams[0]), float(lams[-1]), args.steps, N)

    with ThreadPoolExecutor(max_workers=4) as pool:
        branches = list(pool.map(branch, js))

    rows = []
    trivial_lams = np.linspace(0.0, lam_max, args.steps + 1)
    with open(run.path("trivial.csv"), "w") as fh:
        fh.write("lambda,morse_index\n")
        for lam in trivial_lams:
            fh.write(f"{lam:.17g},{trivial_morse(lam, N)}\n")
            rows.append((float(lam), 0, 0.0))
    for br in branches:
        br.write_csv(run.path(f"branch_j{br.j}.csv"))
        rows.extend(br.diagram_rows())
    with open(run.path("diagram.csv"), "w") as fh:
        fh.write("lambda,branch_j,sup_norm\n")
        for lam, j, s in rows:
            fh.write(f"{lam:.17g},{j},{s:.17g}\n")
    for br in branches:
        print(f"branch j={br.j}: {len(br.samples)} samples, Morse indices {sorted(set(br.morse_indices.tolist()))}")
    print(f"trivial branch: Morse index {trivial_morse(lam_max, N)} at lambda={lam_max:g}")
    return EXIT_OK


def cmd_equilibrium(args, run):
    N = args.n_modes
    u = find_equilibrium(args.lam, args.j, args.sign, N)
    write_field_csv(run.path(f"u_j{args.j}.csv"), u)
    rep = spectrum(assemble(u, args.lam), with_zero_counts=False)
    summary = {
        "j": args.j,
        "lambda": args.lam,
        "sign": args.sign,
        "zero_count": count_zeros(u),
        "vertex_residual": vertex_residual(u, args.j),
        "sup_norm": sup_norm(u),
        "morse_index": rep.morse_index,
    }
    run.write_json("summary.json", summary)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_spectrum(args, run):
    N = args.n_modes
    u = _target(args, N)
    p = ControlParams(args.b, _kernel(args, N, max(args.j, 1)))
    rep = spectrum(assemble(u, args.lam, p, N))
    rep.write(run.path("spectrum.json"), run.path("spectrum.csv"))
    print(f"morse_index={rep.morse_index} margin={rep.margin:.10g}")
    return EXIT_OK


def cmd_simulate(args, run):
    N = args.n_modes
    target = _target(args, N)
    p = ControlParams(args.b, _kernel(args, N, max(args.j, 1)))
    cfg = SimConfig(N=N, dt=args.dt, T=args.T, lam=args.lam, control=p, initial=args.initial,
                    record_every=args.record_every, seed=args.seed)
    run.write_json("simconfig.json", {"config": cfg.to_json(), "version": __version__})
    traj = simulate(cfg, target)
    traj.write_csv(run.path("trajectory.csv"))
    if args.snapshots:
        snap = run.dir / "snapshots"
        snap.mkdir(exist_ok=True)
        traj.write_snapshots(snap)
        run.outputs.append(str(snap))
    print(f"final distance {traj.distances[-1]:.6g}, control norm {traj.control_norms[-1]:.6g}")
    return EXIT_OK


def stabilization_experiment(j, lam, b, kernel, N, eps=0.01, dt=1e-2, T=200.0, record_every=None):
    """Verdicts and a perturbed run for ``u_j`` under ``(b, kernel)``.

    Returns ``(summary, controlled_report, trajectory)``; raises
    :class:`InvasiveControl` if the kernel does not fix ``u_j``.
    """
    u = find_equilibrium(lam, j, 1, N)
    free = verdict(u, lam, None, N)
    p = ControlParams(b, kernel)
    ctrl = verdict(u, lam, p, N)
    cfg = SimConfig(N=N, dt=dt, T=T, lam=lam, control=p, initial=f"target+sine:1:{eps!r}",
                    record_every=record_every or max(1, int(round(0.5 / dt))))
    traj = simulate(cfg, u)
    try:
        rate = measure_decay_rate(traj, linear_regime_window(traj))
    except Exception:
        rate = float("nan")
    summary = {
        "j": j,
        "lambda": lam,
        "b": b,
        "uncontrolled": str(free),
        "uncontrolled_morse_index": free.morse_index,
        "controlled": str(ctrl),
        "margin": ctrl.margin,
        "measured_rate": rate,
        "final_distance": traj.distances[-1],
        "final_control_norm": traj.control_norms[-1],
        "stabilized": bool(ctrl.stable and traj.distances[-1] < 1e-6),
    }
    return summary, ctrl.report, traj


def cmd_stabilize(args, run):
    N = args.n_modes
    kernel = _kernel(args, N, args.j)
    try:
        summary, rep, traj = stabilization_experiment(args.j, args.lam, args.b, kernel, N, args.eps, args.dt, args.T)
    except InvasiveControl as exc:
        run.write_json("summary.json", {"stabilized": False, "error": "invasive control", "control_norm": exc.control_norm})
        print(f"invasive control: {exc}", file=sys.stderr)
        return EXIT_INVASIVE
    rep.write(csv_path=run.path("spectrum.csv"))
    traj.write_csv(run.path("trajectory.csv"))
    run.write_json("summary.json", {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in summary.items()})
    print(json.dumps(summary, indent=2))
    return EXIT_OK if summary["stabilized"] else EXIT_UNSTABLE


def cmd_verify(args, run):
    reports = run_suite(args.seed, args.trials, args.negative_controls)
    with open(run.path("suite.json"), "w") as fh:
        fh.write(reports_to_json(reports) + "\n")
    width = max(len(r.name) for r in reports)
    print(f"{'check':{width}}  {'result':6}  {'worst':>10}  trials")
    for r in reports:
        tag = "PASS" if r.passed else "FAIL"
        if r.negative_control:
            tag += "*"
        print(f"{r.name:{width}}  {tag:6}  {r.worst_residual:10.3e}  {r.trials}")
    if args.negative_controls:
        print("* negative control: expected to FAIL")
    ok = suite_ok(reports)
    print("suite:", "OK" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_SOLVER


def reproduce_fig1(args, run, lam=10.0):
    N = args.n_modes
    M = 400
    x = grid_points(M)
    for j in (1, 2, 3):
        u = find_equilibrium(lam, j, 1, N)
        with open(run.path(f"fig1_u{j}_modes.csv"), "w") as fh:
            fh.write("k,a_k\n")
            for k in range(1, 10):
                fh.write(f"{k},{u.coeff(k):.17g}\n")
        values = synthesize(u, M).values
        with open(run.path(f"fig1_u{j}_profile.csv"), "w") as fh:
            fh.write("x,u," + ",".join(f"mode_{k}" for k in range(1, 10)) + "\n")
            for i in range(M):
                parts = [x[i], values[i]] + [u.coeff(k) * math.sin(k * x[i]) for k in range(1, 10)]
                fh.write(",".join(f"{v:.17g}" for v in parts) + "\n")
        print(f"u_{j}: " + " ".join(f"a{k}={u.coeff(k):+.4e}" for k in range(1, 10)))


def reproduce_theorem(args, run):
    N = args.n_modes
    out = {}
    for j in (1, 2, 3, 4):
        lam_j = bifurcation_value(j, args.lambda_convention)
        b = -lam_j / 2 - 1
        mu_t = theorem_spectrum(lam_j, b, theorem_kernel(lam_j, N), N)
        mu_s = theorem_spectrum(lam_j, b, selective_kernel(j, lam_j, N), N)
        with open(run.path(f"theorem_j{j}.csv"), "w") as fh:
            fh.write("k,mu_theorem,mu_selective\n")
            for k in range(N):
                fh.write(f"{k + 1},{mu_t[k]:.17g},{mu_s[k]:.17g}\n")
        out[f"j{j}"] = {"lambda_j": lam_j, "b": b, "max_mu_theorem": float(mu_t.max()), "max_mu_selective": float(mu_s.max())}
        print(f"j={j} lambda_j={lam_j:.6g} b={b:.6g}: max mu theorem={mu_t.max():.6g} selective={mu_s.max():.6g}")
    run.write_json("theorem_summary.json", out)


def cmd_reproduce(args, run):
    if args.target == "fig1":
        reproduce_fig1(args, run)
    elif args.target == "fig2":
        args.steps = 40
        return cmd_bifurcation(args, run)
    else:
        reproduce_theorem(args, run)
    return EXIT_OK


COMMANDS = {
    "bifurcation": cmd_bifurcation,
    "equilibrium": cmd_equilibrium,
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "stabilize": cmd_stabilize,
    "verify": cmd_verify,
    "reproduce": cmd_reproduce,
}


def main(argv=None):
    args = parse_args(sys.argv[1:] if argv is None else argv)
    run = Run(args)
    try:
        status = COMMANDS[args.command](args, run)
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        status = EXIT_SOLVER
    except InvasiveControl as exc:
        print(f"invasive control: {exc}", file=sys.stderr)
        status = EXIT_INVASIVE
    except Blowup as exc:
        print(str(exc), file=sys.stderr)
        status = EXIT_BLOWUP
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    return run.finish(status)


if __name__ == "__main__":
    sys.exit(main())
