"""Second-order exponential time differencing for the controlled equation.

The linear part ``-k^2 + lam + b(1 - h_k)`` is diagonal in the sine basis
and is propagated exactly; the nonlinearity ``-lam (u^3)_k`` enters through
the standard ETD2RK predictor-corrector:

    a       = e^{c dt} u_n + dt phi1(c dt) N(u_n)
    u_{n+1} = a + dt phi2(c dt) (N(a) - N(u_n))

Any equilibrium of the controlled system is an exact fixed point of this map.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from .control import ControlParams, control_term, identity_kernel
from .errors import Blowup, DegenerateWindow
from .spectral import SpectralField, _cube_coeffs, read_field_csv, sobolev_norm, sup_norm, write_field_csv

PHI_SWITCH = 1e-4
BLOWUP_LEVEL = 10.0


def phi_functions(z: np.ndarray):
    """``phi1 = (e^z - 1)/z`` and ``phi2 = (e^z - 1 - z)/z^2``, series near zero."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < PHI_SWITCH
    zs = np.where(small, 1.0, z)
    em1 = np.expm1(zs)
    phi1 = np.where(small, 1 + z / 2 + z**2 / 6 + z**3 / 24, em1 / zs)
    phi2 = np.where(small, 0.5 + z / 6 + z**2 / 24 + z**3 / 120, (em1 - zs) / zs**2)
    return phi1, phi2


class ETD2Stepper:
    def __init__(self, N: int, lam: float, p: ControlParams, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        k = np.arange(1, N + 1)
        self.N, self.lam, self.p, self.dt = N, lam, p, dt
        self.symbol = -(k**2.0) + lam + p.symbol(N)
        z = self.symbol * dt
        self.expz = np.exp(z)
        phi1, phi2 = phi_functions(z)
        self.w1 = dt * phi1
        self.w2 = dt * phi2

    def nonlinear(self, a: np.ndarray) -> np.ndarray:
        return -self.lam * _cube_coeffs(a)[: self.N]

    def __call__(self, a: np.ndarray) -> np.ndarray:
        n0 = self.nonlinear(a)
        pred = self.expz * a + self.w1 * n0
        return pred + self.w2 * (self.nonlinear(pred) - n0)


def step(f: SpectralField, lam: float, p: ControlParams, dt: float) -> SpectralField:
    return SpectralField(ETD2Stepper(f.truncation, lam, p, dt)(f.coeffs))


@dataclass
class SimConfig:
    N: int = 128
    dt: float = 1e-3
    T: float = 10.0
    lam: float = 1.0
    control: ControlParams = dc_field(default_factory=lambda: ControlParams(0.0, identity_kernel(1)))
    initial: object = "zero"
    record_every: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.T < self.dt:
            raise ValueError("T must be at least dt")
        if self.N < 8:
            raise ValueError("N must be at least 8")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def to_json(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("control", "initial")}
        d["control"] = {
            "b": self.control.b,
            "tau": self.control.tau,
            "h": [float(x) for x in self.control.kernel.h],
            "tail_value": self.control.kernel.tail_value,
        }
        d["initial"] = self.initial if isinstance(self.initial, str) else [float(x) for x in self.initial.coeffs]
        return d


def resolve_initial(spec, N: int, target: SpectralField | None = None, seed: int = 0) -> SpectralField:
    """Turn an initial-condition spec into a field of ``N`` modes.

    Accepted: a :class:`SpectralField`; ``"zero"``; ``"sine:K:AMP"``;
    ``"random:AMP"`` (seeded, coefficients decaying like ``1/k^2``);
    ``"file:PATH"``; ``"target"``; ``"target+<spec>"``.
    """
    if isinstance(spec, SpectralField):
        return spec.resized(N)
    if spec.startswith("target"):
        if target is None:
            raise ValueError("initial condition refers to a target but none was given")
        rest = spec[len("target"):]
        base = target.resized(N)
        if not rest:
            return base
        if rest[0] != "+":
            raise ValueError(f"bad initial spec {spec!r}")
        return base + resolve_initial(rest[1:], N, target, seed)
    if spec == "zero":
        return SpectralField.zeros(N)
    if spec.startswith("sine:"):
        _, k, amp = spec.split(":")
        return SpectralField.from_modes({int(k): float(amp)}, N)
    if spec.startswith("random:"):
        amp = float(spec.split(":")[1])
        rng = np.random.default_rng(seed)
        a = rng.standard_normal(N) / np.arange(1, N + 1) ** 2
        return SpectralField(amp * a / np.linalg.norm(a))
    if spec.startswith("file:"):
        return read_field_csv(spec[5:]).resized(N)
    raise ValueError(f"unknown initial condition {spec!r}")


@dataclass
class Trajectory:
    times: list = dc_field(default_factory=list)
    states: list = dc_field(default_factory=list)
    distances: list = dc_field(default_factory=list)
    control_norms: list = dc_field(default_factory=list)

    def append(self, t, state, distance, control_norm):
        self.times.append(float(t))
        self.states.append(state)
        self.distances.append(float(distance))
        self.control_norms.append(float(control_norm))

    def __len__(self):
        return len(self.times)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "distance", "control_norm"])
            for row in zip(self.times, self.distances, self.control_norms):
                w.writerow([format(x, ".17g") for x in row])

    def write_snapshots(self, directory) -> None:
        for i, (t, f) in enumerate(zip(self.times, self.states)):
            write_field_csv(f"{directory}/snapshot_{i:05d}.csv", f)


def simulate(cfg: SimConfig, target: SpectralField | None = None) -> Trajectory:
    """Integrate from ``cfg.initial`` to ``cfg.T``, recording distance to ``target``.

    Raises :class:`Blowup` once the grid sup-norm exceeds 10.
    """
    N = cfg.N
    target = SpectralField.zeros(N) if target is None else target.resized(N)
    a = resolve_initial(cfg.initial, N, target, cfg.seed).coeffs
    stepper = ETD2Stepper(N, cfg.lam, cfg.control, cfg.dt)
    n_steps = int(round(cfg.T / cfg.dt))
    traj = Trajectory()

    def record(n, a):
        f = SpectralField(a)
        traj.append(n * cfg.dt, f, sobolev_norm(f - target, 0), sobolev_norm(control_term(cfg.control, f), 0))

    record(0, a)
    for n in range(1, n_steps + 1):
        a = stepper(a)
        # sum |a_k| bounds sup|u|; only sample the grid when the bound is loose
        if not np.all(np.isfinite(a)) or (
            np.sum(np.abs(a)) > BLOWUP_LEVEL and sup_norm(SpectralField(a)) > BLOWUP_LEVEL
        ):
            raise Blowup(n * cfg.dt)
        if n % cfg.record_every == 0 or n == n_steps:
            record(n, a)
    return traj


def measure_decay_rate(traj: Trajectory, window: tuple) -> float:
    """Least-squares slope of ``log(distance)`` against ``t`` on ``[t0, t1]``."""
    t0, t1 = window
    t = np.asarray(traj.times)
    d = np.asarray(traj.distances)
    sel = (t >= t0) & (t <= t1) & (d > 0)
    if np.count_nonzero(sel) < 4:
        raise DegenerateWindow(f"need >= 4 positive samples in [{t0}, {t1}], got {np.count_nonzero(sel)}")
    return float(np.polyfit(t[sel], np.log(d[sel]), 1)[0])


def linear_regime_window(traj: Trajectory, lo: float = 1e-11, hi: float = 1e-3) -> tuple:
    """Later half of the first contiguous span where ``lo < distance < hi``.

    Below ``lo`` round-off dominates, above ``hi`` the nonlinearity does, and
    the early part of the span still carries faster-decaying modes.
    """
    t = np.asarray(traj.times)
    d = np.asarray(traj.distances)
    inside = (d > lo) & (d < hi)
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        raise DegenerateWindow("distance never enters the linear regime")
    start = idx[0]
    end = start
    while end + 1 < t.size and inside[end + 1]:
        end += 1
    mid = start + (end - start) // 2
    if end - mid < 3:
        mid = start
    return float(t[mid]), float(t[end])


def write_manifest(path, cfg: SimConfig, extra: dict | None = None) -> None:
    from . import __version__

    doc = {"config": cfg.to_json(), "version": __version__}
    doc.update(extra or {})
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
