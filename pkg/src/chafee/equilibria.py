"""Equilibria of ``u_xx + lam u (1 - u^2) = 0`` with ``u(0) = u(pi) = 0``.

Branch ``j`` bifurcates from zero at ``lam_j = j^2`` (the Dirichlet
eigenvalue of ``-d^2/dx^2`` for ``sin(jx)`` on ``(0, pi)``) and carries
solutions with ``j - 1`` interior zeros. Solutions are found by shooting in
the initial slope, transferred to the sine basis and polished by Newton's
method on the truncated Galerkin system.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import BracketFailure, IntegrationBlowup, NoBranch, NoConvergence
from .spectral import (
    GridSamples,
    SpectralField,
    analyze,
    count_zeros,
    cube,
    grid_points,
    sup_norm,
)
from .stability import assemble, spectrum

SHOOT_RTOL = 1e-10
SHOOT_ATOL = 1e-12
BLOWUP_LEVEL = 10.0
SWEEP_STEPS = 64
NEWTON_TOL = 1e-10
NEWTON_MAXITER = 25

__all__ = [
    "EquilibriumBranch",
    "ShootingState",
    "bifurcation_value",
    "continue_branch",
    "count_zeros",
    "equilibrium_residual",
    "find_equilibrium",
    "refine_newton",
    "shoot",
]


def bifurcation_value(j: int, convention: str = "eigen") -> float:
    """Onset of branch ``j``.

    ``"eigen"`` gives ``j**2``; ``"paper-literal"`` gives ``j**2 * pi**2``,
    the unit-interval value, for side-by-side comparisons only.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    if convention == "eigen":
        return float(j * j)
    if convention == "paper-literal":
        return float(j * j) * math.pi**2
    raise ValueError(f"unknown lambda convention {convention!r}")


@dataclass(frozen=True)
class ShootingState:
    slope: float
    terminal_value: float
    zero_count: int


def _rhs(lam):
    def f(x, y):
        return [y[1], -lam * y[0] * (1.0 - y[0] * y[0])]

    return f


def _zero_event(x, y):
    return y[0]


def _blowup_event(x, y):
    return BLOWUP_LEVEL - abs(y[0])


_blowup_event.terminal = True


def _integrate(lam, slope, dense=False):
    sol = solve_ivp(
        _rhs(lam),
        (0.0, math.pi),
        [0.0, slope],
        method="DOP853",
        rtol=SHOOT_RTOL,
        atol=SHOOT_ATOL,
        events=(_zero_event, _blowup_event),
        dense_output=dense,
    )
    zeros = sol.t_events[0]
    # the launch point u(0) = 0 and a root sitting on x = pi are not interior
    n = int(np.count_nonzero((zeros > 1e-9) & (zeros < math.pi - 1e-9)))
    blown = sol.status == 1
    return sol, n, blown


def shoot(lam: float, slope: float) -> ShootingState:
    """Integrate ``u'' = -lam u (1 - u^2)``, ``u(0) = 0``, ``u'(0) = slope`` over ``[0, pi]``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if slope == 0.0:
        # u = 0 exactly; the event finder would report spurious roots of a zero function
        return ShootingState(0.0, 0.0, 0)
    sol, n, blown = _integrate(lam, slope)
    if blown:
        raise IntegrationBlowup(f"|u| exceeded {BLOWUP_LEVEL} at x={sol.t[-1]:.4g} (slope={slope:g})")
    return ShootingState(float(slope), float(sol.y[0, -1]), n)


def _shooting_root(lam, j):
    """Slope of the positive solution on branch ``j``.

    ``P(s)``: the trajectory has at least ``j`` interior zeros. Zeros move
    right as the slope (amplitude) grows, so ``P`` flips from true to false
    exactly once on ``(0, sqrt(lam/2))``; the root is where the ``j``-th zero
    reaches ``x = pi``.
    """
    ds = math.sqrt(lam) / SWEEP_STEPS

    def count(s):
        sol, n, blown = _integrate(lam, s)
        return n, (None if blown else sol.y[0, -1])

    lo = hi = None
    for i in range(1, SWEEP_STEPS + 1):
        s = i * ds
        n, _ = count(s)
        if n >= j:
            lo = s
        else:
            hi = s
            break
    if lo is None or hi is None:
        raise BracketFailure(f"no slope bracket for branch j={j} at lambda={lam:g}")

    # narrow until lo has exactly j zeros and hi is j-1 zeros without blow-up
    for _ in range(200):
        n_lo, t_lo = count(lo)
        n_hi, t_hi = count(hi)
        if n_lo == j and n_hi == j - 1 and t_hi is not None and t_lo * t_hi < 0:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if count(mid)[0] >= j:
            lo = mid
        else:
            hi = mid
    else:  # pragma: no cover
        raise BracketFailure(f"bracket refinement failed for j={j} at lambda={lam:g}")

    if t_hi is None or t_lo * t_hi > 0:
        return 0.5 * (lo + hi)

    def terminal(s):
        return _integrate(lam, s)[0].y[0, -1]

    return brentq(terminal, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def equilibrium_residual(f: SpectralField, lam: float) -> SpectralField:
    """Galerkin residual ``-k^2 a_k + lam a_k - lam (u^3)_k``."""
    k = f.modes
    return SpectralField((-(k**2.0) + lam) * f.coeffs - lam * cube(f).coeffs)


def refine_newton(f: SpectralField, lam: float, tol: float = NEWTON_TOL, maxiter: int = NEWTON_MAXITER) -> SpectralField:
    """Newton iteration on the truncated residual; Jacobian from :func:`assemble` with ``b = 0``."""
    a = f
    for _ in range(maxiter + 1):
        r = equilibrium_residual(a, lam).coeffs
        if np.linalg.norm(r) < tol:
            return a
        J = assemble(a, lam)
        a = SpectralField(a.coeffs - np.linalg.solve(J, r))
    raise NoConvergence(f"Newton did not converge in {maxiter} iterations at lambda={lam:g}", lam)


def find_equilibrium(lam: float, j: int, sign: int = 1, N: int = 128) -> SpectralField:
    """Equilibrium on branch ``j`` with ``sign * u'(0) > 0``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if lam <= bifurcation_value(j):
        raise NoBranch(f"branch j={j} exists only for lambda > {bifurcation_value(j):g} (got {lam:g})")
    slope = _shooting_root(lam, j)
    sol, _, _ = _integrate(lam, slope, dense=True)
    M = 4 * N
    u = sol.sol(grid_points(M))[0]
    f = refine_newton(analyze(GridSamples(u), N), lam)
    zc = count_zeros(f)
    if zc != j - 1:
        raise NoConvergence(f"solution at lambda={lam:g} has {zc} zeros, expected {j - 1}", lam)
    return f if sign == 1 else -f


@dataclass
class EquilibriumBranch:
    j: int
    samples: list = dc_field(default_factory=list)  # (lam, field, morse_index, sign)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def fields(self) -> list:
        return [s[1] for s in self.samples]

    @property
    def morse_indices(self) -> np.ndarray:
        return np.array([s[2] for s in self.samples], dtype=int)

    def write_csv(self, path) -> None:
        N = max(f.truncation for f in self.fields) if self.samples else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["j", "lambda", "sign", "morse_index"] + [f"a_{k}" for k in range(1, N + 1)])
            for lam, f, mi, sgn in self.samples:
                w.writerow(
                    [self.j, format(lam, ".17g"), sgn, mi]
                    + [format(float(a), ".17g") for a in f.resized(N).coeffs]
                )

    def diagram_rows(self):
        """``(lambda, j, sup_norm)`` rows for a bifurcation diagram."""
        return [(lam, self.j, sup_norm(f)) for lam, f, _, _ in self.samples]


def continue_branch(j: int, lam_from: float, lam_to: float, steps: int, N: int = 128, sign: int = 1) -> EquilibriumBranch:
    """Natural-parameter continuation over ``steps`` equally spaced lambdas.

    Each solution seeds Newton at the next lambda; if Newton fails or lands
    off the branch (wrong zero count, or an amplitude collapse towards the
    trivial state) the point is re-solved by shooting.
    """
    if lam_from <= bifurcation_value(j):
        raise NoBranch(f"continuation must start past lambda_{j} = {bifurcation_value(j):g}")
    branch = EquilibriumBranch(j)
    prev = None
    for lam in np.linspace(lam_from, lam_to, steps):
        lam = float(lam)
        f = None
        if prev is not None:
            try:
                f = refine_newton(prev, lam)
                # near onset Newton can slide onto u = 0, which keeps the zero
                # count of a tiny field; a collapse in amplitude flags it
                if count_zeros(f) != j - 1 or np.linalg.norm(f.coeffs) < 0.5 * np.linalg.norm(prev.coeffs):
                    f = None
            except (NoConvergence, np.linalg.LinAlgError):
                f = None
        if f is None:
            try:
                f = find_equilibrium(lam, j, sign, N)
            except (NoConvergence, BracketFailure) as exc:
                raise NoConvergence(f"continuation of branch {j} failed at lambda={lam:g}: {exc}", lam) from exc
        rep = spectrum(assemble(f, lam), with_zero_counts=False)
        branch.samples.append((lam, f, rep.morse_index, sign))
        prev = f
    return branch
