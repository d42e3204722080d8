"""Executable checks of the algebraic and analytic structure behind the controls.

Objects of the symmetry groupoid are vertex spaces: ``X_0 = {0}``, ``X_j``
(odd multiples of ``j``) and ``X~_j`` (all multiples of ``j``). Morphisms are
signed unit-modulus filters ``v -> sign * C_h v``. Filters are diagonal, so
every morphism maps a vertex space into itself and the groupoid splits into
the vertex symmetry groups ``G_j``; composition across different objects is
refused.

Every check returns a :class:`CheckReport`. Passing ``negative=True`` runs a
deliberately broken variant that is expected to fail, which guards the
sensitivity of the check itself.
"""

from __future__ import annotations

import functools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .control import ControlParams, FilterKernel, apply_filter, compose, identity_kernel, is_member_H, reflection_kernel
from .equilibria import find_equilibrium
from .errors import CompositionError
from .spectral import SpectralField, count_zeros, cube, reflect, sobolev_norm, vertex_mask, vertex_residual
from .stability import assemble, recommended_modes, spectrum, theorem_spectrum
from .timestepping import SimConfig, simulate


@dataclass(frozen=True)
class Vertex:
    index: int
    tilde: bool = False

    def __post_init__(self):
        if self.index < 0 or (self.index == 0 and self.tilde):
            raise ValueError(f"invalid vertex {self.index}{'~' if self.tilde else ''}")

    def fixed_mask(self, N: int) -> np.ndarray:
        """Modes an isotropy kernel of this vertex must leave at ``+1``."""
        if self.index == 0:
            return np.zeros(N, dtype=bool)
        if self.tilde:
            return np.arange(1, N + 1) % self.index == 0
        return vertex_mask(N, self.index)

    def __str__(self):
        return f"X{self.index}{'~' if self.tilde else ''}"


@dataclass(frozen=True)
class Morphism:
    source_j: Vertex
    target_j: Vertex
    sign: int
    kernel: FilterKernel

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def __matmul__(self, other: "Morphism") -> "Morphism":
        """``self @ other`` is ``self o other``: apply ``other`` first."""
        if other.target_j != self.source_j:
            raise CompositionError(f"cannot compose {self.source_j}<-{self.target_j} after ->{other.target_j}")
        return Morphism(other.source_j, self.target_j, self.sign * other.sign, compose(self.kernel, other.kernel))

    def inverse(self) -> "Morphism":
        if not self.kernel.unit_modulus:
            raise ValueError("only unit-modulus morphisms are invertible here")
        return Morphism(self.target_j, self.source_j, self.sign, self.kernel)

    def act(self, f: SpectralField) -> SpectralField:
        return self.sign * apply_filter(self.kernel, f)

    def same_as(self, other: "Morphism") -> bool:
        return (
            self.source_j == other.source_j
            and self.target_j == other.target_j
            and self.sign == other.sign
            and self.kernel == other.kernel
        )

    @property
    def in_isotropy(self) -> bool:
        """Sign ``+1`` and the kernel fixes the source vertex pointwise."""
        v = self.source_j
        if self.sign != 1:
            return False
        if v.index == 0:
            return True
        return is_member_H(self.kernel, v.index, tilde=v.tilde)


def identity_morphism(v: Vertex, N: int) -> Morphism:
    return Morphism(v, v, 1, identity_kernel(N))


def random_vertex_morphism(rng, v: Vertex, N: int) -> Morphism:
    """Uniform element of the vertex symmetry group of ``v`` (finite truncation)."""
    h = rng.choice([-1.0, 1.0], size=N)
    h[v.fixed_mask(N)] = 1.0
    tail = 1.0 if v.index else float(rng.choice([-1.0, 1.0]))
    return Morphism(v, v, int(rng.choice([-1, 1])), FilterKernel(h, tail))


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_residual: float
    trials: int
    tolerance: float = 0.0
    negative_control: bool = False
    detail: str = ""

    @property
    def as_expected(self) -> bool:
        """Positive checks must pass, negative controls must fail."""
        return self.passed != self.negative_control

    def to_json(self) -> dict:
        d = asdict(self)
        d["worst_residual"] = float(self.worst_residual)
        return d


def _report(name, worst, trials, tol, negative, detail=""):
    worst = float(worst)
    return CheckReport(
        name=name + (" [negative]" if negative else ""),
        passed=bool(worst <= tol),
        worst_residual=worst,
        trials=trials,
        tolerance=tol,
        negative_control=negative,
        detail=detail,
    )


def _rng(seed):
    return np.random.default_rng(seed)


@functools.lru_cache(maxsize=64)
def _equilibrium(lam: float, j: int, N: int) -> SpectralField:
    return find_equilibrium(lam, j, 1, N)


VERTICES = [Vertex(0)] + [Vertex(j) for j in range(1, 7)] + [Vertex(j, True) for j in range(1, 7)]


def check_groupoid_axioms(seed: int = 0, trials: int = 1000, N: int = 32, negative: bool = False) -> CheckReport:
    """Associativity, identities and inverses on random composable triples.

    Also checks closure of each vertex group, that group elements preserve
    their vertex space, and that non-composable pairs are refused. With
    ``negative=True`` the kernels are drawn away from the unit circle, so the
    self-inverse property breaks.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = _rng(seed)
    worst = 0.0
    refused = 0
    for _ in range(trials):
        v = VERTICES[rng.integers(len(VERTICES))]
        g1, g2, g3 = (random_vertex_morphism(rng, v, N) for _ in range(3))
        if negative:
            g1 = Morphism(v, v, g1.sign, FilterKernel(g1.kernel.h * rng.uniform(0.5, 2.0, N), g1.kernel.tail_value))
        e = identity_morphism(v, N)
        lhs, rhs = (g3 @ g2) @ g1, g3 @ (g2 @ g1)
        worst = max(worst, float(np.max(np.abs(lhs.kernel.h - rhs.kernel.h))), abs(lhs.sign - rhs.sign))
        for m in (g1 @ e, e @ g1):
            worst = max(worst, 0.0 if m.same_as(g1) else 1.0)
        # unit-modulus elements are their own inverses
        sq = g1 @ g1
        worst = max(worst, float(np.max(np.abs(sq.kernel.h - 1.0))), abs(sq.kernel.tail_value - 1.0), abs(sq.sign - 1))
        if not negative:
            inv = g1.inverse()
            for m in (inv @ g1, g1 @ inv):
                worst = max(worst, 0.0 if m.same_as(e) else 1.0)
        # closure: products stay in the vertex symmetry group
        prod = g2 @ g1
        if v.index and not is_member_H(prod.kernel, v.index, tilde=v.tilde):
            worst = max(worst, 1.0)
        # representation: group elements map X_v onto itself (as +-identity)
        if v.index:
            mask = v.fixed_mask(N)
            y = SpectralField(np.where(mask, rng.standard_normal(N), 0.0))
            diff = g2.act(y) - g2.sign * y
            worst = max(worst, sobolev_norm(diff, 0))
        others = [w for w in VERTICES if w != v]
        w = others[rng.integers(len(others))]
        try:
            random_vertex_morphism(rng, w, N) @ g1
        except CompositionError:
            refused += 1
        else:
            worst = max(worst, 1.0)
    return _report("groupoid_axioms", worst, trials, 0.0, negative, f"{refused} mismatched compositions refused")


def check_vertex_invariance(j: int, trials: int = 100, N: int = 64, lam: float = 10.0, seed: int = 0, negative: bool = False) -> CheckReport:
    """``u_xx + lam u (1 - u^2)`` maps random ``u`` in ``X_j`` back into ``X_j``."""
    rng = _rng(seed)
    mask = vertex_mask(N, j)
    k = np.arange(1, N + 1)
    worst = 0.0
    for _ in range(trials):
        a = np.where(mask, rng.standard_normal(N), 0.0) / np.maximum(k / j, 1.0)
        if negative and 2 * j <= N:
            a[2 * j - 1] = 0.5  # mode 2j is an even multiple of j
        f = SpectralField(a)
        F = SpectralField(-(k**2.0) * a + lam * (a - cube(f).coeffs))
        worst = max(worst, vertex_residual(F, j))
    return _report(f"vertex_invariance[j={j}]", worst, trials, 1e-10, negative)


def check_noninvasiveness(
    j: int, lam: float = 10.0, trials: int = 20, N: int = 128, seed: int = 0, negative: bool = False, kernel: FilterKernel | None = None
) -> CheckReport:
    """Kernels in ``H_j`` leave the computed ``u_j`` unchanged.

    Random kernels have ``h_{j l} = 1`` for odd ``l`` and all other entries
    uniform in ``[-2, 2]``; the negative control sets ``h_j = -1``.
    """
    u = _equilibrium(float(lam), j, N)
    rng = _rng(seed)
    mask = vertex_mask(N, j)
    nu = sobolev_norm(u, 0)
    worst = 0.0
    n = 1 if kernel is not None else trials
    for _ in range(n):
        if kernel is None:
            h = np.where(mask, 1.0, rng.uniform(-2.0, 2.0, N))
            if negative:
                h[j - 1] = -1.0
            hk = FilterKernel(h)
        else:
            hk = kernel
        worst = max(worst, sobolev_norm(apply_filter(hk, u) - u, 0) / nu)
    return _report(f"noninvasiveness[j={j},lam={lam:g}]", worst, n, 1e-8, negative)


def check_no_instability_in_vertex(j: int, lam: float, N: int | None = None, vertex: int | None = None, seed: int = 0, trials: int = 20) -> CheckReport:
    """Unstable eigenvectors at ``u_j`` avoid ``X_j``.

    Each eigenvector with positive eigenvalue must have vertex residual above
    0.99 and at most ``j - 2`` interior zeros, while random nonzero members
    of ``X_j`` have at least ``j - 1``. Reported residual: ``1 - min
    vertex_residual`` (tolerance 0.01), or 1 on any zero-count violation.
    Passing ``vertex != j`` tests against a different space (used as a
    negative control).
    """
    N = N or max(128, recommended_modes(lam))
    vertex = vertex or j
    negative = vertex != j
    u = _equilibrium(float(lam), j, N)
    rep = spectrum(assemble(u, lam))
    unstable = [n for n, mu in enumerate(rep.eigenvalues) if mu > 0]
    worst = 0.0
    zc = []
    for n in unstable:
        v = rep.eigenvectors[n]
        worst = max(worst, 1.0 - vertex_residual(v, vertex))
        zc.append(rep.zero_counts[n])
        if rep.zero_counts[n] > j - 2:
            worst = max(worst, 1.0)
    rng = _rng(seed)
    mask = vertex_mask(N, j)
    k = np.arange(1, N + 1)
    for _ in range(trials):
        w = SpectralField(np.where(mask, rng.standard_normal(N), 0.0) / k**2)
        if count_zeros(w) < j - 1:
            worst = max(worst, 1.0)
    return _report(
        f"no_instability_in_vertex[j={j},lam={lam:g},X{vertex}]",
        worst,
        len(unstable),
        0.01,
        negative,
        f"{len(unstable)} unstable eigenvectors, zero counts {zc}",
    )


def check_operator_norm(trials: int = 1000, N: int = 64, seed: int = 0, negative: bool = False) -> CheckReport:
    """``|C_h v|_{H^2} <= |v|_{H^2}`` for unit-modulus ``h``; residual is ``max(ratio) - 1``."""
    rng = _rng(seed)
    k = np.arange(1, N + 1)
    worst = -np.inf
    fixed = [np.ones(N), -np.ones(N)]
    for i in range(trials + len(fixed)):
        h = fixed[i] if i < len(fixed) else rng.choice([-1.0, 1.0], size=N)
        if negative:
            h = 1.5 * h
        f = SpectralField(rng.standard_normal(N) / k ** rng.uniform(0.0, 3.0))
        ratio = sobolev_norm(apply_filter(FilterKernel(h), f), 2) / sobolev_norm(f, 2)
        worst = max(worst, ratio - 1.0)
    return _report("operator_norm", max(worst, 0.0), trials, 1e-12, negative)


def _preservation_residuals(b, h, lam, N, u_star=None):
    u = SpectralField.zeros(N) if u_star is None else u_star.resized(N)
    A = assemble(u, lam, ControlParams(b, h), N)
    off = float(np.max(np.abs(A - np.diag(np.diag(A)))))
    diag_err = float(np.max(np.abs(np.diag(A) - theorem_spectrum(lam, b, h, N))))
    return off, diag_err


def check_eigenfunction_preservation(b: float, h: FilterKernel, lam: float, N: int = 16, u_star: SpectralField | None = None) -> CheckReport:
    """At ``u = 0`` the controlled linearisation is diagonal with entries ``-k^2 + lam + b(1 - h_k)``.

    The off-diagonal part must vanish exactly, the diagonal match to 1e-12.
    Supplying a nonzero ``u_star`` breaks the premise (negative control).
    """
    off, diag_err = _preservation_residuals(b, h, lam, N, u_star)
    rep = _report("eigenfunction_preservation", max(off, diag_err), 1, 1e-12, u_star is not None, f"offdiag={off:.3g}")
    rep.passed = off == 0.0 and diag_err <= 1e-12
    return rep


def check_eigenfunction_preservation_random(trials: int = 50, N: int = 16, seed: int = 0, negative: bool = False) -> CheckReport:
    rng = _rng(seed)
    worst_off = worst_diag = 0.0
    for _ in range(trials):
        b = rng.uniform(-10, 10)
        lam = rng.uniform(0.1, 50)
        h = FilterKernel(rng.uniform(-2, 2, N))
        u = SpectralField.from_modes({1: 1.0}, N) if negative else None
        off, diag_err = _preservation_residuals(b, h, lam, N, u)
        worst_off, worst_diag = max(worst_off, off), max(worst_diag, diag_err)
    rep = _report("eigenfunction_preservation_random", max(worst_off, worst_diag), trials, 1e-12, negative, f"offdiag={worst_off:.3g}")
    rep.passed = worst_off == 0.0 and worst_diag <= 1e-12
    return rep


def check_reflection_symmetry(j: int, lam: float, N: int = 128, negative: bool = False) -> CheckReport:
    """``u_j(pi - x) = (-1)^(j-1) u_j(x)``; the negative control flips the expected sign."""
    u = _equilibrium(float(lam), j, N)
    s = (-1) ** (j - 1) * (-1 if negative else 1)
    res = sobolev_norm(reflect(u) - s * u, 0) / sobolev_norm(u, 0)
    return _report(f"reflection_symmetry[j={j},lam={lam:g}]", res, 1, 1e-8, negative)


def check_semiflow_commutation(
    j: int, trials: int = 4, N: int = 32, lam: float = 10.0, T: float = 1.0, dt: float = 1e-3, seed: int = 0, negative: bool = False
) -> CheckReport:
    """``S(t) rho(g) y0 = rho(g) S(t) y0`` for ``y0`` in ``X_j`` and ``g`` in ``G_j``.

    Compared along uncontrolled trajectories at matched times (tolerance
    1e-7). The negative control draws ``g`` outside ``G_j`` (``h_j = -1``).
    """
    rng = _rng(seed)
    mask = vertex_mask(N, j)
    k = np.arange(1, N + 1)
    worst = 0.0
    for _ in range(trials):
        y0 = SpectralField(np.where(mask, rng.standard_normal(N), 0.0) / k**2)
        y0 = y0 * (0.5 / max(sobolev_norm(y0, 0), 1e-300))
        g = random_vertex_morphism(rng, Vertex(j), N)
        if negative:
            h = np.array(g.kernel.h)
            h[j - 1] = -1.0
            g = Morphism(g.source_j, g.target_j, g.sign, FilterKernel(h))
        cfg = dict(N=N, dt=dt, T=T, lam=lam, record_every=max(1, int(round(0.25 / dt))))
        a = simulate(SimConfig(initial=g.act(y0), **cfg))
        b = simulate(SimConfig(initial=y0, **cfg))
        for sa, sb in zip(a.states, b.states):
            worst = max(worst, sobolev_norm(sa - g.act(sb), 0))
    return _report(f"semiflow_commutation[j={j}]", worst, trials, 1e-7, negative)


def check_reflection_in_isotropy() -> CheckReport:
    """The reflection filter is the identity on ``X_1`` (it lies in ``H_1``)."""
    ok = is_member_H(reflection_kernel(+1, 64), 1)
    return _report("reflection_in_H1", 0.0 if ok else 1.0, 1, 0.0, False)


def suite_tasks(trials: int | None = None, negative_controls: bool = False):
    """``(name, callable(seed))`` pairs making up the verification suite."""
    t = trials

    def n(default):
        return default if t is None else t

    tasks = [("groupoid_axioms", lambda s: check_groupoid_axioms(s, n(1000)))]
    tasks += [(f"vertex_invariance_{j}", (lambda j: lambda s: check_vertex_invariance(j, n(100), seed=s))(j)) for j in (1, 2, 3, 4)]
    tasks += [(f"noninvasive_{j}", (lambda j: lambda s: check_noninvasiveness(j, 10.0, n(20), seed=s))(j)) for j in (1, 2, 3)]
    tasks += [("noninvasive_reflection", lambda s: check_noninvasiveness(1, 2.0, kernel=reflection_kernel(+1, 128)))]
    tasks += [
        (f"no_instability_{j}_{lam}", (lambda j, lam: lambda s: check_no_instability_in_vertex(j, lam, seed=s))(j, lam))
        for j in (2, 3)
        for lam in (10.0, 15.0)
    ]
    tasks += [("operator_norm", lambda s: check_operator_norm(n(1000), seed=s))]
    tasks += [("eigenfunction_preservation", lambda s: check_eigenfunction_preservation_random(n(50), seed=s))]
    tasks += [(f"reflection_{j}", (lambda j: lambda s: check_reflection_symmetry(j, 20.0))(j)) for j in (1, 2, 3, 4)]
    tasks += [(f"commutation_{j}", (lambda j: lambda s: check_semiflow_commutation(j, min(n(4), 4), seed=s))(j)) for j in (1, 2)]
    tasks += [("reflection_in_H1", lambda s: check_reflection_in_isotropy())]
    if negative_controls:
        tasks += [
            ("neg_groupoid", lambda s: check_groupoid_axioms(s, min(n(100), 100), negative=True)),
            ("neg_vertex_invariance", lambda s: check_vertex_invariance(1, min(n(10), 10), seed=s, negative=True)),
            ("neg_noninvasive", lambda s: check_noninvasiveness(2, 10.0, min(n(5), 5), seed=s, negative=True)),
            ("neg_no_instability", lambda s: check_no_instability_in_vertex(2, 10.0, vertex=1, seed=s)),
            ("neg_operator_norm", lambda s: check_operator_norm(min(n(100), 100), seed=s, negative=True)),
            ("neg_eigenfunction", lambda s: check_eigenfunction_preservation_random(min(n(10), 10), seed=s, negative=True)),
            ("neg_reflection", lambda s: check_reflection_symmetry(2, 20.0, negative=True)),
            ("neg_commutation", lambda s: check_semiflow_commutation(2, 1, seed=s, negative=True)),
        ]
    return tasks


def run_suite(seed: int = 0, trials: int | None = None, negative_controls: bool = False, workers: int = 4) -> list:
    """Run every check; each gets its own seed spawned from ``seed``."""
    if trials is not None and trials < 1:
        raise ValueError("trials must be >= 1")
    tasks = suite_tasks(trials, negative_controls)
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(len(tasks))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, s) for (_, fn), s in zip(tasks, seeds)]
        return [f.result() for f in futures]


def suite_ok(reports) -> bool:
    return all(r.as_expected for r in reports)


def reports_to_json(reports) -> str:
    return json.dumps([r.to_json() for r in reports], indent=2)
