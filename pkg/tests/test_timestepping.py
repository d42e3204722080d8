import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from chafee import Blowup, ControlParams, SimConfig, SpectralField, measure_decay_rate, selective_kernel, simulate, step
from chafee.control import FilterKernel, identity_kernel
from chafee.errors import DegenerateWindow
from chafee.spectral import cube, write_field_csv
from chafee.timestepping import (
    PHI_SWITCH,
    Trajectory,
    linear_regime_window,
    phi_functions,
    resolve_initial,
    write_manifest,
)


def test_phi_functions_values():
    p1, p2 = phi_functions(np.array([0.0, 1.0, -2.0]))
    np.testing.assert_allclose(p1, [1.0, math.e - 1, (math.exp(-2) - 1) / -2], rtol=1e-15)
    np.testing.assert_allclose(p2, [0.5, math.e - 2, (math.exp(-2) + 1) / 4], rtol=1e-15)


@given(st.floats(-50, 50))
def test_phi_functions_match_quadrature_definition(z):
    # phi1 = int_0^1 e^{z s} ds, phi2 = int_0^1 (1 - s) e^{z s} ds
    s = np.linspace(0, 1, 4001)
    w = np.exp(z * s)
    p1, p2 = phi_functions(np.array([z]))
    from scipy.integrate import simpson

    assert p1[0] == pytest.approx(simpson(w, x=s), rel=1e-9)
    assert p2[0] == pytest.approx(simpson((1 - s) * w, x=s), rel=1e-9)


def test_phi_continuous_across_switch():
    z = np.array([PHI_SWITCH * (1 - 1e-9), PHI_SWITCH * (1 + 1e-9)])
    p1, p2 = phi_functions(z)
    assert abs(p1[0] - p1[1]) < 1e-11 and abs(p2[0] - p2[1]) < 1e-11


def test_linear_step_is_exact():
    f = SpectralField([1.0, 0.5, 0.25])
    g = step(f, 0.0, ControlParams(), 0.1)
    np.testing.assert_allclose(g.coeffs, f.coeffs * np.exp(-np.arange(1, 4) ** 2 * 0.1), rtol=1e-15)


def test_equilibrium_is_fixed_point(eq):
    lam, N = 4.5, 64
    u = eq(lam, 2, N)
    p = ControlParams(-4.0, selective_kernel(2, lam, N))
    for dt in (1e-3, 0.1, 1.0):
        assert np.max(np.abs(step(u, lam, p, dt).coeffs - u.coeffs)) < 1e-12


def test_against_reference_ode():
    N, lam, T = 16, 6.0, 0.5
    p = ControlParams(-2.0, FilterKernel(np.where(np.arange(1, N + 1) <= 2, -1.0, 1.0)))
    u0 = resolve_initial("random:0.8", N, seed=3)
    k = np.arange(1, N + 1)
    L = -(k**2.0) + lam + p.symbol(N)

    def rhs(t, a):
        return L * a - lam * cube(SpectralField(a)).coeffs

    ref = solve_ivp(rhs, (0, T), u0.coeffs, method="Radau", rtol=1e-12, atol=1e-14).y[:, -1]
    traj = simulate(SimConfig(N=N, dt=1e-4, T=T, lam=lam, control=p, initial=u0, record_every=10**9))
    assert np.max(np.abs(traj.states[-1].coeffs - ref)) < 1e-7


def test_second_order_convergence():
    N, lam = 16, 4.5
    p = ControlParams(-4.0, selective_kernel(2, lam, N))

    def final(dt):
        return simulate(SimConfig(N=N, dt=dt, T=1.0, lam=lam, control=p, initial="sine:1:0.5", record_every=10**9)).states[-1].coeffs

    ref = final(0.0025)
    errs = [np.linalg.norm(final(dt) - ref) for dt in (0.04, 0.02)]
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_simconfig_validation():
    for bad in (dict(dt=0.0), dict(T=1e-4), dict(N=4), dict(record_every=0)):
        with pytest.raises(ValueError):
            SimConfig(**bad)
    doc = SimConfig(N=8, control=ControlParams(-1.0, identity_kernel(2))).to_json()
    assert doc["control"]["b"] == -1.0 and doc["initial"] == "zero"
    json.dumps(doc)


def test_resolve_initial(tmp_path):
    assert resolve_initial("zero", 8) == SpectralField.zeros(8)
    assert resolve_initial("sine:3:0.2", 8) == SpectralField.from_modes({3: 0.2}, 8)
    r = resolve_initial("random:0.5", 16, seed=1)
    assert np.linalg.norm(r.coeffs) == pytest.approx(0.5)
    assert r == resolve_initial("random:0.5", 16, seed=1)
    assert r != resolve_initial("random:0.5", 16, seed=2)
    t = SpectralField([0.0, 1.0])
    assert resolve_initial("target", 4, t) == t.resized(4)
    assert resolve_initial("target+sine:1:0.1", 4, t) == SpectralField([0.1, 1.0, 0, 0])
    p = tmp_path / "f.csv"
    write_field_csv(p, SpectralField([1.0, 2.0]))
    assert resolve_initial(f"file:{p}", 3) == SpectralField([1.0, 2.0, 0.0])
    for bad in ("nonsense", "target-sine:1:1"):
        with pytest.raises(ValueError):
            resolve_initial(bad, 4, t)
    with pytest.raises(ValueError):
        resolve_initial("target", 4)


def test_blowup_detected():
    # growth rate 100 on mode 1 against weak cubic damping saturates far above 10
    p = ControlParams(50.0, FilterKernel([-1.0]))
    with pytest.raises(Blowup) as info:
        simulate(SimConfig(N=8, dt=1e-2, T=5.0, lam=0.02, control=p, initial="sine:1:0.1"))
    assert 0 < info.value.t < 5.0


def test_trajectory_recording(tmp_path):
    cfg = SimConfig(N=8, dt=0.1, T=1.05, lam=0.5, initial="sine:1:0.1", record_every=3)
    traj = simulate(cfg)
    # t = 0, 3 records, plus the final step
    np.testing.assert_allclose(traj.times, [0.0, 0.3, 0.6, 0.9, 1.0])
    assert all(np.diff(traj.distances) < 0)
    traj.write_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "t,distance,control_norm"
    traj.write_snapshots(tmp_path)
    assert len(list(tmp_path.glob("snapshot_*.csv"))) == len(traj)
    write_manifest(tmp_path / "m.json", cfg, {"note": "x"})
    assert json.loads((tmp_path / "m.json").read_text())["note"] == "x"


def test_decay_rate_and_window():
    traj = Trajectory()
    for t in np.arange(0, 10, 0.5):
        traj.append(t, None, 1e-2 * math.exp(-2.0 * t), 0.0)
    assert measure_decay_rate(traj, (0, 10)) == pytest.approx(-2.0, rel=1e-10)
    lo, hi = linear_regime_window(traj)
    assert 0.5 <= lo < hi <= 9.5
    with pytest.raises(DegenerateWindow):
        measure_decay_rate(traj, (0, 1))
    flat = Trajectory()
    flat.append(0, None, 1.0, 0.0)
    with pytest.raises(DegenerateWindow):
        linear_regime_window(flat)


def test_zero_and_heat_examples():
    p = ControlParams(-3.0, FilterKernel([-1.0, 1.0]))
    assert step(SpectralField.zeros(8), 5.0, p, 0.1) == SpectralField.zeros(8)
    eps = 1e-3
    traj = simulate(SimConfig(N=8, dt=1e-2, T=2.0, lam=0.0, initial=SpectralField.from_modes({1: eps}, 8), record_every=10))
    assert abs(traj.states[-1].coeff(1) - eps * math.exp(-2.0)) < 1e-4 * eps
    assert measure_decay_rate(traj, (0.5, 2.0)) == pytest.approx(-1.0, rel=1e-2)


def test_u1_step_and_subcritical_decay(eq):
    u = eq(2.0, 1)
    assert sobolev_norm_diff(step(u, 2.0, ControlParams(), 1e-3), u) < 1e-9
    traj = simulate(SimConfig(N=16, dt=1e-2, T=40.0, lam=0.5, initial="sine:1:0.1", record_every=100))
    assert traj.distances[-1] < 1e-8 and all(np.diff(traj.distances) < 0)


def sobolev_norm_diff(f, g):
    return float(np.linalg.norm((f - g).coeffs))


def test_equilibrium_preserved_under_noninvasive_control(eq):
    lam, N = 10.0, 64
    for j in (2, 3):
        u = eq(lam, j, N)
        p = ControlParams(-4.0, selective_kernel(j, lam, N))
        traj = simulate(SimConfig(N=N, dt=1e-2, T=50.0, lam=lam, control=p, initial=u, record_every=500), u)
        assert max(traj.distances) < 1e-8


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_vertex_space_invariant_under_flow(j, seed):
    from chafee.spectral import project_vertex, vertex_residual

    rng = np.random.default_rng(seed)
    N = 32
    y0 = project_vertex(SpectralField(rng.standard_normal(N) / np.arange(1, N + 1) ** 2), j)
    if not np.any(y0.coeffs):
        return
    # lam < 1 keeps transverse modes stable, so round-off off X_j is not amplified.
    # Leakage is measured against |y0|: the X_j part itself may decay much faster
    # than round-off in mode 1, which would inflate a relative residual.
    traj = simulate(SimConfig(N=N, dt=1e-2, T=2.0, lam=0.9, initial=y0, record_every=20))
    n0 = np.linalg.norm(y0.coeffs)
    leak = max(np.linalg.norm((s - project_vertex(s, j)).coeffs) for s in traj.states) / n0
    assert leak < 1e-9
    assert vertex_residual(traj.states[1], j) < 1e-9


def test_rate_sign_matches_verdict(eq):
    from chafee import verdict

    lam, N = 4.5, 32
    u = eq(lam, 2, N)
    # a generic perturbation; sin(x) alone misses the slowest mode, which lies in X_2
    cases = ((ControlParams(), 3.0, (1.0, 3.0)), (ControlParams(-4.0, selective_kernel(2, lam, N)), 10.0, (5.0, 10.0)))
    for p, T, window in cases:
        v = verdict(u, lam, p, N)
        cfg = SimConfig(N=N, dt=1e-2, T=T, lam=lam, control=p, initial="target+random:1e-6", record_every=10, seed=4)
        rate = measure_decay_rate(simulate(cfg, u), window)
        assert np.sign(rate) == np.sign(v.margin)
        assert rate == pytest.approx(v.margin, rel=0.05)
