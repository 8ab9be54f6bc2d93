import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mazer.core import ModeProfile, SystemConfig, ValidationError
from mazer.scattering import (
    emission_probability_scan,
    momentum_shift_on_emission,
    rabi_reference,
    solve_stationary,
    square_potential_amplitudes,
)

from oracles import ode_scattering, ode_square_potential


def mesa_case(**kw):
    cfg = SystemConfig(**kw)
    return cfg, ModeProfile.mesa(cfg.L)


def test_free_particle():
    cfg, p = mesa_case(g=0.0, delta=1.0, L=2.0)
    sol = solve_stationary(cfg, p, 1.7)
    assert abs(sol.t_a) == pytest.approx(1.0, abs=1e-14)
    assert sol.P_emission < 1e-28


def test_zero_amplitude_profile():
    cfg = SystemConfig(g=1.0, delta=0.0, L=2.0)
    sol = solve_stationary(cfg, ModeProfile(((2.0, 0.0),)), 1.3)
    assert abs(sol.t_a) == pytest.approx(1.0, abs=1e-14)
    assert sol.P_emission == 0.0


def test_blocking_below_threshold():
    cfg, p = mesa_case(g=1.0, delta=5.0, L=3.0)
    sol = solve_stationary(cfg, p, 1.0)
    assert not sol.b_open
    assert sol.P_emission == 0.0
    assert sol.R_a + sol.T_a == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("V0,L,k", [(1.0, 3.0, 0.5), (1.0, 3.0, 2.2), (-1.0, 2.0, 0.7), (2.0, 1.0, 1.0)])
def test_square_potential_formula_against_ode(V0, L, k):
    r, t = square_potential_amplitudes(V0, L, k)
    r_ode, t_ode = ode_square_potential(V0, L, k)
    assert r == pytest.approx(r_ode, abs=1e-9)
    assert t == pytest.approx(t_ode, abs=1e-9)


@pytest.mark.parametrize("k", [0.4, 1.0, 1.9, 3.5])
@pytest.mark.parametrize("n", [0, 2])
def test_resonance_factorisation(k, n):
    cfg, p = mesa_case(g=1.0, delta=0.0, n=n, L=2.5)
    amps = solve_stationary(cfg, p, k).dressed_amplitudes()
    height = cfg.g * math.sqrt(n + 1)
    r_p, t_p = square_potential_amplitudes(height, cfg.L, k, cfg.m)
    r_m, t_m = square_potential_amplitudes(-height, cfg.L, k, cfg.m)
    assert abs(amps["r_plus"] - r_p) < 1e-12
    assert abs(amps["t_plus"] - t_p) < 1e-12
    assert abs(amps["r_minus"] - r_m) < 1e-12
    assert abs(amps["t_minus"] - t_m) < 1e-12


@pytest.mark.parametrize("delta,k", [(2.0, 2.5), (-3.0, 1.0), (1.0, 0.8), (4.0, 1.5)])
def test_detuned_mesa_against_ode(delta, k):
    cfg, p = mesa_case(g=1.0, delta=delta, L=2.0)
    sol = solve_stationary(cfg, p, k)
    r_a, r_b, t_a, t_b = ode_scattering(cfg.g, delta, cfg.n, cfg.m, cfg.L, k)
    assert sol.r_a == pytest.approx(r_a, abs=1e-7)
    assert sol.t_a == pytest.approx(t_a, abs=1e-7)
    assert sol.r_b == pytest.approx(r_b, abs=1e-7)
    if sol.b_open:
        assert sol.t_b == pytest.approx(t_b, abs=1e-7)


@settings(max_examples=150, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 5.0), st.floats(0.5, 20.0), st.integers(0, 3))
def test_unitarity(delta, k, L, n):
    cfg, p = mesa_case(g=1.0, delta=delta, n=n, L=L)
    sol = solve_stationary(cfg, p, k)
    assert abs(sol.unitarity_defect) < 1e-10
    assert 0.0 <= sol.P_emission <= 1.0 + 1e-12
    if not sol.b_open:
        assert sol.R_b == sol.T_b == 0.0


def test_long_evanescent_segment_stays_finite():
    # Deep closed channel over a long cavity: transfer-matrix products would overflow.
    cfg, p = mesa_case(g=1.0, delta=40.0, L=200.0)
    sol = solve_stationary(cfg, p, 0.5)
    assert np.isfinite(sol.r_a) and abs(sol.unitarity_defect) < 1e-10


def test_threshold_exactness():
    cfg, p = mesa_case(g=1.0, delta=2.0, L=3.0)
    threshold = math.sqrt(2 * cfg.m * cfg.delta)
    below = [solve_stationary(cfg, p, k).P_emission for k in np.linspace(0.05, threshold, 40, endpoint=False)]
    assert all(pe == 0.0 for pe in below)
    assert solve_stationary(cfg, p, threshold * 1.01).P_emission > 0


def test_staircase_convergence_order():
    f = lambda z: np.sin(2 * np.pi * z / 10.0) ** 2
    cfg = SystemConfig(g=1.0, delta=1.0, L=10.0)
    ref = solve_stationary(cfg, ModeProfile.staircase(f, 10.0, 3200), 1.5).P_emission
    ns = np.array([25, 50, 100, 200])
    errs = [abs(solve_stationary(cfg, ModeProfile.staircase(f, 10.0, int(n)), 1.5).P_emission - ref)
            for n in ns]
    order = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert order >= 1.0


def test_mirror_of_symmetric_profile():
    p = ModeProfile(((1.0, 0.3), (2.0, 1.0), (1.0, 0.3)))
    cfg = SystemConfig(g=1.0, delta=1.5, L=4.0)
    a, b = solve_stationary(cfg, p, 2.1), solve_stationary(cfg, p.mirrored(), 2.1)
    for name in ("r_a", "r_b", "t_a", "t_b"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), abs=1e-13)


def test_reciprocity_for_asymmetric_profile():
    p = ModeProfile(((1.0, 0.2), (0.5, 1.0), (2.0, 0.6)))
    cfg = SystemConfig(g=1.0, delta=-1.0, L=3.5)
    a, b = solve_stationary(cfg, p, 1.3), solve_stationary(cfg, p.mirrored(), 1.3)
    assert a.t_a == pytest.approx(b.t_a, abs=1e-12)


def test_rejects_bad_input():
    cfg, p = mesa_case(L=1.0)
    with pytest.raises(ValidationError):
        solve_stationary(cfg, p, 0.0)
    with pytest.raises(ValidationError):
        solve_stationary(cfg, ModeProfile.mesa(2.0), 1.0)


class TestScan:
    def test_blocked_below_threshold(self):
        cfg, p = mesa_case(g=1.0, delta=4.0, L=2.0)
        ks = np.linspace(0.1, 1.99, 20)
        assert all(r["P_emission"] == 0.0 for r in emission_probability_scan(cfg, p, ks))

    def test_rows_in_order_and_unitary(self):
        cfg, p = mesa_case(g=1.0, delta=-1.0, L=3.0)
        ks = [3.0, 0.5, 1.7]
        rows = emission_probability_scan(cfg, p, ks)
        assert [r["k"] for r in rows] == pytest.approx(ks)
        for r in rows:
            assert abs(r["R_a"] + r["T_a"] + r["R_b"] + r["T_b"] - 1) < 1e-10

    def test_continuity_above_threshold(self):
        cfg, p = mesa_case(g=1.0, delta=2.0, L=3.0)
        th = math.sqrt(2 * cfg.m * cfg.delta)
        ks = th * (1 + np.logspace(-8, -3, 6))
        pe = [r["P_emission"] for r in emission_probability_scan(cfg, p, ks)]
        assert pe[0] < 1e-3 and np.all(np.diff(pe) > 0)

    def test_row_identification(self):
        cfg, p = mesa_case()
        with pytest.raises(ValidationError, match="row 1"):
            emission_probability_scan(cfg, p, [1.0, -2.0])

    def test_hot_atom_limit(self):
        cfg, p = mesa_case(g=1.0, delta=0.0, L=200.0)
        for k in (60.0, 100.0):
            assert solve_stationary(cfg, p, k).P_emission == pytest.approx(rabi_reference(cfg, k), abs=1e-3)


class TestRabiReference:
    def test_zero_time_limit(self):
        cfg = SystemConfig(g=1.0, L=1e-12)
        assert rabi_reference(cfg, 1.0) == pytest.approx(0.0, abs=1e-20)

    def test_full_flop(self):
        # Lambda tau = pi with Lambda = 2, m = 1/2, k = 1  ->  L = pi
        cfg = SystemConfig(g=1.0, delta=0.0, L=math.pi)
        assert rabi_reference(cfg, 1.0) == pytest.approx(1.0)

    def test_detuned_envelope(self):
        # Omega = 4 (g = 2), delta = 3, Lambda = 5; Lambda * L * m / k = pi
        cfg = SystemConfig(g=2.0, delta=3.0, L=2 * math.pi / 5)
        assert rabi_reference(cfg, 1.0) == pytest.approx(16 / 25)


class TestMomentumShift:
    def test_deceleration(self):
        assert momentum_shift_on_emission(SystemConfig(delta=3.0), 2.0) == pytest.approx(1.0)

    def test_acceleration(self):
        assert momentum_shift_on_emission(SystemConfig(delta=-5.0), 2.0) == pytest.approx(3.0)

    def test_blocked(self):
        assert momentum_shift_on_emission(SystemConfig(delta=3.0), 1.0) is None
