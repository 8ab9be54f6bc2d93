"""The adiabatic (local dressed-frame) equations and their failure modes.

The dressed components C+ and C- are propagated with the frame-derivative
terms exactly as printed in the published adiabatic system:

    i dC+/dt =  (K + V+ - th'^2) C+ - (2 th' dC-/dz + th'^2 C-)
    i dC-/dt = s(K + V- - th'^2) C- + (2 th' dC+/dz + th'^2 C+)

with K = -(1/2m) d^2/dz^2, th' = d(theta_n)/dz, and s = -1 as published or
s = +1 with the global sign on the C- line removed. Spatial derivatives are
fourth-order finite differences; time stepping is Crank-Nicolson.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .core import NumericalError, SystemConfig, ValidationError
from .wavepacket import (
    AsymptoticPopulations,
    Grid,
    PacketSpec,
    WavepacketState,
    asymptotic_analysis,
    auto_grid,
    propagate,
)

VARIANTS = ("as_published", "sign_corrected")
NORM_EXPLOSION = 10.0


@dataclass(frozen=True)
class SmoothedProfile:
    """Smoothed mesa u(z) = [tanh(z/w) - tanh((z - L)/w)] / 2."""

    L: float
    w: float

    def __post_init__(self):
        if not self.L > 0 or not self.w > 0:
            raise ValidationError("smoothed profile needs L > 0 and w > 0")

    def u(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return 0.5 * (np.tanh(z / self.w) - np.tanh((z - self.L) / self.w))

    def du_dz(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return 0.5 / self.w * (np.tanh((z - self.L) / self.w) ** 2 - np.tanh(z / self.w) ** 2)

    def sample(self, z, dz=None) -> np.ndarray:
        return self.u(z)


@dataclass
class AdiabaticState:
    C_plus: np.ndarray
    C_minus: np.ndarray
    variant: str
    t: float = 0.0
    keep_derivative_terms: bool = True
    norm_history: list = field(default_factory=list)


def local_theta(config: SystemConfig, u: np.ndarray) -> np.ndarray:
    """theta_n(z) in [0, pi/2]; pi/4 everywhere at resonance, where the frame is arbitrary."""
    if config.delta == 0:
        return np.full_like(np.asarray(u, dtype=float), 0.25 * math.pi)
    return 0.5 * np.arctan2(config.omega_n * np.asarray(u, dtype=float), -config.delta)


def dtheta_dz(config: SystemConfig, smoothed: SmoothedProfile, z) -> np.ndarray:
    """Signed d(theta_n)/dz by the chain rule on cot 2theta = -delta / (Omega_n u)."""
    u, du = smoothed.u(z), smoothed.du_dz(z)
    omega = config.omega_n
    if config.delta == 0:
        return np.zeros_like(u)
    return -config.delta * omega * du / (2.0 * (config.delta ** 2 + (omega * u) ** 2))


def dtheta_dz_profile(config: SystemConfig, smoothed: SmoothedProfile, z):
    """|d(theta_n)/dz| on the points ``z``.

    Returns ``(values, resonant)``; at resonance the frame is arbitrary and the
    derivative is returned as identically zero with ``resonant`` set.
    """
    values = np.abs(dtheta_dz(config, smoothed, z))
    return values, config.delta == 0


def max_dtheta_dz(config: SystemConfig, smoothed: SmoothedProfile, points_per_width: int = 400) -> float:
    """Peak |dtheta/dz| near the cavity entrance, on a grid fine compared with w."""
    w = smoothed.w
    half = min(0.5 * smoothed.L, 12.0 * w)
    z = np.linspace(-half, half, int(2 * half / w * points_per_width) | 1)
    return float(np.max(dtheta_dz_profile(config, smoothed, z)[0]))


def _fd_operators(N: int, dz: float):
    """Fourth-order first and second derivatives with zero Dirichlet exterior."""
    ones = np.ones(N)
    d1 = sparse.diags([ones[:-2], -8 * ones[:-1], 8 * ones[:-1], -ones[:-2]],
                      [-2, -1, 1, 2], shape=(N, N)) / (12.0 * dz)
    d2 = sparse.diags([-ones[:-2], 16 * ones[:-1], -30 * ones, 16 * ones[:-1], -ones[:-2]],
                      [-2, -1, 0, 1, 2], shape=(N, N)) / (12.0 * dz * dz)
    return d1.tocsr(), d2.tocsr()


def adiabatic_hamiltonian(config: SystemConfig, smoothed: SmoothedProfile, grid: Grid,
                          variant: str, keep_derivative_terms: bool = True):
    """Sparse generator of the (C+, C-) system on the grid, blocks [[++, +-], [-+, --]]."""
    if variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {VARIANTS}, got {variant!r}")
    z = grid.z
    u = smoothed.u(z)
    lam = np.hypot(config.delta, config.omega_n * u)
    v_plus, v_minus = 0.5 * (config.delta + lam), 0.5 * (config.delta - lam)
    d1, d2 = _fd_operators(grid.N, grid.dz)
    kin = -d2 / (2.0 * config.m)
    th = dtheta_dz(config, smoothed, z) if keep_derivative_terms else np.zeros_like(z)
    th_sq = sparse.diags(th ** 2)
    sign = -1.0 if variant == "as_published" else 1.0
    h_pp = kin + sparse.diags(v_plus) - th_sq
    h_mm = sign * (kin + sparse.diags(v_minus) - th_sq)
    h_pm = -(2.0 * sparse.diags(th) @ d1 + th_sq)
    h_mp = 2.0 * sparse.diags(th) @ d1 + th_sq
    return sparse.bmat([[h_pp, h_pm], [h_mp, h_mm]], format="csc")


def bare_to_dressed(theta, psi_a, psi_b):
    c, s = np.cos(theta), np.sin(theta)
    return c * psi_a + s * psi_b, -s * psi_a + c * psi_b


def dressed_to_bare(theta, c_plus, c_minus):
    c, s = np.cos(theta), np.sin(theta)
    return c * c_plus - s * c_minus, s * c_plus + c * c_minus


def propagate_adiabatic(config: SystemConfig, smoothed: SmoothedProfile, grid: Grid,
                        packet: PacketSpec, t_final: float, variant: str = "sign_corrected",
                        keep_derivative_terms: bool = True, check_every: int = 50) -> AdiabaticState:
    """Crank-Nicolson evolution of the dressed components.

    Raises NumericalError when the norm grows past ten times its initial value.
    """
    if abs(smoothed.L - config.L) > 1e-12 * config.L:
        raise ValidationError("smoothed profile length does not match L")
    if not t_final > 0:
        raise ValidationError("t_final must be > 0")
    H = adiabatic_hamiltonian(config, smoothed, grid, variant, keep_derivative_terms)
    n_steps = max(1, int(math.ceil(t_final / grid.dt - 1e-9)))
    dt = t_final / n_steps
    eye = sparse.identity(2 * grid.N, format="csc", dtype=complex)
    lu = splu((eye + 0.5j * dt * H).tocsc())
    explicit = (eye - 0.5j * dt * H).tocsr()

    psi = packet.on_grid(grid)
    zero = np.zeros_like(psi)
    theta = local_theta(config, smoothed.u(grid.z))
    cp, cm = bare_to_dressed(theta, *((psi, zero) if packet.channel == "a" else (zero, psi)))
    x = np.concatenate([cp, cm])
    norm0 = float(np.vdot(x, x).real * grid.dz)
    state = AdiabaticState(cp, cm, variant, 0.0, keep_derivative_terms, [(0.0, norm0)])
    for step in range(1, n_steps + 1):
        x = lu.solve(explicit @ x)
        if step % check_every == 0 or step == n_steps:
            norm = float(np.vdot(x, x).real * grid.dz)
            state.norm_history.append((step * dt, norm))
            if not np.isfinite(norm) or norm > NORM_EXPLOSION * norm0:
                raise NumericalError(
                    f"adiabatic run unstable ({variant}, w={smoothed.w:g}): norm {norm:.3e} "
                    f"at t={step * dt:.4g}; the frame derivative is too singular")
    state.C_plus, state.C_minus, state.t = x[:grid.N], x[grid.N:], t_final
    return state


def to_bare_state(config: SystemConfig, smoothed: SmoothedProfile, grid: Grid,
                  state: AdiabaticState) -> WavepacketState:
    theta = local_theta(config, smoothed.u(grid.z))
    a, b = dressed_to_bare(theta, state.C_plus, state.C_minus)
    return WavepacketState(a, b, state.t)


def adiabatic_populations(config, smoothed, grid, state, **kwargs) -> AsymptoticPopulations:
    return asymptotic_analysis(to_bare_state(config, smoothed, grid, state), grid, config, **kwargs)


def overlap(x: np.ndarray, y: np.ndarray) -> float:
    """|<x|y>| / (|x| |y|)."""
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        return 0.0
    return float(abs(np.vdot(x, y)) / (nx * ny))


def mean_position(grid: Grid, psi: np.ndarray) -> float:
    dens = np.abs(psi) ** 2
    return float(np.sum(grid.z * dens) / np.sum(dens))


@dataclass(frozen=True)
class DiscrepancyRow:
    w: float
    max_dtheta_dz: float
    gap: float
    stable: bool = True


def mesa_limit_discrepancy(config: SystemConfig, grid: Grid, packet: PacketSpec, w_sequence,
                           t_final: float, variant: str = "sign_corrected",
                           keep_derivative_terms: bool = False, adiabatic_dt: float | None = None
                           ) -> list[DiscrepancyRow]:
    """Population gap between the adiabatic solver and the exact propagator per width w.

    The gap is the largest absolute difference among the four sector
    populations (reflected/transmitted, |a> and |b>). Unstable adiabatic runs
    are reported with ``stable=False`` and a NaN gap.
    """
    rows = []
    ad_grid = grid if adiabatic_dt is None else Grid(grid.z_min, grid.z_max, grid.N, adiabatic_dt)
    for w in w_sequence:
        smoothed = SmoothedProfile(config.L, float(w))
        peak = max_dtheta_dz(config, smoothed)
        exact = asymptotic_analysis(propagate(config, smoothed, grid, packet, t_final), grid, config)
        try:
            ad = propagate_adiabatic(config, smoothed, ad_grid, packet, t_final, variant,
                                     keep_derivative_terms)
            pops = adiabatic_populations(config, smoothed, ad_grid, ad, residual_tol=1e-2,
                                         edge_tol=1e-2)
            gap = float(np.max(np.abs(pops.as_array() - exact.as_array())))
            rows.append(DiscrepancyRow(float(w), peak, gap, True))
        except NumericalError:
            rows.append(DiscrepancyRow(float(w), peak, float("nan"), False))
    return rows


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
