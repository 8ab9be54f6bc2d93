"""Time-dependent two-component propagation in the bare basis.

Strang splitting: exact 2x2 rotation for the local potential/coupling
half-steps and a spectral (FFT) kinetic step. The run is the independent
oracle for the stationary solver.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .core import (
    ModeProfile,
    NumericalError,
    SystemConfig,
    ValidationError,
    channel_energies,
)
from .scattering import solve_stationary

NORM_DRIFT_ABORT = 1e-6
POINTS_PER_WAVELENGTH = 8


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid z_i = z_min + i dz, i < N, with time step dt."""

    z_min: float
    z_max: float
    N: int
    dt: float

    def __post_init__(self):
        if not self.z_min < self.z_max:
            raise ValidationError("grid needs z_min < z_max")
        if self.N < 16:
            raise ValidationError("grid needs at least 16 points")
        if not self.dt > 0:
            raise ValidationError("time step must be > 0")

    @property
    def dz(self) -> float:
        return (self.z_max - self.z_min) / self.N

    @property
    def z(self) -> np.ndarray:
        return self.z_min + self.dz * np.arange(self.N)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.N, self.dz)

    @property
    def k_nyquist(self) -> float:
        return math.pi / self.dz


@dataclass(frozen=True)
class PacketSpec:
    """Gaussian packet exp(-(z-z0)^2 / 4 sigma_z^2 + i k0 z) in one bare channel."""

    k0: float
    sigma_z: float
    z0: float
    channel: str = "a"

    def __post_init__(self):
        if not self.k0 > 0 or not self.sigma_z > 0:
            raise ValidationError("packet needs k0 > 0 and sigma_z > 0")
        if self.z0 + 4.0 * self.sigma_z >= 0:
            raise ValidationError("packet must start left of the cavity: z0 + 4 sigma_z < 0")
        if 6.0 * self.sigma_k >= self.k0:
            raise ValidationError("momentum spread too large: need 6 sigma_k < k0")
        if self.channel not in ("a", "b"):
            raise ValidationError("channel must be 'a' or 'b'")

    @property
    def sigma_k(self) -> float:
        return 0.5 / self.sigma_z

    def width_at(self, t: float, m: float) -> float:
        return self.sigma_z * math.sqrt(1.0 + (t / (2.0 * m * self.sigma_z ** 2)) ** 2)

    def on_grid(self, grid: Grid) -> np.ndarray:
        z = grid.z
        psi = np.exp(-((z - self.z0) ** 2) / (4.0 * self.sigma_z ** 2) + 1j * self.k0 * z)
        return psi / math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dz)


@dataclass
class WavepacketState:
    psi_a: np.ndarray
    psi_b: np.ndarray
    t: float = 0.0
    norm_history: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def norm(self, dz: float) -> float:
        return float((np.sum(np.abs(self.psi_a) ** 2) + np.sum(np.abs(self.psi_b) ** 2)) * dz)


def sample_profile(profile, grid: Grid) -> np.ndarray:
    """Mode function on the grid; piecewise profiles are cell-averaged."""
    if isinstance(profile, ModeProfile):
        return profile.sample(grid.z, grid.dz)
    return np.asarray(profile.sample(grid.z, grid.dz), dtype=float)


def max_local_wavenumber(config: SystemConfig, profile, k_top: float) -> float:
    u_max = float(np.max(profile.amplitudes)) if isinstance(profile, ModeProfile) else 1.0
    v_low = min(0.0, config.delta, channel_energies(config, u_max)[1])
    return math.sqrt(k_top ** 2 - 2.0 * config.m * v_low)


def check_resolution(config: SystemConfig, profile, grid: Grid, packet: PacketSpec) -> None:
    k_max = max_local_wavenumber(config, profile, packet.k0 + 6.0 * packet.sigma_k)
    needed = 2.0 * math.pi / (POINTS_PER_WAVELENGTH * k_max)
    if grid.dz > needed:
        raise NumericalError(
            f"grid under-resolved: dz={grid.dz:.4g} but k_max={k_max:.4g} needs dz <= {needed:.4g}"
        )
    if not grid.z_min < packet.z0 - 6 * packet.sigma_z:
        raise ValidationError("packet does not fit inside the grid")
    if not grid.z_max > config.L:
        raise ValidationError("grid must extend past the cavity exit")


def potential_propagator(config: SystemConfig, u: np.ndarray, tau: float):
    """Entries (p_aa, p_ab, p_bb) of exp(-i W tau), W = [[0, c], [c, delta]] pointwise."""
    c = config.g * math.sqrt(config.n + 1) * u
    half = 0.5 * config.delta
    mu = np.sqrt(half * half + c * c)
    cos_t = np.cos(mu * tau)
    # sin(mu tau) / mu, finite as mu -> 0
    sin_over = tau * np.sinc(mu * tau / np.pi)
    phase = np.exp(-1j * half * tau)
    p_aa = phase * (cos_t + 1j * half * sin_over)
    p_bb = phase * (cos_t - 1j * half * sin_over)
    p_ab = phase * (-1j * c * sin_over)
    return p_aa, p_ab, p_bb


def absorbing_mask(grid: Grid, width: float) -> np.ndarray:
    """cos^(1/8) mask reaching zero at both grid edges."""
    z = grid.z
    d = np.minimum(z - grid.z_min, grid.z_max - z)
    mask = np.ones_like(z)
    inside = d < width
    mask[inside] = np.abs(np.sin(0.5 * np.pi * d[inside] / width)) ** 0.125
    return mask


def initial_state(packet: PacketSpec, grid: Grid) -> WavepacketState:
    psi = packet.on_grid(grid)
    zero = np.zeros_like(psi)
    return WavepacketState(psi, zero) if packet.channel == "a" else WavepacketState(zero, psi)


def propagate(config: SystemConfig, profile, grid: Grid, packet: PacketSpec, t_final: float,
              absorber_width: float | None = None, snapshot_times=(),
              check_every: int = 200) -> WavepacketState:
    """Evolve the coupled (|a,n>, |b,n+1>) components from t = 0 to ``t_final``."""
    if isinstance(profile, ModeProfile):
        profile.check_config(config)
    check_resolution(config, profile, grid, packet)
    if not t_final > 0:
        raise ValidationError("t_final must be > 0")

    n_steps = max(1, int(math.ceil(t_final / grid.dt - 1e-9)))
    dt = t_final / n_steps
    u = sample_profile(profile, grid)
    h_aa, h_ab, h_bb = potential_propagator(config, u, 0.5 * dt)
    f_aa, f_ab, f_bb = potential_propagator(config, u, dt)
    kinetic = np.exp(-1j * dt * grid.k ** 2 / (2.0 * config.m))
    mask = absorbing_mask(grid, absorber_width) if absorber_width else None

    state = initial_state(packet, grid)
    a, b = state.psi_a.copy(), state.psi_b.copy()
    norm0 = state.norm(grid.dz)
    state.norm_history.append((0.0, norm0))
    pending = sorted(float(t) for t in snapshot_times)
    fft, ifft = sfft.fft, sfft.ifft

    a, b = h_aa * a + h_ab * b, h_ab * a + h_bb * b
    for step in range(1, n_steps + 1):
        a, b = ifft(kinetic * fft(a)), ifft(kinetic * fft(b))
        last = step == n_steps
        t = step * dt
        if last or (pending and pending[0] <= t + 1e-12) or step % check_every == 0:
            # Close the Strang step to read out a physical state.
            a, b = h_aa * a + h_ab * b, h_ab * a + h_bb * b
            if mask is not None:
                a, b = a * mask, b * mask
            norm = float((np.vdot(a, a).real + np.vdot(b, b).real) * grid.dz)
            state.norm_history.append((t, norm))
            if mask is None and abs(norm - norm0) > NORM_DRIFT_ABORT:
                raise NumericalError(f"norm drift {norm - norm0:.3e} at t={t:.4g}; "
                                     "refine dt/dz")
            while pending and pending[0] <= t + 1e-12:
                state.snapshots.append((pending.pop(0), a.copy(), b.copy()))
            if not last:
                a, b = h_aa * a + h_ab * b, h_ab * a + h_bb * b
        else:
            a, b = f_aa * a + f_ab * b, f_ab * a + f_bb * b
            if mask is not None:
                a, b = a * mask, b * mask
    state.psi_a, state.psi_b, state.t = a, b, t_final
    return state


def total_energy(config: SystemConfig, profile, grid: Grid, state: WavepacketState) -> float:
    """Expectation value of the full Hamiltonian, kinetic part evaluated spectrally."""
    u = sample_profile(profile, grid)
    c = config.g * math.sqrt(config.n + 1) * u
    kin = 0.0
    for psi in (state.psi_a, state.psi_b):
        phi = np.fft.fft(psi)
        kin += np.sum(grid.k ** 2 / (2.0 * config.m) * np.abs(phi) ** 2) / grid.N
    pot = np.sum(config.delta * np.abs(state.psi_b) ** 2
                 + 2.0 * c * np.real(np.conj(state.psi_a) * state.psi_b))
    return float((kin + pot) * grid.dz)


@dataclass(frozen=True)
class AsymptoticPopulations:
    P_a_reflected: float
    P_a_transmitted: float
    P_b_reflected: float
    P_b_transmitted: float
    mean_k: dict
    residual: float

    @property
    def P_emission(self) -> float:
        return self.P_b_reflected + self.P_b_transmitted

    def as_array(self) -> np.ndarray:
        return np.array([self.P_a_reflected, self.P_a_transmitted,
                         self.P_b_reflected, self.P_b_transmitted])


def asymptotic_analysis(state: WavepacketState, grid: Grid, config: SystemConfig,
                        residual_tol: float = 1e-4, edge_tol: float = 1e-6) -> AsymptoticPopulations:
    """Sector populations left of the cavity and right of it, per channel.

    Raises NumericalError when more than ``residual_tol`` is still inside the
    cavity or the packet has reached the grid edges.
    """
    z, dz = grid.z, grid.dz
    left, right = z < 0.0, z > config.L
    inside = ~(left | right)
    dens_a, dens_b = np.abs(state.psi_a) ** 2, np.abs(state.psi_b) ** 2
    residual = float(np.sum((dens_a + dens_b)[inside]) * dz)
    if residual > residual_tol:
        raise NumericalError(f"premature analysis: {residual:.3e} still inside the cavity "
                             f"at t={state.t:.4g}")
    margin = 0.02 * (grid.z_max - grid.z_min)
    edges = (z < grid.z_min + margin) | (z > grid.z_max - margin)
    edge = float(np.sum((dens_a + dens_b)[edges]) * dz)
    if edge > edge_tol:
        raise NumericalError(f"packet reached the grid edge ({edge:.3e}); enlarge the domain")

    k = grid.k
    pops, mean_k = {}, {}
    for name, psi, dens in (("a", state.psi_a, dens_a), ("b", state.psi_b, dens_b)):
        for sector, sel in (("reflected", left), ("transmitted", right)):
            key = f"{name}_{sector}"
            pops[key] = float(np.sum(dens[sel]) * dz)
            phi = np.abs(np.fft.fft(np.where(sel, psi, 0.0))) ** 2
            total = phi.sum()
            mean_k[key] = float(np.sum(k * phi) / total) if total > 0 else float("nan")
    return AsymptoticPopulations(pops["a_reflected"], pops["a_transmitted"],
                                 pops["b_reflected"], pops["b_transmitted"], mean_k, residual)


def momentum_weights(packet: PacketSpec, grid: Grid, cutoff: float = 1e-14):
    """Discrete momentum distribution of the initial packet on the grid."""
    phi = np.abs(np.fft.fft(packet.on_grid(grid))) ** 2
    phi /= phi.sum()
    k = grid.k
    keep = (phi > cutoff * phi.max()) & (k > 0)
    return k[keep], phi[keep]


def stationary_populations(config: SystemConfig, profile: ModeProfile, grid: Grid,
                           packet: PacketSpec) -> AsymptoticPopulations:
    """Stationary probabilities averaged over the packet's momentum distribution."""
    if packet.channel != "a":
        raise ValidationError("the stationary oracle covers incidence in channel a only")
    ks, w = momentum_weights(packet, grid)
    if ks.size == 0:
        raise NumericalError("packet momentum distribution is not resolved on the grid")
    rows = np.array([[s.R_a, s.T_a, s.R_b, s.T_b, s.k_b if s.b_open else 0.0]
                     for s in (solve_stationary(config, profile, k) for k in ks)])
    pops = w @ rows[:, :4]
    mean_k = {}
    for key, col, kk in (("a_reflected", 0, -ks), ("a_transmitted", 1, ks),
                         ("b_reflected", 2, -rows[:, 4]), ("b_transmitted", 3, rows[:, 4])):
        weight = w * rows[:, col]
        mean_k[key] = float(np.sum(weight * kk) / weight.sum()) if weight.sum() > 0 else float("nan")
    return AsymptoticPopulations(*map(float, pops), mean_k=mean_k, residual=0.0)


def auto_grid(config: SystemConfig, profile, packet: PacketSpec, points_per_wavelength: int = 32,
              dt: float | None = None, t_final: float | None = None, N: int | None = None):
    """Grid and run time large enough for the packet to clear the cavity.

    Returns ``(grid, t_final)``. The domain is sized from the fastest and
    slowest outgoing components so nothing wraps around the periodic edges.
    The default time step keeps the kinetic phase at the Nyquist wavenumber
    at pi, which suppresses splitting artefacts at sharp mode edges.
    """
    m = config.m
    k_lo = packet.k0 - 4.0 * packet.sigma_k
    k_hi = packet.k0 + 5.0 * packet.sigma_k
    # Slowest outgoing component: emitted atoms decelerated by a positive detuning.
    slow = k_lo
    if config.delta > 0 and k_lo ** 2 > 2 * m * config.delta:
        slow = math.sqrt(k_lo ** 2 - 2 * m * config.delta)
    v_slow = max(slow, 0.25 * k_lo) / m
    v_fast = math.sqrt(k_hi ** 2 + 2 * m * max(0.0, -config.delta)) / m
    if t_final is None:
        t_final = 1.05 * (abs(packet.z0) + config.L + 8.0 * packet.sigma_z) / v_slow
    spread = packet.width_at(t_final, m)
    z_max = max(packet.z0 + v_fast * t_final, config.L) + 6.0 * spread
    t_hit = max(0.0, (abs(packet.z0) - 5.0 * packet.sigma_z) / v_fast)
    z_min = min(packet.z0 - 6.0 * packet.sigma_z, -v_fast * (t_final - t_hit) - 6.0 * spread)
    k_max = max_local_wavenumber(config, profile, packet.k0 + 6.0 * packet.sigma_k)
    if N is None:
        # Cavity edges fall exactly on cell boundaries: dz divides L and z = 0
        # sits half a cell from a grid point.
        dz_target = 2.0 * math.pi / (points_per_wavelength * k_max)
        dz = config.L / math.ceil(config.L / dz_target)
        z_min = -(math.ceil(-z_min / dz) + 0.5) * dz
        N = sfft.next_fast_len(max(1024, int(math.ceil((z_max - z_min) / dz))))
        z_max = z_min + N * dz
    if dt is None:
        dz = (z_max - z_min) / N
        e_nyquist = (math.pi / dz) ** 2 / (2 * m)
        dt = min(0.05, math.pi / e_nyquist)
    return Grid(z_min, z_max, N, dt), t_final


def write_snapshot_csv(path, grid: Grid, psi_a: np.ndarray, psi_b: np.ndarray) -> None:
    """Rows (z, Re psi_a, Im psi_a, Re psi_b, Im psi_b) at full double precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "re_psi_a", "im_psi_a", "re_psi_b", "im_psi_b"])
        for row in zip(grid.z, psi_a.real, psi_a.imag, psi_b.real, psi_b.imag):
            w.writerow([f"{x:.17g}" for x in row])
