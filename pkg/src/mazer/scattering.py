"""Exact stationary two-channel scattering through piecewise-constant modes.

Each segment is diagonalised in its local dressed frame; the plane-wave
amplitudes of all regions are tied together by continuity of both bare
components and their derivatives, assembled into one banded linear system.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse

from .core import (
    DressedFrame,
    ModeProfile,
    NumericalError,
    SystemConfig,
    ValidationError,
    asymptotic_wavenumbers,
    branch_sqrt,
    channel_energies,
    generalized_rabi,
)

RESIDUAL_RTOL = 1e-12
UNITARITY_TOL = 1e-10
# Below this |q| * width the exponential pair is replaced by {1, z - z_left}.
_LINEAR_BASIS_EPS = 1e-9


@dataclass(frozen=True)
class RegionSolution:
    """Plane-wave content of one cavity segment in its dressed frame.

    ``amplitudes`` are (A+, B+, A-, B-): A multiplies exp(iq(z - z_left)),
    B multiplies exp(-iq(z - z_right)), so evanescent factors never exceed 1.
    """

    frame: DressedFrame
    q_plus: complex
    q_minus: complex
    amplitudes: np.ndarray
    z_left: float
    z_right: float


@dataclass(frozen=True)
class ScatteringSolution:
    """Amplitudes and flux-normalised probabilities for incidence in |a, n>.

    Reflected waves are r exp(-ikz); transmitted waves are t exp(ikz) for open
    channels. A closed transmitted channel is t exp(-kappa (z - L)).
    """

    E: float
    k_a: float
    k_b: float
    b_open: bool
    r_a: complex
    r_b: complex
    t_a: complex
    t_b: complex
    regions: tuple = ()

    @property
    def R_a(self) -> float:
        return abs(self.r_a) ** 2

    @property
    def T_a(self) -> float:
        return abs(self.t_a) ** 2

    @property
    def R_b(self) -> float:
        return (self.k_b / self.k_a) * abs(self.r_b) ** 2 if self.b_open else 0.0

    @property
    def T_b(self) -> float:
        return (self.k_b / self.k_a) * abs(self.t_b) ** 2 if self.b_open else 0.0

    @property
    def P_emission(self) -> float:
        return self.R_b + self.T_b

    @property
    def unitarity_defect(self) -> float:
        return self.R_a + self.T_a + self.R_b + self.T_b - 1.0

    def dressed_amplitudes(self) -> dict:
        """Amplitudes in the resonant dressed basis Gamma^+- (theta = pi/4).

        Only meaningful at zero detuning, where the exterior and interior
        dressed frames coincide and the two dressed channels decouple.
        """
        return {
            "r_plus": self.r_a + self.r_b,
            "r_minus": self.r_a - self.r_b,
            "t_plus": self.t_a + self.t_b,
            "t_minus": self.t_a - self.t_b,
        }

    def row(self) -> dict:
        return {"k": self.k_a, "E": self.E, "P_emission": self.P_emission,
                "R_a": self.R_a, "T_a": self.T_a, "R_b": self.R_b, "T_b": self.T_b,
                "b_open": self.b_open}


def _segment_waves(q: complex, width: float):
    """Values and derivatives of the two segment basis functions at both ends.

    Returns arrays shaped (2 functions, 2 ends) for value and derivative.
    """
    if abs(q) * width < _LINEAR_BASIS_EPS:
        val = np.array([[1.0, 1.0], [0.0, width]], dtype=complex)
        der = np.array([[0.0, 0.0], [1.0, 1.0]], dtype=complex)
        return val, der
    phase = np.exp(1j * q * width)
    val = np.array([[1.0, phase], [phase, 1.0]], dtype=complex)
    der = np.array([[1j * q, 1j * q * phase], [-1j * q * phase, -1j * q]], dtype=complex)
    return val, der


def solve_stationary(config: SystemConfig, profile: ModeProfile, k_in: float,
                     keep_regions: bool = False) -> ScatteringSolution:
    """Scatter an atom incident in |a, n> with wavenumber ``k_in`` off the cavity."""
    profile.check_config(config)
    if not k_in > 0:
        raise ValidationError(f"incident wavenumber must be > 0, got {k_in}")
    E = float(config.energy(k_in))
    k_a, k_b_rate, b_open = asymptotic_wavenumbers(config, E)
    two_m = 2.0 * config.m
    q_a = complex(k_a)
    q_b = complex(k_b_rate) if b_open else 1j * k_b_rate

    edges = profile.boundaries
    n_seg = len(profile.segments)
    n_unknown = 4 * n_seg + 4
    # Derivative rows are divided by this to keep rows of comparable size.
    kscale = max(k_a, 1.0)

    rows, cols, vals = [], [], []
    rhs = np.zeros(n_unknown, dtype=complex)

    def put(r, c, v):
        if v != 0:
            rows.append(r)
            cols.append(c)
            vals.append(v)

    frames, qs = [], []
    for (d, u) in profile.segments:
        frame = DressedFrame.build(config.delta, config.g, config.n, u)
        v_plus, v_minus = channel_energies(config, u)
        q = branch_sqrt(two_m * (E - np.array([v_plus, v_minus])))
        frames.append(frame)
        qs.append((complex(q[0]), complex(q[1])))

    # Interface i sits at edges[i]; equations 4i..4i+3 are
    # (value a, value b, derivative a, derivative b): left side minus right side.
    for i in range(n_seg + 1):
        r0 = 4 * i
        # Left neighbour.
        if i == 0:
            # Reflected waves exp(-iqz) in the bare basis; incident exp(ik_a z) to rhs.
            for ch, q in ((0, q_a), (1, q_b)):
                put(r0 + ch, ch, 1.0)
                put(r0 + 2 + ch, ch, -1j * q / kscale)
            rhs[r0 + 0] -= 1.0
            rhs[r0 + 2] -= 1j * q_a / kscale
        else:
            j = i - 1
            col0 = 2 + 4 * j
            d = profile.segments[j][0]
            R = frames[j].rotation
            for s in range(2):
                val, der = _segment_waves(qs[j][s], d)
                for f in range(2):
                    c = col0 + 2 * s + f
                    for ch in range(2):
                        put(r0 + ch, c, R[ch, s] * val[f, 1])
                        put(r0 + 2 + ch, c, R[ch, s] * der[f, 1] / kscale)
        # Right neighbour (enters with a minus sign).
        if i == n_seg:
            col0 = 2 + 4 * n_seg
            for ch, q in ((0, q_a), (1, q_b)):
                put(r0 + ch, col0 + ch, -1.0)
                put(r0 + 2 + ch, col0 + ch, -1j * q / kscale)
        else:
            j = i
            col0 = 2 + 4 * j
            d = profile.segments[j][0]
            R = frames[j].rotation
            for s in range(2):
                val, der = _segment_waves(qs[j][s], d)
                for f in range(2):
                    c = col0 + 2 * s + f
                    for ch in range(2):
                        put(r0 + ch, c, -R[ch, s] * val[f, 0])
                        put(r0 + 2 + ch, c, -R[ch, s] * der[f, 0] / kscale)

    A = sparse.csr_matrix((vals, (rows, cols)), shape=(n_unknown, n_unknown), dtype=complex)
    x = _solve_banded(A, rhs)
    residual = np.linalg.norm(A @ x - rhs)
    scale = sparse.linalg.norm(A) * max(np.linalg.norm(x), 1.0)
    if not residual <= RESIDUAL_RTOL * scale:
        raise NumericalError(f"stationary solve residual {residual:.3e} exceeds "
                             f"{RESIDUAL_RTOL:g} x {scale:.3e} (k={k_in})")

    r_a, r_b = x[0], x[1]
    t_a_ref, t_b = x[-2], x[-1]
    # Report open transmitted waves as coefficients of exp(ikz) rather than exp(ik(z - L)).
    t_a = t_a_ref * np.exp(-1j * k_a * config.L)
    if b_open:
        t_b = t_b * np.exp(-1j * k_b_rate * config.L)

    regions = ()
    if keep_regions:
        regions = tuple(
            RegionSolution(frames[j], qs[j][0], qs[j][1], x[2 + 4 * j: 6 + 4 * j].copy(),
                           float(edges[j]), float(edges[j + 1]))
            for j in range(n_seg)
        )
    return ScatteringSolution(E, k_a, k_b_rate, b_open, complex(r_a), complex(r_b),
                              complex(t_a), complex(t_b), regions)


def _solve_banded(A: sparse.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    coo = A.tocoo()
    lower = int(max(0, np.max(coo.row - coo.col)))
    upper = int(max(0, np.max(coo.col - coo.row)))
    ab = np.zeros((lower + upper + 1, A.shape[1]), dtype=complex)
    ab[upper + coo.row - coo.col, coo.col] = coo.data
    try:
        return linalg.solve_banded((lower, upper), ab, rhs)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"singular interface system: {exc}") from exc


def emission_probability_scan(config: SystemConfig, profile: ModeProfile, k_values,
                              executor=None) -> list[dict]:
    """One probability row per incident wavenumber, in input order.

    ``executor`` is any object with an order-preserving ``map`` (for example a
    concurrent.futures pool); rows are computed serially when it is None.
    """
    k_values = [float(k) for k in k_values]
    for i, k in enumerate(k_values):
        if not k > 0:
            raise ValidationError(f"row {i}: wavenumber must be > 0, got {k}")
    profile.check_config(config)

    def one(item):
        i, k = item
        try:
            return solve_stationary(config, profile, k).row()
        except Exception as exc:
            raise type(exc)(f"row {i} (k={k!r}): {exc}") from exc

    mapper = map if executor is None else executor.map
    return list(mapper(one, enumerate(k_values)))


def rabi_reference(config: SystemConfig, k: float) -> float:
    """Semiclassical Rabi emission probability for transit time L m / k."""
    if not k > 0:
        raise ValidationError(f"wavenumber must be > 0, got {k}")
    tau = config.L * config.m / k
    lam = generalized_rabi(config.delta, config.g, config.n, 1.0)
    if lam == 0.0:
        return 0.0
    return (config.omega_n / lam) ** 2 * math.sin(0.5 * lam * tau) ** 2


def momentum_shift_on_emission(config: SystemConfig, k_in: float):
    """Outgoing wavenumber after emitting a photon, or None if the channel is closed."""
    if not k_in > 0:
        raise ValidationError(f"wavenumber must be > 0, got {k_in}")
    arg = k_in * k_in - 2.0 * config.m * config.delta
    if arg <= 0:
        return None
    return math.sqrt(arg)


def square_potential_amplitudes(V0: float, L: float, k: float, m: float = 0.5):
    """Textbook (r, t) for a single square barrier/well of height V0 on [0, L].

    Convention: incident exp(ikz), reflected r exp(-ikz), transmitted t exp(ikz).
    """
    E = k * k / (2.0 * m)
    q = complex(branch_sqrt(2.0 * m * (E - V0)))
    if abs(q) * L < _LINEAR_BASIS_EPS:
        denom = 1.0 - 0.5j * k * L
        return (-0.5j * k * L / denom, np.exp(-1j * k * L) / denom)
    s, c = np.sin(q * L), np.cos(q * L)
    denom = 2 * k * q * c - 1j * (k * k + q * q) * s
    r = 1j * (q * q - k * k) * s / denom
    t = 2 * k * q * np.exp(-1j * k * L) / denom
    return complex(r), complex(t)
