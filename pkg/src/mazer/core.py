"""Physical parameters, mode profiles and dressed-frame relations.

Units: hbar = 1. Energies are measured from the asymptote of the incoming
excited channel |a, n>, so the de-excited channel |b, n+1> sits at ``delta``
outside the cavity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class MazerError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MazerError, ValueError):
    """Invalid physical parameters or inconsistent inputs."""


class UndefinedFrameError(MazerError, ValueError):
    """The dressed frame is undefined (delta = 0 and u = 0)."""


class NumericalError(MazerError, RuntimeError):
    """A numerical run failed (resolution, instability, norm drift)."""


@dataclass(frozen=True)
class SystemConfig:
    """Physical parameters of one (n, n+1) block.

    ``g`` and ``delta`` are angular frequencies, ``L`` the cavity length and
    ``m`` the atomic mass, all in units with hbar = 1.
    """

    g: float = 1.0
    delta: float = 0.0
    n: int = 0
    m: float = 0.5
    L: float = 1.0
    hbar: float = field(default=1.0, init=False, repr=False)

    def __post_init__(self):
        for name in ("g", "delta", "m", "L"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        # g = 0 is allowed: it is the free-particle limit used as a sanity case.
        if self.g < 0:
            raise ValidationError(f"g must be >= 0, got {self.g}")
        if self.L <= 0:
            raise ValidationError(f"L must be > 0, got {self.L}")
        if self.m <= 0:
            raise ValidationError(f"m must be > 0, got {self.m}")
        if int(self.n) != self.n or self.n < 0:
            raise ValidationError(f"n must be a non-negative integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def kappa(self) -> float:
        """Reference momentum scale sqrt(2 m g)."""
        return math.sqrt(2.0 * self.m * self.g)

    @property
    def omega_n(self) -> float:
        """Vacuum Rabi frequency 2 g sqrt(n + 1)."""
        return 2.0 * self.g * math.sqrt(self.n + 1)

    def energy(self, k):
        """Kinetic energy k^2 / 2m of an incident wavenumber."""
        return np.square(k) / (2.0 * self.m)

    def replace(self, **changes) -> "SystemConfig":
        params = {"g": self.g, "delta": self.delta, "n": self.n, "m": self.m, "L": self.L}
        params.update(changes)
        return SystemConfig(**params)


@dataclass(frozen=True)
class ModeProfile:
    """Piecewise-constant cavity mode function.

    ``segments`` is an ordered tuple of ``(length, u)`` pairs covering
    ``[0, L]``; ``u`` is zero on both unbounded exteriors.
    """

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(d), float(u)) for d, u in self.segments)
        if not segs:
            raise ValidationError("a mode profile needs at least one segment")
        for d, u in segs:
            if not (d > 0 and math.isfinite(d)):
                raise ValidationError(f"segment length must be > 0, got {d}")
            if not (u >= 0 and math.isfinite(u)):
                raise ValidationError(f"mode amplitude must be >= 0, got {u}")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def mesa(cls, L: float) -> "ModeProfile":
        return cls(((L, 1.0),))

    @classmethod
    def staircase(cls, func, L: float, n_segments: int) -> "ModeProfile":
        """Midpoint staircase approximation of a smooth mode function on [0, L]."""
        if n_segments < 1:
            raise ValidationError("n_segments must be >= 1")
        d = L / n_segments
        mids = (np.arange(n_segments) + 0.5) * d
        return cls(tuple((d, float(u)) for u in np.asarray(func(mids), dtype=float)))

    @classmethod
    def from_file(cls, path) -> "ModeProfile":
        """Read a two-column text file of ``segment_length u`` rows."""
        try:
            data = np.loadtxt(path, ndmin=2, comments="#", delimiter=None)
        except ValueError as exc:
            raise ValidationError(f"cannot parse staircase file {path}: {exc}") from exc
        if data.shape[1] != 2:
            raise ValidationError(f"staircase file {path} must have two columns")
        return cls(tuple(map(tuple, data)))

    @property
    def length(self) -> float:
        return float(sum(d for d, _ in self.segments))

    @property
    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([d for d, _ in self.segments])])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([u for _, u in self.segments])

    def mirrored(self) -> "ModeProfile":
        return ModeProfile(self.segments[::-1])

    def check_config(self, config: SystemConfig, rtol: float = 1e-12) -> None:
        if abs(self.length - config.L) > rtol * config.L:
            raise ValidationError(
                f"profile length {self.length!r} does not match cavity length L={config.L!r}"
            )

    def sample(self, z: np.ndarray, dz: float) -> np.ndarray:
        """Cell-averaged mode function on a uniform grid with spacing ``dz``."""
        z = np.asarray(z, dtype=float)
        lo, hi = z - 0.5 * dz, z + 0.5 * dz
        out = np.zeros_like(z)
        edges = self.boundaries
        for (a, b), u in zip(zip(edges[:-1], edges[1:]), self.amplitudes):
            overlap = np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
            out += u * overlap
        return out / dz


@dataclass(frozen=True)
class DressedFrame:
    """Local dressed basis built from mode amplitude ``u``.

    ``rotation`` has the bare coordinates of Gamma+ and Gamma- as columns, in
    the ordered basis (|a, n>, |b, n+1>).
    """

    theta: float
    omega_n: float
    lambda_n: float
    u: float
    undefined: bool = False

    @classmethod
    def build(cls, delta: float, g: float, n: int, u: float) -> "DressedFrame":
        lam = generalized_rabi(delta, g, n, u)
        try:
            theta = mixing_angle(delta, g, n, u)
            undefined = False
        except UndefinedFrameError:
            # Degenerate point: dressed and bare bases coincide physically.
            theta, undefined = 0.0, True
        return cls(theta, 2.0 * g * math.sqrt(n + 1), lam, u, undefined)

    @property
    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])


def _check_block(g: float, n: int, u: float) -> None:
    if g < 0 or n < 0 or u < 0:
        raise ValidationError(f"need g >= 0, n >= 0, u >= 0; got g={g}, n={n}, u={u}")


def mixing_angle(delta: float, g: float, n: int, u: float = 1.0) -> float:
    """Dressed-state mixing angle in [0, pi/2] with cot 2theta = -delta / (Omega_n u).

    Raises UndefinedFrameError when the local coupling and the detuning both
    vanish.
    """
    _check_block(g, n, u)
    coupling = 2.0 * g * math.sqrt(n + 1) * u
    if coupling == 0.0 and delta == 0.0:
        raise UndefinedFrameError("dressed frame undefined at delta = 0 and u = 0")
    return 0.5 * math.atan2(coupling, -delta)


def generalized_rabi(delta: float, g: float, n: int, u: float = 1.0) -> float:
    _check_block(g, n, u)
    return math.hypot(delta, 2.0 * g * math.sqrt(n + 1) * u)


def channel_energies(config: SystemConfig, u: float) -> tuple[float, float]:
    """Dressed potentials (V+, V-) = ((delta + Lambda)/2, (delta - Lambda)/2)."""
    lam = generalized_rabi(config.delta, config.g, config.n, u)
    return 0.5 * (config.delta + lam), 0.5 * (config.delta - lam)


def asymptotic_wavenumbers(config: SystemConfig, E: float) -> tuple[float, float, bool]:
    """Wavenumbers of the two bare channels outside the cavity at energy E.

    Returns ``(k_a, k_b, b_open)``. When the emitted channel is closed ``k_b``
    is the evanescent decay rate sqrt(2m(delta - E)).
    """
    if not E > 0:
        raise ValidationError(f"energy must be > 0 for an incident wave, got {E}")
    k_a = math.sqrt(2.0 * config.m * E)
    excess = E - config.delta
    if excess > 0:
        return k_a, math.sqrt(2.0 * config.m * excess), True
    return k_a, math.sqrt(-2.0 * config.m * excess), False


def branch_sqrt(x):
    """Square root with Re >= 0, and Im >= 0 when Re == 0."""
    r = np.sqrt(np.asarray(x, dtype=complex))
    return np.where((r.real == 0) & (r.imag < 0), -r, r)


def as_segments(profile: ModeProfile | Sequence) -> ModeProfile:
    return profile if isinstance(profile, ModeProfile) else ModeProfile(tuple(profile))
