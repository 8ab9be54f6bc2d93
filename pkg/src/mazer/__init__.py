"""Coupled-channel simulator for the one-photon mazer with detuning."""
from .core import (
    DressedFrame,
    MazerError,
    ModeProfile,
    NumericalError,
    SystemConfig,
    UndefinedFrameError,
    ValidationError,
    asymptotic_wavenumbers,
    channel_energies,
    generalized_rabi,
    mixing_angle,
)
from .estimators import StationaryScattering, WavepacketScattering
from .scattering import (
    ScatteringSolution,
    emission_probability_scan,
    momentum_shift_on_emission,
    rabi_reference,
    solve_stationary,
)

__version__ = "0.1.0"
