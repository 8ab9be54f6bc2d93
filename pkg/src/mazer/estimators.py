"""scikit-learn style wrappers: incident wavenumbers in, probabilities out."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import ModeProfile, SystemConfig, ValidationError
from .scattering import emission_probability_scan
from .wavepacket import (
    PacketSpec,
    asymptotic_analysis,
    auto_grid,
    propagate,
    stationary_populations,
)


def check_wavenumbers(X) -> np.ndarray:
    """Accept a 1-D array of wavenumbers or an (n_samples, 1) column."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != 1:
        raise ValidationError(f"expected one wavenumber per row, got {X.shape[1]} columns")
    k = X[:, 0]
    if np.any(k <= 0):
        raise ValidationError("wavenumbers must be > 0")
    return k


class _MazerParams(BaseEstimator):
    def _build(self):
        self.config_ = SystemConfig(g=self.g, delta=self.delta, n=self.n, m=self.m, L=self.L)
        self.profile_ = self.profile if self.profile is not None else ModeProfile.mesa(self.L)
        self.profile_.check_config(self.config_)
        self.n_features_in_ = 1
        return self

    def fit(self, X=None, y=None):
        """Validate parameters; nothing is learned."""
        return self._build()


class StationaryScattering(TransformerMixin, _MazerParams):
    """Exact stationary scattering of an excited atom through the cavity.

    Parameters
    ----------
    g, delta, n, m, L : float
        Coupling, detuning, photon number, mass and cavity length (hbar = 1).
    profile : ModeProfile, optional
        Piecewise-constant mode function; defaults to the mesa of length L.

    ``transform`` maps incident wavenumbers to columns
    (E, P_emission, R_a, T_a, R_b, T_b); ``predict`` returns P_emission.
    """

    columns = ("E", "P_emission", "R_a", "T_a", "R_b", "T_b")

    def __init__(self, g=1.0, delta=0.0, n=0, m=0.5, L=1.0, profile=None):
        self.g = g
        self.delta = delta
        self.n = n
        self.m = m
        self.L = L
        self.profile = profile

    def transform(self, X):
        check_is_fitted(self, "config_")
        k = check_wavenumbers(X)
        rows = emission_probability_scan(self.config_, self.profile_, k)
        return np.array([[r[c] for c in self.columns] for r in rows])

    def predict(self, X):
        return self.transform(X)[:, 1]

    def get_feature_names_out(self, input_features=None):
        return np.array(self.columns, dtype=object)


class WavepacketScattering(TransformerMixin, _MazerParams):
    """Gaussian-packet scattering; one row of sector populations per central k0.

    The packet width is set through ``sigma_ratio`` = sigma_k / k0. With
    ``oracle=True`` the stationary prediction for the same momentum
    distribution is returned instead of running the propagation.
    """

    columns = ("P_a_reflected", "P_a_transmitted", "P_b_reflected", "P_b_transmitted")

    def __init__(self, g=1.0, delta=0.0, n=0, m=0.5, L=1.0, profile=None,
                 sigma_ratio=0.02, start_widths=5.6, points_per_wavelength=32, oracle=False):
        self.g = g
        self.delta = delta
        self.n = n
        self.m = m
        self.L = L
        self.profile = profile
        self.sigma_ratio = sigma_ratio
        self.start_widths = start_widths
        self.points_per_wavelength = points_per_wavelength
        self.oracle = oracle

    def packet_for(self, k0: float) -> PacketSpec:
        sigma_z = 0.5 / (self.sigma_ratio * k0)
        return PacketSpec(k0=k0, sigma_z=sigma_z, z0=-self.start_widths * sigma_z)

    def transform(self, X):
        check_is_fitted(self, "config_")
        out = []
        for k0 in check_wavenumbers(X):
            packet = self.packet_for(k0)
            grid, t_final = auto_grid(self.config_, self.profile_, packet,
                                      points_per_wavelength=self.points_per_wavelength)
            if self.oracle:
                pops = stationary_populations(self.config_, self.profile_, grid, packet)
            else:
                state = propagate(self.config_, self.profile_, grid, packet, t_final)
                pops = asymptotic_analysis(state, grid, self.config_)
            out.append(pops.as_array())
        return np.array(out)

    def predict(self, X):
        pops = self.transform(X)
        return pops[:, 2] + pops[:, 3]

    def get_feature_names_out(self, input_features=None):
        return np.array(self.columns, dtype=object)
