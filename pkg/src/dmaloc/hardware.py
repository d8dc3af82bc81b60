"""DMA hardware: in-waveguide propagation, Lorentzian weights, block combiner."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry, CarrierConfig

log = logging.getLogger(__name__)

HALF_PI = np.pi / 2
# slack for phases that land on +-pi/2 up to round-off
_PHASE_TOL = 1e-12


@dataclass(frozen=True)
class WaveguideConfig:
    """Per-microstrip attenuation ``alpha`` (1/m), wavenumber ``beta`` (rad/m)
    and element positions ``rho`` (m) along each microstrip."""

    alpha: np.ndarray
    beta: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        rho = np.atleast_2d(np.asarray(self.rho, dtype=float))
        if np.any(alpha < 0):
            raise ValueError("waveguide attenuation must be nonnegative")
        if np.any(beta <= 0):
            raise ValueError("waveguide wavenumber must be positive")
        if np.any(rho[:, 0] != 0) or np.any(np.diff(rho, axis=1) <= 0):
            raise ValueError("rho must start at 0 and strictly increase along each microstrip")
        if not (alpha.shape[0] == beta.shape[0] == rho.shape[0]):
            raise ValueError("alpha, beta and rho disagree on the number of microstrips")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def default(cls, geom: ArrayGeometry, carrier: CarrierConfig,
                alpha: float = 0.0, beta: float | None = None) -> "WaveguideConfig":
        """Lossless guide with free-space wavenumber; ``rho`` follows ``d_e``."""
        beta = 2 * np.pi / carrier.wavelength if beta is None else beta
        rho = np.tile(np.arange(geom.n_e) * geom.d_e, (geom.n_rf, 1))
        return cls(np.full(geom.n_rf, alpha), np.full(geom.n_rf, beta), rho)

    @property
    def phase_shift(self) -> np.ndarray:
        """``rho * beta`` per element, shape ``(n_rf, n_e)``."""
        return self.rho * self.beta[:, None]


def propagation_matrix(geom: ArrayGeometry, waveguide: WaveguideConfig) -> np.ndarray:
    """Diagonal of the in-microstrip propagation matrix, flat length ``N``."""
    if waveguide.rho.shape != (geom.n_rf, geom.n_e):
        raise ValueError(f"waveguide rho has shape {waveguide.rho.shape}, "
                         f"geometry needs {(geom.n_rf, geom.n_e)}")
    gamma = waveguide.alpha[:, None] + 1j * waveguide.beta[:, None]
    return np.exp(-waveguide.rho * gamma).reshape(-1)


def lorentzian_weight(phi):
    """``(j + e^{j phi}) / 2`` for ``phi`` in ``[-pi/2, pi/2]``."""
    phi = np.asarray(phi, dtype=float)
    if np.any(np.abs(phi) > HALF_PI + _PHASE_TOL):
        raise ValueError("Lorentzian phase must lie in [-pi/2, pi/2]")
    w = 0.5 * (1j + np.exp(1j * phi))
    return complex(w) if w.ndim == 0 else w


def wrap_phase(phi):
    """Wrap into ``(-pi, pi]``."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)
    return float(wrapped) if wrapped.ndim == 0 else wrapped


def map_to_lorentzian(w_tilde, rho, beta):
    """Compensate the guide phase and project onto the Lorentzian set.

    Returns ``0.5 (j + w_tilde e^{j rho beta})``.  A composite phase outside
    ``[-pi/2, pi/2]`` (after wrapping to ``(-pi, pi]``) is clamped to the
    nearer endpoint.
    """
    w_tilde = np.asarray(w_tilde, dtype=complex)
    if not np.allclose(np.abs(w_tilde), 1.0, rtol=0, atol=1e-9):
        raise ValueError("codebook weights must have unit modulus")
    composite = wrap_phase(np.angle(w_tilde) + np.asarray(rho) * np.asarray(beta))
    clamped = np.clip(composite, -HALF_PI, HALF_PI)
    n_clamped = int(np.count_nonzero(clamped != composite))
    if n_clamped:
        log.debug("clamped %d composite phase(s) into the Lorentzian range", n_clamped)
    return lorentzian_weight(clamped)


@dataclass(frozen=True)
class CombinerMatrix:
    """Block-sparse analog combiner stored as its ``(n_rf, n_e)`` weight table.

    Microstrip ``i`` feeds RF chain ``i`` only, so the dense ``N x n_rf`` form
    is never needed for computation.
    """

    weights: np.ndarray

    @property
    def n_rf(self) -> int:
        return self.weights.shape[-2]

    @property
    def n_e(self) -> int:
        return self.weights.shape[-1]

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n_rf * self.n_e, self.n_rf), dtype=complex)
        for i in range(self.n_rf):
            out[i * self.n_e:(i + 1) * self.n_e, i] = self.weights[i]
        return out

    def hermitian_apply(self, x: np.ndarray) -> np.ndarray:
        """``W^H x`` for a flat length-``N`` vector (or a stack ``(..., N)``)."""
        x = np.asarray(x)
        xs = x.reshape(x.shape[:-1] + (self.n_rf, self.n_e))
        return np.einsum("...in,...in->...i", self.weights.conj(), xs)


def assemble_combiner(geom: ArrayGeometry, weights) -> CombinerMatrix:
    weights = np.asarray(weights, dtype=complex)
    if weights.shape != (geom.n_rf, geom.n_e):
        raise ValueError(f"weight table {weights.shape} does not match "
                         f"{geom.n_rf}x{geom.n_e} geometry")
    return CombinerMatrix(weights)
