"""Uplink reception through the DMA and the gated 1-bit quantizer.

Powers are linear milliwatts internally; amplitudes are sqrt(mW).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hardware import CombinerMatrix

THERMAL_NOISE_DBM_HZ = -174.0


def dbm_to_mw(p_dbm):
    return 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def mw_to_dbm(p_mw):
    return 10.0 * np.log10(p_mw)


def noise_variance_dbm(bandwidth_hz: float) -> float:
    return THERMAL_NOISE_DBM_HZ + 10.0 * np.log10(bandwidth_hz)


@dataclass(frozen=True)
class PilotConfig:
    power_dbm: float
    symbol: complex | None = None

    def __post_init__(self):
        if self.symbol is None:
            object.__setattr__(self, "symbol", complex(np.sqrt(dbm_to_mw(self.power_dbm))))
        elif abs(self.symbol) ** 2 > dbm_to_mw(self.power_dbm) * (1 + 1e-12):
            raise ValueError("pilot symbol exceeds the power budget")


@dataclass(frozen=True)
class NoiseConfig:
    sigma2: float
    seed: int | None = None

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("noise variance must be positive")

    def draw(self, size, rng: np.random.Generator | None = None) -> np.ndarray:
        """Circular complex Gaussian samples with variance ``sigma2``."""
        rng = np.random.default_rng(self.seed) if rng is None else rng
        return draw_noise(rng, size, self.sigma2)


def draw_noise(rng: np.random.Generator, size, sigma2: float) -> np.ndarray:
    z = rng.standard_normal(size=(2,) + tuple(np.atleast_1d(size)))
    return np.sqrt(sigma2 / 2) * (z[0] + 1j * z[1])


def noise_threshold(n: int, sigma2: float) -> float:
    """Gate threshold ``sqrt(N sigma^2)``, the RMS of the unprocessed noise norm."""
    if n < 1 or not sigma2 > 0:
        raise ValueError("need N >= 1 and sigma2 > 0")
    return float(np.sqrt(n * sigma2))


@dataclass(frozen=True)
class DcOffset:
    k: np.ndarray
    gamma_q: float


@dataclass(frozen=True)
class QuantizedSnapshot:
    y: np.ndarray
    y_q: np.ndarray
    gate_residuals: np.ndarray

    @property
    def score(self) -> float:
        # re^2 + im^2 keeps the half-integer lattice exact
        return float(np.sum(self.y_q.real ** 2 + self.y_q.imag ** 2))


def receive(h: np.ndarray, prop: np.ndarray, combiner: CombinerMatrix,
            symbol: complex, noise: np.ndarray) -> np.ndarray:
    """``y = W^H P^H h^H s + W^H P^H n``."""
    h = np.asarray(h)
    if h.shape != prop.shape or noise.shape != h.shape:
        raise ValueError("channel, propagation diagonal and noise must have equal length")
    return combiner.hermitian_apply(prop.conj() * (h.conj() * symbol + noise))


def dc_offset(combiner: CombinerMatrix, prop: np.ndarray, h_hat: np.ndarray,
              symbol: complex, sigma2: float) -> DcOffset:
    """Noise-free replica of the pilot response for a hypothesised channel."""
    k = combiner.hermitian_apply(prop.conj() * h_hat.conj()) * symbol
    return DcOffset(k=k, gamma_q=noise_threshold(h_hat.shape[-1], sigma2))


def one_bit(y: np.ndarray) -> np.ndarray:
    """``0.5 (sign Re + j sign Im)`` with sign(0) = +1."""
    re = np.where(np.real(y) >= 0, 0.5, -0.5)
    im = np.where(np.imag(y) >= 0, 0.5, -0.5)
    return re + 1j * im


def quantize(y: np.ndarray, k: np.ndarray, gamma_q: float) -> QuantizedSnapshot:
    y = np.asarray(y, dtype=complex)
    k = np.asarray(k, dtype=complex)
    if y.shape != k.shape:
        raise ValueError("y and k must have the same shape")
    g = np.abs(y - k)
    y_q = np.where(g <= gamma_q, one_bit(y), 0)
    return QuantizedSnapshot(y=y, y_q=y_q, gate_residuals=g)
