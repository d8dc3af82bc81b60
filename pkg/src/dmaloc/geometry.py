"""Planar DMA aperture geometry and the near-field sub-THz uplink channel.

The receiver lies in the xz-plane.  Microstrip ``i`` runs along z at
``x = i * d_rf`` and its element ``n`` sits at ``z = n * d_e`` (zero-based
indices throughout the package).  Element (0, 0) is the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class DegenerateGeometryError(ValueError):
    """The user antenna coincides with a metamaterial element."""


@dataclass(frozen=True)
class ArrayGeometry:
    n_rf: int
    n_e: int
    d_rf: float
    d_e: float

    def __post_init__(self):
        if self.n_rf < 1 or self.n_e < 1:
            raise ValueError(f"need n_rf >= 1 and n_e >= 1, got {self.n_rf}, {self.n_e}")
        if not (self.d_rf > 0 and self.d_e > 0):
            raise ValueError("element spacings must be positive")

    @property
    def n(self) -> int:
        return self.n_rf * self.n_e

    def flat_index(self, i: int, n: int) -> int:
        return i * self.n_e + n

    def element_positions(self) -> np.ndarray:
        """Cartesian element coordinates, shape ``(n_rf, n_e, 3)``."""
        pos = np.zeros((self.n_rf, self.n_e, 3))
        pos[..., 0] = (np.arange(self.n_rf) * self.d_rf)[:, None]
        pos[..., 2] = (np.arange(self.n_e) * self.d_e)[None, :]
        return pos

    @property
    def aperture_diagonal(self) -> float:
        return float(np.hypot((self.n_rf - 1) * self.d_rf, (self.n_e - 1) * self.d_e))


@dataclass(frozen=True)
class UePosition:
    r: float
    theta: float
    phi: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"radial distance must be positive, got {self.r}")
        if not 0.0 <= self.theta <= np.pi / 2:
            raise ValueError(f"elevation {self.theta} outside [0, pi/2]")
        if not 0.0 <= self.phi <= np.pi:
            raise ValueError(f"azimuth {self.phi} outside [0, pi]")

    def to_cartesian(self) -> np.ndarray:
        return spherical_to_cartesian(self.r, self.theta, self.phi)


def spherical_to_cartesian(r, theta, phi) -> np.ndarray:
    """``(x, y, z)`` with elevation measured from +z; broadcasts over inputs."""
    st = np.sin(theta)
    return np.stack(np.broadcast_arrays(r * st * np.cos(phi), r * st * np.sin(phi),
                                        r * np.cos(theta)), axis=-1)


@dataclass(frozen=True)
class CarrierConfig:
    wavelength: float
    kappa_abs: float = 0.0075
    boresight_exponent: float = 2.0

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if self.kappa_abs < 0 or self.boresight_exponent < 0:
            raise ValueError("kappa_abs and boresight_exponent must be nonnegative")

    @classmethod
    def from_frequency(cls, freq_hz: float, **kwargs) -> "CarrierConfig":
        return cls(wavelength=SPEED_OF_LIGHT / freq_hz, **kwargs)


def _offsets(geom: ArrayGeometry, r, theta, phi):
    # x and z offsets between the UE and every element; y is the UE's own y.
    st = np.sin(theta)
    dx = r * st * np.cos(phi) - np.arange(geom.n_rf)[:, None] * geom.d_rf
    dy = r * st * np.sin(phi)
    dz = r * np.cos(theta) - np.arange(geom.n_e)[None, :] * geom.d_e
    return dx, dy, dz


def element_distances(geom: ArrayGeometry, ue: UePosition) -> np.ndarray:
    """All UE-to-element distances as an ``(n_rf, n_e)`` array."""
    dx, dy, dz = _offsets(geom, ue.r, ue.theta, ue.phi)
    dist = np.sqrt(dx**2 + dy**2 + dz**2)
    if np.any(dist == 0):
        raise DegenerateGeometryError(f"UE at {ue} coincides with an element")
    return dist


def element_elevations(geom: ArrayGeometry, ue: UePosition) -> np.ndarray:
    """Elevation of the UE seen from each element, in ``[0, pi/2]``."""
    dist = element_distances(geom, ue)
    _, _, dz = _offsets(geom, ue.r, ue.theta, ue.phi)
    ratio = np.abs(dz) / dist
    return np.arcsin(np.minimum(ratio, 1.0))


def element_distance(geom: ArrayGeometry, ue: UePosition, i: int, n: int) -> float:
    _check_index(geom, i, n)
    return float(element_distances(geom, ue)[i, n])


def element_elevation(geom: ArrayGeometry, ue: UePosition, i: int, n: int) -> float:
    _check_index(geom, i, n)
    return float(element_elevations(geom, ue)[i, n])


def _check_index(geom, i, n):
    if not (0 <= i < geom.n_rf and 0 <= n < geom.n_e):
        raise IndexError(f"element ({i}, {n}) outside a {geom.n_rf}x{geom.n_e} aperture")


def radiation_profile(theta, b: float):
    """Element power pattern ``2(b+1) cos^b(theta)``, zero outside ``[-pi/2, pi/2]``."""
    if b < 0:
        raise ValueError("boresight exponent must be nonnegative")
    theta = np.asarray(theta, dtype=float)
    inside = np.abs(theta) <= np.pi / 2
    # clip guards cos(pi/2) ~ -1e-17 style round-off for fractional b
    gain = 2 * (b + 1) * np.clip(np.cos(theta), 0.0, None) ** b
    out = np.where(inside, gain, 0.0)
    return float(out) if out.ndim == 0 else out


def attenuations(geom: ArrayGeometry, ue: UePosition, carrier: CarrierConfig) -> np.ndarray:
    """Per-element amplitude attenuation, ``(n_rf, n_e)``."""
    dist = element_distances(geom, ue)
    elev = element_elevations(geom, ue)
    lam = carrier.wavelength
    return (np.sqrt(radiation_profile(elev, carrier.boresight_exponent))
            * lam / (4 * np.pi * dist) * np.exp(-carrier.kappa_abs * dist / 2))


def attenuation(geom: ArrayGeometry, ue: UePosition, carrier: CarrierConfig,
                i: int, n: int) -> float:
    _check_index(geom, i, n)
    return float(attenuations(geom, ue, carrier)[i, n])


def channel_vector(geom: ArrayGeometry, ue: UePosition, carrier: CarrierConfig) -> np.ndarray:
    """Uplink channel ``h`` (length ``N``, flat index ``i * n_e + n``)."""
    dist = element_distances(geom, ue)
    amp = attenuations(geom, ue, carrier)
    # real phase first: complex-by-real division rounds differently in Python
    # and numpy, which at ~1e5 rad would show up as a 1e-11 mismatch
    phase = 2 * np.pi * dist / carrier.wavelength
    return (amp * np.exp(1j * phase)).reshape(-1)


def channel_matrix(geom: ArrayGeometry, r, theta, phi, carrier: CarrierConfig) -> np.ndarray:
    """Channels for many positions at once.

    ``r``, ``theta``, ``phi`` are equal-length 1-D arrays; returns ``(len(r), N)``.
    """
    r = np.asarray(r, dtype=float)[:, None, None]
    theta = np.asarray(theta, dtype=float)[:, None, None]
    phi = np.asarray(phi, dtype=float)[:, None, None]
    dx, dy, dz = _offsets(geom, r, theta, phi)
    dist = np.sqrt(dx**2 + dy**2 + dz**2)
    if np.any(dist == 0):
        raise DegenerateGeometryError("a candidate position coincides with an element")
    elev = np.arcsin(np.minimum(np.abs(dz) / dist, 1.0))
    lam = carrier.wavelength
    amp = (np.sqrt(radiation_profile(elev, carrier.boresight_exponent))
           * lam / (4 * np.pi * dist) * np.exp(-carrier.kappa_abs * dist / 2))
    h = amp * np.exp(1j * (2 * np.pi * dist / lam))
    return h.reshape(h.shape[0], -1)


def fresnel_bounds(geom: ArrayGeometry, carrier: CarrierConfig) -> tuple[float, float]:
    """Radiating near-field region ``(0.62 sqrt(D^3/lambda), 2 D^2/lambda)``."""
    d = geom.aperture_diagonal
    lam = carrier.wavelength
    return 0.62 * np.sqrt(d**3 / lam), 2 * d**2 / lam
