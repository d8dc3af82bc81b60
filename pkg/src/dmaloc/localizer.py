"""Grid-search localization with a 1-bit DMA receiver.

Each candidate position gets one pilot slot: the receiver focuses on the
candidate, cancels the pilot response it would expect from there, and
1-bit quantizes whatever chains fall inside the noise gate.  The candidate
whose probe lets the most chains through wins.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .combiner import PhaseCodebook, solve_many
from .frontend import noise_threshold, one_bit
from .geometry import ArrayGeometry, CarrierConfig, UePosition, channel_matrix
from .hardware import WaveguideConfig, map_to_lorentzian, propagation_matrix

R_RANGE = (1.0, 20.0)
THETA_RANGE = (0.0, np.pi / 2)
PHI_RANGE = (0.0, np.pi)


@dataclass(frozen=True)
class SearchGrid:
    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    axes: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def size(self) -> int:
        return self.r.size

    @property
    def counts(self) -> tuple[int, int, int]:
        return tuple(a.size for a in self.axes)

    def __len__(self):
        return self.size

    def candidate(self, p: int) -> UePosition:
        return UePosition(float(self.r[p]), float(self.theta[p]), float(self.phi[p]))

    def index_of(self, ue: UePosition) -> int | None:
        hit = np.flatnonzero((self.r == ue.r) & (self.theta == ue.theta) & (self.phi == ue.phi))
        return int(hit[0]) if hit.size else None


def _axis(center, half, count, valid):
    lo, hi = max(center - half, valid[0]), min(center + half, valid[1])
    if lo > hi:
        raise ValueError(f"interval [{center - half}, {center + half}] misses {valid}")
    if count == 1:
        return np.array([min(max(center, lo), hi)])
    if half <= 0:
        raise ValueError("a zero-width interval cannot hold more than one point")
    if lo == center - half and hi == center + half:
        # keeps the centre point bit-exact for odd counts
        return center + half * np.linspace(-1.0, 1.0, count)
    return np.linspace(lo, hi, count)


def build_grid(prior: UePosition, d_r: float, d_theta: float,
               counts: tuple[int, int, int] = (5, 5, 1), d_phi: float = 0.0,
               r_range=R_RANGE, theta_range=THETA_RANGE, phi_range=PHI_RANGE) -> SearchGrid:
    """Uniform candidate grid over ``[l - d_l, l + d_l]`` per axis, clipped to
    the valid ranges.  Ordering is r-major, then theta, then phi."""
    if min(counts) < 1:
        raise ValueError("every axis needs at least one point")
    axes = (_axis(prior.r, d_r, counts[0], r_range),
            _axis(prior.theta, d_theta, counts[1], theta_range),
            _axis(prior.phi, d_phi, counts[2], phi_range))
    rr, tt, pp = np.meshgrid(*axes, indexing="ij")
    return SearchGrid(rr.ravel(), tt.ravel(), pp.ravel(), axes)


@dataclass(frozen=True)
class DmaReceiver:
    """Everything the receiver knows about its own hardware."""

    geom: ArrayGeometry
    carrier: CarrierConfig
    waveguide: WaveguideConfig
    codebook: PhaseCodebook = field(default_factory=PhaseCodebook)

    @classmethod
    def default(cls, geom: ArrayGeometry, carrier: CarrierConfig, bits: int = 10):
        return cls(geom, carrier, WaveguideConfig.default(geom, carrier), PhaseCodebook(bits))

    @cached_property
    def prop(self) -> np.ndarray:
        return propagation_matrix(self.geom, self.waveguide)

    def design(self, grid: SearchGrid) -> "ProbeSet":
        """Virtual channels and focusing combiners for every candidate."""
        g = self.geom
        h_hat = channel_matrix(g, grid.r, grid.theta, grid.phi, self.carrier)
        c = (self.prop.conj() * h_hat.conj()).reshape(-1, g.n_rf, g.n_e)
        c = c * np.exp(-1j * self.waveguide.phase_shift)
        w_tilde = solve_many(c, self.codebook)
        weights = map_to_lorentzian(w_tilde, self.waveguide.rho, self.waveguide.beta[:, None])
        return ProbeSet(grid=grid, h_hat=h_hat, weights=np.asarray(weights))

    def apply(self, weights: np.ndarray, x: np.ndarray) -> np.ndarray:
        """``W^H P^H x`` for stacked combiners ``(T, n_rf, n_e)`` and ``x`` ``(T, N)``."""
        xs = (self.prop.conj() * x).reshape(x.shape[:-1] + (self.geom.n_rf, self.geom.n_e))
        return np.einsum("tin,tin->ti", weights.conj(), xs)


@dataclass(frozen=True)
class ProbeSet:
    grid: SearchGrid
    h_hat: np.ndarray     # (T, N)
    weights: np.ndarray   # (T, n_rf, n_e) Lorentzian weights


@dataclass(frozen=True)
class PseudoSpectrum:
    scores: np.ndarray            # ||y_q||^2 per candidate
    residual_scores: np.ndarray   # ||g|| per candidate
    energies: np.ndarray          # unquantized ||y||^2 per candidate


def pseudo_spectrum(probes: ProbeSet, h_true: np.ndarray, receiver: DmaReceiver,
                    symbol: complex, sigma2: float, noise: np.ndarray) -> PseudoSpectrum:
    """Probe every candidate once.

    ``noise`` holds one fresh ``(N,)`` draw per candidate, shape ``(T, N)``.
    """
    t, n = probes.h_hat.shape
    if noise.shape != (t, n) or h_true.shape != (n,):
        raise ValueError("noise must be (T, N) and the true channel (N,)")
    k = receiver.apply(probes.weights, probes.h_hat.conj()) * symbol
    y = receiver.apply(probes.weights, h_true.conj()[None, :] * symbol + noise)
    g = np.abs(y - k)
    y_q = np.where(g <= noise_threshold(n, sigma2), one_bit(y), 0)
    return PseudoSpectrum(scores=np.sum(y_q.real**2 + y_q.imag**2, axis=1),
                          residual_scores=np.linalg.norm(g, axis=1),
                          energies=np.sum(np.abs(y) ** 2, axis=1))


@dataclass(frozen=True)
class PositionEstimate:
    r_hat: float
    theta_hat: float
    phi_hat: float
    peak_score: float
    tie_count: int
    index: int
    degenerate: bool = False

    @property
    def position(self) -> UePosition:
        return UePosition(self.r_hat, self.theta_hat, self.phi_hat)


def estimate_position(spectrum: PseudoSpectrum, grid: SearchGrid) -> PositionEstimate:
    """Peak of the primary score; ties go to the smallest residual, then the
    lowest index.  An all-zero spectrum is flagged as degenerate."""
    scores = np.asarray(spectrum.scores, dtype=float)
    resid = np.asarray(spectrum.residual_scores, dtype=float)
    peak = scores.max()
    tied = np.flatnonzero(scores == peak)
    best = int(tied[np.argmin(resid[tied])])   # argmin keeps the lowest index
    return PositionEstimate(float(grid.r[best]), float(grid.theta[best]), float(grid.phi[best]),
                            peak_score=float(peak), tie_count=int(tied.size), index=best,
                            degenerate=bool(peak == 0))


def estimate_by_energy(spectrum: PseudoSpectrum, grid: SearchGrid) -> PositionEstimate:
    """Full-resolution comparator: peak of ``||y||^2``, lowest index on ties."""
    e = np.asarray(spectrum.energies)
    best = int(np.argmax(e))
    return PositionEstimate(float(grid.r[best]), float(grid.theta[best]), float(grid.phi[best]),
                            peak_score=float(e[best]), tie_count=int(np.sum(e == e[best])),
                            index=best)


def write_spectrum(path, grid: SearchGrid, spectrum: PseudoSpectrum) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "r_m", "theta_rad", "phi_rad", "score", "residual", "energy"])
        for p in range(grid.size):
            w.writerow([p, repr(float(grid.r[p])), repr(float(grid.theta[p])),
                        repr(float(grid.phi[p])), repr(float(spectrum.scores[p])),
                        repr(float(spectrum.residual_scores[p])),
                        repr(float(spectrum.energies[p]))])
