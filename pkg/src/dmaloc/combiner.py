"""Codebook-constrained analog combiner design for a hypothesised UE position.

Maximises the combined gain ``sum_i |sum_n conj(w~_in) c_in|^2`` over
unit-modulus weights whose phases come from a uniform codebook on
``[-pi/2, pi/2]``.  For a fixed common rotation ``psi`` each element's best
codebook phase is simply the one nearest to ``arg(c) + psi``, so the search
reduces to a one-dimensional scan over ``psi`` (done independently per
microstrip because the objective separates across RF chains).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import ArrayGeometry
from .hardware import CombinerMatrix, WaveguideConfig, map_to_lorentzian, wrap_phase

HALF_PI = np.pi / 2


@dataclass(frozen=True)
class PhaseCodebook:
    bits: int = 10

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("codebook needs at least one bit")

    @property
    def size(self) -> int:
        return 2**self.bits

    @cached_property
    def phases(self) -> np.ndarray:
        return np.linspace(-HALF_PI, HALF_PI, self.size)

    @cached_property
    def offsets(self) -> np.ndarray:
        """Common-rotation grid for the 1-D search: ``size`` points on ``[-pi, pi)``."""
        return -np.pi + 2 * np.pi * np.arange(self.size) / self.size

    def nearest_index(self, phi) -> np.ndarray:
        """Index of the codebook phase nearest to ``phi`` (ties to the smaller phase).

        ``phi`` is wrapped into ``(-pi, pi]`` and clamped to ``[-pi/2, pi/2]``
        first, which makes the result the circularly nearest codebook phase.
        """
        x = np.clip(wrap_phase(phi), -HALF_PI, HALF_PI)
        p = self.phases
        step = np.pi / (self.size - 1)
        lo = np.clip(np.floor((x + HALF_PI) / step).astype(np.intp), 0, self.size - 2)
        # compare both neighbours with the same metric an exhaustive argmin uses
        take_hi = np.abs(x - p[lo + 1]) < np.abs(x - p[lo])
        return lo + take_hi


def quantize_phase(phi, codebook: PhaseCodebook):
    out = codebook.phases[codebook.nearest_index(phi)]
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class CombinerSolution:
    w_tilde: np.ndarray      # (n_rf, n_e) unit-modulus codebook weights
    objective: float
    offsets: np.ndarray      # chosen common rotation per microstrip


def combiner_objective(w_tilde: np.ndarray, c: np.ndarray) -> float:
    return float(np.sum(np.abs(np.sum(w_tilde.conj() * c, axis=-1)) ** 2))


def _grid_scan(c, codebook, offsets):
    conj_table = np.exp(-1j * codebook.phases)
    # (n_psi, n_rf, n_e) codebook indices
    idx = codebook.nearest_index(np.angle(c)[None] + offsets[:, None, None])
    gains = np.abs(np.einsum("kin,in->ki", conj_table[idx], c)) ** 2
    best = np.argmax(gains, axis=0)          # first max -> smallest psi
    rows = np.arange(c.shape[0])
    return idx[best, rows], offsets[best]


def _breakpoint_scan(c, codebook):
    """Exact 1-D scan, one independent rotation per row of ``c`` ``(R, n_e)``.

    As ``psi`` sweeps ``[-pi, pi)`` an element's nearest codebook index steps
    k -> k+1 (mod size) whenever ``arg(c) + psi`` crosses boundary k: the
    midpoint between phases k and k+1, or the wrap point ``pi`` for the last
    index.  Walking the sorted crossings with a running sum visits every
    assignment a rotation can produce.
    """
    rows, n_e = c.shape
    m = codebook.size
    conj_table = np.exp(-1j * codebook.phases)
    step_delta = np.roll(conj_table, -1) - conj_table
    boundaries = np.append(0.5 * (codebook.phases[:-1] + codebook.phases[1:]), np.pi)
    arg_c = np.angle(c)
    psi0 = -np.pi
    idx0 = codebook.nearest_index(arg_c + psi0)

    at = np.mod(boundaries - arg_c[..., None] - psi0, 2 * np.pi)
    # the first crossing of an element is boundary idx0, the last idx0 - 1;
    # pin them against round-off at the two ends of the sweep
    first = idx0[..., None]
    last = ((idx0 - 1) % m)[..., None]
    a_first = np.take_along_axis(at, first, -1)
    a_last = np.take_along_axis(at, last, -1)
    np.put_along_axis(at, first, np.where(a_first > np.pi, 0.0, a_first), -1)
    np.put_along_axis(at, last, np.where(a_last < np.pi, 2 * np.pi, a_last), -1)

    at = at.reshape(rows, n_e * m)
    # within-group order is irrelevant: only group-end states are scored
    order = np.argsort(at, axis=1)
    at = np.take_along_axis(at, order, 1)
    elem = order // m
    deltas = step_delta[order % m] * np.take_along_axis(c, elem, 1)

    s0 = np.sum(conj_table[idx0] * c, axis=1)
    sums = np.concatenate((s0[:, None], s0[:, None] + np.cumsum(deltas, axis=1)), axis=1)
    # coincident crossings form one transition; states inside such a group
    # are not reachable by any psi
    reachable = np.ones(sums.shape, dtype=bool)
    reachable[:, 1:-1] = at[:, 1:] != at[:, :-1]
    gains = np.where(reachable, sums.real**2 + sums.imag**2, -np.inf)
    best = np.argmax(gains, axis=1)

    applied_mask = np.arange(n_e * m)[None, :] < best[:, None]
    flat = (elem + n_e * np.arange(rows)[:, None])[applied_mask]
    applied = np.bincount(flat, minlength=rows * n_e).reshape(rows, n_e)
    idx = (idx0 + applied) % m

    r = np.arange(rows)
    lo = at[r, np.maximum(best - 1, 0)]
    hi = np.where(best < at.shape[1], at[r, np.minimum(best, at.shape[1] - 1)], 2 * np.pi)
    psi = np.where(best == 0, psi0, psi0 + 0.5 * (lo + hi))
    return idx, psi


def solve_for_channel(c: np.ndarray, codebook: PhaseCodebook,
                      offsets: np.ndarray | None = None) -> CombinerSolution:
    """1-D rotation scan for an effective channel ``c`` of shape ``(n_rf, n_e)``.

    By default every rotation cell is visited exactly (see
    ``_breakpoint_scan``); pass ``offsets`` to scan a fixed grid instead.
    Ties go to the smallest rotation.
    """
    c = np.atleast_2d(np.asarray(c, dtype=complex))
    if not np.any(c):
        raise ValueError("hypothesised channel has zero norm")
    if offsets is not None:
        idx, psi = _grid_scan(c, codebook, np.asarray(offsets, dtype=float))
    else:
        idx, psi = _breakpoint_scan(c, codebook)
    w_tilde = np.exp(1j * codebook.phases[idx])
    return CombinerSolution(w_tilde=w_tilde, objective=combiner_objective(w_tilde, c),
                            offsets=psi)


def solve_many(c: np.ndarray, codebook: PhaseCodebook, chunk_elements: int = 1 << 21
               ) -> np.ndarray:
    """Codebook weights for a stack of effective channels ``(T, n_rf, n_e)``."""
    t, n_rf, n_e = c.shape
    if np.any(~np.any(c.reshape(t, -1), axis=1)):
        raise ValueError("a hypothesised channel has zero norm")
    flat = c.reshape(t * n_rf, n_e)
    step = max(1, chunk_elements // (n_e * codebook.size))
    idx = np.concatenate([_breakpoint_scan(flat[i:i + step], codebook)[0]
                          for i in range(0, flat.shape[0], step)])
    return np.exp(1j * codebook.phases[idx]).reshape(t, n_rf, n_e)


def solve_op(h_hat: np.ndarray, prop: np.ndarray, geom: ArrayGeometry,
             codebook: PhaseCodebook, waveguide: WaveguideConfig | None = None
             ) -> CombinerSolution:
    """Best codebook combiner for the virtual channel ``h_hat``.

    With ``waveguide`` given, the guide phase is taken out of the effective
    channel so that ``finalize_weights`` can put it back; without it the
    effective channel is the plain ``P^H h^H``.
    """
    h_hat = np.asarray(h_hat, dtype=complex)
    if h_hat.shape != (geom.n,):
        raise ValueError(f"h_hat has shape {h_hat.shape}, expected ({geom.n},)")
    if waveguide is not None and waveguide.rho.shape != (geom.n_rf, geom.n_e):
        raise ValueError("waveguide does not match the geometry")
    c = (prop.conj() * h_hat.conj()).reshape(geom.n_rf, geom.n_e)
    if waveguide is not None:
        c = c * np.exp(-1j * waveguide.phase_shift)
    return solve_for_channel(c, codebook)


def finalize_weights(solution: CombinerSolution, waveguide: WaveguideConfig) -> CombinerMatrix:
    """Lorentzian weights ``0.5 (j + w~ e^{j rho beta})`` for a solved combiner."""
    w = map_to_lorentzian(solution.w_tilde, waveguide.rho, waveguide.beta[:, None])
    return CombinerMatrix(np.asarray(w))
