"""Fast invariant checks behind ``dmaloc validate``.

Each check returns ``(passed, detail)``; the reference side of every check
is computed by a separate, deliberately naive route.
"""

from __future__ import annotations

import itertools

import numpy as np

from .combiner import PhaseCodebook, solve_for_channel
from .frontend import draw_noise, noise_threshold, quantize
from .geometry import ArrayGeometry, CarrierConfig, UePosition, element_distances
from .hardware import map_to_lorentzian
from .harness import ExperimentConfig, cartesian_error, prepare_trial, probe_trial
from .localizer import estimate_position


def check_distance_oracle(rng, n=200):
    worst = 0.0
    for _ in range(n):
        geom = ArrayGeometry(int(rng.integers(1, 4)), int(rng.integers(1, 9)),
                             rng.uniform(1e-3, 0.1), rng.uniform(1e-3, 0.1))
        ue = UePosition(rng.uniform(0.5, 30), rng.uniform(0, np.pi / 2), rng.uniform(0, np.pi))
        d = element_distances(geom, ue)
        x, y, z = ue.to_cartesian()
        for i, k in itertools.product(range(geom.n_rf), range(geom.n_e)):
            ref = np.sqrt((x - i * geom.d_rf) ** 2 + y**2 + (z - k * geom.d_e) ** 2)
            worst = max(worst, abs(d[i, k] - ref) / ref)
    return worst <= 1e-12, f"max relative deviation {worst:.2e}"


def check_lorentzian_circle(rng, n=10_000):
    w_tilde = np.exp(1j * rng.uniform(-np.pi / 2, np.pi / 2, n))
    w = map_to_lorentzian(w_tilde, rng.uniform(0, 0.05, n), rng.uniform(1, 3000, n))
    dev = float(np.max(np.abs(np.abs(w - 0.5j) - 0.5)))
    return dev <= 1e-12, f"max |w - j/2| - 1/2 = {dev:.2e}"


def check_quantizer_alphabet(rng, n=100_000, n_rf=4):
    scale = 10.0 ** rng.uniform(-3, 3, (n // n_rf, 1))
    y = scale * (rng.standard_normal((n // n_rf, n_rf)) + 1j * rng.standard_normal((n // n_rf, n_rf)))
    k = y + scale * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    snap = quantize(y, k, float(np.median(scale)))
    vals = snap.y_q.ravel()
    ok = np.all((vals == 0) | ((np.abs(vals.real) == 0.5) & (np.abs(vals.imag) == 0.5)))
    scores = np.sum(snap.y_q.real**2 + snap.y_q.imag**2, axis=1)
    ok &= bool(np.all(np.isin(scores, 0.5 * np.arange(n_rf + 1))))
    return bool(ok), f"{vals.size} outputs checked"


def check_combiner_dominance(rng, n=60):
    cb = PhaseCodebook(3)
    hits = 0
    for _ in range(n):
        n_e = int(rng.integers(1, 4))
        c = rng.standard_normal(n_e) + 1j * rng.standard_normal(n_e)
        got = solve_for_channel(c[None], cb).objective
        best = max(abs(np.sum(np.exp(-1j * np.array(p)) * c)) ** 2
                   for p in itertools.product(cb.phases, repeat=n_e))
        if got > best * (1 + 1e-9):
            return False, f"objective {got} exceeds exhaustive optimum {best}"
        hits += abs(got - best) <= 1e-9 * best
    return hits >= 0.95 * n, f"{hits}/{n} instances at the exhaustive optimum"


def check_threshold_concentration(rng, n=256, draws=2000):
    norms = np.linalg.norm(draw_noise(rng, (draws, n), 1.0), axis=1)
    ratio = float(np.mean(norms) / noise_threshold(n, 1.0))
    return 0.95 < ratio < 1.0, f"mean ||n|| / gamma_q = {ratio:.4f}"


def check_noiseless_on_grid(config: ExperimentConfig, runs=5):
    cfg = config.replace(array__n_e=min(config.array.n_e, 32), grid__counts=[5, 5, 1],
                         sigma2_dbm=-300.0, ue__draw_r_range=[6.0, 15.0],
                         ue__draw_theta_range_deg=[10.0, 80.0])
    receiver = cfg.receiver()
    worst = 0.0
    for t in range(runs):
        ctx = prepare_trial(cfg, t, receiver)
        est = estimate_position(probe_trial(cfg, ctx, 10.0, receiver), ctx.probes.grid)
        worst = max(worst, cartesian_error(ctx.ue, est.position))
    return worst == 0.0, f"largest error {worst:.3g} m over {runs} runs"


def run_checks(config: ExperimentConfig | None = None, seed: int = 0):
    config = ExperimentConfig() if config is None else config
    rng = np.random.default_rng(seed)
    checks = {
        "distance-oracle": lambda: check_distance_oracle(rng),
        "lorentzian-circle": lambda: check_lorentzian_circle(rng),
        "quantizer-alphabet": lambda: check_quantizer_alphabet(rng),
        "combiner-dominance": lambda: check_combiner_dominance(rng),
        "threshold-concentration": lambda: check_threshold_concentration(rng),
        "noiseless-on-grid": lambda: check_noiseless_on_grid(config),
    }
    return {name: fn() for name, fn in checks.items()}
