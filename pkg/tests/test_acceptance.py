"""Acceptance suite: one test per criterion, each run at its stated tolerance.

The sweep criteria (2-4) take minutes and are marked ``slow``; deselect them
with ``-m "not slow"`` for a quick pass.
"""

import itertools
import time

import numpy as np
import pytest

from dmaloc.cli import main
from dmaloc.combiner import PhaseCodebook, solve_for_channel
from dmaloc.frontend import draw_noise, noise_threshold, quantize
from dmaloc.geometry import (ArrayGeometry, CarrierConfig, UePosition, channel_vector,
                             element_distance, element_elevation, radiation_profile)
from dmaloc.hardware import lorentzian_weight
from dmaloc.harness import (PROPOSED, ExperimentConfig, cartesian_error, grid_counts,
                            prepare_trial, probe_trial, rmse_sweep)
from dmaloc.localizer import estimate_position
from oracles import cartesian_distance, exhaustive_optimum

LAM = 299_792_458.0 / 140e9
PAIRS = 100


def pooled_se(a, b):
    return float(np.hypot(a, b))


def proposed_point(config):
    curves, _ = rmse_sweep(config, methods=(PROPOSED,))
    c = curves[0]
    return c.rmse[0], c.stderr[0]


def test_noiseless_on_grid_exactness(verdict):
    # draws kept away from the range limits so the 5x5 grid stays centred on the truth
    cfg = ExperimentConfig(sigma2_dbm=-300.0).replace(
        array__n_e=32, grid__counts=[5, 5, 1], ue__draw_r_range=[6.0, 15.0],
        ue__draw_theta_range_deg=[10.0, 80.0])
    receiver = cfg.receiver()
    start = time.perf_counter()
    exact = 0
    for trial in range(20):
        ctx = prepare_trial(cfg, trial, receiver)
        est = estimate_position(probe_trial(cfg, ctx, 10.0, receiver), ctx.probes.grid)
        exact += cartesian_error(ctx.ue, est.position) == 0.0
    elapsed = time.perf_counter() - start
    ok = exact == 20 and elapsed < 10
    assert verdict("1 noiseless on-grid exactness", ok,
                   f"{exact}/20 exact, {elapsed:.2f} s (limit 10 s)")


@pytest.mark.slow
def test_snr_monotonicity(verdict):
    cfg = ExperimentConfig(trials=PAIRS, power_dbm=[-10.0, 0.0, 10.0, 20.0])
    assert tuple(cfg.grid.counts) == grid_counts(125)
    start = time.perf_counter()
    curves, _ = rmse_sweep(cfg, methods=(PROPOSED,))
    elapsed = time.perf_counter() - start
    c = curves[0]
    worst = max(c.rmse[j] - c.rmse[i] - pooled_se(c.stderr[i], c.stderr[j])
                for i, j in itertools.combinations(range(len(c.rmse)), 2))
    ok = worst <= 0 and elapsed < 600
    curve = ", ".join(f"{p:g} dBm {r:.3f}+-{s:.3f}" for p, r, s in zip(c.power_dbm, c.rmse, c.stderr))
    assert verdict("2 SNR monotonicity", ok,
                   f"RMSE [{curve}] m; worst rise minus pooled SE {worst:.3f} m; {elapsed:.0f} s")


@pytest.mark.slow
def test_aperture_trend(verdict):
    base = ExperimentConfig(trials=PAIRS, power_dbm=[10.0])
    small, sse = proposed_point(base.replace(array__n_e=32))
    large, lse = proposed_point(base.replace(array__n_e=128))
    tol = pooled_se(sse, lse)
    assert verdict("3 aperture trend", large <= small + tol,
                   f"RMSE(N_E=128) {large:.3f} m vs RMSE(N_E=32) {small:.3f} m, "
                   f"pooled SE {tol:.3f} m")


@pytest.mark.slow
def test_overhead_tradeoff(verdict):
    base = ExperimentConfig(trials=PAIRS, power_dbm=[10.0])
    few, fse = proposed_point(base.replace(grid__counts=list(grid_counts(64))))
    many, mse = proposed_point(base.replace(grid__counts=list(grid_counts(216))))
    tol = pooled_se(fse, mse)
    assert verdict("4 overhead trade-off", many <= few + tol,
                   f"RMSE(T=216) {many:.3f} m vs RMSE(T=64) {few:.3f} m, pooled SE {tol:.3f} m")


def test_quantizer_alphabet(verdict):
    rng = np.random.default_rng(5)
    n_rf, n = 4, 100_000
    scale = 10.0 ** rng.uniform(-6, 3, (n, 1))
    y = scale * (rng.standard_normal((n, n_rf)) + 1j * rng.standard_normal((n, n_rf)))
    k = y + scale * (rng.standard_normal((n, n_rf)) + 1j * rng.standard_normal((n, n_rf)))
    y[rng.random((n, n_rf)) < 0.01] = 0.0                # exercise sign(0)
    gamma = scale[:, 0] * rng.uniform(0, 3, n)
    out = np.array([quantize(y[t], k[t], gamma[t]).y_q for t in range(n)])
    alphabet = np.array([0, 0.5 + 0.5j, 0.5 - 0.5j, -0.5 + 0.5j, -0.5 - 0.5j])
    in_alphabet = bool(np.all(np.isin(out, alphabet)))
    scores = np.sum(out.real**2 + out.imag**2, axis=1)
    on_lattice = bool(np.all(np.isin(scores, 0.5 * np.arange(n_rf + 1))))
    assert verdict("5 quantizer alphabet", in_alphabet and on_lattice,
                   f"{n} inputs, alphabet ok={in_alphabet}, score lattice ok={on_lattice}")


def test_lorentzian_circle(verdict):
    rng = np.random.default_rng(6)
    w = lorentzian_weight(rng.uniform(-np.pi / 2, np.pi / 2, 10_000))
    dev = float(np.max(np.abs(np.abs(w - 0.5j) - 0.5)))
    assert verdict("6 Lorentzian circle", dev <= 1e-12, f"max deviation {dev:.2e} over 10^4 weights")


def test_combiner_oracle_dominance(verdict):
    rng = np.random.default_rng(7)
    cb = PhaseCodebook(3)
    exceed = matched = 0
    for _ in range(200):
        c = rng.standard_normal((1, int(rng.integers(1, 4)))) * np.exp(2j * np.pi * rng.random())
        c = c + 1j * rng.standard_normal(c.shape)
        got = solve_for_channel(c, cb).objective
        opt = exhaustive_optimum(c, cb.phases)
        exceed += got > opt * (1 + 1e-12)
        matched += abs(got - opt) <= 1e-9 * opt
    ok = exceed == 0 and matched >= 190
    assert verdict("7 combiner oracle dominance", ok,
                   f"{matched}/200 matched within 1e-9, {exceed} above the optimum")


def test_distance_and_channel_oracles(verdict):
    rng = np.random.default_rng(8)
    worst_d = worst_h = 0.0
    for _ in range(1000):
        geom = ArrayGeometry(int(rng.integers(1, 5)), int(rng.integers(1, 17)),
                             rng.uniform(0.1, 1) * LAM, rng.uniform(0.1, 1) * LAM)
        carrier = CarrierConfig(LAM, kappa_abs=rng.uniform(0, 0.05),
                                boresight_exponent=rng.uniform(0, 4))
        ue = UePosition(rng.uniform(0.5, 20), rng.uniform(0, np.pi / 2), rng.uniform(0, np.pi))
        h = channel_vector(geom, ue, carrier)
        for i, n in itertools.product(range(geom.n_rf), range(geom.n_e)):
            d = element_distance(geom, ue, i, n)
            ref_d = cartesian_distance(geom, ue.r, ue.theta, ue.phi, i, n)
            worst_d = max(worst_d, abs(d - ref_d) / ref_d)
            # composed entry: profile, spreading, absorption, carrier phase
            el = element_elevation(geom, ue, i, n)
            amp = (np.sqrt(radiation_profile(el, carrier.boresight_exponent)) * LAM
                   / (4 * np.pi * d) * np.exp(-carrier.kappa_abs * d / 2))
            ref_h = amp * np.exp(1j * (2 * np.pi * d / LAM))
            k = geom.flat_index(i, n)
            if ref_h != 0:
                worst_h = max(worst_h, abs(h[k] - ref_h) / abs(ref_h))
            else:
                worst_h = max(worst_h, abs(h[k]))
    ok = worst_d <= 1e-12 and worst_h <= 1e-12
    assert verdict("8 distance/channel oracle equivalence", ok,
                   f"max rel error: distance {worst_d:.1e}, channel {worst_h:.1e}")


def test_threshold_concentration(verdict):
    rng = np.random.default_rng(9)
    norms = np.linalg.norm(draw_noise(rng, (10_000, 256), 1.0), axis=1)
    ratio = float(norms.mean() / noise_threshold(256, 1.0))
    assert verdict("9 threshold concentration", 0.95 < ratio < 1.0,
                   f"mean ||n|| / gamma_q = {ratio:.5f}")


def test_sweep_determinism(verdict, tmp_path):
    cfg = ExperimentConfig(trials=4, power_dbm=[-10.0, 10.0]).replace(
        array__n_e=16, grid__counts=[3, 3, 1])
    first = tmp_path / "first"
    assert main(["sweep", "--config", _dump(cfg, tmp_path / "c.json"), "--out", str(first)]) == 0
    # replay from the manifest written by the first run
    for name in ("second", "third"):
        assert main(["sweep", "--config", str(first / "manifest.json"),
                     "--out", str(tmp_path / name)]) == 0
    same = all((first / f).read_bytes() == (tmp_path / run / f).read_bytes()
               for run in ("second", "third") for f in ("rmse.csv", "trials.csv"))
    assert verdict("10 determinism", same, "rmse.csv and trials.csv byte-identical across reruns")


def _dump(cfg, path):
    import json
    path.write_text(json.dumps(cfg.to_dict()))
    return str(path)
