"""Monte Carlo RMSE-versus-power experiments.

Every random quantity is keyed by ``(seed, trial, ...)`` through
``numpy.random.SeedSequence`` so results do not depend on execution order
or on how many workers ran the trials.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .frontend import dbm_to_mw, draw_noise, noise_variance_dbm
from .geometry import (ArrayGeometry, CarrierConfig, UePosition, channel_vector,
                       fresnel_bounds)
from .hardware import WaveguideConfig
from .combiner import PhaseCodebook
from .localizer import (DmaReceiver, ProbeSet, PseudoSpectrum, build_grid,
                        estimate_by_energy, estimate_position, pseudo_spectrum)

log = logging.getLogger(__name__)

PROPOSED = "proposed-1bit"
BASELINE = "baseline-fullres"
METHODS = (PROPOSED, BASELINE)

_UE_STREAM = 0
_NOISE_STREAM = 1


@dataclass
class CarrierSection:
    frequency_hz: float = 140e9
    bandwidth_hz: float = 150e3
    kappa_abs: float = 0.0075
    boresight_exponent: float = 2.0


@dataclass
class ArraySection:
    n_rf: int = 2
    n_e: int = 64
    d_rf_wavelengths: float = 0.5
    d_e_wavelengths: float = 0.2


@dataclass
class WaveguideSection:
    alpha: float = 0.0
    beta: float | None = None    # None: free-space wavenumber 2 pi / lambda


@dataclass
class GridSection:
    d_r: float = 5.0
    d_theta_deg: float = 10.0
    d_phi_deg: float = 0.0
    counts: list[int] = field(default_factory=lambda: [25, 5, 1])


@dataclass
class UeSection:
    r_range: list[float] = field(default_factory=lambda: [1.0, 20.0])
    theta_range_deg: list[float] = field(default_factory=lambda: [0.0, 90.0])
    phi_deg: float = 90.0
    # optional sub-ranges for the UE draw; the ranges above bound the grid
    draw_r_range: list[float] | None = None
    draw_theta_range_deg: list[float] | None = None
    prior_offset_r: float = 0.0
    prior_offset_theta_deg: float = 0.0


@dataclass
class ExperimentConfig:
    carrier: CarrierSection = field(default_factory=CarrierSection)
    array: ArraySection = field(default_factory=ArraySection)
    waveguide: WaveguideSection = field(default_factory=WaveguideSection)
    grid: GridSection = field(default_factory=GridSection)
    ue: UeSection = field(default_factory=UeSection)
    codebook_bits: int = 10
    power_dbm: list[float] = field(default_factory=lambda: [-10.0, 0.0, 10.0, 20.0])
    trials: int = 100
    seed: int = 0
    sigma2_dbm: float | None = None   # None: thermal noise over the bandwidth

    def __post_init__(self):
        for name, cls in _SECTIONS.items():
            value = getattr(self, name)
            if isinstance(value, dict):
                setattr(self, name, _from_dict(cls, value))
        self.validate()

    def validate(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if not self.power_dbm:
            raise ValueError("power sweep is empty")
        if len(self.grid.counts) != 3 or min(self.grid.counts) < 1:
            raise ValueError("grid counts must be three positive integers")
        if self.carrier.frequency_hz <= 0 or self.carrier.bandwidth_hz <= 0:
            raise ValueError("frequency and bandwidth must be positive")
        lo, hi = self.ue.r_range
        if not 0 < lo <= hi:
            raise ValueError(f"bad radial range {self.ue.r_range}")
        tlo, thi = self.ue.theta_range_deg
        if not 0 <= tlo <= thi <= 90:
            raise ValueError(f"bad elevation range {self.ue.theta_range_deg}")
        if self.ue.draw_r_range is not None:
            dlo, dhi = self.ue.draw_r_range
            if not lo <= dlo <= dhi <= hi:
                raise ValueError("draw_r_range must sit inside r_range")
        if self.ue.draw_theta_range_deg is not None:
            dlo, dhi = self.ue.draw_theta_range_deg
            if not tlo <= dlo <= dhi <= thi:
                raise ValueError("draw_theta_range_deg must sit inside theta_range_deg")

    @property
    def wavelength(self) -> float:
        return self.carrier_config().wavelength

    @property
    def sigma2(self) -> float:
        dbm = (noise_variance_dbm(self.carrier.bandwidth_hz)
               if self.sigma2_dbm is None else self.sigma2_dbm)
        return float(dbm_to_mw(dbm))

    def carrier_config(self) -> CarrierConfig:
        c = self.carrier
        return CarrierConfig.from_frequency(c.frequency_hz, kappa_abs=c.kappa_abs,
                                            boresight_exponent=c.boresight_exponent)

    def geometry(self) -> ArrayGeometry:
        lam = self.wavelength
        a = self.array
        return ArrayGeometry(a.n_rf, a.n_e, a.d_rf_wavelengths * lam, a.d_e_wavelengths * lam)

    def receiver(self) -> DmaReceiver:
        geom, carrier = self.geometry(), self.carrier_config()
        wg = WaveguideConfig.default(geom, carrier, alpha=self.waveguide.alpha,
                                     beta=self.waveguide.beta)
        return DmaReceiver(geom, carrier, wg, PhaseCodebook(self.codebook_bits))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if "config" in data and "rmse_metric" in data:   # a run manifest
            data = data["config"]
        return _from_dict(cls, data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with top-level fields or ``section__field`` keys changed."""
        data = self.to_dict()
        for key, value in changes.items():
            if "__" in key:
                section, name = key.split("__", 1)
                data[section][name] = value
            else:
                data[key] = value
        return ExperimentConfig.from_dict(data)


_SECTIONS = {"carrier": CarrierSection, "array": ArraySection,
             "waveguide": WaveguideSection, "grid": GridSection, "ue": UeSection}


def _from_dict(cls, data: dict):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


def grid_counts(tti: int) -> tuple[int, int, int]:
    """Split a TTI budget into (r, theta, 1) counts: the most square
    factorisation, with the larger factor on the radial axis."""
    if tti < 1:
        raise ValueError("TTI budget must be positive")
    n_theta = max(d for d in range(1, int(np.sqrt(tti)) + 1) if tti % d == 0)
    return tti // n_theta, n_theta, 1


def cartesian_error(a: UePosition, b: UePosition) -> float:
    return float(np.linalg.norm(a.to_cartesian() - b.to_cartesian()))


def _stream(config: ExperimentConfig, trial: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([config.seed, trial, *key]))


def _power_key(power_dbm: float) -> int:
    # millidBm, shifted to stay nonnegative for SeedSequence
    return int(round(power_dbm * 1000)) + (1 << 31)


def draw_ue(config: ExperimentConfig, trial: int) -> UePosition:
    """UE draw for a trial; shared by every power level and method."""
    rng = _stream(config, trial, _UE_STREAM)
    ue = config.ue
    near, _ = fresnel_bounds(config.geometry(), config.carrier_config())
    lo, hi = ue.r_range if ue.draw_r_range is None else ue.draw_r_range
    lo = max(lo, near)
    if lo > hi:
        raise ValueError(f"radial range [{lo}, {hi}] lies inside the reactive "
                         f"near field (< {near:.3g} m)")
    tlo, thi = np.deg2rad(ue.theta_range_deg if ue.draw_theta_range_deg is None
                          else ue.draw_theta_range_deg)
    return UePosition(float(rng.uniform(lo, hi)), float(rng.uniform(tlo, thi)),
                      float(np.deg2rad(config.ue.phi_deg)))


def prior_position(config: ExperimentConfig, ue: UePosition) -> UePosition:
    """Grid centre: the true position plus the configured offset, kept valid."""
    lo, hi = config.ue.r_range
    r = float(np.clip(ue.r + config.ue.prior_offset_r, lo, hi))
    theta = float(np.clip(ue.theta + np.deg2rad(config.ue.prior_offset_theta_deg), 0, np.pi / 2))
    return UePosition(r, theta, ue.phi)


@dataclass(frozen=True)
class TrialContext:
    trial: int
    ue: UePosition
    h_true: np.ndarray
    probes: ProbeSet


def prepare_trial(config: ExperimentConfig, trial: int,
                  receiver: DmaReceiver | None = None) -> TrialContext:
    receiver = config.receiver() if receiver is None else receiver
    ue = draw_ue(config, trial)
    g = config.grid
    grid = build_grid(prior_position(config, ue), g.d_r, np.deg2rad(g.d_theta_deg),
                      tuple(g.counts), d_phi=np.deg2rad(g.d_phi_deg),
                      r_range=tuple(config.ue.r_range),
                      theta_range=tuple(np.deg2rad(config.ue.theta_range_deg)))
    h_true = channel_vector(receiver.geom, ue, receiver.carrier)
    return TrialContext(trial, ue, h_true, receiver.design(grid))


def probe_trial(config: ExperimentConfig, ctx: TrialContext, power_dbm: float,
                receiver: DmaReceiver) -> PseudoSpectrum:
    """One pilot slot per candidate; the noise is keyed by (trial, power)."""
    rng = _stream(config, ctx.trial, _NOISE_STREAM, _power_key(power_dbm))
    noise = draw_noise(rng, (ctx.probes.grid.size, receiver.geom.n), config.sigma2)
    symbol = complex(np.sqrt(dbm_to_mw(power_dbm)))
    return pseudo_spectrum(ctx.probes, ctx.h_true, receiver, symbol, config.sigma2, noise)


@dataclass(frozen=True)
class TrialResult:
    trial: int
    power_dbm: float
    method: str
    true_position: UePosition
    estimate: UePosition
    squared_error: float
    degenerate: bool = False
    tie_count: int = 1


def _results_for(config, ctx, power_dbm, receiver, methods) -> list[TrialResult]:
    spectrum = probe_trial(config, ctx, power_dbm, receiver)
    out = []
    for method in methods:
        if method == PROPOSED:
            est = estimate_position(spectrum, ctx.probes.grid)
        elif method == BASELINE:
            est = estimate_by_energy(spectrum, ctx.probes.grid)
        else:
            raise ValueError(f"unknown method {method!r}")
        out.append(TrialResult(ctx.trial, power_dbm, method, ctx.ue, est.position,
                               cartesian_error(ctx.ue, est.position) ** 2,
                               est.degenerate, est.tie_count))
    return out


def run_trial(config: ExperimentConfig, trial: int, power_dbm: float,
              method: str = PROPOSED) -> TrialResult:
    receiver = config.receiver()
    ctx = prepare_trial(config, trial, receiver)
    return _results_for(config, ctx, power_dbm, receiver, (method,))[0]


def baseline_fullres_trial(config: ExperimentConfig, trial: int, power_dbm: float) -> TrialResult:
    """Same UE, grid, combiners and noise as the proposed method, scored by
    the unquantized energy ``||y||^2``."""
    return run_trial(config, trial, power_dbm, BASELINE)


def _run_one(args) -> list[TrialResult]:
    config, trial, methods = args
    receiver = config.receiver()
    ctx = prepare_trial(config, trial, receiver)
    out = []
    for p in config.power_dbm:
        out.extend(_results_for(config, ctx, p, receiver, methods))
    return out


def run_trials(config: ExperimentConfig, methods=METHODS, trials=None,
               workers: int = 1) -> list[TrialResult]:
    """All (trial, power, method) results, ordered by trial then power."""
    trials = range(config.trials) if trials is None else trials
    jobs = [(config, t, tuple(methods)) for t in trials]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_run_one, jobs))
    else:
        chunks = [_run_one(j) for j in jobs]
    return [r for chunk in chunks for r in chunk]


@dataclass(frozen=True)
class RmseCurve:
    method: str
    power_dbm: tuple[float, ...]
    rmse: tuple[float, ...]
    n_trials: tuple[int, ...]
    stderr: tuple[float, ...]


def rmse_stats(squared_errors) -> tuple[float, float]:
    """RMSE and its delta-method standard error."""
    e2 = np.asarray(squared_errors, dtype=float)
    mse = float(np.mean(e2))
    rmse = float(np.sqrt(mse))
    if e2.size < 2:
        return rmse, float("nan")
    se_mse = float(np.std(e2, ddof=1) / np.sqrt(e2.size))
    return rmse, (se_mse / (2 * rmse) if rmse > 0 else 0.0)


def aggregate(results: list[TrialResult]) -> list[RmseCurve]:
    curves = []
    methods = sorted({r.method for r in results},
                     key=lambda m: (METHODS.index(m) if m in METHODS else len(METHODS), m))
    for method in methods:
        rows = [r for r in results if r.method == method]
        powers = sorted({r.power_dbm for r in rows})
        stats = []
        for p in powers:
            e2 = [r.squared_error for r in sorted(rows, key=lambda r: r.trial)
                  if r.power_dbm == p]
            stats.append((*rmse_stats(e2), len(e2)))
        curves.append(RmseCurve(method, tuple(powers), tuple(s[0] for s in stats),
                                tuple(s[2] for s in stats), tuple(s[1] for s in stats)))
    return curves


def rmse_sweep(config: ExperimentConfig, methods=METHODS, workers: int = 1
               ) -> tuple[list[RmseCurve], list[TrialResult]]:
    results = run_trials(config, methods, workers=workers)
    return aggregate(results), results


def _fmt(x: float) -> str:
    return repr(float(x))


def write_rmse_csv(curves: list[RmseCurve], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "P_max_dbm", "rmse_m", "n_trials", "stderr_m"])
        for c in curves:
            for p, rmse, n, se in zip(c.power_dbm, c.rmse, c.n_trials, c.stderr):
                w.writerow([c.method, _fmt(p), _fmt(rmse), n, _fmt(se)])


def write_trials_csv(results: list[TrialResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "P_max_dbm", "method", "r_m", "theta_rad", "phi_rad",
                    "r_hat_m", "theta_hat_rad", "phi_hat_rad", "squared_error_m2",
                    "degenerate", "tie_count"])
        for r in results:
            t, e = r.true_position, r.estimate
            w.writerow([r.trial, _fmt(r.power_dbm), r.method, _fmt(t.r), _fmt(t.theta),
                        _fmt(t.phi), _fmt(e.r), _fmt(e.theta), _fmt(e.phi),
                        _fmt(r.squared_error), int(r.degenerate), r.tie_count])


def manifest(config: ExperimentConfig) -> dict:
    geom, carrier = config.geometry(), config.carrier_config()
    near, far = fresnel_bounds(geom, carrier)
    return {
        "package": "dmaloc",
        "version": __version__,
        "config": config.to_dict(),
        "derived": {"wavelength_m": carrier.wavelength, "sigma2_mw": config.sigma2,
                    "fresnel_near_m": near, "fresnel_far_m": far,
                    "tti": int(np.prod(config.grid.counts))},
        "rmse_metric": "root mean squared 3-D Cartesian position error, metres",
        "seeding": "SeedSequence([seed, trial, 0]) draws the UE; "
                   "SeedSequence([seed, trial, 1, round(1000*P_max_dbm) + 2**31]) draws the noise",
    }


def emit_results(curves: list[RmseCurve], out_dir, config: ExperimentConfig | None = None,
                 results: list[TrialResult] | None = None) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"rmse": out / "rmse.csv"}
    write_rmse_csv(curves, paths["rmse"])
    if results is not None:
        paths["trials"] = out / "trials.csv"
        write_trials_csv(results, paths["trials"])
    if config is not None:
        paths["manifest"] = out / "manifest.json"
        with open(paths["manifest"], "w") as fh:
            json.dump(manifest(config), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return paths


def read_rmse_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{"method": row["method"], "P_max_dbm": float(row["P_max_dbm"]),
                 "rmse_m": float(row["rmse_m"]), "n_trials": int(row["n_trials"]),
                 "stderr_m": float(row["stderr_m"])} for row in csv.DictReader(fh)]
