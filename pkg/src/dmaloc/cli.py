"""Command line entry point: ``dmaloc {sweep,spectrum,validate}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .harness import ExperimentConfig
from .localizer import estimate_by_energy, estimate_position, write_spectrum
from .validate import run_checks

log = logging.getLogger("dmaloc")


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    return cfg.replace(**changes) if changes else cfg


def _methods(name: str):
    return {"proposed": (harness.PROPOSED,), "baseline": (harness.BASELINE,),
            "both": harness.METHODS}[name]


def cmd_sweep(args) -> int:
    cfg = _config(args)
    curves, results = harness.rmse_sweep(cfg, _methods(args.method), workers=args.workers)
    paths = harness.emit_results(curves, args.out, cfg, results)
    for c in curves:
        for p, rmse, se in zip(c.power_dbm, c.rmse, c.stderr):
            print(f"{c.method:18s} P_max={p:7.2f} dBm  RMSE={rmse:.4f} m  (se {se:.4f})")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def cmd_spectrum(args) -> int:
    cfg = _config(args)
    receiver = cfg.receiver()
    ctx = harness.prepare_trial(cfg, args.trial, receiver)
    power = cfg.power_dbm[0] if args.power is None else args.power
    spectrum = harness.probe_trial(cfg, ctx, power, receiver)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_spectrum(out / "spectrum.csv", ctx.probes.grid, spectrum)
    for method, est in ((harness.PROPOSED, estimate_position(spectrum, ctx.probes.grid)),
                        (harness.BASELINE, estimate_by_energy(spectrum, ctx.probes.grid))):
        if method not in _methods(args.method):
            continue
        err = harness.cartesian_error(ctx.ue, est.position)
        print(f"{method}: candidate {est.index} (r={est.r_hat:.3f} m, "
              f"theta={est.theta_hat:.4f} rad), error {err:.4f} m")
    print(f"true UE: r={ctx.ue.r:.3f} m, theta={ctx.ue.theta:.4f} rad; "
          f"wrote {out / 'spectrum.csv'}")
    return 0


def cmd_validate(args) -> int:
    cfg = _config(args)
    failed = 0
    for name, (ok, detail) in run_checks(cfg, seed=cfg.seed).items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += not ok
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dmaloc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON config or run manifest")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--out", type=Path, default=Path("results"))
        p.add_argument("--method", choices=("proposed", "baseline", "both"), default="both")

    p = sub.add_parser("sweep", help="RMSE versus transmit power")
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectrum", help="dump one pseudo-spectrum")
    common(p)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--power", type=float, help="P_max in dBm (default: first in sweep)")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("validate", help="run the invariant checks")
    common(p)
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"dmaloc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
