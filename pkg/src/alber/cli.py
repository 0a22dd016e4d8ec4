"""Command-line entry points.

Subcommands:
  alber evolve <config.json>      single evolution run with diagnostics
  alber eoc                       convergence-order study (time or space ladder)
  alber stability <config.json>   Penrose/Nyquist harmonic classification
  alber montecarlo <config.json>  randomized amplification-factor campaign
  alber soliton-validate          exact-solution long run with invariant drifts

--threads sets the Monte Carlo worker count; the ALBER_THREADS environment
variable overrides it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import AlberError
from .experiments import (
    MonteCarloConfig,
    RunConfig,
    resolve_workers,
    run_experiment,
    run_montecarlo,
)

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alber", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evolve", help="run one evolution from a JSON config")
    ev.add_argument("config", type=Path)
    ev.add_argument("--output-dir", type=Path, default=None)
    ev.add_argument("--snapshot-stride", type=int, default=None)

    eoc = sub.add_parser("eoc", help="convergence-order study")
    eoc.add_argument("--mode", choices=("time", "space"), default="time")
    eoc.add_argument("--init", choices=("naive", "advanced"), default="advanced")
    eoc.add_argument("--output-dir", type=Path, default=None)

    st = sub.add_parser("stability", help="harmonic stability scan from a JSON config")
    st.add_argument("config", type=Path)
    st.add_argument("--output-dir", type=Path, default=None)

    mc = sub.add_parser("montecarlo", help="randomized amplification campaign")
    mc.add_argument("config", type=Path)
    mc.add_argument("--output-dir", type=Path, default=None)
    mc.add_argument("--threads", type=int, default=None)

    sub.add_parser("soliton-validate", help="exact-solution validation run")
    return parser


def _cmd_evolve(args) -> int:
    config = RunConfig.load(args.config)
    if args.output_dir is not None:
        config.output_dir = str(args.output_dir)
    if args.snapshot_stride is not None:
        config.snapshot_stride = args.snapshot_stride
    summary = run_experiment(config, quiet=False)
    print(f"evolve: t_final={summary['t_final']:.6g} IAF={summary['IAF']:.6g}")
    return 0


def _cmd_eoc(args) -> int:
    from .validation import run_eoc_space, run_eoc_time

    if args.mode == "time":
        rows = run_eoc_time(init_mode=args.init)
    else:
        rows = run_eoc_space(init_mode=args.init)
    label = "tau" if args.mode == "time" else "h"
    print(f"{label:>12} {'E_u':>12} {'eoc_u':>8} {'E_phi':>12} {'eoc_phi':>8}")
    for row in rows:
        x = row.tau if args.mode == "time" else row.h
        eu = f"{row.eoc_u:8.3f}" if row.eoc_u is not None else " " * 8
        ep = f"{row.eoc_phi:8.3f}" if row.eoc_phi is not None else " " * 8
        print(f"{x:12.6g} {row.E_u:12.6g} {eu} {row.E_phi:12.6g} {ep}")
    if args.output_dir is not None:
        args.output_dir.mkdir(parents=True, exist_ok=True)
        payload = [
            {"h": r.h, "tau": r.tau, "E_u": r.E_u, "E_phi": r.E_phi,
             "eoc_u": r.eoc_u, "eoc_phi": r.eoc_phi, "deltas": r.deltas}
            for r in rows
        ]
        with open(args.output_dir / f"eoc_{args.mode}_{args.init}.json", "w") as fh:
            json.dump(payload, fh, indent=2)
    return 0


def _cmd_stability(args) -> int:
    from .grid_spectra import GaussianSpectrumParams
    from .stability_analysis import stability_scan

    with open(args.config) as fh:
        cfg = json.load(fh)
    g = GaussianSpectrumParams(C=cfg["C"], sigma=cfg["sigma"])
    result = stability_scan(
        g.spectrum, cfg["p"], cfg["q"], cfg["L"],
        n_max=cfg.get("n_max", 12), sigma=cfg["sigma"], dP=g.spectrum_derivative,
    )
    verdict = "unstable" if result.unstable_harmonics else "stable"
    print(f"stability: {verdict}; harmonics={result.unstable_harmonics} "
          f"X_max={result.X_max:.4f} bandwidth={result.bandwidth:.4f}")
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if args.output_dir is not None:
        args.output_dir.mkdir(parents=True, exist_ok=True)
        with open(args.output_dir / "stability.json", "w") as fh:
            json.dump({
                "unstable_harmonics": result.unstable_harmonics,
                "windings": result.windings,
                "X_max": result.X_max,
                "bandwidth": result.bandwidth,
                "target": result.target,
                "warnings": result.warnings,
            }, fh, indent=2)
    return 0


def _cmd_montecarlo(args) -> int:
    mc = MonteCarloConfig.load(args.config)
    if args.output_dir is not None:
        mc.output_dir = str(args.output_dir)
    mc.workers = resolve_workers(args.threads if args.threads is not None else mc.workers)
    csv_path = Path(mc.output_dir) / "ensemble.csv"
    rows = run_montecarlo(mc, csv_path=csv_path)
    ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"montecarlo: {ok}/{len(rows)} realizations ok; wrote {csv_path}")
    return 0


def _cmd_soliton(args) -> int:
    from .grid_spectra import grid_for_mesh
    from .validation import SolitonParams, run_soliton

    params = SolitonParams()
    grid = grid_for_mesh(params.L, 0.09)
    run = run_soliton(params, grid, tau=1e-3, T=params.L / params.v)
    print(f"soliton: E_u={run.E_u:.6g} E_phi={run.E_phi:.6g}")
    for key in ("dI0", "dI1", "dI2", "dI3"):
        print(f"  {key}={run.deltas[key]:.3e}")
    return 0


_COMMANDS = {
    "evolve": _cmd_evolve,
    "eoc": _cmd_eoc,
    "stability": _cmd_stability,
    "montecarlo": _cmd_montecarlo,
    "soliton-validate": _cmd_soliton,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except AlberError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
