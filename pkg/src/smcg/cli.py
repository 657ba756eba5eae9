"""Command-line front end.

    smcg run exp1 --runs 10 --seed 7 --out results/
    smcg run --config scenario.cfg --algos smcg,mvdr
    smcg validate --config scenario.cfg
    smcg algos
    smcg flops --m 8 16 32
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from . import harness
from .array import ScenarioError
from .config import Experiment, PRESETS, get_preset, load_config, with_overrides

# flag name -> with_overrides keyword
_OVERRIDES = {
    "m": "m",
    "snr_db": "snr_db",
    "inr_db": "inr_db",
    "alpha": "alpha",
    "beta": "beta",
    "eta": "eta",
    "snapshots": "snapshots",
}


@dataclass
class RunSpec:
    experiment: Experiment
    algorithms: List[str]
    runs: int
    seed: int
    output_dir: Path
    workers: int
    overrides: dict


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smcg", description="SM-CG LCMV beamforming simulator")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a scenario config file")
    run.add_argument("preset", nargs="?", choices=sorted(PRESETS), help="preset name (exp1 or exp2)")
    run.add_argument("--config", type=Path, help="scenario config file (INI); replaces the preset")
    run.add_argument("--runs", type=int, default=100, help="Monte-Carlo trials (default: 100)")
    run.add_argument("--seed", type=int, default=0, help="base seed; trial t uses seed+t (default: 0)")
    run.add_argument("--algos", type=_csv_list, default=list(harness.ALGORITHMS),
                     help="comma-separated algorithm ids (default: all; see `smcg algos`)")
    run.add_argument("--out", type=Path, default=Path("results"), help="output directory (default: results)")
    run.add_argument("--workers", type=int, default=1, help="parallel worker processes (default: 1)")
    run.add_argument("--m", type=int, help="number of sensors (default: preset value)")
    run.add_argument("--snr-db", type=float, help="desired-user SNR in dB (default: preset value)")
    run.add_argument("--inr-db", type=float, help="per-interferer INR in dB (default: preset value)")
    run.add_argument("--alpha", type=float, help="bound tuning coefficient, > 1 (default: preset value)")
    run.add_argument("--beta", type=float, help="bound forgetting factor in [0, 1] (default: preset value)")
    run.add_argument("--eta", type=float, help="CG step parameter in [0, 0.5] (default: preset value)")
    run.add_argument("--snapshots", type=int, help="snapshots per trial (default: preset value)")

    val = sub.add_parser("validate", help="check a scenario config file without running it")
    val.add_argument("--config", type=Path, required=True, help="scenario config file (INI)")

    sub.add_parser("algos", help="list algorithm identifiers")

    fl = sub.add_parser("flops", help="measured complex operations per update versus array size")
    fl.add_argument("--m", type=int, nargs="+", default=[8, 16, 32], help="array sizes (default: 8 16 32)")
    fl.add_argument("--snapshots", type=int, default=400, help="snapshots per measurement (default: 400)")
    return ap


def resolve_run(args) -> RunSpec:
    """Turn parsed flags into a validated RunSpec; raises before any work."""
    if args.config is not None and args.preset is not None:
        raise ScenarioError("give either a preset or --config, not both")
    if args.config is not None:
        exp = load_config(args.config)
    elif args.preset is not None:
        exp = get_preset(args.preset)
    else:
        raise ScenarioError("a preset (exp1, exp2) or --config is required")
    overrides = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k) is not None}
    try:
        exp = with_overrides(exp, **{_OVERRIDES[k]: v for k, v in overrides.items()})
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    exp.validate()
    if args.runs < 1:
        raise ScenarioError("--runs must be >= 1")
    if args.workers < 1:
        raise ScenarioError("--workers must be >= 1")
    try:
        algorithms = harness.check_algorithms(args.algos)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    return RunSpec(exp, algorithms, args.runs, args.seed, args.out, args.workers, overrides)


def _cmd_run(args) -> int:
    spec = resolve_run(args)
    summaries = harness.run_monte_carlo(spec.experiment, spec.runs, spec.seed, spec.algorithms, spec.workers)
    paths = harness.write_outputs(spec.output_dir, spec.experiment, summaries, spec.runs, spec.seed,
                                  spec.overrides)
    for name, s in summaries.items():
        print(f"{name:6s} tau={s.tau:7.4f}  steady-state SINR={s.steady_state_sinr_db:7.2f} dB")
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_validate(args) -> int:
    exp = load_config(args.config)
    print(f"{args.config}: ok (q={exp.n_sources}, m={exp.m}, snapshots={exp.snapshots})")
    return 0


def _cmd_algos(args) -> int:
    for name, desc in harness.ALGORITHMS.items():
        print(f"{name:6s} {desc}")
    return 0


def _cmd_flops(args) -> int:
    table = harness.complexity_scaling(tuple(args.m), snapshots=args.snapshots)
    print(json.dumps({str(m): row for m, row in table.items()}, indent=2))
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "validate": _cmd_validate, "algos": _cmd_algos, "flops": _cmd_flops}
    try:
        return handler[args.command](args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
