"""Command-line entry point: ``irs-swipt [--config spec.json] [overrides]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import ALGORITHMS, AXES, ConfigError, ExperimentSpec, run_experiment, write_outputs


def _parse_sweep(text: str):
    if "=" not in text:
        raise ConfigError("--sweep expects AXIS=v1,v2,...")
    axis, _, vals = text.partition("=")
    axis = axis.strip()
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(AXES)}")
    try:
        values = [float(v) for v in vals.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sweep value list {vals!r}") from exc
    if not values:
        raise ConfigError("--sweep needs at least one value")
    return axis, values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="irs-swipt",
        description="Monte Carlo transmit-power sweeps for IRS-aided SWIPT beamforming.")
    p.add_argument("--config", metavar="PATH", help="JSON experiment description")
    p.add_argument("--seed", type=int, help="master seed (non-negative)")
    p.add_argument("--trials", type=int, help="random drops per sweep point")
    p.add_argument("--algo", metavar="LIST",
                   help=f"comma-separated subset of {','.join(ALGORITHMS)}")
    p.add_argument("--sweep", metavar="AXIS=v1,v2,...",
                   help=f"sweep axis ({', '.join(AXES)}) and its values")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p.add_argument("--no-timing", action="store_true",
                   help="write wall_ms as 0 so reruns produce identical CSV files")
    p.add_argument("-q", "--quiet", action="store_true", help="no progress output")
    return p


def make_spec(args) -> ExperimentSpec:
    base = ExperimentSpec.from_json(args.config).to_dict() if args.config else {}
    if args.seed is not None:
        base["seed"] = args.seed
    if args.trials is not None:
        base["trials"] = args.trials
    if args.algo is not None:
        base["algorithms"] = [a.strip() for a in args.algo.split(",") if a.strip()]
    if args.sweep is not None:
        axis, values = _parse_sweep(args.sweep)
        base["sweep"] = {"axis": axis, "values": values}
    if args.out is not None:
        base["out_dir"] = args.out
    if args.workers is not None:
        base["workers"] = args.workers
    if args.no_timing:
        base["timing"] = False
    return ExperimentSpec.from_dict(base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        spec = make_spec(args)
    except ConfigError as exc:
        print(f"irs-swipt: configuration error: {exc}", file=sys.stderr)
        return 2

    def progress(done, total):
        print(f"\r{done}/{total} drops", end="" if done < total else "\n", file=sys.stderr)

    result = run_experiment(spec, None if args.quiet else progress)
    try:
        paths = write_outputs(result)
    except OSError as exc:
        print(f"irs-swipt: {exc}", file=sys.stderr)
        return 3
    if not args.quiet:
        for a in result.aggregates:
            print(f"{spec.sweep_axis}={a.sweep_value:<6g} {a.algorithm:<10s} "
                  f"ok {a.ok:>3d}/{a.trials:<3d} mean {a.mean_dbw:8.3f} dBW "
                  f"(se {a.se_dbw:.3f})")
        for name, path in paths.items():
            print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
