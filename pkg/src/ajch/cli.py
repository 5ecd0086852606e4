"""Command-line entry point.

    ajch simulate --config fig3a.cfg --out fig3a.csv [--seed N]
    ajch eigen --config eigen.cfg [--out table.csv]
    ajch map-check
    ajch leakage --nbar 0.04 --ions 2 --heating 5 --duration 840e-6

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 contract violation.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from importlib import resources
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .dynamics import IntegrationError, leakage_estimate
from .experiments import run_dynamics, run_eigen, run_leakage, run_map_check, write_manifest
from .model import ConvergenceError

log = logging.getLogger("ajch")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CONTRACT = 0, 2, 3, 4


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (``fig3a.cfg``, ...)."""
    return Path(str(resources.files("ajch") / "configs" / name))


def _load(path: str) -> ExperimentConfig:
    p = Path(path)
    if not p.exists() and (bundled := bundled_config(path)).exists():
        p = bundled
    return load_config(p)


def _write_rows(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def cmd_simulate(args) -> int:
    config = _load(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
        config.validate()
    out = Path(args.out)
    command = args.command_line
    if config.experiment in ("hopping", "blockade"):
        traj = run_dynamics(config)
        traj.write_csv(out)
    elif config.experiment == "eigen":
        _write_rows(out, run_eigen(config))
    elif config.experiment == "map_check":
        report = run_map_check(max(config.fock_cutoff, 3))
        rows = [{"mode": m, "sequence": s, "input": f"{i[0]},{i[1]}", "bright": p}
                for (m, s, i), p in report.bright.items()]
        _write_rows(out, rows)
        write_manifest(out, config, command)
        return EXIT_OK if report.ok else EXIT_CONTRACT
    else:
        _write_rows(out, [{"leakage": run_leakage(config)}])
    write_manifest(out, config, command)
    log.info("wrote %s", out)
    return EXIT_OK


def cmd_eigen(args) -> int:
    config = _load(args.config)
    rows = run_eigen(config)
    if args.out:
        _write_rows(args.out, rows)
    else:
        print(f"{'sector':>6} {'index':>5} {'energy_hz':>16} {'analytic_hz':>16}")
        for r in rows:
            print(f"{r['sector']:>6} {r['index']:>5} {r['energy_hz']:>16.6f} {r['analytic_hz']:>16.6f}")
    return EXIT_OK


def cmd_map_check(args) -> int:
    report = run_map_check(args.fock_cutoff)
    print("\n".join(report.lines()))
    return EXIT_OK if report.ok else EXIT_CONTRACT


def cmd_leakage(args) -> int:
    value = leakage_estimate(args.nbar, args.ions, args.heating, args.duration, method=args.method)
    print(f"{value:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ajch", description="Anti-JCH trapped-ion simulations")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a configured experiment and write CSV + manifest")
    p.add_argument("--config", required=True, help="config path or name of a bundled config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eigen", help="sector-resolved spectrum of the anti-JCH Hamiltonian")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("map-check", help="truth table of the mapping sequences")
    p.add_argument("--fock-cutoff", type=int, default=3)
    p.set_defaults(func=cmd_map_check)

    p = sub.add_parser("leakage", help="population estimate above two polaritons")
    p.add_argument("--nbar", type=float, required=True)
    p.add_argument("--ions", type=int, required=True)
    p.add_argument("--heating", type=float, required=True, help="quanta/s")
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--method", choices=("bound", "thermal"), default="bound")
    p.set_defaults(func=cmd_leakage)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    args.command_line = " ".join(["ajch", *argv])
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, ConvergenceError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # model/sequence validation raised after config parsing
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
