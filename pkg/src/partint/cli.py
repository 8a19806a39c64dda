"""Command-line front end.

    partint run <scenario.json> [--out DIR] [--seed N] [--rtol X]
    partint check <scenario.json>
    partint catalog list
    partint catalog run <name> [--out DIR] [--seed N] [--rtol X]

Exit status: 0 when every check meets its expectation, 1 when some check
does not, 2 for usage or validation errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import scenario as sc

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _run_options(p):
    p.add_argument("--out", help="output directory (default: the scenario's 'output' "
                                 "field, else runs/<name>)")
    p.add_argument("--seed", type=int, help="override the sample-plan seed")
    p.add_argument("--rtol", type=_positive, help="override the integrator rtol")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="partint", description="Verify particular integrals of "
                     "Hamiltonian, contact and time-dependent systems from scenario files.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("scenario", type=Path)
    _run_options(p)
    p = sub.add_parser("check", help="validate a scenario file without running it")
    p.add_argument("scenario", type=Path)
    cat = sub.add_parser("catalog", help="shipped example scenarios")
    csub = cat.add_subparsers(dest="catalog_command", required=True, parser_class=_Parser)
    csub.add_parser("list", help="list catalog scenarios")
    p = csub.add_parser("run", help="run a catalog scenario")
    p.add_argument("name")
    _run_options(p)
    return parser


def _execute(cfg: sc.ScenarioConfig, args) -> int:
    cfg = cfg.with_overrides(seed=args.seed, rtol=args.rtol)
    out = Path(args.out or cfg.output or Path("runs") / cfg.name)
    report = sc.run_scenario(cfg, out)
    sc.emit(report, out)
    met = sum(c.met for c in report.checks)
    print(f"{cfg.name}: {met}/{len(report.checks)} checks met expectations; "
          f"report in {out / 'report.json'}")
    for line in sc.iter_failures(report):
        print(f"UNMET {line}", file=sys.stderr)
    return report.status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "catalog":
            if args.catalog_command == "list":
                for name in sc.catalog_names():
                    entry = sc.catalog_entry(name)
                    print(f"{name}\t{entry.config.description}")
                return EXIT_OK
            return _execute(sc.catalog_entry(args.name).config, args)
        cfg = sc.load_scenario(args.scenario)
        if args.command == "check":
            print(f"{args.scenario}: valid ({len(sc.plan_tasks(cfg))} checks planned)")
            return EXIT_OK
        return _execute(cfg, args)
    except sc.ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
