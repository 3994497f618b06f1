"""Command-line entry points.

Verbs: simulate, lagrangian, fluxcheck, characteristic, converge.
Exit codes: 0 all checks pass, 1 a numeric check failed, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import CharSpec, ConfigError, load_scenario
from .report import ReportBundle, convergence_study, run_scenario

EXIT_PASS, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="scenario TOML file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario seed")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for independent checks")
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering, emit data only")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lagfront")
    sub = ap.add_subparsers(dest="verb", required=True)

    for verb, doc in [
        ("simulate", "evolve the front solution and export it"),
        ("lagrangian", "build curve ensembles and run measure checks"),
        ("fluxcheck", "evaluate the flux decomposition across the surfaces"),
        ("characteristic", "construct and verify barrier characteristics"),
        ("converge", "re-run across resolutions and fit error rates"),
    ]:
        p = sub.add_parser(verb, help=doc)
        _common(p)
        if verb == "characteristic":
            p.add_argument("--x0", type=float, action="append", default=None,
                           help="start position (repeatable)")
            p.add_argument("--levels", type=int, default=None,
                           help="dyadic refinement levels")
        if verb == "converge":
            p.add_argument("--grids", default="64,128,256",
                           help="comma-separated nx=nv levels")
    return ap


def _report(bundle: ReportBundle) -> int:
    for c in bundle.checks:
        print(c.line())
    print(f"{'ALL CHECKS PASS' if bundle.passed else 'CHECKS FAILED'} "
          f"-> {bundle.out_dir}")
    return EXIT_PASS if bundle.passed else EXIT_NUMERIC


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.verb == "characteristic" and (args.x0 or args.levels):
        cs = scenario.characteristics or CharSpec(x0=())
        scenario.characteristics = CharSpec(
            x0=tuple(args.x0) if args.x0 else cs.x0,
            levels=args.levels if args.levels else cs.levels,
            t0=cs.t0)

    if args.verb == "converge":
        try:
            grids = [int(g) for g in args.grids.split(",")]
        except ValueError:
            print(f"config error: bad --grids {args.grids!r}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            table = convergence_study(scenario, args.out, grids=grids,
                                      seed=args.seed,
                                      figures=not args.no_figures)
        except ConfigError as e:
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        print(json.dumps(table["rates"], indent=2, sort_keys=True))
        return EXIT_PASS

    # the verbs share one orchestrator; they differ in which sections run
    sections = {
        "simulate": ("solution",),
        "lagrangian": ("solution", "ensemble"),
        "fluxcheck": ("solution", "ensemble", "fluxform"),
        "characteristic": ("solution", "ensemble", "characteristics"),
    }[args.verb]
    bundle = run_scenario(scenario, args.out, seed=args.seed,
                          threads=args.threads, figures=not args.no_figures,
                          sections=sections)
    return _report(bundle)


if __name__ == "__main__":
    sys.exit(main())
