"""Command-line entry point: ``travelmech <suite> --scenario PATH`` or ``travelmech generate``."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .errors import MechanismError
from .harness import EXIT_INPUT, run_suite, write_trajectory_csv
from .scenario import dumps_scenario, generate_random_scenario, load_profile, load_scenario
from .valuation import ORIENTATIONS

SUITE_COMMANDS = ("solve", "mechanism-eval", "find-ne", "verify", "full")


def _parser():
    p = argparse.ArgumentParser(prog="travelmech", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUITE_COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} suite on a scenario file")
        sp.add_argument("--scenario", required=True, type=Path)
        sp.add_argument("--seed", type=int, help="override solver.seed (random starts, profiles)")
        sp.add_argument("--out", type=Path, help="write the JSON report here")
        sp.add_argument("--epsilon", type=float, help="NE slack for deviation search")
        sp.add_argument("--orientation", choices=ORIENTATIONS,
                        help="assert the scenario has this orientation")
        if name == "mechanism-eval":
            sp.add_argument("--profile", type=Path, help="message-profile JSON file")
    g = sub.add_parser("generate", help="write a seeded random scenario")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path)
    g.add_argument("--orientation", choices=ORIENTATIONS, default="paper_literal")
    g.add_argument("--edges", type=int, default=2)
    g.add_argument("--travelers", type=int, default=2)
    g.add_argument("--max-route-len", type=int, default=2)
    g.add_argument("--shared-only", action="store_true")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "generate":
            sc = generate_random_scenario(args.seed, {
                "edges": args.edges, "travelers": args.travelers,
                "max_route_len": args.max_route_len, "orientation": args.orientation,
                "shared_only": args.shared_only})
            text = dumps_scenario(sc)
            if args.out:
                args.out.write_text(text)
            else:
                sys.stdout.write(text)
            return 0

        scenario = load_scenario(args.scenario)
        if args.orientation and args.orientation != scenario.orientation:
            raise MechanismError(
                f"scenario orientation is {scenario.orientation}, not {args.orientation}")
        if args.seed is not None:
            scenario = dataclasses.replace(
                scenario, solver=dataclasses.replace(scenario.solver, seed=args.seed))
        profile = nu = None
        if getattr(args, "profile", None):
            profile, nu = load_profile(args.profile)
    except (MechanismError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    report = run_suite(scenario, args.command, profile=profile, nu=nu, epsilon=args.epsilon)
    sys.stdout.write(report.to_table())
    if args.out:
        args.out.write_text(report.to_json())
        if report.trajectory:
            write_trajectory_csv(report.trajectory,
                                 args.out.with_name(args.out.stem + "_trajectory.csv"))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
