"""Command line entry point: ``purodyn run | validate | scenarios``."""

import argparse
import json
import sys

from . import scenarios
from .errors import ConfigInvalid


def _load(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_run(args):
    try:
        cfg = _load(args.config)
    except (OSError, json.JSONDecodeError) as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return scenarios.EXIT_CONFIG
    try:
        summary = scenarios.run(cfg, out_dir=args.out, seed=args.seed)
    except ConfigInvalid as e:
        for d in e.diagnostics:
            print(d, file=sys.stderr)
        return scenarios.EXIT_CONFIG
    for m in summary.messages:
        print(m, file=sys.stderr)
    print(json.dumps({"scenario": summary.scenario, "exit_code": summary.exit_code,
                      "objective_values": summary.to_dict()["objective_values"],
                      "wall_clock_seconds": round(summary.wall_clock, 3)}, indent=2, sort_keys=True))
    return summary.exit_code


def cmd_validate(args):
    try:
        cfg = _load(args.config)
    except (OSError, json.JSONDecodeError) as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return scenarios.EXIT_CONFIG
    diags = scenarios.validate(cfg)
    for d in diags:
        print(d)
    if not diags:
        print("ok")
    return scenarios.EXIT_CONFIG if diags else scenarios.EXIT_OK


def cmd_scenarios(args):
    if args.name:
        print(scenarios.json_text(scenarios.default_config(args.name)), end="")
        return 0
    for name in scenarios.SCENARIOS:
        print(name)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="purodyn", description="Purified open-system dynamics scenarios.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output directory (default: config output_dir or runs/<scenario>)")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="list every problem in a config")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)
    s = sub.add_parser("scenarios", help="list built-in scenarios or print one default config")
    s.add_argument("name", nargs="?", choices=scenarios.SCENARIOS)
    s.set_defaults(func=cmd_scenarios)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
