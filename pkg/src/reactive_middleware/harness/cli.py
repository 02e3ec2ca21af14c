"""rmharness: run scenario scripts, generate seeded ones, run campaigns."""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

from ..errors import MiddlewareError
from .generate import generate_script
from .minimize import minimize_steps, still_fails
from .runner import run_scenario


def _resolve_source(arg: str) -> str:
    """A filesystem path, or the name of a packaged fixture."""
    if os.path.exists(arg):
        return arg
    name = arg if arg.endswith(".json") else f"{arg}.json"
    ref = resources.files("reactive_middleware.harness") / "fixtures" / name
    if ref.is_file():
        return ref.read_text(encoding="utf-8")
    return arg  # let load_script report the problem


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def cmd_run(args) -> int:
    report = run_scenario(_resolve_source(args.script), stress=args.stress,
                          seed=args.seed)
    print("\n".join(report.summary_lines()))
    if args.json:
        _write_json(args.json, report.to_dict())
    return 0 if report.passed else 1


def cmd_generate(args) -> int:
    script = generate_script(args.seed, max_steps=args.steps)
    text = json.dumps(script, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote {script['name']} ({len(script['steps'])} steps) to {args.out}")
    else:
        print(text)
    return 0


def cmd_campaign(args) -> int:
    results = []
    failed = 0
    for seed in range(args.first_seed, args.first_seed + args.count):
        max_steps = min(args.max_steps, 60 + (seed % 5) * 20)
        script = generate_script(seed, max_steps=max_steps)
        report = run_scenario(script, stress=args.stress)
        entry = {"seed": seed, "name": script["name"], "passed": report.passed,
                 "steps": report.steps_executed, "log_head": report.log_head}
        if report.passed:
            print(f"PASS {script['name']} steps={report.steps_executed} "
                  f"log={report.log_head}")
        else:
            failed += 1
            entry["failures"] = report.failures
            entry["expectations"] = [e for e in report.expectations if not e["passed"]]
            if args.minimize:
                minimal = minimize_steps(script)
                entry["minimized_steps"] = minimal["steps"]
                print(f"FAIL {script['name']} minimized to "
                      f"{len(minimal['steps'])} steps")
            else:
                print(f"FAIL {script['name']}")
            for line in report.failures[:5]:
                print(f"  !! {line}")
        results.append(entry)
    print(f"{args.count - failed}/{args.count} scenarios passed")
    if args.json:
        _write_json(args.json, {"campaign": results, "failed": failed})
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmharness",
                                     description="scenario harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one script")
    run_p.add_argument("script", help="path to a script, or a fixture name")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the script's seed")
    run_p.add_argument("--stress", action="store_true",
                       help="follow the steps with concurrent commits, "
                            "then re-verify")
    run_p.add_argument("--json", help="also write the report as JSON here")
    run_p.set_defaults(func=cmd_run)

    gen_p = sub.add_parser("generate", help="emit a seeded script")
    gen_p.add_argument("--seed", type=int, required=True)
    gen_p.add_argument("--steps", type=int, default=90)
    gen_p.add_argument("--out", help="write to a file instead of stdout")
    gen_p.set_defaults(func=cmd_generate)

    camp_p = sub.add_parser("campaign", help="generate and run many scripts")
    camp_p.add_argument("--count", type=int, default=100)
    camp_p.add_argument("--first-seed", type=int, default=1)
    camp_p.add_argument("--max-steps", type=int, default=500)
    camp_p.add_argument("--stress", action="store_true")
    camp_p.add_argument("--no-minimize", dest="minimize", action="store_false")
    camp_p.add_argument("--json", help="write the campaign report as JSON here")
    camp_p.set_defaults(func=cmd_campaign)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MiddlewareError as err:
        print(json.dumps({"error": err.to_envelope()}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
