#!/usr/bin/env python3
"""Run the shipped desk benchmark and print the report table.

Equivalent to `cata-chc bench benchmarks/desk.manifest` with a couple of
convenience defaults: 4 parallel jobs and a TSV report next to the
manifest. A solver comes from --solver or CATACHC_SOLVER; without one the
table still shows transform times, with error verdicts in every solver
column.
"""
import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from catachc import cli  # noqa: E402

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--manifest",
                    default=os.path.join(ROOT, "benchmarks", "desk.manifest"))
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--solver", default=None,
                    help="solver command template, {file} replaced")
    ap.add_argument("--timeout", type=float, default=None)
    ap.add_argument("--report",
                    default=os.path.join(ROOT, "benchmarks",
                                         "desk.report.tsv"))
    args = ap.parse_args()

    argv = ["bench", args.manifest, "--jobs", str(args.jobs),
            "--report", args.report]
    if args.solver:
        argv += ["--solver", args.solver]
    if args.timeout is not None:
        argv += ["--timeout", str(args.timeout)]
    return cli.main(argv)


if __name__ == "__main__":
    sys.exit(main())
