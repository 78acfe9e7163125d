"""Command line front door: `cata-chc transform | verify | bench`."""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
from typing import Optional

from . import backend, bench, cata, frontend, transform
from .ir import CataChcError

_EMIT_MODES = ("w", "wo", "wwo")


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _fail(exc: CataChcError) -> int:
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return 1


def _load(path: str):
    program = frontend.load_program(_read(path), path)
    for w in program.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return program


def cmd_transform(args: argparse.Namespace) -> int:
    try:
        program = _load(args.file)
        result = transform.transform(program)
    except CataChcError as e:
        return _fail(e)
    for w in result.warnings:
        if w not in result.source.warnings:
            print(f"warning: {w}", file=sys.stderr)
    if args.readable_names:
        result = transform.apply_readable_names(result)

    total = sum(result.timings.values())
    counts = ", ".join(
        f"t_{m} {len(p.clauses)}+{len(p.queries)}"
        for m, p in (("w", result.t_w), ("wo", result.t_wo),
                     ("wwo", result.t_wwo)))
    print(f"{os.path.basename(args.file)}: "
          f"{len(result.definitions)} definitions; {counts} clauses; "
          f"{total * 1000:.1f} ms")

    if args.emit_specs:
        print(cata.specs_to_text(result.specs))

    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write("\n".join(result.trace) + "\n")

    if args.emit:
        modes = _EMIT_MODES if args.emit == "all" else (args.emit,)
        out_dir = args.out or "."
        os.makedirs(out_dir, exist_ok=True)
        stem = os.path.splitext(os.path.basename(args.file))[0]
        table = backend.SymbolTable()
        for mode in modes:
            prog = getattr(result, f"t_{mode}")
            script = backend.emit_smtlib(prog, table=table)
            path = os.path.join(out_dir, f"{stem}.{mode}.smt2")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(script.text)
            print(f"wrote {path}")
        sidecar = backend.sidecar_text(table.rows())
        names_path = os.path.join(out_dir, f"{stem}.names.tsv")
        with open(names_path, "w", encoding="utf-8") as fh:
            fh.write(sidecar)
        print(f"wrote {names_path}")

    if args.oracle_check:
        ok, lines = transform.bounded_equisat_report(result)
        for line in lines:
            print(f"oracle: {line}")
        if not ok:
            print("oracle: bounded check FAILED", file=sys.stderr)
            return 1
    return 0


_VERIFY_EXIT = {"sat": 0, "unsat": 1, "unknown": 2, "timeout": 2, "error": 3}


def cmd_verify(args: argparse.Namespace) -> int:
    command = args.solver or os.environ.get(backend.SOLVER_ENV_VAR, "")
    if not command.strip():
        print("error: no solver configured (pass --solver or set "
              f"{backend.SOLVER_ENV_VAR})", file=sys.stderr)
        return 3
    try:
        cfg = backend.SolverConfig(command, args.timeout)
        program = _load(args.file)
        if args.mode == "src":
            prog = program
        else:
            result = transform.transform(program)
            prog = getattr(result, f"t_{args.mode}")
        script = backend.emit_smtlib(prog)
    except CataChcError as e:
        _fail(e)
        return 4
    with tempfile.TemporaryDirectory(prefix="catachc-verify-") as tmp:
        stem = os.path.splitext(os.path.basename(args.file))[0]
        path = os.path.join(tmp, f"{stem}.{args.mode}.smt2")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(script.text)
        result = backend.run_solver(path, cfg)
    classified = backend.classify_outcome(args.mode, result)
    gloss = {"sat": "property verified",
             "unsat": "property refuted"}.get(result.verdict, "")
    if args.mode == "wo" and result.verdict == "unsat":
        gloss = "cannot conclude: erased system only overapproximates"
    line = f"{args.mode}: {classified} ({result.wall_time:.1f}s)"
    if gloss:
        line += f" - {gloss}"
    print(line)
    if result.verdict in ("unknown", "error") and result.output:
        print(result.output.strip()[:400], file=sys.stderr)
    return _VERIFY_EXIT[result.verdict]


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        manifest = bench.parse_manifest(_read(args.manifest),
                                        os.path.dirname(args.manifest) or ".")
    except (CataChcError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if args.solver:
        solvers = ((os.path.basename(args.solver.split()[0]), args.solver),)
        manifest = bench.Manifest(solvers, manifest.timeout, manifest.modes,
                                  manifest.tasks)
    elif not manifest.solvers:
        env = os.environ.get(backend.SOLVER_ENV_VAR, "").strip()
        if env:
            solvers = ((os.path.basename(env.split()[0]), env),)
            manifest = bench.Manifest(solvers, manifest.timeout,
                                      manifest.modes, manifest.tasks)
    if args.timeout is not None:
        manifest = bench.Manifest(manifest.solvers, args.timeout,
                                  manifest.modes, manifest.tasks)

    def progress(line: str) -> None:
        print(line, file=sys.stderr, flush=True)

    report = bench.run_bench(manifest, jobs=args.jobs, progress=progress)
    print(report.render_text())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.to_tsv())
        print(f"wrote {args.report}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cata-chc",
        description="Compile catamorphism abstractions out of constrained "
                    "Horn clauses over algebraic data types.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_tr = sub.add_parser(
        "transform",
        help="run the fold/unfold transformation and emit clause sets")
    p_tr.add_argument("file", metavar="FILE")
    p_tr.add_argument("--emit", choices=_EMIT_MODES + ("all",),
                      help="write the selected clause set(s) as SMT-LIB")
    p_tr.add_argument("--emit-specs", action="store_true",
                      help="print the generated abstraction specs")
    p_tr.add_argument("--trace", metavar="FILE",
                      help="write the rule-application trace")
    p_tr.add_argument("--out", metavar="DIR",
                      help="output directory for --emit (default .)")
    p_tr.add_argument("--readable-names", action="store_true",
                      help="name new predicates after the program "
                           "predicate they abstract")
    p_tr.add_argument("--oracle-check", action="store_true",
                      help="cross-check the output against the bounded "
                           "least-model oracle")
    p_tr.set_defaults(func=cmd_transform)

    p_ve = sub.add_parser(
        "verify", help="transform and run an external CHC solver")
    p_ve.add_argument("file", metavar="FILE")
    p_ve.add_argument("--mode", choices=("src",) + _EMIT_MODES,
                      default="wwo")
    p_ve.add_argument("--solver", metavar="CMD",
                      help="solver command template; {file} is replaced by "
                           f"the script path (default ${backend.SOLVER_ENV_VAR})")
    p_ve.add_argument("--timeout", type=float, default=60.0, metavar="SEC")
    p_ve.set_defaults(func=cmd_verify)

    p_be = sub.add_parser("bench", help="run a benchmark manifest")
    p_be.add_argument("manifest", metavar="MANIFEST")
    p_be.add_argument("--jobs", type=int, default=1, metavar="N")
    p_be.add_argument("--report", metavar="PATH",
                      help="write the machine-readable TSV report here")
    p_be.add_argument("--solver", metavar="CMD",
                      help="override the manifest's solver configuration")
    p_be.add_argument("--timeout", type=float, default=None, metavar="SEC")
    p_be.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
