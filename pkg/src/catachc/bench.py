"""Benchmark harness: manifest parsing, task running, report rendering.

A manifest is a sequence of line-oriented `key: value` blocks separated by
blank lines. The first block may carry run-wide settings (`solver:`,
`timeout:`, `modes:`); every other block is one task (`task:`, `file:`,
`expected:`, optional `timeout:`). `#` starts a comment line. See
docs/manifest.md for the full format.

Each task is transformed once, emitted per mode (`src` is the
untransformed encoding, catamorphisms included), and every requested
solver runs on every emitted script. The report is a TSV plus an aligned
text table whose columns follow the src / w&wo / w / wo layout, with
proved-sat and proved-unsat totals per column.
"""
from __future__ import annotations

import concurrent.futures
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import backend, frontend, ir, transform
from .ir import CataChcError


class ManifestError(CataChcError):
    pass


MODES = ("src", "wwo", "w", "wo")  # report column order
_MODE_LABEL = {"src": "src", "wwo": "w&wo", "w": "w", "wo": "wo"}
_EXPECTED = ("sat", "unsat", "unknown")


@dataclass(frozen=True)
class BenchTask:
    name: str
    file: str
    expected: str
    timeout: Optional[float] = None


@dataclass(frozen=True)
class Manifest:
    solvers: tuple[tuple[str, str], ...]  # (label, command template)
    timeout: float
    modes: tuple[str, ...]
    tasks: tuple[BenchTask, ...]


def _blocks(text: str) -> list[dict[str, list[str]]]:
    blocks: list[dict[str, list[str]]] = []
    current: dict[str, list[str]] = {}
    for raw in text.splitlines() + [""]:
        line = raw.strip()
        if line.startswith("#"):
            continue
        if not line:
            if current:
                blocks.append(current)
                current = {}
            continue
        if ":" not in line:
            raise ManifestError(f"manifest line without ':': {line!r}")
        key, _, value = line.partition(":")
        current.setdefault(key.strip(), []).append(value.strip())
    return blocks


def _single(block: dict[str, list[str]], key: str,
            where: str) -> Optional[str]:
    vals = block.get(key, [])
    if len(vals) > 1:
        raise ManifestError(f"duplicate '{key}:' in {where}")
    return vals[0] if vals else None


def parse_manifest(text: str, base_dir: str = ".") -> Manifest:
    blocks = _blocks(text)
    solvers: list[tuple[str, str]] = []
    timeout = 60.0
    modes: tuple[str, ...] = MODES
    tasks: list[BenchTask] = []
    names: set[str] = set()

    for block in blocks:
        if "task" not in block:
            for spec in block.get("solver", []):
                label, eq, command = spec.partition("=")
                if eq and " " not in label.strip():
                    solvers.append((label.strip(), command.strip()))
                else:
                    solvers.append((os.path.basename(spec.split()[0]), spec))
            t = _single(block, "timeout", "the settings block")
            if t is not None:
                timeout = float(t)
                if timeout <= 0:
                    raise ManifestError("timeout must be positive")
            m = _single(block, "modes", "the settings block")
            if m is not None:
                chosen = tuple(m.replace(",", " ").split())
                bad = [x for x in chosen if x not in MODES]
                if bad:
                    raise ManifestError(f"unknown mode(s): {', '.join(bad)}")
                modes = tuple(x for x in MODES if x in chosen)
            extra = set(block) - {"solver", "timeout", "modes"}
            if extra:
                raise ManifestError(
                    f"unknown settings key(s): {', '.join(sorted(extra))}")
            continue

        name = _single(block, "task", "a task block")
        where = f"task {name!r}"
        file = _single(block, "file", where)
        expected = _single(block, "expected", where)
        if not file:
            raise ManifestError(f"{where}: missing 'file:'")
        if expected not in _EXPECTED:
            raise ManifestError(
                f"{where}: expected must be one of {', '.join(_EXPECTED)}")
        if name in names:
            raise ManifestError(f"duplicate task name {name!r}")
        names.add(name)
        t = _single(block, "timeout", where)
        extra = set(block) - {"task", "file", "expected", "timeout"}
        if extra:
            raise ManifestError(
                f"{where}: unknown key(s): {', '.join(sorted(extra))}")
        tasks.append(BenchTask(name, os.path.join(base_dir, file), expected,
                               float(t) if t is not None else None))

    if not tasks:
        raise ManifestError("manifest declares no tasks")
    return Manifest(tuple(solvers), timeout, modes, tuple(tasks))


# ---------------------------------------------------------------------------
# Running

@dataclass(frozen=True)
class RunRow:
    solver: str
    task: str
    mode: str
    verdict: str  # raw solver verdict (or error/unknown)
    classified: str  # after the wo-unsat downgrade
    expected: str
    wall: float
    transform_time: float
    detail: str = ""


@dataclass
class BenchReport:
    modes: tuple[str, ...]
    solvers: tuple[str, ...]
    rows: list[RunRow] = field(default_factory=list)

    def row(self, solver: str, task: str, mode: str) -> RunRow:
        for r in self.rows:
            if (r.solver, r.task, r.mode) == (solver, task, mode):
                return r
        raise KeyError((solver, task, mode))

    def totals(self, solver: str) -> dict[str, tuple[int, int]]:
        out = {}
        for mode in self.modes:
            sat = sum(1 for r in self.rows
                      if r.solver == solver and r.mode == mode
                      and r.verdict == "sat")
            unsat = sum(1 for r in self.rows
                        if r.solver == solver and r.mode == mode
                        and r.verdict == "unsat")
            out[mode] = (sat, unsat)
        return out

    def agreement(self, solver: str) -> dict[str, int]:
        return {mode: sum(1 for r in self.rows
                          if r.solver == solver and r.mode == mode
                          and r.verdict == r.expected)
                for mode in self.modes}

    def check_consistency(self) -> None:
        # totals must equal the sum of matching rows, column by column
        for solver in self.solvers:
            for mode, (sat, unsat) in self.totals(solver).items():
                rows = [r for r in self.rows
                        if r.solver == solver and r.mode == mode]
                assert sat == len([r for r in rows if r.verdict == "sat"])
                assert unsat == len([r for r in rows
                                     if r.verdict == "unsat"])

    def to_tsv(self) -> str:
        header = ("solver\ttask\tmode\tverdict\tclassified\texpected\t"
                  "wall_s\ttransform_s\tdetail")
        lines = [header]
        for r in self.rows:
            detail = r.detail.replace("\t", " ").replace("\n", " ")
            lines.append(f"{r.solver}\t{r.task}\t{r.mode}\t{r.verdict}\t"
                         f"{r.classified}\t{r.expected}\t{r.wall:.2f}\t"
                         f"{r.transform_time:.3f}\t{detail}")
        return "\n".join(lines) + "\n"

    def render_text(self) -> str:
        self.check_consistency()
        out: list[str] = []
        tasks = sorted({r.task for r in self.rows})
        unreliable = False
        for solver in self.solvers:
            out.append(f"solver: {solver}")
            headers = (["task", "expected"]
                       + [_MODE_LABEL[m] for m in self.modes]
                       + ["transform_s"])
            table = [headers]
            for task in tasks:
                cells = [task]
                tt = ""
                expected = ""
                for mode in self.modes:
                    try:
                        r = self.row(solver, task, mode)
                    except KeyError:
                        cells.append("-")
                        continue
                    expected = r.expected
                    tt = f"{r.transform_time:.3f}"
                    v = r.verdict
                    if r.classified != r.verdict:
                        v += "*"
                        unreliable = True
                    cells.append(v)
                cells.insert(1, expected)
                cells.append(tt)
                table.append(cells)
            totals = self.totals(solver)
            agree = self.agreement(solver)
            table.append(["proved sat", ""]
                         + [str(totals[m][0]) for m in self.modes] + [""])
            table.append(["proved unsat", ""]
                         + [str(totals[m][1]) for m in self.modes] + [""])
            table.append(["agree expected", ""]
                         + [str(agree[m]) for m in self.modes] + [""])
            widths = [max(len(row[i]) for row in table)
                      for i in range(len(headers))]
            for i, row in enumerate(table):
                out.append("  ".join(c.ljust(w)
                                     for c, w in zip(row, widths)).rstrip())
                if i == 0 or i == len(table) - 4:
                    out.append("  ".join("-" * w for w in widths))
            out.append("")
        if unreliable:
            out.append("* unsat on the erased system is unreliable "
                       "(overapproximation)")
        return "\n".join(out).rstrip() + "\n"


def _emit_task(task: BenchTask, modes: tuple[str, ...],
               out_dir: str) -> tuple[dict[str, str], float]:
    """Transform one task and write one script per mode; returns
    mode -> script path and the transform time."""
    with open(task.file, encoding="utf-8") as fh:
        text = fh.read()
    program = frontend.load_program(text, task.file)
    paths: dict[str, str] = {}
    table = backend.SymbolTable()
    # src must be emitted before transform() extends the program with
    # coverage clauses
    if "src" in modes:
        script = backend.emit_smtlib(program, table=table)
        paths["src"] = os.path.join(out_dir, f"{task.name}.src.smt2")
        with open(paths["src"], "w", encoding="utf-8") as fh:
            fh.write(script.text)
    transform_time = 0.0
    rest = [m for m in modes if m != "src"]
    if rest:
        result = transform.transform(program)
        transform_time = sum(result.timings.values())
        for mode in rest:
            prog = getattr(result, f"t_{mode}")
            script = backend.emit_smtlib(prog, table=table)
            paths[mode] = os.path.join(out_dir, f"{task.name}.{mode}.smt2")
            with open(paths[mode], "w", encoding="utf-8") as fh:
                fh.write(script.text)
    return paths, transform_time


def run_bench(manifest: Manifest, jobs: int = 1,
              work_dir: Optional[str] = None,
              progress: Optional[Callable[[str], None]] = None
              ) -> BenchReport:
    notify = progress or (lambda line: None)
    solvers = manifest.solvers or (("none", ""),)
    report = BenchReport(manifest.modes, tuple(s for s, _ in solvers))
    own_tmp = None
    if work_dir is None:
        own_tmp = tempfile.TemporaryDirectory(prefix="catachc-bench-")
        work_dir = own_tmp.name
    try:
        prepared: dict[str, tuple[dict[str, str], float]] = {}
        failures: dict[str, str] = {}
        for task in manifest.tasks:
            task_dir = os.path.join(work_dir, task.name)
            os.makedirs(task_dir, exist_ok=True)
            try:
                prepared[task.name] = _emit_task(task, manifest.modes,
                                                 task_dir)
            except (CataChcError, OSError) as e:
                failures[task.name] = str(e)
                notify(f"{task.name}: transform failed: {e}")

        jobs_list = []
        for task in manifest.tasks:
            for mode in manifest.modes:
                for label, command in solvers:
                    jobs_list.append((task, mode, label, command))

        def run_one(item) -> RunRow:
            task, mode, label, command = item
            if task.name in failures:
                return RunRow(label, task.name, mode, "error", "error",
                              task.expected, 0.0, 0.0,
                              failures[task.name])
            paths, ttime = prepared[task.name]
            if not command:
                return RunRow(label, task.name, mode, "error", "error",
                              task.expected, 0.0, ttime,
                              "no solver configured")
            cfg = backend.SolverConfig(
                command, task.timeout if task.timeout is not None
                else manifest.timeout)
            result = backend.run_solver(paths[mode], cfg)
            classified = backend.classify_outcome(mode, result)
            detail = "" if result.decisive else result.output[:200]
            return RunRow(label, task.name, mode, result.verdict,
                          classified, task.expected, result.wall_time,
                          ttime, detail)

        if jobs <= 1:
            results = [run_one(item) for item in jobs_list]
            for row in results:
                notify(f"{row.solver} {row.task} {row.mode}: "
                       f"{row.classified} ({row.wall:.1f}s)")
        else:
            results = []
            with concurrent.futures.ThreadPoolExecutor(jobs) as pool:
                futures = {pool.submit(run_one, item): item
                           for item in jobs_list}
                for fut in concurrent.futures.as_completed(futures):
                    row = fut.result()
                    results.append(row)
                    notify(f"{row.solver} {row.task} {row.mode}: "
                           f"{row.classified} ({row.wall:.1f}s)")
        mode_index = {m: i for i, m in enumerate(manifest.modes)}
        results.sort(key=lambda r: (r.solver, r.task, mode_index[r.mode]))
        report.rows = results
        return report
    finally:
        if own_tmp is not None:
            own_tmp.cleanup()
