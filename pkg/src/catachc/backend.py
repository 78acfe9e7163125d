"""SMT-LIB HORN emission and external solver orchestration.

The emitter serializes a clause set into one self-contained script:
`(set-logic HORN)`, one `declare-datatypes` block with every instantiated
ADT sort (monomorphized, `list(int)` becoming `list_int`), one
`declare-fun` per predicate with Bool codomain, one `assert` per clause
(queries conclude `false`), then `(check-sat)`. Output is deterministic:
the same program yields a byte-identical script.

Solver runs go through a command template (`{file}` is replaced by the
script path) with a wall-clock timeout enforced by process kill. The
first `sat`/`unsat`/`unknown` token of the output decides the verdict.
"""
from __future__ import annotations

import os
import re
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass, field
from typing import Optional

from . import ir
from .ir import (AdtSort, Atom, BOOL, CataChcError, Clause, INT, Program,
                 Var, is_adt)


class BackendError(CataChcError):
    pass


# ---------------------------------------------------------------------------
# Symbol mangling

# SMT-LIB simple symbols; source names are already close, so mangling only
# has to fix leading digits, odd characters, and reserved-word collisions.
_SYMBOL_RE = re.compile(r"[A-Za-z~!@$%^&*_+=<>.?/-][0-9A-Za-z~!@$%^&*_+=<>.?/-]*\Z")

_RESERVED = frozenset("""
    Array Bool Int Real String as assert check-sat declare-const
    declare-datatypes declare-fun declare-sort define-fun define-sort
    distinct div exists false forall is ite let match mod not par select
    store true xor and or abs error sat unsat unknown
""".split())


class SymbolTable:
    """Injective original-name -> SMT symbol map with a dump for the
    `.names.tsv` sidecar."""

    def __init__(self) -> None:
        self._by_key: dict[tuple[str, str], str] = {}
        self._taken: set[str] = set(_RESERVED)

    def sym(self, kind: str, original: str) -> str:
        key = (kind, original)
        if key in self._by_key:
            return self._by_key[key]
        base = re.sub(r"[^0-9A-Za-z~!@$%^&*_+=<>.?/-]", "_", original)
        if not base or base[0].isdigit():
            base = "s_" + base
        cand, k = base, 2
        while cand in self._taken or not _SYMBOL_RE.match(cand):
            cand = f"{base}_{k}"
            k += 1
        self._taken.add(cand)
        self._by_key[key] = cand
        return cand

    def rows(self) -> tuple[tuple[str, str, str], ...]:
        return tuple(sorted((kind, orig, sym)
                            for (kind, orig), sym in self._by_key.items()))


# ---------------------------------------------------------------------------
# Emission

def sidecar_text(rows: tuple[tuple[str, str, str], ...]) -> str:
    lines = ["kind\toriginal\tsymbol"]
    lines += [f"{k}\t{o}\t{s}" for k, o, s in rows]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SmtScript:
    text: str
    names: tuple[tuple[str, str, str], ...]  # (kind, original, symbol)

    def sidecar(self) -> str:
        return sidecar_text(self.names)


def _used_adt_sorts(program: Program, clauses: list[Clause],
                    preds: list[str]) -> list[AdtSort]:
    seen: dict[AdtSort, None] = {}

    def visit(sort: ir.Sort) -> None:
        if not is_adt(sort) or sort in seen:
            return
        seen[sort] = None
        for ctor in program.ctors_of(sort):
            for f in ctor.fields:
                visit(f)

    for name in preds:
        for s in program.preds[name].sorts if name in program.preds else ():
            visit(s)
        if name in program.catas:
            for s in program.catas[name].sorts:
                visit(s)
    for cl in clauses:
        for v in ir.clause_vars(cl):
            visit(v.sort)
    return sorted(seen, key=ir.mangle_sort)


def _pred_sorts(program: Program, name: str) -> tuple[ir.Sort, ...]:
    if name in program.preds:
        return program.preds[name].sorts
    if name in program.catas:
        return program.catas[name].sorts
    raise BackendError(f"no declaration for predicate {name}")


def emit_smtlib(program: Program,
                clauses: Optional[list[Clause]] = None,
                table: Optional[SymbolTable] = None) -> SmtScript:
    """Serialize `clauses` (default: the program's clauses and queries).

    Passing one `table` across several calls keeps the mangling consistent
    so the scripts can share a single names sidecar."""
    if clauses is None:
        clauses = program.clauses + program.queries
    if table is None:
        table = SymbolTable()

    pred_names: dict[str, None] = {}
    for cl in clauses:
        if cl.head is not None:
            pred_names[cl.head.pred] = None
        for a in cl.body:
            pred_names[a.pred] = None
    preds = sorted(pred_names)

    adt_sorts = _used_adt_sorts(program, clauses, preds)

    def sort_ref(sort: ir.Sort) -> str:
        if sort == INT:
            return "Int"
        if sort == BOOL:
            return "Bool"
        if is_adt(sort):
            return table.sym("sort", ir.mangle_sort(sort))
        raise BackendError(f"cannot emit sort {ir.sort_str(sort)}")

    lines = ["(set-logic HORN)"]

    if adt_sorts:
        heads = " ".join(f"({sort_ref(s)} 0)" for s in adt_sorts)
        bodies = []
        for s in adt_sorts:
            ctors = []
            for ctor in program.ctors_of(s):
                csym = table.sym("ctor", ctor.name)
                if not ctor.fields:
                    ctors.append(f"({csym})")
                else:
                    sels = " ".join(
                        f"({csym}_{i} {sort_ref(f)})"
                        for i, f in enumerate(ctor.fields))
                    ctors.append(f"({csym} {sels})")
            bodies.append("  (" + " ".join(ctors) + ")")
        lines.append(f"(declare-datatypes ({heads}) (")
        lines.extend(bodies)
        lines.append("))")

    for name in preds:
        args = " ".join(sort_ref(s) for s in _pred_sorts(program, name))
        lines.append(f"(declare-fun {table.sym('pred', name)} ({args}) Bool)")

    def term(t: ir.Term) -> str:
        if isinstance(t, Var):
            return table.sym("var", t.name)
        if isinstance(t, ir.IntConst):
            return str(t.value) if t.value >= 0 else f"(- {-t.value})"
        if isinstance(t, ir.BoolConst):
            return "true" if t.value else "false"
        if isinstance(t, ir.Ctor):
            csym = table.sym("ctor", t.name)
            if not t.args:
                return csym
            return f"({csym} {' '.join(term(a) for a in t.args)})"
        if isinstance(t, ir.LinExpr):
            parts = []
            for v, c in t.coeffs:
                if c == 1:
                    parts.append(term(v))
                elif c == -1:
                    parts.append(f"(- {term(v)})")
                else:
                    parts.append(f"(* {term(ir.IntConst(c))} {term(v)})")
            if t.const != 0 or not parts:
                parts.append(term(ir.IntConst(t.const)))
            return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"
        if isinstance(t, ir.TermIte):
            return f"(ite {constraint(t.cond)} {term(t.then)} {term(t.other)})"
        raise BackendError(f"cannot emit term {t!r}")

    _REL = {"=": "=", "<": "<", "=<": "<=", ">=": ">=", ">": ">"}

    def constraint(c: ir.Constraint) -> str:
        if isinstance(c, ir.Rel):
            return f"({_REL[c.op]} {term(c.lhs)} {term(c.rhs)})"
        if isinstance(c, ir.BVar):
            return term(c.var)
        if isinstance(c, ir.CBool):
            return "true" if c.value else "false"
        if isinstance(c, ir.Not):
            return f"(not {constraint(c.arg)})"
        if isinstance(c, ir.And):
            return f"(and {constraint(c.lhs)} {constraint(c.rhs)})"
        if isinstance(c, ir.Or):
            return f"(or {constraint(c.lhs)} {constraint(c.rhs)})"
        if isinstance(c, ir.Implies):
            return f"(=> {constraint(c.lhs)} {constraint(c.rhs)})"
        if isinstance(c, ir.CEq):
            return f"(= {constraint(c.lhs)} {constraint(c.rhs)})"
        if isinstance(c, ir.CIte):
            return (f"(ite {constraint(c.cond)} {constraint(c.then)} "
                    f"{constraint(c.other)})")
        raise BackendError(f"cannot emit constraint {c!r}")

    def atom(a: Atom) -> str:
        psym = table.sym("pred", a.pred)
        if not a.args:
            return psym
        return f"({psym} {' '.join(term(t) for t in a.args)})"

    for cl in clauses:
        concl = "false" if cl.head is None else atom(cl.head)
        premises = [constraint(c) for c in cl.constraint]
        premises += [atom(a) for a in cl.body]
        if not premises:
            body = concl
        elif len(premises) == 1:
            body = f"(=> {premises[0]} {concl})"
        else:
            body = f"(=> (and {' '.join(premises)}) {concl})"
        vs = ir.clause_vars(cl)
        if vs:
            binders = " ".join(f"({table.sym('var', v.name)} "
                               f"{sort_ref(v.sort)})" for v in vs)
            lines.append(f"(assert (forall ({binders}) {body}))")
        else:
            lines.append(f"(assert {body})")

    lines.append("(check-sat)")
    return SmtScript("\n".join(lines) + "\n", table.rows())


# ---------------------------------------------------------------------------
# Solver driver

SOLVER_ENV_VAR = "CATACHC_SOLVER"

_DEFAULT_VOCAB = (("sat", "sat"), ("unsat", "unsat"), ("unknown", "unknown"))


@dataclass(frozen=True)
class SolverConfig:
    command: str  # template; {file} is replaced by the script path
    timeout: float = 60.0
    vocabulary: tuple[tuple[str, str], ...] = _DEFAULT_VOCAB

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise BackendError("solver timeout must be positive")
        if not self.command.strip():
            raise BackendError("empty solver command")

    def argv(self, file: str) -> list[str]:
        parts = shlex.split(self.command)
        out = [p.replace("{file}", file) for p in parts]
        if all("{file}" not in p for p in parts):
            out.append(file)
        return out


def default_solver_config(timeout: Optional[float] = None
                          ) -> Optional[SolverConfig]:
    cmd = os.environ.get(SOLVER_ENV_VAR, "").strip()
    if not cmd:
        return None
    return SolverConfig(cmd, timeout if timeout is not None else 60.0)


@dataclass(frozen=True)
class SolverResult:
    verdict: str  # sat | unsat | unknown | timeout | error
    wall_time: float
    output: str  # raw excerpt

    @property
    def decisive(self) -> bool:
        return self.verdict in ("sat", "unsat")


_EXCERPT = 2000


def run_solver(file: str, cfg: SolverConfig) -> SolverResult:
    argv = cfg.argv(file)
    exe = argv[0]
    if shutil.which(exe) is None and not os.path.exists(exe):
        return SolverResult("error", 0.0, f"solver command not found: {exe}")
    start = time.monotonic()
    try:
        proc = subprocess.run(argv, capture_output=True, text=True,
                              timeout=cfg.timeout)
    except subprocess.TimeoutExpired as e:
        wall = time.monotonic() - start
        out = (e.stdout or "") if isinstance(e.stdout, str) else ""
        return SolverResult("timeout", max(wall, cfg.timeout),
                            out[:_EXCERPT])
    except OSError as e:
        return SolverResult("error", time.monotonic() - start, str(e))
    wall = time.monotonic() - start
    text = (proc.stdout or "") + ("\n" + proc.stderr if proc.stderr else "")
    verdict = _parse_answer(text, dict(cfg.vocabulary))
    if verdict is None:
        return SolverResult("unknown", wall, text[:_EXCERPT])
    if wall >= cfg.timeout:
        return SolverResult("timeout", wall, text[:_EXCERPT])
    return SolverResult(verdict, wall, text[:_EXCERPT])


def _parse_answer(text: str, vocab: dict[str, str]) -> Optional[str]:
    for token in text.split():
        if token in vocab:
            return vocab[token]
    return None


def classify_outcome(mode: str, result: SolverResult) -> str:
    """Report-facing verdict; `unsat` from the erased system is not
    trustworthy (the erasure only overapproximates)."""
    if mode == "wo" and result.verdict == "unsat":
        return "unsat-unreliable (overapproximation)"
    return result.verdict
