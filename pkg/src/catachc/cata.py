"""Catamorphism admission and abstraction specs.

A catamorphism is a total functional predicate that folds one ADT argument:
its clauses match one constructor each, recurse only on immediate subterms,
and may call auxiliary catamorphisms in an acyclic layering. The recursive
self-call is optional (a head-of-list extractor needs none), and so are
input arguments.

`check_functionality_bounded` evaluates the catamorphism directly (not
through the clause model) over all inputs from a bounded universe and
reports the first totality or functionality violation with a witness.

`build_abstraction_specs` expands per-sort `cata_abs` templates into one
spec per program predicate: every ADT argument gets the sort's catamorphism
conjunction, instantiations of the same sort share one input tuple, and
`:- spec` overrides replace the generated spec wholesale.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from . import ir, oracle
from .ir import (AdtSort, Atom, CataChcError, CataDecl, Clause, Program, Var,
                 is_adt)


class CataSchemaError(CataChcError):
    pass


@dataclass(frozen=True)
class ValidatedCata:
    name: str
    by_ctor: dict[str, Clause]
    aux: tuple[str, ...]  # other catamorphisms its clauses call


def validate_catamorphism(program: Program, name: str) -> ValidatedCata:
    decl = program.catas.get(name)
    if decl is None:
        raise CataSchemaError(f"{name} is not a declared catamorphism")
    clauses = [c for c in program.clauses
               if c.head is not None and c.head.pred == name]
    ctor_names = {c.name for c in program.ctors_of(decl.adt)}
    by_ctor: dict[str, Clause] = {}
    aux: list[str] = []
    for cl in clauses:
        assert cl.head is not None
        _check_clause_schema(program, decl, cl, ctor_names, by_ctor, aux)
    return ValidatedCata(name, by_ctor, tuple(dict.fromkeys(aux)))


def _check_clause_schema(program: Program, decl: CataDecl, cl: Clause,
                         ctor_names: set[str], by_ctor: dict[str, Clause],
                         aux: list[str]):
    assert cl.head is not None
    where = f"in `{ir.clause_str(cl)}`"
    k = decl.adt_index
    pattern = cl.head.args[k]
    if not isinstance(pattern, ir.Ctor):
        raise CataSchemaError(
            f"{decl.name} must match one constructor per clause {where}")
    if pattern.name in by_ctor:
        raise CataSchemaError(
            f"two {decl.name} clauses match {pattern.name}")
    fields: list[Var] = []
    for f in pattern.args:
        if not isinstance(f, Var):
            raise CataSchemaError(
                f"constructor fields must be fresh variables {where}")
        fields.append(f)
    ins = cl.head.args[:k]
    outs = cl.head.args[k + 1:]
    head_vars = list(ins) + fields + list(outs)
    if not all(isinstance(v, Var) for v in head_vars) \
            or len(set(head_vars)) != len(head_vars):
        raise CataSchemaError(
            f"head variables must be pairwise distinct {where}")
    in_vars = set(ins)
    basic_fields = {f for f in fields if not is_adt(f.sort)}
    adt_fields = {f for f in fields if is_adt(f.sort)}
    seen_outputs: set[Var] = set(head_vars)
    for atom in cl.body:
        sub = program.catas.get(atom.pred)
        if sub is None:
            raise CataSchemaError(
                f"{atom.pred} is not a catamorphism {where}")
        if atom.pred != decl.name:
            aux.append(atom.pred)
        t = atom.args[sub.adt_index]
        if t not in adt_fields:
            raise CataSchemaError(
                f"{atom.pred} must recurse on an immediate subterm, not "
                f"{ir.term_str(t)} {where}")
        for v in atom.args[:sub.adt_index]:
            if v not in in_vars and v not in basic_fields:
                raise CataSchemaError(
                    f"input {ir.term_str(v)} of {atom.pred} must come from "
                    f"the head {where}")
        for v in atom.args[sub.adt_index + 1:]:
            assert isinstance(v, Var)
            if v in seen_outputs:
                raise CataSchemaError(
                    f"result variable {v.name} is not fresh {where}")
            seen_outputs.add(v)
    by_ctor[pattern.name] = cl


def validate_all_catamorphisms(program: Program) -> dict[str, ValidatedCata]:
    """Validate every declared catamorphism and their acyclic layering."""
    out = {name: validate_catamorphism(program, name)
           for name in program.catas}
    # depth-first cycle check over auxiliary calls
    state: dict[str, int] = {}

    def visit(name: str, trail: list[str]):
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            cycle = " -> ".join(trail + [name])
            raise CataSchemaError(
                f"catamorphisms may not call each other cyclically: {cycle}")
        state[name] = 1
        for dep in out[name].aux:
            visit(dep, trail + [name])
        state[name] = 2

    for name in out:
        visit(name, [])
    return out


# ---------------------------------------------------------------------------
# Bounded functionality / totality

@dataclass(frozen=True)
class FunctionalityConfig:
    universe: oracle.BoundedUniverse = field(
        default_factory=lambda: oracle.BoundedUniverse(ints=(0, 1),
                                                       adt_size=3))
    max_cases: int = 100_000


@dataclass(frozen=True)
class FunctionalityReport:
    name: str
    status: str  # "ok" | "not-total" | "not-functional" | "inconclusive"
    inputs: Optional[tuple] = None
    adt_value: Optional[object] = None
    outputs: tuple[tuple, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def __str__(self) -> str:
        if self.ok:
            return f"{self.name}: total and functional on the bounded domain"
        if self.status == "inconclusive":
            return f"{self.name}: bounded check ran out of budget"
        args = ", ".join([oracle.value_str(v) for v in (self.inputs or ())]
                         + [oracle.value_str(self.adt_value)])
        if self.status == "not-total":
            return f"{self.name}({args}) has no result"
        results = "; ".join(
            ", ".join(oracle.value_str(v) for v in o) for o in self.outputs)
        return f"{self.name}({args}) has several results: {results}"


class _Evaluator:
    """Direct recursive evaluation of catamorphisms over ground values."""

    def __init__(self, program: Program, cfg: FunctionalityConfig):
        self.program = program
        self.cfg = cfg
        self.memo: dict[tuple, frozenset] = {}
        self.clause_index: dict[tuple[str, str], list[Clause]] = {}
        for cl in program.clauses:
            if cl.head is None or cl.head.pred not in program.catas:
                continue
            decl = program.catas[cl.head.pred]
            pat = cl.head.args[decl.adt_index]
            if isinstance(pat, ir.Ctor):
                self.clause_index.setdefault(
                    (cl.head.pred, pat.name), []).append(cl)

    def eval(self, name: str, ins: tuple, value: tuple) -> frozenset:
        key = (name, ins, value)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        decl = self.program.catas[name]
        results: set[tuple] = set()
        for cl in self.clause_index.get((name, value[0]), []):
            results.update(self._eval_clause(decl, cl, ins, value))
        out = frozenset(results)
        self.memo[key] = out
        return out

    def _eval_clause(self, decl: CataDecl, cl: Clause, ins: tuple,
                     value: tuple):
        assert cl.head is not None
        k = decl.adt_index
        pattern = cl.head.args[k]
        assert isinstance(pattern, ir.Ctor)
        env: oracle.Env = {}
        for v, x in zip(cl.head.args[:k], ins):
            assert isinstance(v, Var)
            env[v] = x
        for f, x in zip(pattern.args, value[1:]):
            assert isinstance(f, Var)
            env[f] = x
        envs = [env]
        for atom in cl.body:
            sub = self.program.catas[atom.pred]
            new_envs = []
            for e in envs:
                sub_ins = tuple(oracle.eval_term(t, e)
                                for t in atom.args[:sub.adt_index])
                sub_val = oracle.eval_term(atom.args[sub.adt_index], e)
                assert isinstance(sub_val, tuple)
                for outs in sorted(self.eval(atom.pred, sub_ins, sub_val)):
                    e2 = dict(e)
                    for v, x in zip(atom.args[sub.adt_index + 1:], outs):
                        assert isinstance(v, Var)
                        e2[v] = x
                    new_envs.append(e2)
            envs = new_envs
        out_vars = list(cl.head.args[k + 1:])
        for e in envs:
            for sol in oracle.solve_constraints(
                    self.program, list(cl.constraint), e,
                    out_vars, self.cfg.universe):  # type: ignore[arg-type]
                yield tuple(sol[v] for v in out_vars)  # type: ignore[index]


def check_functionality_bounded(
        program: Program, name: str,
        cfg: FunctionalityConfig = FunctionalityConfig()) -> FunctionalityReport:
    """Sweep all bounded inputs; report the first violation found."""
    decl = program.catas[name]
    ev = _Evaluator(program, cfg)
    in_choices = [oracle.enumerate_sort(program, s, cfg.universe)
                  for s in decl.ins]
    adt_values = oracle.enumerate_sort(program, decl.adt, cfg.universe)
    cases = 0
    for ins in itertools.product(*in_choices):
        for value in adt_values:
            cases += 1
            if cases > cfg.max_cases:
                return FunctionalityReport(name, "inconclusive")
            assert isinstance(value, tuple)
            try:
                results = ev.eval(name, ins, value)
            except oracle.OracleResourceError:
                return FunctionalityReport(name, "inconclusive")
            if not results:
                return FunctionalityReport(name, "not-total", ins, value)
            if len(results) > 1:
                return FunctionalityReport(name, "not-functional", ins, value,
                                           tuple(sorted(results))[:2])
    return FunctionalityReport(name, "ok")


def eval_catamorphism(program: Program, name: str, ins: tuple, value: tuple,
                      cfg: FunctionalityConfig = FunctionalityConfig()
                      ) -> frozenset:
    """Result set of one catamorphism application (for cross-checking the
    clause-model oracle against direct evaluation)."""
    return _Evaluator(program, cfg).eval(name, ins, value)


# ---------------------------------------------------------------------------
# Abstraction specs

@dataclass(frozen=True)
class PredSpec:
    """Catamorphism conjunction attached to a program predicate.

    `atoms` range over `params` (one per predicate argument), shared
    `inputs`, and pairwise distinct `outputs`; instantiation maps params to
    an atom's arguments and freshens the rest.
    """

    pred: str
    params: tuple[Var, ...]
    atoms: tuple[Atom, ...]
    inputs: tuple[Var, ...]
    outputs: tuple[Var, ...]


def spec_of(program: Program, pred: str) -> PredSpec:
    """The (override or abstraction-derived) spec of one predicate; empty
    atom tuple when nothing applies."""
    decl = program.preds[pred]
    params = tuple(Var(f"P{i + 1}", s) for i, s in enumerate(decl.sorts))
    override = program.overrides.get(pred)
    if override is not None:
        ren: ir.Subst = dict(zip(override.params, params))
        inputs: list[Var] = []
        outputs: list[Var] = []
        atoms = []
        for a in override.atoms:
            cdecl = program.catas[a.pred]
            atoms.append(ir.apply_atom(ren, a))
            for v in a.args[:cdecl.adt_index]:
                assert isinstance(v, Var)
                if v not in ren and v not in inputs:
                    inputs.append(v)
            outputs.extend(a.args[cdecl.adt_index + 1:])  # type: ignore[arg-type]
        return PredSpec(pred, params, tuple(atoms), tuple(inputs),
                        tuple(outputs))

    atoms = []
    inputs = []
    outputs = []
    shared: dict[AdtSort, ir.Subst] = {}
    counter = itertools.count(1)
    for param in params:
        abstraction = program.abstractions.get(param.sort)  # type: ignore[arg-type]
        if abstraction is None:
            continue
        ren = shared.get(abstraction.sort)
        if ren is None:
            ren = {}
            for v in abstraction.inputs:
                w = Var(f"X{next(counter)}", v.sort)
                ren[v] = w
                inputs.append(w)
            shared[abstraction.sort] = ren
        inst = dict(ren)
        inst[abstraction.adt_var] = param
        for a in abstraction.atoms:
            cdecl = program.catas[a.pred]
            for v in a.args[cdecl.adt_index + 1:]:
                assert isinstance(v, Var)
                w = Var(f"Y{next(counter)}", v.sort)
                inst[v] = w
                outputs.append(w)
            atoms.append(ir.apply_atom(inst, a))
    return PredSpec(pred, params, tuple(atoms), tuple(inputs), tuple(outputs))


def build_abstraction_specs(program: Program) -> dict[str, PredSpec]:
    """Specs for every program predicate that gets at least one atom."""
    specs: dict[str, PredSpec] = {}
    for pred in program.preds:
        if pred in program.catas:
            continue
        spec = spec_of(program, pred)
        if spec.atoms:
            specs[pred] = spec
    return specs


def specs_to_text(specs: dict[str, PredSpec]) -> str:
    lines = []
    for spec in specs.values():
        head = ir.atom_str(Atom(spec.pred, spec.params))
        atoms = ", ".join(ir.atom_str(a) for a in spec.atoms)
        lines.append(f":- spec {head} ==> {atoms}.")
    return "\n".join(lines) + ("\n" if lines else "")
