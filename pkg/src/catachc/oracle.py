"""Bounded least-model oracle.

Computes the least model of a clause set restricted to a finite universe:
integers from a fixed window, booleans, and ADT values up to a size bound
(size = number of constructor applications, so `[]` has size 1 and
`[a, b]` size 3). Clause variables are instantiated over the universe:
body atoms only match model rows whose values lie inside it, and open
variables are enumerated from it. Values *computed* from those
instantiations by exact constraint evaluation are kept even outside the
window, so derived heads such as a count of 2 under ints {0, 1} stay
exact; they sit in the model but cannot feed further instantiation. Head
atoms whose ADT arguments outgrow the size bound are dropped. Both rules
together keep the model finite even for clause sets with no structurally
decreasing argument.

Ground values are plain Python data: ints, bools, and
`(ctor_name, field_value, ...)` tuples.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional

from . import ir
from .ir import (AdtSort, Atom, BOOL, CataChcError, Clause, INT, Program,
                 Var, is_adt)

Value = object  # int | bool | tuple(ctor, fields...)
GroundModel = dict[str, set[tuple]]


class OracleResourceError(CataChcError):
    """The bounded evaluation outgrew its configured caps."""


@dataclass(frozen=True)
class BoundedUniverse:
    ints: tuple[int, ...] = (-1, 0, 1)
    adt_size: int = 3
    bools: tuple[bool, ...] = (False, True)


@dataclass(frozen=True)
class OracleConfig:
    universe: BoundedUniverse = field(default_factory=BoundedUniverse)
    max_atoms: int = 200_000
    max_rounds: int = 1_000
    max_branch: int = 1_000_000  # enumeration combinations per clause join


# ---------------------------------------------------------------------------
# Values

def value_size(v: Value) -> int:
    if isinstance(v, tuple):
        return 1 + sum(value_size(f) for f in v[1:])
    return 0


def value_str(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        if v[0] == "nil":
            return "[]"
        if v[0] == "cons":
            items = []
            while isinstance(v, tuple) and v[0] == "cons":
                items.append(value_str(v[1]))
                v = v[2]
            return "[" + ", ".join(items) + "]"
        if len(v) == 1:
            return v[0]
        return f"{v[0]}({', '.join(value_str(f) for f in v[1:])})"
    return str(v)


def value_key(v: Value):
    """Total order over values of one sort, for deterministic iteration."""
    if isinstance(v, tuple):
        return (1, v[0], tuple(value_key(f) for f in v[1:]))
    return (0, int(v))


def value_in_universe(v: Value, universe: BoundedUniverse) -> bool:
    if isinstance(v, bool):
        return v in universe.bools
    if isinstance(v, tuple):
        return (value_size(v) <= universe.adt_size
                and all(value_in_universe(f, universe) for f in v[1:]))
    return v in universe.ints


def row_in_universe(row: tuple, universe: BoundedUniverse) -> bool:
    return all(value_in_universe(v, universe) for v in row)


def restrict_model(model: GroundModel,
                   universe: BoundedUniverse) -> GroundModel:
    """Drop atoms carrying out-of-window computed values.

    Two bounded models can only be compared meaningfully on the universe:
    whether an out-of-window count is retained depends on whether the
    deriving clause computes it in head position, which clause shape, not
    clause meaning, decides.
    """
    out: GroundModel = {}
    for pred, rows in model.items():
        kept = {r for r in rows if row_in_universe(r, universe)}
        if kept:
            out[pred] = kept
    return out


def enumerate_sort(program: Program, sort: ir.Sort,
                   universe: BoundedUniverse) -> list[Value]:
    if sort == INT:
        return list(universe.ints)
    if sort == BOOL:
        return list(universe.bools)
    assert isinstance(sort, AdtSort)
    return _enum_adt(program, sort, universe, universe.adt_size)


def _enum_adt(program: Program, sort: AdtSort, universe: BoundedUniverse,
              budget: int) -> list[Value]:
    if budget <= 0:
        return []
    out: list[Value] = []
    for ctor in program.ctors_of(sort):
        field_choices: list[list[Value]] = []
        for fs in ctor.fields:
            if fs == INT:
                field_choices.append(list(universe.ints))
            elif fs == BOOL:
                field_choices.append(list(universe.bools))
            else:
                assert isinstance(fs, AdtSort)
                field_choices.append(_enum_adt(program, fs, universe,
                                               budget - 1))
        for combo in itertools.product(*field_choices):
            v = (ctor.name, *combo)
            if value_size(v) <= budget:
                out.append(v)
    out.sort(key=value_key)
    return out


# ---------------------------------------------------------------------------
# Ground evaluation

class _Unbound(Exception):
    pass


Env = dict[Var, Value]


def eval_term(t: ir.Term, env: Env) -> Value:
    if isinstance(t, Var):
        if t not in env:
            raise _Unbound(t)
        return env[t]
    if isinstance(t, ir.IntConst):
        return t.value
    if isinstance(t, ir.BoolConst):
        return t.value
    if isinstance(t, ir.Ctor):
        return (t.name, *(eval_term(a, env) for a in t.args))
    if isinstance(t, ir.LinExpr):
        return t.const + sum(c * eval_term(v, env) for v, c in t.coeffs)
    if isinstance(t, ir.TermIte):
        return eval_term(t.then if eval_constraint(t.cond, env) else t.other,
                         env)
    raise TypeError(t)


def eval_constraint(c: ir.Constraint, env: Env) -> bool:
    if isinstance(c, ir.Rel):
        a, b = eval_term(c.lhs, env), eval_term(c.rhs, env)
        return {"=": a == b, "<": a < b, "=<": a <= b,
                ">=": a >= b, ">": a > b}[c.op]
    if isinstance(c, ir.BVar):
        return bool(eval_term(c.var, env))
    if isinstance(c, ir.CBool):
        return c.value
    if isinstance(c, ir.Not):
        return not eval_constraint(c.arg, env)
    if isinstance(c, ir.And):
        return eval_constraint(c.lhs, env) and eval_constraint(c.rhs, env)
    if isinstance(c, ir.Or):
        return eval_constraint(c.lhs, env) or eval_constraint(c.rhs, env)
    if isinstance(c, ir.Implies):
        return (not eval_constraint(c.lhs, env)) or eval_constraint(c.rhs, env)
    if isinstance(c, ir.CEq):
        return eval_constraint(c.lhs, env) == eval_constraint(c.rhs, env)
    if isinstance(c, ir.CIte):
        return eval_constraint(
            c.then if eval_constraint(c.cond, env) else c.other, env)
    raise TypeError(c)


def _try_eval_term(t: ir.Term, env: Env):
    try:
        return True, eval_term(t, env)
    except _Unbound:
        return False, None


def _propagate(conjuncts: list[ir.Constraint], env: Env) -> Env:
    """Bind variables forced by equalities whose other side evaluates."""
    env = dict(env)
    progress = True
    while progress:
        progress = False
        for c in conjuncts:
            if isinstance(c, ir.Rel) and c.op == "=":
                progress |= _propagate_eq(c.lhs, c.rhs, env)
            elif isinstance(c, ir.CEq):
                for a, b in ((c.lhs, c.rhs), (c.rhs, c.lhs)):
                    if isinstance(a, ir.BVar) and a.var not in env:
                        try:
                            env[a.var] = eval_constraint(b, env)
                            progress = True
                        except _Unbound:
                            pass
    return env


def _propagate_eq(lhs: ir.Term, rhs: ir.Term, env: Env) -> bool:
    for a, b in ((lhs, rhs), (rhs, lhs)):
        if isinstance(a, Var) and a not in env:
            ok, v = _try_eval_term(b, env)
            if ok:
                env[a] = v
                return True
    # single unknown with unit coefficient inside a linear equality
    try:
        diff_c, diff_d = ir.lin_of(lhs)
        rc, rd = ir.lin_of(rhs)
    except ir.SortMismatch:
        return False
    for v, c in rc.items():
        diff_c[v] = diff_c.get(v, 0) - c
    diff_d -= rd
    unknowns = [(v, c) for v, c in diff_c.items() if v not in env and c != 0]
    if len(unknowns) == 1 and abs(unknowns[0][1]) == 1:
        v, c = unknowns[0]
        rest = diff_d + sum(cc * env[w] for w, cc in diff_c.items()
                            if w in env)
        env[v] = -rest // c
        return True
    return False


def computed_positions(program: Program, pred: str) -> frozenset[int]:
    """Argument positions of `pred` holding catamorphism outputs."""
    decl = program.catas.get(pred)
    if decl is not None:
        return frozenset(range(decl.adt_index + 1, len(decl.sorts)))
    return program.outsig.get(pred, frozenset())


def _pick_enum_var(program: Program, conjuncts: list[ir.Constraint],
                   env: Env, remaining: list[Var],
                   universe: BoundedUniverse) -> Var:
    """Choose which candidate to enumerate first: probe each one with each
    universe value and prefer the one whose binding lets propagation close
    the most other open variables (pure branching-order heuristic)."""
    if len(remaining) == 1:
        return remaining[0]
    best, best_gain = remaining[0], -1
    limit = len(remaining) - 1
    for cand in remaining:
        gain = 0
        for probe in enumerate_sort(program, cand.sort, universe):
            e2 = _propagate(conjuncts, {**env, cand: probe})
            gain = max(gain, sum(1 for w in remaining
                                 if w is not cand and w in e2))
            if gain == limit:
                break
        if gain > best_gain:
            best, best_gain = cand, gain
            if gain == limit:
                break
    return best


def solve_constraints(program: Program, conjuncts: list[ir.Constraint],
                      env: Env, needed: list[Var],
                      universe: BoundedUniverse,
                      max_branch: int = 1_000_000,
                      enumerable: Optional[frozenset] = None
                      ) -> Iterator[Env]:
    """All universe extensions of `env` binding `needed` and satisfying the
    conjunction.

    Alternates propagation (exact, not universe-restricted) with
    enumeration of one still-open variable at a time.  Only variables in
    `enumerable` take guessed window values (all variables when None);
    the rest hold catamorphism outputs, which must be computed, so they
    are guessed only as a last resort when the constraint leaves them
    underdetermined.
    """
    steps = [0]

    def open_vars(e: Env) -> list[Var]:
        out: list[Var] = []
        for v in needed:
            if v not in e and v not in out:
                out.append(v)
        for c in conjuncts:
            for v in ir.constraint_vars(c):
                if v not in e and v not in out:
                    out.append(v)
        return out

    def walk(e: Env) -> Iterator[Env]:
        e = _propagate(conjuncts, e)
        # fail fast on conjuncts that are already fully evaluable
        for c in conjuncts:
            try:
                if not eval_constraint(c, e):
                    return
            except _Unbound:
                pass
        remaining = open_vars(e)
        if not remaining:
            yield e
            return
        cands = remaining if enumerable is None \
            else [v for v in remaining if v in enumerable]
        if not cands:
            cands = remaining
        v = _pick_enum_var(program, conjuncts, e, cands, universe)
        for val in enumerate_sort(program, v.sort, universe):
            steps[0] += 1
            if steps[0] > max_branch:
                raise OracleResourceError(
                    f"constraint enumeration exceeds {max_branch} steps")
            e2 = dict(e)
            e2[v] = val
            yield from walk(e2)

    yield from walk(env)


# ---------------------------------------------------------------------------
# Least model

def _match_args(args: tuple[ir.Term, ...], values: tuple, env: Env,
                universe: BoundedUniverse) -> Optional[Env]:
    env2 = dict(env)
    for t, v in zip(args, values):
        if isinstance(t, Var):
            if t in env2:
                if env2[t] != v:
                    return None
            elif value_in_universe(v, universe):
                env2[t] = v
            else:
                # out-of-window row components are inert: they stay in the
                # model but cannot instantiate a fresh body variable
                return None
        else:
            ok, tv = _try_eval_term(t, env2)
            if not ok or tv != v:
                return None
    return env2


def clause_solutions(program: Program, model: GroundModel, clause: Clause,
                     cfg: OracleConfig,
                     ordered: bool = False) -> Iterator[Env]:
    """Environments grounding every clause variable such that the body atoms
    hold in `model` and the constraint is satisfied.

    Variables occurring at an input or ADT position of any atom are
    instantiated from the universe; variables found only at catamorphism
    output positions get exactly computed values instead.
    """
    for atom in clause.body:
        for t in atom.args:
            if not isinstance(t, Var):
                raise OracleResourceError(
                    f"non-variable body argument in {ir.atom_str(atom)}; "
                    "normalize the clause first")
    restricted: set[Var] = set()
    computed: set[Var] = set()
    head = (clause.head,) if clause.head is not None else ()
    for atom in (*clause.body, *head):
        outs = computed_positions(program, atom.pred)
        for i, t in enumerate(atom.args):
            for v in ir.term_vars(t):
                (computed if i in outs else restricted).add(v)
    computed -= restricted
    envs: list[Env] = [{}]
    for atom in clause.body:
        tuples = model.get(atom.pred, set())
        rows = sorted(tuples, key=lambda tp: tuple(map(value_key, tp))) \
            if ordered else list(tuples)
        new_envs = []
        for env in envs:
            for tup in rows:
                m = _match_args(atom.args, tup, env, cfg.universe)
                if m is not None:
                    new_envs.append(m)
        envs = new_envs
        if not envs:
            return
    needed = list(ir.clause_vars(clause))
    enumerable = frozenset(v for v in needed if v not in computed)
    for env in envs:
        for sol in solve_constraints(program, list(clause.constraint), env,
                                     needed, cfg.universe, cfg.max_branch,
                                     enumerable):
            # propagation may derive an out-of-window value; that is only
            # admissible for catamorphism outputs
            if all(value_in_universe(sol[v], cfg.universe)
                   for v in restricted if v in sol):
                yield sol


def bounded_least_model(program: Program, clauses: list[Clause],
                        cfg: OracleConfig = OracleConfig()) -> GroundModel:
    """Immediate-consequence fixpoint over the bounded universe.

    Head atoms whose ADT arguments exceed the size bound are dropped;
    basic head values are kept exactly as computed.
    """
    model: GroundModel = {}
    size = 0
    for round_no in range(cfg.max_rounds):
        added = False
        for clause in clauses:
            if clause.head is None:
                continue
            for env in clause_solutions(program, model, clause, cfg):
                try:
                    tup = tuple(eval_term(t, env) for t in clause.head.args)
                except _Unbound:
                    raise OracleResourceError(
                        f"unbound head variable in {ir.clause_str(clause)}")
                if any(isinstance(v, tuple)
                       and value_size(v) > cfg.universe.adt_size
                       for v in tup):
                    continue
                bucket = model.setdefault(clause.head.pred, set())
                if tup not in bucket:
                    bucket.add(tup)
                    size += 1
                    added = True
                    if size > cfg.max_atoms:
                        raise OracleResourceError(
                            f"model exceeds {cfg.max_atoms} ground atoms")
        if not added:
            return model
    raise OracleResourceError(f"no fixpoint after {cfg.max_rounds} rounds")


# ---------------------------------------------------------------------------
# Query checking

@dataclass(frozen=True)
class QueryCheck:
    status: str  # "violated" | "no-witness"
    witness: Optional[dict[str, Value]] = None

    @property
    def violated(self) -> bool:
        return self.status == "violated"


def check_query_bounded(program: Program, model: GroundModel, query: Clause,
                        cfg: OracleConfig = OracleConfig()) -> QueryCheck:
    """Search the bounded model for a body instance of the query."""
    assert query.head is None
    for env in clause_solutions(program, model, query, cfg, ordered=True):
        witness = {v.name: env[v] for v in ir.clause_vars(query) if v in env}
        return QueryCheck("violated", witness)
    return QueryCheck("no-witness")


def derived_atoms(program: Program, model: GroundModel, clause: Clause,
                  cfg: OracleConfig = OracleConfig()) -> set[tuple]:
    """Ground head instances a definite clause derives from `model` in one
    step (used to compare a definition's meaning across clause sets)."""
    assert clause.head is not None
    out: set[tuple] = set()
    for env in clause_solutions(program, model, clause, cfg):
        tup = tuple(eval_term(t, env) for t in clause.head.args)
        if not any(isinstance(v, tuple)
                   and value_size(v) > cfg.universe.adt_size for v in tup):
            out.add(tup)
    return out
