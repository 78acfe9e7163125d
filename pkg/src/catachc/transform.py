"""Compiling catamorphisms out of CHCs by fold/unfold transformation.

The pipeline introduces one definition per program predicate (a new
predicate standing for the conjunction of the predicate with the
catamorphisms of its ADT arguments), computes the least set of definitions
closed under unfolding, and then replaces every clause of the source
program by its folded counterpart. Catamorphism clauses are inlined during
unfolding, so the result contains no catamorphism atom at all.

Definitions form a lattice: a definition is below another when every
clause-body requirement the first folds, the second folds too. Extension
of a definition is the join with the definition generated from the
unmatched requirement, which keeps the map from program predicates to
definitions monovariant and makes the iteration monotone.

Three output systems are produced: `t_w` keeps ADT arguments, `t_wo`
erases them everywhere (a strengthening: clauses get more consequences, so
sat answers transfer but unsat answers do not), and `t_wwo` combines both,
pairing every atom with its erased twin.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

from . import cata, frontend, ir, oracle
from .ir import (Atom, CataChcError, Clause, NameSupply, Program, Subst, Var,
                 is_adt)


class TransformError(CataChcError):
    pass


# ---------------------------------------------------------------------------
# Definitions

@dataclass(frozen=True)
class Definition:
    """new_pred(head_vars) :- catas, atom.

    `atom` has pairwise distinct fresh variables (the generalization of any
    occurrence of the predicate), catamorphism ADT arguments are among
    them, inputs and outputs are fresh, and `head_vars` lists every body
    variable in order of first occurrence.
    """

    new_pred: str
    head_vars: tuple[Var, ...]
    catas: tuple[Atom, ...]
    atom: Atom
    cid: int = field(default=-1, compare=False)

    @property
    def clause(self) -> Clause:
        return Clause(Atom(self.new_pred, self.head_vars), (),
                      self.catas + (self.atom,), cid=self.cid)


DefSet = dict[str, Definition]  # keyed by the program predicate


def make_definition(program: Program, supply: NameSupply, catas: list[Atom],
                    atom: Atom, name: str, cid: int = -1) -> Definition:
    seen = set()
    for c in catas:
        key = (c.pred, c.args[program.catas[c.pred].adt_index])
        if key in seen:
            # reachable only from user-written clauses; the catamorphism
            # atoms the transformation itself adds never collide
            raise TransformError(
                f"two {c.pred} atoms constrain one argument of {atom.pred}; "
                f"at most one atom per catamorphism and ADT variable is "
                f"supported")
        seen.add(key)
    decl = program.preds[atom.pred]
    params = tuple(supply.fresh_var(s) for s in decl.sorts)
    gen: Subst = {}
    for arg, prm in zip(atom.args, params):
        assert isinstance(arg, Var)
        gen.setdefault(arg, prm)
    in_map: Subst = {}
    new_catas = []
    for c in catas:
        cdecl = program.catas[c.pred]
        args: list[ir.Term] = []
        for j, t in enumerate(c.args):
            assert isinstance(t, Var)
            if j == cdecl.adt_index:
                args.append(gen[t])
            elif j < cdecl.adt_index:
                if t not in in_map:
                    in_map[t] = supply.fresh_var(t.sort)
                args.append(in_map[t])
            else:
                args.append(supply.fresh_var(t.sort))
        new_catas.append(Atom(c.pred, tuple(args)))
    new_atom = Atom(atom.pred, params)
    head_vars = ir.ordered_vars(
        v for a in (*new_catas, new_atom) for v in ir.atom_vars(a))
    return Definition(name, head_vars, tuple(new_catas), new_atom, cid=cid)


def catas_for_atom(program: Program, clause: Clause, atom: Atom) -> list[Atom]:
    """The clause's catamorphism atoms folding over an ADT argument of
    `atom`, most recently added first."""
    adt_args = {t for t in atom.args if isinstance(t, Var) and is_adt(t.sort)}
    out = []
    for b in reversed(clause.body):
        decl = program.catas.get(b.pred)
        if decl is not None and b.args[decl.adt_index] in adt_args:
            out.append(b)
    return out


def match_definition(program: Program, d: Definition, catas: list[Atom],
                     atom: Atom) -> Optional[Subst]:
    """Substitution over `d`'s variables sending its body onto the
    requirement, or None. Every requirement catamorphism must be matched;
    definition catamorphisms may be left over."""
    if d.atom.pred != atom.pred or len(d.atom.args) != len(atom.args):
        return None
    theta: Subst = {}
    for prm, arg in zip(d.atom.args, atom.args):
        assert isinstance(prm, Var)
        theta[prm] = arg

    def step(i: int, theta: Subst, used: frozenset) -> Optional[Subst]:
        if i == len(catas):
            return theta
        c = catas[i]
        decl = program.catas[c.pred]
        k = decl.adt_index
        for j, dc in enumerate(d.catas):
            if j in used or dc.pred != c.pred:
                continue
            if theta.get(dc.args[k]) != c.args[k]:
                continue
            trial = dict(theta)
            ok = True
            for dv, cv in zip(dc.args[:k], c.args[:k]):
                assert isinstance(dv, Var)
                bound = trial.get(dv)
                if bound is None:
                    trial[dv] = cv
                elif bound != cv:
                    ok = False
                    break
            if not ok:
                continue
            for dv, cv in zip(dc.args[k + 1:], c.args[k + 1:]):
                assert isinstance(dv, Var)
                trial[dv] = cv
            result = step(i + 1, trial, used | {j})
            if result is not None:
                return result
        return None

    return step(0, theta, frozenset())


def _complete_match(theta: Subst, d: Definition, supply: NameSupply) -> Subst:
    # leftover definition variables denote arbitrary inputs and existing
    # outputs of total catamorphisms; fresh variables are sound for both
    out = dict(theta)
    for v in d.head_vars:
        if v not in out:
            out[v] = supply.fresh_var(v.sort)
    return out


# ---------------------------------------------------------------------------
# The definition lattice

def _key_of(d: Definition, c: Atom, k: int) -> tuple[str, int]:
    return (c.pred, d.atom.args.index(c.args[k]))


def _keys(program: Program, d: Definition) -> list[tuple[str, int]]:
    out = []
    for c in d.catas:
        out.append(_key_of(d, c, program.catas[c.pred].adt_index))
    return out


def _input_vars(program: Program, d: Definition) -> dict[tuple, Var]:
    """Input token (pred, param index, input position) -> variable."""
    out = {}
    for c in d.catas:
        k = program.catas[c.pred].adt_index
        key = _key_of(d, c, k)
        for j, v in enumerate(c.args[:k]):
            out[(key, j)] = v
    return out


def _build_from_form(program: Program, supply: NameSupply, name: str,
                     pred: str, keys: list[tuple[str, int]],
                     classes: dict[tuple, int]) -> Definition:
    decl = program.preds[pred]
    params = tuple(supply.fresh_var(s) for s in decl.sorts)
    class_vars: dict[int, Var] = {}
    catas = []
    for key in keys:
        cpred, pos = key
        cdecl = program.catas[cpred]
        args: list[ir.Term] = []
        for j, s in enumerate(cdecl.ins):
            cls = classes[(key, j)]
            if cls not in class_vars:
                class_vars[cls] = supply.fresh_var(s)
            args.append(class_vars[cls])
        args.append(params[pos])
        args.extend(supply.fresh_var(s) for s in cdecl.outs)
        catas.append(Atom(cpred, tuple(args)))
    atom = Atom(pred, params)
    head_vars = ir.ordered_vars(
        v for a in (*catas, atom) for v in ir.atom_vars(a))
    return Definition(name, head_vars, tuple(catas), atom)


def def_join(program: Program, supply: NameSupply, d1: Definition,
             d2: Definition, name: str) -> Definition:
    """Least definition folding everything either argument folds: union of
    the catamorphisms, inputs shared only where both sides share them."""
    assert d1.atom.pred == d2.atom.pred
    keys1, keys2 = _keys(program, d1), _keys(program, d2)
    keys = keys1 + [k for k in keys2 if k not in keys1]
    vars1, vars2 = _input_vars(program, d1), _input_vars(program, d2)
    tokens = [(key, j) for key in keys
              for j in range(len(program.catas[key[0]].ins))]

    def agree(t: tuple, u: tuple) -> bool:
        witnessed = False
        for side in (vars1, vars2):
            if t in side and u in side:
                if side[t] != side[u]:
                    return False
                witnessed = True
        return witnessed

    # merge greedily; a merge must be agreeable pairwise so that no side is
    # forced to share inputs it keeps apart
    classes = {t: i for i, t in enumerate(tokens)}
    members = {i: [t] for i, t in enumerate(tokens)}
    for a in range(len(tokens)):
        for b in range(a + 1, len(tokens)):
            t, u = tokens[a], tokens[b]
            if classes[t] == classes[u] or not agree(t, u):
                continue
            if all(agree(x, y) for x in members[classes[t]]
                   for y in members[classes[u]]):
                dead = classes[u]
                for x in members[dead]:
                    classes[x] = classes[t]
                members[classes[t]].extend(members.pop(dead))
    return _build_from_form(program, supply, name, d1.atom.pred, keys, classes)


def def_meet(program: Program, supply: NameSupply, d1: Definition,
             d2: Definition, name: str) -> Definition:
    """Greatest definition folded by everything folding either argument:
    common catamorphisms, inputs shared where either side shares them."""
    assert d1.atom.pred == d2.atom.pred
    keys1, keys2 = _keys(program, d1), _keys(program, d2)
    keys = [k for k in keys1 if k in keys2]
    vars1, vars2 = _input_vars(program, d1), _input_vars(program, d2)
    tokens = [(key, j) for key in keys
              for j in range(len(program.catas[key[0]].ins))]
    classes = {t: i for i, t in enumerate(tokens)}

    def union(t: tuple, u: tuple):
        a, b = classes[t], classes[u]
        if a != b:
            for x in classes:
                if classes[x] == b:
                    classes[x] = a

    for side in (vars1, vars2):
        by_var: dict[Var, tuple] = {}
        for t in tokens:
            v = side.get(t)
            if v is None:
                continue
            if v in by_var:
                union(by_var[v], t)
            else:
                by_var[v] = t
    return _build_from_form(program, supply, name, d1.atom.pred, keys, classes)


def def_leq(program: Program, d1: Definition, d2: Definition) -> bool:
    """d1 below d2: every requirement d1 folds, d2 folds as well."""
    if d1.atom.pred != d2.atom.pred:
        return False
    return match_definition(program, d2, list(d1.catas), d1.atom) is not None


def def_equiv(program: Program, d1: Definition, d2: Definition) -> bool:
    return def_leq(program, d1, d2) and def_leq(program, d2, d1)


def defset_leq(program: Program, s1: DefSet, s2: DefSet) -> bool:
    return all(p in s2 and def_leq(program, d, s2[p]) for p, d in s1.items())


def defset_join(program: Program, supply: NameSupply, s1: DefSet,
                s2: DefSet) -> DefSet:
    out: DefSet = {}
    for p in {**s1, **s2}:
        if p in s1 and p in s2:
            out[p] = def_join(program, supply, s1[p], s2[p], s1[p].new_pred)
        else:
            out[p] = s1.get(p) or s2[p]
    return out


def defset_meet(program: Program, supply: NameSupply, s1: DefSet,
                s2: DefSet) -> DefSet:
    return {p: def_meet(program, supply, s1[p], s2[p], s1[p].new_pred)
            for p in s1 if p in s2}


def defset_equiv(program: Program, s1: DefSet, s2: DefSet) -> bool:
    return defset_leq(program, s1, s2) and defset_leq(program, s2, s1)


def check_defset_invariants(program: Program, defs: DefSet):
    """Monovariance and the one-catamorphism-per-variable discipline."""
    for pred, d in defs.items():
        if d.atom.pred != pred:
            raise TransformError(f"definition for {pred} names {d.atom.pred}")
        if len(set(d.atom.args)) != len(d.atom.args):
            raise TransformError(f"{d.new_pred} has repeated parameters")
        if len(set(d.head_vars)) != len(d.head_vars):
            raise TransformError(f"{d.new_pred} has repeated head variables")
        seen = set()
        for c in d.catas:
            k = program.catas[c.pred].adt_index
            key = (c.pred, c.args[k])
            if key in seen:
                raise TransformError(
                    f"{d.new_pred} applies {c.pred} twice to one argument")
            seen.add(key)


# ---------------------------------------------------------------------------
# Unfolding

def _simplify(program: Program, clause: Clause) -> Optional[Clause]:
    """Inline variable equalities, merge duplicate catamorphism atoms, drop
    duplicate conjuncts and atoms; None when trivially unsatisfiable."""
    while True:
        order = {v: i for i, v in enumerate(ir.clause_vars(clause))}
        changed = False
        for i, c in enumerate(clause.constraint):
            pair = _var_eq(c)
            if pair is None:
                continue
            a, b = pair
            rest = clause.constraint[:i] + clause.constraint[i + 1:]
            clause = replace(clause, constraint=rest)
            if a != b:
                if order[a] > order[b]:
                    a, b = b, a
                clause = ir.apply_clause({b: a}, clause)
            changed = True
            break
        if not changed:
            break

    while True:
        seen: dict[tuple, Atom] = {}
        merge: Optional[Subst] = None
        for b in clause.body:
            decl = program.catas.get(b.pred)
            if decl is None:
                continue
            k = decl.adt_index
            key = (b.pred, b.args[:k + 1])
            first = seen.get(key)
            if first is None:
                seen[key] = b
            elif first != b:
                merge = dict(zip(b.args[k + 1:], first.args[k + 1:]))  # type: ignore[arg-type]
                break
        if merge is None:
            break
        clause = ir.apply_clause(merge, clause)

    body = []
    for b in clause.body:
        if b not in body:
            body.append(b)
    constraint = []
    for c in clause.constraint:
        if c not in constraint:
            constraint.append(c)
    clause = replace(clause, constraint=tuple(constraint), body=tuple(body))

    try:
        env = oracle._propagate(list(clause.constraint), {})
        for c in clause.constraint:
            try:
                if not oracle.eval_constraint(c, env):
                    return None
            except oracle._Unbound:
                pass
    except ir.CataChcError:
        pass
    return clause


def _var_eq(c: ir.Constraint) -> Optional[tuple[Var, Var]]:
    if isinstance(c, ir.Rel) and c.op == "=" \
            and isinstance(c.lhs, Var) and isinstance(c.rhs, Var):
        return (c.lhs, c.rhs)
    if isinstance(c, ir.CEq) and isinstance(c.lhs, ir.BVar) \
            and isinstance(c.rhs, ir.BVar):
        return (c.lhs.var, c.rhs.var)
    return None


def _resolve(program: Program, supply: NameSupply, clause: Clause, idx: int,
             dclause: Clause) -> Optional[Clause]:
    """One unfolding step of clause.body[idx] against dclause."""
    k = ir.rename_apart(dclause, supply)
    assert k.head is not None
    try:
        theta = ir.unify_atoms(clause.body[idx], k.head)
    except ir.UnificationFailure:
        return None
    out = Clause(clause.head, clause.constraint + k.constraint,
                 clause.body[:idx] + k.body + clause.body[idx + 1:],
                 cid=supply.next_clause_id())
    return _simplify(program, ir.apply_clause(theta, out))


def _ctor_cata_index(program: Program, clause: Clause) -> Optional[int]:
    for i, b in enumerate(clause.body):
        decl = program.catas.get(b.pred)
        if decl is not None and not isinstance(b.args[decl.adt_index], Var):
            return i
    return None


def unfold_definition(program: Program, d: Definition, supply: NameSupply,
                      trace: Optional[list[str]] = None) -> list[Clause]:
    """All one-step unfoldings of the definition's program atom, with
    catamorphism atoms driven down to variable arguments and duplicates
    merged."""
    base = d.clause
    idx = len(d.catas)
    results: list[Clause] = []
    for k in program.clauses:
        if k.head is None or k.head.pred != d.atom.pred:
            continue
        c1 = _resolve(program, supply, base, idx, k)
        if c1 is None:
            continue
        if trace is not None:
            trace.append(f"RULE UNFOLD IN {d.cid},{k.cid} OUT {c1.cid}")
        work = [c1]
        while work:
            cl = work.pop()
            i = _ctor_cata_index(program, cl)
            if i is None:
                results.append(cl)
                continue
            target = cl.body[i]
            arg = target.args[program.catas[target.pred].adt_index]
            assert isinstance(arg, ir.Ctor)
            for cc in program.clauses:
                if cc.head is None or cc.head.pred != target.pred:
                    continue
                pat = cc.head.args[program.catas[target.pred].adt_index]
                if not isinstance(pat, ir.Ctor) or pat.name != arg.name:
                    continue
                c2 = _resolve(program, supply, cl, i, cc)
                if c2 is not None:
                    if trace is not None:
                        trace.append(
                            f"RULE UNFOLD-CATA IN {cl.cid},{cc.cid} OUT {c2.cid}")
                    work.append(c2)
    return results


# ---------------------------------------------------------------------------
# Adding catamorphisms from the abstraction

SpecCache = dict[str, "cata.PredSpec"]


def get_spec(program: Program, cache: SpecCache, pred: str) -> cata.PredSpec:
    spec = cache.get(pred)
    if spec is None:
        spec = cata.spec_of(program, pred)
        cache[pred] = spec
    return spec


def add_catamorphisms(program: Program, cache: SpecCache, clause: Clause,
                      supply: NameSupply,
                      trace: Optional[list[str]] = None) -> Clause:
    """Instantiate each body atom's spec, reusing catamorphism atoms the
    clause already has (binding the spec's shared inputs to theirs) and
    adding the missing ones with fresh outputs.

    Program atoms are visited newest-first, like Define and Fold.  Unfolding
    leaves the head-connected variables in the rightmost atoms, so this
    order propagates the existing shared inputs backwards through the body
    instead of minting fresh ones that a later atom then cannot reuse."""
    existing: dict[tuple[str, Var], Atom] = {}
    for b in clause.body:
        decl = program.catas.get(b.pred)
        if decl is not None:
            v = b.args[decl.adt_index]
            assert isinstance(v, Var)
            existing[(b.pred, v)] = b
    additions: list[Atom] = []
    for a in reversed(clause.body):
        if a.pred in program.catas:
            continue
        spec = get_spec(program, cache, a.pred)
        if not spec.atoms:
            continue
        inst: Subst = dict(zip(spec.params, a.args))

        def bind(s: Atom, e: Atom, k: int) -> bool:
            trial: Subst = {}
            for sv, ev in zip(s.args[:k], e.args[:k]):
                assert isinstance(sv, Var)
                bound = inst.get(sv, trial.get(sv))
                if bound is None:
                    trial[sv] = ev
                elif bound != ev:
                    return False
            inst.update(trial)
            for sv, ev in zip(s.args[k + 1:], e.args[k + 1:]):
                assert isinstance(sv, Var)
                inst.setdefault(sv, ev)
            return True

        deferred = []
        for s in spec.atoms:
            k = program.catas[s.pred].adt_index
            v = inst[s.args[k]]  # type: ignore[index]
            assert isinstance(v, Var)
            e = existing.get((s.pred, v))
            if e is None:
                deferred.append(s)
            elif bind(s, e, k) and trace is not None:
                trace.append(f"MATCH {s.pred} ON {v.name} IN {clause.cid}")
        for s in deferred:
            k = program.catas[s.pred].adt_index
            v = inst[s.args[k]]  # type: ignore[index]
            assert isinstance(v, Var)
            e = existing.get((s.pred, v))
            if e is not None:
                bind(s, e, k)
                continue
            args: list[ir.Term] = []
            for j, sv in enumerate(s.args):
                if j == k:
                    args.append(v)
                    continue
                assert isinstance(sv, Var)
                t = inst.get(sv)
                if t is None:
                    t = supply.fresh_var(sv.sort)
                    inst[sv] = t
                args.append(t)
            na = Atom(s.pred, tuple(args))
            additions.append(na)
            existing[(s.pred, v)] = na
    if not additions:
        return clause
    out = replace(clause, body=clause.body + tuple(additions),
                  cid=supply.next_clause_id())
    if trace is not None:
        trace.append(f"RULE ADDCATA IN {clause.cid} OUT {out.cid}")
    return out


# ---------------------------------------------------------------------------
# Introducing definitions

def _program_atoms_newest_first(program: Program, clause: Clause) -> list[Atom]:
    return [a for a in reversed(clause.body) if a.pred not in program.catas]


def define_pass(program: Program, clauses: list[Clause], defs: DefSet,
                supply: NameSupply, taken: set[str],
                trace: Optional[list[str]] = None) -> bool:
    changed = False
    for cl in clauses:
        for a in _program_atoms_newest_first(program, cl):
            catas_a = catas_for_atom(program, cl, a)
            cur = defs.get(a.pred)
            if cur is None:
                if not catas_a:
                    continue
                name = supply.fresh_pred(taken)
                taken.add(name)
                taken.add(name + "_woADTs")
                defs[a.pred] = make_definition(
                    program, supply, catas_a, a, name,
                    cid=supply.next_clause_id())
                changed = True
                if trace is not None:
                    trace.append(
                        f"RULE DEFINE-ADD IN {cl.cid} OUT {defs[a.pred].cid}")
            elif match_definition(program, cur, catas_a, a) is None:
                req = make_definition(program, supply, catas_a, a, cur.new_pred)
                name = supply.fresh_pred(taken)
                taken.add(name)
                taken.add(name + "_woADTs")
                joined = def_join(program, supply, cur, req, name)
                defs[a.pred] = replace(joined, cid=supply.next_clause_id())
                changed = True
                if trace is not None:
                    trace.append(
                        f"RULE DEFINE-EXTEND IN {cl.cid},{cur.cid} "
                        f"OUT {defs[a.pred].cid}")
    return changed


def tau_step(program: Program, defs: DefSet,
             queries: Optional[list[Clause]] = None,
             cache: Optional[SpecCache] = None,
             taken: Optional[set[str]] = None,
             trace: Optional[list[str]] = None) -> DefSet:
    """One definition-introduction step over the unfoldings of `defs` and
    the queries. Pure in `defs`; fresh names come from the program supply."""
    supply = program.supply
    if queries is None:
        queries = [frontend.validate_query(program, q)
                   for q in program.queries]
    if cache is None:
        cache = {}
    if taken is None:
        taken = _taken_names(program, defs)
    out = dict(defs)
    clauses: list[Clause] = []
    for d in defs.values():
        clauses.extend(unfold_definition(program, d, supply, trace))
    clauses.extend(queries)
    clauses = [frontend.ensure_cata_coverage(program, c) for c in clauses]
    clauses = [add_catamorphisms(program, cache, c, supply, trace)
               for c in clauses]
    define_pass(program, clauses, out, supply, taken, trace)
    return out


def _taken_names(program: Program, defs: DefSet) -> set[str]:
    taken = set(program.preds) | set(program.catas)
    for d in defs.values():
        taken.add(d.new_pred)
        taken.add(d.new_pred + "_woADTs")
    return taken


def _reachable_preds(program: Program, defs: DefSet,
                     queries: list[Clause]) -> list[str]:
    by_head: dict[str, list[Clause]] = {}
    for cl in program.clauses:
        if cl.head is not None and cl.head.pred not in program.catas:
            by_head.setdefault(cl.head.pred, []).append(cl)
    work = [d.atom.pred for d in defs.values()]
    for q in queries:
        work.extend(a.pred for a in q.body if a.pred not in program.catas)
    reach: list[str] = []
    while work:
        p = work.pop()
        if p in reach:
            continue
        reach.append(p)
        for cl in by_head.get(p, []):
            work.extend(a.pred for a in cl.body if a.pred not in program.catas)
    return sorted(reach)


def tau_fixpoint(program: Program, queries: list[Clause], cache: SpecCache,
                 trace: Optional[list[str]] = None,
                 max_iterations: Optional[int] = None) -> DefSet:
    """Least set of definitions closed under unfolding, with trivial
    definitions added for reachable predicates that never meet a
    catamorphism."""
    supply = program.supply
    defs: DefSet = {}
    taken = _taken_names(program, defs)
    if max_iterations is None:
        specs = cata.build_abstraction_specs(program)
        widest = max((len(s.atoms) for s in specs.values()), default=0)
        max_iterations = 50 + 10 * (len(program.preds) + 1) * (1 + widest)
    rounds = 0
    while True:
        while True:
            rounds += 1
            if rounds > max_iterations:
                raise TransformError(
                    "definition introduction did not stabilize after "
                    f"{max_iterations} rounds")
            nxt = tau_step(program, defs, queries, cache, taken, trace)
            if nxt == defs:
                break
            defs = nxt
        missing = [p for p in _reachable_preds(program, defs, queries)
                   if p not in defs]
        if not missing:
            return defs
        for p in missing:
            decl = program.preds[p]
            args = tuple(supply.fresh_var(s) for s in decl.sorts)
            name = supply.fresh_pred(taken)
            taken.add(name)
            taken.add(name + "_woADTs")
            defs[p] = make_definition(program, supply, [], Atom(p, args),
                                      name, cid=supply.next_clause_id())
            if trace is not None:
                trace.append(f"RULE DEFINE-ADD IN - OUT {defs[p].cid}")


# ---------------------------------------------------------------------------
# Folding

def fold_clause(program: Program, defs: DefSet, clause: Clause,
                supply: NameSupply,
                trace: Optional[list[str]] = None) -> Clause:
    """Replace every program atom and its catamorphisms by the matching
    definition's head instance. All catamorphism atoms must be consumed."""
    new_atoms: list[Atom] = []
    used: set[Atom] = set()
    for a in _program_atoms_newest_first(program, clause):
        d = defs.get(a.pred)
        if d is None:
            raise TransformError(f"no definition for {a.pred}")
        catas_a = catas_for_atom(program, clause, a)
        theta = match_definition(program, d, catas_a, a)
        if theta is None:
            raise TransformError(
                f"definition {d.new_pred} does not cover "
                f"`{ir.clause_str(clause)}`")
        theta = _complete_match(theta, d, supply)
        new_atoms.append(Atom(d.new_pred,
                              tuple(theta[v] for v in d.head_vars)))
        used.update(catas_a)
    for b in clause.body:
        if b.pred in program.catas and b not in used:
            raise TransformError(
                f"catamorphism {b.pred} left unconsumed in "
                f"`{ir.clause_str(clause)}`")
    out = Clause(clause.head, clause.constraint, tuple(new_atoms),
                 cid=supply.next_clause_id())
    if trace is not None:
        trace.append(f"RULE FOLD IN {clause.cid} OUT {out.cid}")
    return out


# ---------------------------------------------------------------------------
# Erasure

@dataclass(frozen=True)
class ErasureMap:
    pred: str
    erased: str  # equals `pred` when there is nothing to erase
    keep: tuple[int, ...]

    @property
    def identity(self) -> bool:
        return self.erased == self.pred


def build_erasures(program: Program, defs: DefSet) -> dict[str, ErasureMap]:
    out = {}
    for d in defs.values():
        sorts = tuple(v.sort for v in d.head_vars)
        keep = tuple(i for i, s in enumerate(sorts) if not is_adt(s))
        if len(keep) == len(sorts):
            out[d.new_pred] = ErasureMap(d.new_pred, d.new_pred, keep)
        else:
            out[d.new_pred] = ErasureMap(d.new_pred, d.new_pred + "_woADTs",
                                         keep)
    return out


def erase_atom(emap: ErasureMap, atom: Atom) -> Atom:
    return Atom(emap.erased, tuple(atom.args[i] for i in emap.keep))


def erase_clause(erasures: dict[str, ErasureMap], clause: Clause,
                 cid: int = -1) -> Clause:
    head = None if clause.head is None \
        else erase_atom(erasures[clause.head.pred], clause.head)
    body = tuple(erase_atom(erasures[b.pred], b) for b in clause.body)
    return Clause(head, clause.constraint, body, cid=cid)


def pair_clause(erasures: dict[str, ErasureMap], clause: Clause,
                cid: int = -1) -> Clause:
    body: list[Atom] = []
    for b in clause.body:
        body.append(b)
        emap = erasures[b.pred]
        if not emap.identity:
            body.append(erase_atom(emap, b))
    return Clause(clause.head, clause.constraint, tuple(body), cid=cid)


# ---------------------------------------------------------------------------
# The pipeline

@dataclass
class TransformResult:
    source: Program
    definitions: DefSet
    t_w: Program
    t_wo: Program
    t_wwo: Program
    specs: dict[str, cata.PredSpec]
    coverage_preds: dict[str, str]  # sort text -> predicate name
    trace: list[str]
    timings: dict[str, float]
    warnings: list[str]


def _output_program(source: Program, decls: dict[str, ir.PredDecl],
                    clauses: list[Clause], queries: list[Clause],
                    with_datas: bool,
                    outsig: dict[str, frozenset[int]]) -> Program:
    return Program(datas=dict(source.datas) if with_datas else {},
                   preds=decls, clauses=clauses, queries=queries,
                   outsig=dict(outsig), supply=NameSupply())


def _output_signatures(program: Program, defs: DefSet,
                       erasures: dict[str, "ErasureMap"]
                       ) -> dict[str, frozenset[int]]:
    """Head positions of each new predicate (and its erased twin) that hold
    catamorphism outputs."""
    outsig: dict[str, frozenset[int]] = {}
    for d in defs.values():
        outs = set()
        for c in d.catas:
            k = program.catas[c.pred].adt_index
            outs.update(c.args[k + 1:])
        outsig[d.new_pred] = frozenset(
            i for i, v in enumerate(d.head_vars) if v in outs)
    for d in defs.values():
        emap = erasures[d.new_pred]
        if not emap.identity:
            kept = outsig[d.new_pred]
            outsig[emap.erased] = frozenset(
                j for j, i in enumerate(emap.keep) if i in kept)
    return outsig


def transform(program: Program, check_functionality: bool = False,
              functionality_config: Optional[cata.FunctionalityConfig] = None
              ) -> TransformResult:
    """Run the whole pipeline on a sort-checked program.

    The program object is extended in place with the structural coverage
    predicates the transformation synthesizes.
    """
    trace: list[str] = []
    timings: dict[str, float] = {}
    supply = program.supply

    t0 = time.perf_counter()
    cata.validate_all_catamorphisms(program)
    if check_functionality:
        cfg = functionality_config or cata.FunctionalityConfig()
        for name in program.catas:
            report = cata.check_functionality_bounded(program, name, cfg)
            if report.status == "inconclusive":
                program.warnings.append(str(report))
            elif not report.ok:
                raise TransformError(str(report))
    queries = [frontend.validate_query(program, q) for q in program.queries]
    specs = cata.build_abstraction_specs(program)
    cache: SpecCache = dict(specs)
    timings["validate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    defs = tau_fixpoint(program, queries, cache, trace)
    check_defset_invariants(program, defs)
    timings["definitions"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    taken = _taken_names(program, defs)
    clauses: list[Clause] = []
    for d in defs.values():
        clauses.extend(unfold_definition(program, d, supply, trace))
    clauses.extend(queries)
    clauses = [frontend.ensure_cata_coverage(program, c) for c in clauses]
    clauses = [add_catamorphisms(program, cache, c, supply, trace)
               for c in clauses]
    folded = [fold_clause(program, defs, c, supply, trace) for c in clauses]
    timings["fold"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    erasures = build_erasures(program, defs)
    for emap in erasures.values():
        if not emap.identity:
            trace.append(f"RULE ERASE {emap.pred} OUT {emap.erased}")
    outsig = _output_signatures(program, defs, erasures)
    program.outsig.update(outsig)
    new_decls = {d.new_pred: ir.PredDecl(
        d.new_pred, tuple(v.sort for v in d.head_vars), synthetic=True)
        for d in defs.values()}
    erased_decls = {}
    for d in defs.values():
        emap = erasures[d.new_pred]
        if not emap.identity:
            erased_decls[emap.erased] = ir.PredDecl(
                emap.erased,
                tuple(d.head_vars[i].sort for i in emap.keep),
                synthetic=True)

    w_clauses = [c for c in folded if c.head is not None]
    w_queries = [c for c in folded if c.head is None]
    t_w = _output_program(program, dict(new_decls), w_clauses, w_queries,
                          True, outsig)

    wo_clauses = [erase_clause(erasures, c, supply.next_clause_id())
                  for c in folded]
    t_wo = _output_program(
        program, {**{n: d for n, d in new_decls.items()
                     if erasures[n].identity}, **erased_decls},
        [c for c in wo_clauses if c.head is not None],
        [c for c in wo_clauses if c.head is None], False, outsig)

    wwo_clauses: list[Clause] = []
    wwo_queries: list[Clause] = []
    for c in folded:
        paired = pair_clause(erasures, c, supply.next_clause_id())
        if c.head is None:
            wwo_queries.append(paired)
            continue
        wwo_clauses.append(paired)
        erased = erase_clause(erasures, c, supply.next_clause_id())
        if erased != c:
            wwo_clauses.append(erased)
    t_wwo = _output_program(program, {**new_decls, **erased_decls},
                            wwo_clauses, wwo_queries, True, outsig)
    timings["erasure"] = time.perf_counter() - t0

    for out in (t_w, t_wo, t_wwo):
        assert_no_catamorphisms(program, out)
    coverage = {ir.sort_str(s): n for s, n in program.coverage_preds.items()}
    return TransformResult(program, defs, t_w, t_wo, t_wwo, specs, coverage,
                           trace, timings, list(program.warnings))


def readable_renaming(result: TransformResult) -> dict[str, str]:
    """Map `new<k>` predicates to names derived from the program predicate
    they abstract (`p` -> `p_abs`, erased twin `p_abs_woADTs`)."""
    taken = set(result.source.preds) | set(result.source.catas)
    mapping: dict[str, str] = {}
    defs = sorted(result.definitions.values(),
                  key=lambda d: (len(d.new_pred), d.new_pred))
    for d in defs:
        base = f"{d.atom.pred}_abs"
        k = 2
        while base in taken:
            base = f"{d.atom.pred}_abs{k}"
            k += 1
        taken.add(base)
        mapping[d.new_pred] = base
        mapping[d.new_pred + "_woADTs"] = base + "_woADTs"
    return mapping


def rename_predicates(program: Program, mapping: dict[str, str]) -> Program:
    def ren_atom(a: Atom) -> Atom:
        return Atom(mapping.get(a.pred, a.pred), a.args)

    def ren_clause(cl: Clause) -> Clause:
        head = ren_atom(cl.head) if cl.head is not None else None
        return Clause(head, cl.constraint,
                      tuple(ren_atom(a) for a in cl.body), cid=cl.cid)

    preds = {mapping.get(n, n): replace(d, name=mapping.get(n, n))
             for n, d in program.preds.items()}
    return Program(datas=dict(program.datas), preds=preds,
                   clauses=[ren_clause(c) for c in program.clauses],
                   queries=[ren_clause(c) for c in program.queries],
                   outsig={mapping.get(n, n): s
                           for n, s in program.outsig.items()},
                   supply=NameSupply())


def apply_readable_names(result: TransformResult) -> TransformResult:
    mapping = readable_renaming(result)
    defs = {}
    for pred, d in result.definitions.items():
        defs[pred] = replace(d, new_pred=mapping.get(d.new_pred, d.new_pred))
    return replace(result,
                   definitions=defs,
                   t_w=rename_predicates(result.t_w, mapping),
                   t_wo=rename_predicates(result.t_wo, mapping),
                   t_wwo=rename_predicates(result.t_wwo, mapping))


def bounded_equisat_report(result: TransformResult,
                           cfg: Optional[oracle.OracleConfig] = None
                           ) -> tuple[bool, list[str]]:
    """Cross-check the transformation against the bounded least model.

    Three checks: each new predicate's relation in t_w agrees with the
    ground truth of its defining body in the source model (on in-universe
    rows; out-of-window computed values survive only where a clause
    computes them in head position, which differs between the fused and
    the unfused recursion); every query is violated in the source model
    iff it is in t_w and in t_wwo; and the erased twin of every t_w atom
    holds in t_wo's model (the overapproximation direction).
    """
    cfg = cfg or oracle.OracleConfig()
    src = result.source
    lines: list[str] = []
    ok = True

    m_src = oracle.bounded_least_model(src, src.clauses, cfg)
    m_w = oracle.bounded_least_model(result.t_w, result.t_w.clauses, cfg)
    m_wwo = oracle.bounded_least_model(result.t_wwo, result.t_wwo.clauses,
                                       cfg)
    m_wo = oracle.bounded_least_model(result.t_wo, result.t_wo.clauses, cfg)

    for pred in sorted(result.definitions):
        d = result.definitions[pred]
        want = {r for r in oracle.derived_atoms(src, m_src, d.clause, cfg)
                if oracle.row_in_universe(r, cfg.universe)}
        got = {r for r in m_w.get(d.new_pred, set())
               if oracle.row_in_universe(r, cfg.universe)}
        if want == got:
            lines.append(f"definition {d.new_pred} ({pred}): "
                         f"ok ({len(got)} atoms)")
        else:
            ok = False
            lines.append(f"definition {d.new_pred} ({pred}): MISMATCH "
                         f"({len(want - got)} missing, "
                         f"{len(got - want)} extra)")

    for i, q in enumerate(src.queries):
        checks = [
            oracle.check_query_bounded(src, m_src, q, cfg).status,
            oracle.check_query_bounded(result.t_w, m_w,
                                       result.t_w.queries[i], cfg).status,
            oracle.check_query_bounded(result.t_wwo, m_wwo,
                                       result.t_wwo.queries[i], cfg).status,
        ]
        if len(set(checks)) == 1:
            lines.append(f"query {i}: agree ({checks[0]})")
        else:
            ok = False
            lines.append(f"query {i}: DISAGREE src={checks[0]} "
                         f"w={checks[1]} wwo={checks[2]}")

    erasures = build_erasures(src, result.definitions)
    missing = 0
    for pred, rows in m_w.items():
        emap = erasures[pred]
        if emap.identity:
            continue
        wo_rows = m_wo.get(emap.erased, set())
        for row in rows:
            if tuple(row[i] for i in emap.keep) not in wo_rows:
                missing += 1
    if missing:
        ok = False
        lines.append(f"erasure direction: {missing} erased atoms missing")
    else:
        lines.append("erasure direction: ok")
    return ok, lines


def assert_no_catamorphisms(source: Program, out: Program):
    """Postcondition: the output refers to no catamorphism and only to its
    own predicates."""
    for cl in out.clauses + out.queries:
        for a in ((cl.head,) if cl.head else ()) + cl.body:
            if a.pred in source.catas:
                raise TransformError(
                    f"catamorphism {a.pred} survived the transformation")
            if a.pred not in out.preds:
                raise TransformError(f"undeclared predicate {a.pred}")
