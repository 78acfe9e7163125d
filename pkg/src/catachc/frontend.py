"""Sort checking and program admission.

`sort_check` turns the raw AST into IR: it resolves data declarations,
infers signatures for undeclared predicates by unification over sort cells,
builds terms and constraints, normalizes every clause into body-variable
form, and enforces the clause discipline (catamorphism clauses and program
clauses never mix body kinds; queries may).

`validate_query` checks the admissible query shape: at most one program
atom, catamorphism outputs pairwise distinct and disjoint from the inputs
and the program atom's variables; identical catamorphism atoms are merged.

`ensure_cata_coverage` gives every catamorphism atom in a clause body a
covering program atom, synthesizing total structural predicates
(`true_<sort>`) where none exists.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

from . import ir
from .ir import (AdtSort, Atom, BasicSort, BOOL, CataChcError, CataDecl,
                 Clause, CtorDecl, DataDecl, INT, PredDecl, Program, Sort,
                 SortVar, Var)
from . import parser as P


class SortError(CataChcError):
    pass


class QueryShapeError(CataChcError):
    pass


_BUILTIN_LIST = DataDecl(
    "list", ("T",),
    (CtorDecl("nil", ()),
     CtorDecl("cons", (SortVar("T"), AdtSort("list", (SortVar("T"),))))))

_RESERVED = {"true", "false", "ite", "in", "adt", "out"}


# ---------------------------------------------------------------------------
# Sort inference cells

class _Cell:
    __slots__ = ("binding",)

    def __init__(self):
        self.binding: Optional[_ISort] = None


@dataclass(frozen=True)
class _IAdt:
    name: str
    args: tuple["_ISort", ...]


_ISort = Union[BasicSort, _IAdt, _Cell]


def _resolve(s: _ISort) -> _ISort:
    while isinstance(s, _Cell) and s.binding is not None:
        s = s.binding
    return s


def _occurs(cell: _Cell, s: _ISort) -> bool:
    s = _resolve(s)
    if s is cell:
        return True
    if isinstance(s, _IAdt):
        return any(_occurs(cell, a) for a in s.args)
    return False


def _to_isort(s: Sort) -> _ISort:
    if isinstance(s, AdtSort):
        return _IAdt(s.name, tuple(_to_isort(a) for a in s.args))
    return s


def _isort_str(s: _ISort) -> str:
    s = _resolve(s)
    if isinstance(s, _Cell):
        return "?"
    if isinstance(s, _IAdt):
        if not s.args:
            return s.name
        return f"{s.name}({', '.join(_isort_str(a) for a in s.args)})"
    return ir.sort_str(s)


# ---------------------------------------------------------------------------
# The checker

class _Checker:
    def __init__(self, raw: P.RawProgram):
        self.raw = raw
        self.path = raw.path
        self.program = Program()
        self.program.datas["list"] = _BUILTIN_LIST
        self.ctor_home: dict[str, str] = {"nil": "list", "cons": "list"}
        self.slots: dict[str, list[_ISort]] = {}
        self.clause_envs: list[dict[str, _Cell]] = []
        self.raw_clauses: list[P.RawClause] = []
        self.ctor_isorts: dict[int, _ISort] = {}  # keyed by id(raw node)

    def err(self, msg: str, node=None) -> SortError:
        if node is not None:
            return SortError(f"{self.path}:{node.line}:{node.col}: {msg}")
        return SortError(f"{self.path}: {msg}")

    # -- data declarations

    def do_datas(self):
        for item in self.raw.items:
            if not isinstance(item, P.RawData):
                continue
            if item.name in self.program.datas or item.name in ("int", "bool"):
                raise self.err(f"data type {item.name} declared twice", item)
            if len(set(item.params)) != len(item.params):
                raise self.err("repeated sort parameter", item)
            self.program.datas[item.name] = DataDecl(item.name,
                                                     tuple(item.params), ())
        for item in self.raw.items:
            if not isinstance(item, P.RawData):
                continue
            ctors = []
            for cname, fields, line, col in item.ctors:
                if cname in self.ctor_home:
                    raise self.err(
                        f"constructor {cname} already belongs to "
                        f"{self.ctor_home[cname]}", item)
                self.ctor_home[cname] = item.name
                fsorts = tuple(self.sort_of(f, set(item.params)) for f in fields)
                ctors.append(CtorDecl(cname, fsorts))
            self.program.datas[item.name] = replace(
                self.program.datas[item.name], ctors=tuple(ctors))

    def sort_of(self, rs: P.RawSort, params: set[str] = frozenset()) -> Sort:
        if rs.is_var:
            if rs.name not in params:
                raise self.err(f"unbound sort parameter {rs.name}", rs)
            return SortVar(rs.name)
        if rs.name in ("int", "bool"):
            if rs.args:
                raise self.err(f"{rs.name} takes no arguments", rs)
            return BasicSort(rs.name)
        decl = self.program.datas.get(rs.name)
        if decl is None:
            raise self.err(f"unknown sort {rs.name}", rs)
        if len(rs.args) != len(decl.params):
            raise self.err(
                f"{rs.name} expects {len(decl.params)} argument(s)", rs)
        return AdtSort(rs.name, tuple(self.sort_of(a, params) for a in rs.args))

    # -- predicate and catamorphism declarations

    def do_decls(self):
        for item in self.raw.items:
            if isinstance(item, P.RawPred):
                self.check_pred_name(item.name, item)
                sorts = tuple(self.sort_of(s) for s in item.sorts)
                self.program.preds[item.name] = PredDecl(item.name, sorts,
                                                         declared=True)
            elif isinstance(item, P.RawCata):
                self.check_pred_name(item.name, item)
                ins, outs = [], []
                adt: Optional[Sort] = None
                for label, rs in item.slots:
                    s = self.sort_of(rs)
                    if label == "adt":
                        if not ir.is_adt(s):
                            raise self.err(
                                f"the adt slot of {item.name} must be a data "
                                f"sort, not {ir.sort_str(s)}", item)
                        adt = s
                    elif ir.is_adt(s):
                        raise self.err(
                            f"{label} slot of {item.name} must be basic; "
                            "only the adt slot may carry a data sort", item)
                    elif label == "in":
                        ins.append(s)
                    else:
                        outs.append(s)
                assert isinstance(adt, AdtSort)
                decl = CataDecl(item.name, tuple(ins), adt, tuple(outs))
                self.program.catas[item.name] = decl
                self.program.preds[item.name] = PredDecl(item.name, decl.sorts,
                                                         declared=True)

    def check_pred_name(self, name: str, node):
        if name in _RESERVED:
            raise self.err(f"{name} is reserved", node)
        if name in self.ctor_home:
            raise self.err(f"{name} is already a constructor", node)
        if name in self.program.preds:
            raise self.err(f"{name} declared twice", node)

    # -- predicate discovery over clauses

    def do_discovery(self):
        arity_at: dict[str, P.PExpr] = {}
        for item in self.raw.items:
            if not isinstance(item, P.RawClause):
                continue
            self.raw_clauses.append(item)
            for app in self.clause_atoms(item):
                known = self.slots.get(app.name)
                if known is None and app.name in self.program.preds:
                    decl = self.program.preds[app.name]
                    self.slots[app.name] = [_to_isort(s) for s in decl.sorts]
                    known = self.slots[app.name]
                if known is None:
                    self.slots[app.name] = [_Cell() for _ in app.args]
                    arity_at[app.name] = app
                elif len(known) != len(app.args):
                    raise self.err(
                        f"{app.name} used with {len(app.args)} argument(s) "
                        f"but has {len(known)} elsewhere", app)

    def clause_atoms(self, cl: P.RawClause):
        """Head and body atom occurrences of a raw clause."""
        if cl.head is not None:
            if cl.head.name in self.ctor_home:
                raise self.err(
                    f"constructor {cl.head.name} used as a clause head",
                    cl.head)
            if cl.head.name in _RESERVED:
                raise self.err(f"{cl.head.name} cannot head a clause", cl.head)
            yield cl.head
        for e in cl.body:
            if isinstance(e, P.PApp):
                if e.name in self.ctor_home:
                    raise self.err(
                        f"constructor {e.name} used as a body atom", e)
                yield e

    # -- inference walk

    def do_inference(self):
        for cl in self.raw_clauses:
            env: dict[str, _Cell] = {}
            self.clause_envs.append(env)
            for app in ([cl.head] if cl.head else []) + [
                    e for e in cl.body if isinstance(e, P.PApp)]:
                for i, arg in enumerate(app.args):
                    self.unify(self.infer(arg, env), self.slots[app.name][i],
                               arg if hasattr(arg, "line") else app)
            for e in cl.body:
                if not isinstance(e, P.PApp):
                    self.unify(self.infer(e, env), BOOL, e)

    def infer(self, e: P.PExpr, env: dict[str, _Cell]) -> _ISort:
        if isinstance(e, P.PVar):
            return env.setdefault(e.name, _Cell())
        if isinstance(e, P.PInt):
            return INT
        if isinstance(e, P.PBool):
            return BOOL
        if isinstance(e, P.PApp):
            home = self.ctor_home.get(e.name)
            if home is None:
                if e.name in self.slots or e.name in self.program.preds:
                    raise self.err(
                        f"predicate {e.name} used inside an expression", e)
                raise self.err(f"unknown function symbol {e.name}", e)
            decl = self.program.datas[home]
            args = {p: _Cell() for p in decl.params}
            ctor = next(c for c in decl.ctors if c.name == e.name)
            if len(ctor.fields) != len(e.args):
                raise self.err(
                    f"{e.name} expects {len(ctor.fields)} argument(s)", e)
            for f, a in zip(ctor.fields, e.args):
                self.unify(self.infer(a, env), self.inst(f, args), e)
            result = _IAdt(home, tuple(args[p] for p in decl.params))
            self.ctor_isorts[id(e)] = result
            return result
        if isinstance(e, P.PBin):
            if e.op in ("+", "-", "*"):
                self.unify(self.infer(e.lhs, env), INT, e)
                self.unify(self.infer(e.rhs, env), INT, e)
                return INT
            if e.op in ("<", "=<", ">=", ">"):
                self.unify(self.infer(e.lhs, env), INT, e)
                self.unify(self.infer(e.rhs, env), INT, e)
                return BOOL
            if e.op == "=":
                self.unify(self.infer(e.lhs, env), self.infer(e.rhs, env), e)
                return BOOL
            self.unify(self.infer(e.lhs, env), BOOL, e)
            self.unify(self.infer(e.rhs, env), BOOL, e)
            return BOOL
        if isinstance(e, P.PUn):
            want = INT if e.op == "-" else BOOL
            self.unify(self.infer(e.arg, env), want, e)
            return want
        if isinstance(e, P.PIte):
            self.unify(self.infer(e.cond, env), BOOL, e)
            s = self.infer(e.then, env)
            self.unify(self.infer(e.other, env), s, e)
            return s
        raise TypeError(e)

    def inst(self, s: Sort, args: dict[str, _Cell]) -> _ISort:
        if isinstance(s, SortVar):
            return args[s.name]
        if isinstance(s, AdtSort):
            return _IAdt(s.name, tuple(self.inst(a, args) for a in s.args))
        return s

    def unify(self, s1: _ISort, s2: _ISort, node):
        s1, s2 = _resolve(s1), _resolve(s2)
        if s1 is s2:
            return
        if isinstance(s1, _Cell):
            if _occurs(s1, s2):
                raise self.err("cannot construct an infinite sort", node)
            s1.binding = s2
            return
        if isinstance(s2, _Cell):
            self.unify(s2, s1, node)
            return
        if isinstance(s1, BasicSort) and isinstance(s2, BasicSort) \
                and s1 == s2:
            return
        if isinstance(s1, _IAdt) and isinstance(s2, _IAdt) \
                and s1.name == s2.name and len(s1.args) == len(s2.args):
            for a, b in zip(s1.args, s2.args):
                self.unify(a, b, node)
            return
        raise self.err(
            f"sort mismatch: {_isort_str(s1)} vs {_isort_str(s2)}", node)

    def finalize(self, s: _ISort, what: str, node) -> Sort:
        s = _resolve(s)
        if isinstance(s, _Cell):
            raise self.err(
                f"cannot infer the sort of {what}; add a :- pred "
                "declaration", node)
        if isinstance(s, _IAdt):
            return AdtSort(s.name,
                           tuple(self.finalize(a, what, node) for a in s.args))
        return s

    # -- IR construction

    def do_build(self):
        for name, cells in self.slots.items():
            if name not in self.program.preds:
                node = next(
                    (app for cl in self.raw_clauses
                     for app in self.clause_atoms(cl) if app.name == name),
                    self.raw_clauses[0] if self.raw_clauses else None)
                sorts = tuple(
                    self.finalize(c, f"argument {i + 1} of {name}", node)
                    for i, c in enumerate(cells))
                self.program.preds[name] = PredDecl(name, sorts)
        for cl, env in zip(self.raw_clauses, self.clause_envs):
            self.build_clause(cl, env)

    def build_clause(self, cl: P.RawClause, env: dict[str, _Cell]):
        vars_: dict[str, Var] = {
            name: Var(name, self.finalize(cell, f"variable {name}", cl))
            for name, cell in env.items()}

        head = None
        if cl.head is not None:
            head = Atom(cl.head.name,
                        tuple(self.build_term(a, vars_) for a in cl.head.args))
        constraints: list[ir.Constraint] = []
        atoms: list[Atom] = []
        for e in cl.body:
            if isinstance(e, P.PApp):
                atoms.append(Atom(e.name, tuple(self.build_term(a, vars_)
                                                for a in e.args)))
            else:
                constraints.extend(ir.conjuncts_of(self.build_constraint(e, vars_)))
        clause = Clause(head, tuple(constraints), tuple(atoms),
                        cid=self.program.supply.next_clause_id())
        try:
            clause = ir.normalize_clause(clause, self.program.supply)
        except ir.NormalizationError as exc:
            raise self.err(str(exc), cl)
        self.warn_on_conditionals(clause, cl)
        if clause.head is None:
            self.program.queries.append(clause)
        else:
            self.program.clauses.append(clause)
            self.check_kinds(clause, cl)

    def expr_sort(self, e: P.PExpr, vars_: dict[str, Var]) -> Sort:
        if isinstance(e, P.PVar):
            return vars_[e.name].sort
        if isinstance(e, P.PInt):
            return INT
        if isinstance(e, P.PBool):
            return BOOL
        if isinstance(e, P.PApp):
            return self.finalize(self.ctor_isorts[id(e)],
                                 f"constructor {e.name}", e)
        if isinstance(e, P.PBin):
            return BOOL if e.op not in ("+", "-", "*") else INT
        if isinstance(e, P.PUn):
            return INT if e.op == "-" else BOOL
        if isinstance(e, P.PIte):
            return self.expr_sort(e.then, vars_)
        raise TypeError(e)

    def build_term(self, e: P.PExpr, vars_: dict[str, Var]) -> ir.Term:
        if isinstance(e, P.PVar):
            return vars_[e.name]
        if isinstance(e, P.PInt):
            return ir.IntConst(e.value)
        if isinstance(e, P.PBool):
            return ir.BoolConst(e.value)
        if isinstance(e, P.PApp):
            sort = self.expr_sort(e, vars_)
            assert isinstance(sort, AdtSort)
            return ir.Ctor(e.name,
                           tuple(self.build_term(a, vars_) for a in e.args),
                           sort)
        if isinstance(e, P.PIte):
            then = self.build_term(e.then, vars_)
            other = self.build_term(e.other, vars_)
            return ir.TermIte(self.build_constraint(e.cond, vars_), then, other)
        if isinstance(e, (P.PBin, P.PUn)):
            return self.build_arith(e, vars_)
        raise TypeError(e)

    def build_arith(self, e: P.PExpr, vars_: dict[str, Var]) -> ir.Term:
        if isinstance(e, P.PUn) and e.op == "-":
            return ir.lin_add(ir.IntConst(0), self.build_arith(e.arg, vars_), -1)
        if isinstance(e, P.PBin) and e.op in ("+", "-"):
            lhs = self.build_arith(e.lhs, vars_)
            rhs = self.build_arith(e.rhs, vars_)
            try:
                return ir.lin_add(lhs, rhs, 1 if e.op == "+" else -1)
            except ir.SortMismatch:
                raise self.err("conditional terms cannot appear under "
                               "arithmetic; name them with an equality", e)
        if isinstance(e, P.PBin) and e.op == "*":
            lhs = self.build_arith(e.lhs, vars_)
            rhs = self.build_arith(e.rhs, vars_)
            try:
                lc, ld = ir.lin_of(lhs)
                rc, rd = ir.lin_of(rhs)
            except ir.SortMismatch:
                raise self.err("conditional terms cannot appear under "
                               "arithmetic; name them with an equality", e)
            if lc and rc:
                raise self.err("nonlinear multiplication", e)
            if lc:
                return ir.lin({v: c * rd for v, c in lc.items()}, ld * rd)
            return ir.lin({v: c * ld for v, c in rc.items()}, ld * rd)
        return self.build_term(e, vars_)

    def build_constraint(self, e: P.PExpr, vars_: dict[str, Var]) -> ir.Constraint:
        if isinstance(e, P.PBool):
            return ir.CBool(e.value)
        if isinstance(e, P.PVar):
            v = vars_[e.name]
            if v.sort != BOOL:
                raise self.err(f"{e.name} is not boolean", e)
            return ir.BVar(v)
        if isinstance(e, P.PUn) and e.op == "~":
            return ir.Not(self.build_constraint(e.arg, vars_))
        if isinstance(e, P.PIte):
            return ir.CIte(self.build_constraint(e.cond, vars_),
                           self.build_constraint(e.then, vars_),
                           self.build_constraint(e.other, vars_))
        if isinstance(e, P.PBin):
            if e.op in ("&", "|", "=>"):
                cls = {"&": ir.And, "|": ir.Or, "=>": ir.Implies}[e.op]
                return cls(self.build_constraint(e.lhs, vars_),
                           self.build_constraint(e.rhs, vars_))
            if e.op in ("<", "=<", ">=", ">"):
                return ir.Rel(e.op, self.build_arith(e.lhs, vars_),
                              self.build_arith(e.rhs, vars_))
            if e.op == "=":
                lsort = self.expr_sort(e.lhs, vars_)
                if lsort == BOOL:
                    return ir.CEq(self.build_constraint(e.lhs, vars_),
                                  self.build_constraint(e.rhs, vars_))
                if ir.is_adt(lsort):
                    raise self.err(
                        "equality between data terms is not a constraint; "
                        "bind them through an atom instead", e)
                return ir.Rel("=", self.build_arith(e.lhs, vars_),
                              self.build_arith(e.rhs, vars_))
        if isinstance(e, P.PApp):
            raise self.err(
                f"atom {e.name} nested inside a constraint expression", e)
        raise self.err("expected a constraint", e)

    # -- post-build checks

    def warn_on_conditionals(self, clause: Clause, node):
        def nested(t: ir.Term) -> bool:
            if isinstance(t, ir.TermIte):
                return any(isinstance(b, ir.TermIte) or nested(b)
                           for b in (t.then, t.other))
            return False

        for c in clause.constraint:
            if not isinstance(c, ir.Rel):
                continue
            ites = [t for t in (c.lhs, c.rhs) if isinstance(t, ir.TermIte)]
            irregular = (ites and c.op != "=") or len(ites) == 2 \
                or any(nested(t) for t in ites)
            if irregular:
                self.program.warnings.append(
                    f"{self.path}:{node.line}: conditional term outside the "
                    f"t = ite(c, t1, t2) shape in {ir.constraint_str(c)}")

    def check_kinds(self, clause: Clause, node):
        assert clause.head is not None
        head_is_cata = clause.head.pred in self.program.catas
        for a in clause.body:
            if (a.pred in self.program.catas) != head_is_cata:
                kind = "catamorphism" if head_is_cata else "program"
                raise self.err(
                    f"{kind} clause for {clause.head.pred} cannot call "
                    f"{a.pred}; catamorphism and program atoms mix only in "
                    "queries", node)

    # -- abstractions and spec overrides

    def do_abstractions(self):
        for item in self.raw.items:
            if isinstance(item, P.RawAbs):
                self.build_abstraction(item)
            elif isinstance(item, P.RawSpec):
                self.build_override(item)

    def template_atoms(self, raws: list[P.PApp], node,
                       fixed: dict[str, Var]) -> tuple[list[Atom], dict[str, Var]]:
        vars_: dict[str, Var] = dict(fixed)
        atoms: list[Atom] = []
        for app in raws:
            decl = self.program.catas.get(app.name)
            if decl is None:
                raise self.err(
                    f"{app.name} is not a declared catamorphism", app)
            if len(app.args) != len(decl.sorts):
                raise self.err(f"{app.name} expects {len(decl.sorts)} "
                               "argument(s)", app)
            args = []
            for a, s in zip(app.args, decl.sorts):
                if not isinstance(a, P.PVar):
                    raise self.err("template arguments must be variables", app)
                v = vars_.get(a.name)
                if v is None:
                    v = Var(a.name, s)
                    vars_[a.name] = v
                elif v.sort != s:
                    raise self.err(
                        f"{a.name} used at {ir.sort_str(v.sort)} and "
                        f"{ir.sort_str(s)}", app)
                args.append(v)
            atoms.append(Atom(app.name, tuple(args)))
        return atoms, vars_

    def build_abstraction(self, item: P.RawAbs):
        sort = self.sort_of(item.sort)
        if not isinstance(sort, AdtSort):
            raise self.err("cata_abs attaches to a data sort", item)
        if sort in self.program.abstractions:
            raise self.err(
                f"{ir.sort_str(sort)} already has an abstraction", item)
        atoms, _ = self.template_atoms(item.atoms, item, {})
        adt_var: Optional[Var] = None
        seen_preds: set[str] = set()
        outputs: list[Var] = []
        inputs: list[Var] = []
        for atom in atoms:
            decl = self.program.catas[atom.pred]
            if decl.adt != sort:
                raise self.err(
                    f"{atom.pred} folds {ir.sort_str(decl.adt)}, not "
                    f"{ir.sort_str(sort)}", item)
            if atom.pred in seen_preds:
                raise self.err(
                    f"{atom.pred} listed twice; one atom per catamorphism",
                    item)
            seen_preds.add(atom.pred)
            t = atom.args[decl.adt_index]
            assert isinstance(t, Var)
            if adt_var is None:
                adt_var = t
            elif adt_var != t:
                raise self.err(
                    "all atoms must fold the same template variable", item)
            outputs.extend(atom.args[decl.adt_index + 1:])  # type: ignore[arg-type]
            for v in atom.args[:decl.adt_index]:
                assert isinstance(v, Var)
                if v not in inputs:
                    inputs.append(v)
        assert adt_var is not None
        if len(set(outputs)) != len(outputs):
            raise self.err("output variables must be pairwise distinct", item)
        if set(outputs) & set(inputs) or adt_var in set(outputs):
            raise self.err("output variables must be fresh", item)
        self.program.abstractions[sort] = ir.Abstraction(
            sort, adt_var, tuple(inputs), tuple(atoms))

    def build_override(self, item: P.RawSpec):
        pred = item.head.name
        decl = self.program.preds.get(pred)
        if decl is None:
            raise self.err(f"spec for unknown predicate {pred}", item)
        if pred in self.program.catas:
            raise self.err("catamorphisms cannot carry specs", item)
        if pred in self.program.overrides:
            raise self.err(f"{pred} already has a spec", item)
        if len(item.head.args) != len(decl.sorts):
            raise self.err(f"{pred} has {len(decl.sorts)} argument(s)", item)
        params: list[Var] = []
        fixed: dict[str, Var] = {}
        for a, s in zip(item.head.args, decl.sorts):
            if not isinstance(a, P.PVar) or a.name in fixed:
                raise self.err(
                    "spec head arguments must be distinct variables", item)
            v = Var(a.name, s)
            fixed[a.name] = v
            params.append(v)
        atoms, vars_ = self.template_atoms(item.atoms, item, fixed)
        param_set = set(params)
        used: set[tuple[str, Var]] = set()
        outputs: list[Var] = []
        for atom in atoms:
            cdecl = self.program.catas[atom.pred]
            t = atom.args[cdecl.adt_index]
            assert isinstance(t, Var)
            if t not in param_set:
                raise self.err(
                    f"{atom.pred} must fold one of {pred}'s arguments", item)
            if (atom.pred, t) in used:
                raise self.err(
                    f"two {atom.pred} atoms over {t.name}; they would "
                    "coincide", item)
            used.add((atom.pred, t))
            for v in atom.args[:cdecl.adt_index]:
                assert isinstance(v, Var)
                if v in param_set:
                    raise self.err(
                        f"input {v.name} must be fresh, not a {pred} "
                        "argument", item)
            outputs.extend(atom.args[cdecl.adt_index + 1:])  # type: ignore[arg-type]
        if len(set(outputs)) != len(outputs) or set(outputs) & param_set:
            raise self.err("spec outputs must be distinct fresh variables",
                           item)
        ins = {v for a in atoms
               for v in a.args[:self.program.catas[a.pred].adt_index]}
        if ins & set(outputs):
            raise self.err("spec outputs must not overlap inputs", item)
        self.program.overrides[pred] = ir.SpecOverride(pred, tuple(params),
                                                       tuple(atoms))


def sort_check(raw: P.RawProgram) -> Program:
    c = _Checker(raw)
    c.do_datas()
    c.do_decls()
    c.do_discovery()
    c.do_inference()
    c.do_build()
    c.do_abstractions()
    return c.program


def load_program(text: str, path: str = "<input>") -> Program:
    return sort_check(P.parse_program(text, path))


# ---------------------------------------------------------------------------
# Query shape

def validate_query(program: Program, query: Clause) -> Clause:
    """Check the admissible query shape; returns the (possibly rewritten)
    query with identical catamorphism atoms merged."""
    assert query.head is None
    query = _merge_duplicate_catas(program, query)
    catas = [a for a in query.body if program.is_cata(a.pred)]
    progs = [a for a in query.body if not program.is_cata(a.pred)]
    if len(progs) > 1:
        raise QueryShapeError(
            "a query takes at most one program atom; split "
            f"`{ir.clause_str(query)}` into several queries or fold the "
            "atoms into one predicate")
    prog_vars = set(v for a in progs for v in ir.atom_vars(a))
    inputs: set[Var] = set()
    outputs: list[Var] = []
    seen: set[tuple[str, Var]] = set()
    for a in catas:
        decl = program.catas[a.pred]
        t = a.args[decl.adt_index]
        assert isinstance(t, Var)
        if (a.pred, t) in seen:
            raise QueryShapeError(
                f"two {a.pred} atoms over {t.name} with different inputs; "
                "equate their inputs so they can be merged")
        seen.add((a.pred, t))
        inputs.update(a.args[:decl.adt_index])  # type: ignore[arg-type]
        outputs.extend(a.args[decl.adt_index + 1:])  # type: ignore[arg-type]
    if len(set(outputs)) != len(outputs):
        raise QueryShapeError(
            f"catamorphism outputs must be pairwise distinct in "
            f"`{ir.clause_str(query)}`")
    bad = set(outputs) & (inputs | prog_vars)
    if bad:
        names = ", ".join(sorted(v.name for v in bad))
        raise QueryShapeError(
            f"catamorphism outputs {names} must not reappear as inputs or "
            f"program-atom arguments; name them apart with an equality")
    return query


def _merge_duplicate_catas(program: Program, clause: Clause) -> Clause:
    body = list(clause.body)
    changed = True
    while changed:
        changed = False
        for i in range(len(body)):
            for j in range(i + 1, len(body)):
                a, b = body[i], body[j]
                if a.pred != b.pred or not program.is_cata(a.pred):
                    continue
                decl = program.catas[a.pred]
                k = decl.adt_index
                if a.args[k] != b.args[k] or a.args[:k] != b.args[:k]:
                    continue
                subst: ir.Subst = {}
                for va, vb in zip(a.args[k + 1:], b.args[k + 1:]):
                    assert isinstance(vb, Var)
                    subst[vb] = va
                del body[j]
                clause = ir.apply_clause(
                    subst, replace(clause, body=tuple(body)))
                body = list(clause.body)
                changed = True
                break
            if changed:
                break
    return replace(clause, body=tuple(body))


# ---------------------------------------------------------------------------
# Coverage

def coverage_pred(program: Program, sort: AdtSort) -> str:
    """Name of the total structural predicate for `sort`, synthesizing its
    clauses on first use."""
    name = program.coverage_preds.get(sort)
    if name is not None:
        return name
    base = f"true_{ir.mangle_sort(sort)}"
    name = base
    k = 1
    while name in program.preds:
        k += 1
        name = f"{base}_{k}"
    program.coverage_preds[sort] = name
    program.preds[name] = PredDecl(name, (sort,), synthetic=True)
    for ctor in program.ctors_of(sort):
        fields = [program.supply.fresh_var(s) for s in ctor.fields]
        body = tuple(Atom(coverage_pred(program, v.sort), (v,))
                     for v in fields if ir.is_adt(v.sort))
        program.clauses.append(Clause(
            Atom(name, (ir.Ctor(ctor.name, tuple(fields), sort),)),
            (), body, cid=program.supply.next_clause_id()))
    return name


def ensure_cata_coverage(program: Program, clause: Clause) -> Clause:
    """Append `true_<sort>` atoms so every catamorphism atom's ADT variable
    is an argument of some program atom in the body."""
    covered: set[Var] = set()
    for a in clause.body:
        if not program.is_cata(a.pred):
            covered.update(t for t in a.args if isinstance(t, Var))
    additions: list[Atom] = []
    added: set[Var] = set()
    for a in clause.body:
        if not program.is_cata(a.pred):
            continue
        t = a.args[program.catas[a.pred].adt_index]
        assert isinstance(t, Var)
        if t not in covered and t not in added:
            assert isinstance(t.sort, AdtSort)
            additions.append(Atom(coverage_pred(program, t.sort), (t,)))
            added.add(t)
    if not additions:
        return clause
    return replace(clause, body=clause.body + tuple(additions))
