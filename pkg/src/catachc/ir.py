"""Core representation for constrained Horn clauses over algebraic data types.

Sorts are `int`, `bool`, or instantiated data types. Terms are variables,
constants, constructor applications, linear integer expressions, and integer
conditionals. Constraints are the usual boolean combinations of linear
relations and boolean variables; constraints never contain ADT terms, so ADT
equality is expressible only through unification, never in a constraint.

A clause is `head :- constraint, atoms` with `head = None` standing for
`false` (a query). Atom arguments in clause bodies are variables once a
clause has been through `normalize_clause`; heads may keep constructor
patterns and repeated variables.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Union


class CataChcError(Exception):
    """Base class for all errors raised by this package."""


class UnificationFailure(CataChcError):
    """Two terms have no unifier."""


class SortMismatch(CataChcError):
    """Ill-sorted input reached the unifier or a substitution."""


class NormalizationError(CataChcError):
    """A clause cannot be brought into body-variable normal form."""


# ---------------------------------------------------------------------------
# Sorts

@dataclass(frozen=True)
class BasicSort:
    name: str


@dataclass(frozen=True)
class SortVar:
    """Placeholder inside polymorphic data declarations only."""

    name: str


@dataclass(frozen=True)
class AdtSort:
    name: str
    args: tuple["Sort", ...] = ()


Sort = Union[BasicSort, AdtSort, SortVar]

INT = BasicSort("int")
BOOL = BasicSort("bool")


def is_adt(sort: Sort) -> bool:
    return isinstance(sort, AdtSort)


def sort_str(sort: Sort) -> str:
    if isinstance(sort, BasicSort):
        return sort.name
    if isinstance(sort, SortVar):
        return sort.name
    if not sort.args:
        return sort.name
    return f"{sort.name}({', '.join(sort_str(a) for a in sort.args)})"


def mangle_sort(sort: Sort) -> str:
    """Identifier-safe rendering, e.g. list(int) -> list_int."""
    if isinstance(sort, (BasicSort, SortVar)):
        return sort.name
    if not sort.args:
        return sort.name
    return sort.name + "_" + "_".join(mangle_sort(a) for a in sort.args)


# ---------------------------------------------------------------------------
# Terms

@dataclass(frozen=True)
class Var:
    name: str
    sort: Sort


@dataclass(frozen=True)
class IntConst:
    value: int


@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class Ctor:
    name: str
    args: tuple["Term", ...]
    sort: AdtSort


@dataclass(frozen=True)
class LinExpr:
    """a1*X1 + ... + an*Xn + c with nonzero coefficients, name-sorted vars."""

    coeffs: tuple[tuple[Var, int], ...]
    const: int


@dataclass(frozen=True)
class TermIte:
    cond: "Constraint"
    then: "Term"
    other: "Term"


Term = Union[Var, IntConst, BoolConst, Ctor, LinExpr, TermIte]


def term_sort(t: Term) -> Sort:
    if isinstance(t, Var):
        return t.sort
    if isinstance(t, IntConst):
        return INT
    if isinstance(t, BoolConst):
        return BOOL
    if isinstance(t, Ctor):
        return t.sort
    if isinstance(t, LinExpr):
        return INT
    if isinstance(t, TermIte):
        return term_sort(t.then)
    raise TypeError(t)


def lin(coeffs: dict[Var, int], const: int) -> Term:
    """Build the simplest term denoting the given linear combination.

    >>> x = Var("X", INT)
    >>> lin({x: 1}, 0)
    Var(name='X', sort=BasicSort(name='int'))
    >>> lin({}, 3)
    IntConst(value=3)
    """
    items = tuple(sorted(((v, c) for v, c in coeffs.items() if c != 0),
                         key=lambda it: it[0].name))
    if not items:
        return IntConst(const)
    if len(items) == 1 and const == 0 and items[0][1] == 1:
        return items[0][0]
    return LinExpr(items, const)


def lin_of(t: Term) -> tuple[dict[Var, int], int]:
    """Decompose an integer term into (coefficients, constant).

    Raises SortMismatch for terms outside the linear fragment (conditionals,
    non-integer terms); callers that may meet those must catch it.
    """
    if isinstance(t, Var):
        if t.sort != INT:
            raise SortMismatch(f"non-integer variable {t.name} in linear term")
        return {t: 1}, 0
    if isinstance(t, IntConst):
        return {}, t.value
    if isinstance(t, LinExpr):
        return dict(t.coeffs), t.const
    raise SortMismatch(f"term is not linear: {term_str(t)}")


def lin_add(t1: Term, t2: Term, k: int = 1) -> Term:
    """t1 + k*t2 for linear integer terms."""
    c1, d1 = lin_of(t1)
    c2, d2 = lin_of(t2)
    for v, c in c2.items():
        c1[v] = c1.get(v, 0) + k * c
    return lin(c1, d1 + k * d2)


# ---------------------------------------------------------------------------
# Constraints

@dataclass(frozen=True)
class Rel:
    """t1 op t2 with op one of = < =< >= >, over integer terms."""

    op: str
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class BVar:
    var: Var


@dataclass(frozen=True)
class CBool:
    value: bool


@dataclass(frozen=True)
class Not:
    arg: "Constraint"


@dataclass(frozen=True)
class And:
    lhs: "Constraint"
    rhs: "Constraint"


@dataclass(frozen=True)
class Or:
    lhs: "Constraint"
    rhs: "Constraint"


@dataclass(frozen=True)
class Implies:
    lhs: "Constraint"
    rhs: "Constraint"


@dataclass(frozen=True)
class CEq:
    """Equivalence between two boolean constraints."""

    lhs: "Constraint"
    rhs: "Constraint"


@dataclass(frozen=True)
class CIte:
    cond: "Constraint"
    then: "Constraint"
    other: "Constraint"


Constraint = Union[Rel, BVar, CBool, Not, And, Or, Implies, CEq, CIte]

REL_OPS = ("=", "<", "=<", ">=", ">")


def bool_term_to_constraint(t: Term) -> Constraint:
    """Lift a boolean-sorted term into the constraint language."""
    if isinstance(t, BoolConst):
        return CBool(t.value)
    if isinstance(t, Var):
        if t.sort != BOOL:
            raise SortMismatch(f"{t.name} is not boolean")
        return BVar(t)
    if isinstance(t, TermIte):
        return CIte(t.cond, bool_term_to_constraint(t.then),
                    bool_term_to_constraint(t.other))
    raise SortMismatch(f"term has no boolean reading: {term_str(t)}")


def conjuncts_of(c: Constraint) -> tuple[Constraint, ...]:
    """Flatten top-level conjunctions; drop `true`."""
    if isinstance(c, And):
        return conjuncts_of(c.lhs) + conjuncts_of(c.rhs)
    if isinstance(c, CBool) and c.value:
        return ()
    return (c,)


# ---------------------------------------------------------------------------
# Atoms and clauses

@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Clause:
    """`head :- constraint, body.` A None head is the goal `false`."""

    head: Optional[Atom]
    constraint: tuple[Constraint, ...]
    body: tuple[Atom, ...]
    cid: int = field(default=-1, compare=False)

    @property
    def is_query(self) -> bool:
        return self.head is None


def term_vars(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Ctor):
        for a in t.args:
            yield from term_vars(a)
    elif isinstance(t, LinExpr):
        for v, _ in t.coeffs:
            yield v
    elif isinstance(t, TermIte):
        yield from constraint_vars(t.cond)
        yield from term_vars(t.then)
        yield from term_vars(t.other)


def constraint_vars(c: Constraint) -> Iterator[Var]:
    if isinstance(c, Rel):
        yield from term_vars(c.lhs)
        yield from term_vars(c.rhs)
    elif isinstance(c, BVar):
        yield c.var
    elif isinstance(c, Not):
        yield from constraint_vars(c.arg)
    elif isinstance(c, (And, Or, Implies, CEq)):
        yield from constraint_vars(c.lhs)
        yield from constraint_vars(c.rhs)
    elif isinstance(c, CIte):
        yield from constraint_vars(c.cond)
        yield from constraint_vars(c.then)
        yield from constraint_vars(c.other)


def atom_vars(a: Atom) -> Iterator[Var]:
    for t in a.args:
        yield from term_vars(t)


def clause_var_occurrences(cl: Clause) -> Iterator[Var]:
    if cl.head is not None:
        yield from atom_vars(cl.head)
    for c in cl.constraint:
        yield from constraint_vars(c)
    for a in cl.body:
        yield from atom_vars(a)


def ordered_vars(occurrences: Iterable[Var]) -> tuple[Var, ...]:
    seen: dict[Var, None] = {}
    for v in occurrences:
        seen.setdefault(v, None)
    return tuple(seen)


def clause_vars(cl: Clause) -> tuple[Var, ...]:
    return ordered_vars(clause_var_occurrences(cl))


def adt_vars(args_source) -> tuple[Var, ...]:
    """ADT-sorted variables of an atom or clause, in occurrence order."""
    if isinstance(args_source, Atom):
        occ = atom_vars(args_source)
    elif isinstance(args_source, Clause):
        occ = clause_var_occurrences(args_source)
    else:
        occ = args_source
    return tuple(v for v in ordered_vars(occ) if is_adt(v.sort))


# ---------------------------------------------------------------------------
# Substitution

Subst = dict[Var, Term]


def apply_term(s: Subst, t: Term) -> Term:
    if isinstance(t, Var):
        return s.get(t, t)
    if isinstance(t, (IntConst, BoolConst)):
        return t
    if isinstance(t, Ctor):
        return Ctor(t.name, tuple(apply_term(s, a) for a in t.args), t.sort)
    if isinstance(t, LinExpr):
        acc: dict[Var, int] = {}
        const = t.const
        for v, c in t.coeffs:
            img = s.get(v, v)
            ic, id_ = lin_of(img)
            for w, cw in ic.items():
                acc[w] = acc.get(w, 0) + c * cw
            const += c * id_
        return lin(acc, const)
    if isinstance(t, TermIte):
        return TermIte(apply_constraint(s, t.cond), apply_term(s, t.then),
                       apply_term(s, t.other))
    raise TypeError(t)


def apply_constraint(s: Subst, c: Constraint) -> Constraint:
    if isinstance(c, Rel):
        return Rel(c.op, apply_term(s, c.lhs), apply_term(s, c.rhs))
    if isinstance(c, BVar):
        img = s.get(c.var, c.var)
        return bool_term_to_constraint(img)
    if isinstance(c, CBool):
        return c
    if isinstance(c, Not):
        return Not(apply_constraint(s, c.arg))
    if isinstance(c, (And, Or, Implies, CEq)):
        return type(c)(apply_constraint(s, c.lhs), apply_constraint(s, c.rhs))
    if isinstance(c, CIte):
        return CIte(apply_constraint(s, c.cond), apply_constraint(s, c.then),
                    apply_constraint(s, c.other))
    raise TypeError(c)


def apply_atom(s: Subst, a: Atom) -> Atom:
    return Atom(a.pred, tuple(apply_term(s, t) for t in a.args))


def apply_clause(s: Subst, cl: Clause) -> Clause:
    return replace(
        cl,
        head=None if cl.head is None else apply_atom(s, cl.head),
        constraint=tuple(apply_constraint(s, c) for c in cl.constraint),
        body=tuple(apply_atom(s, a) for a in cl.body),
    )


def compose(s: Subst, binding: Subst) -> Subst:
    """Apply `binding` after `s`; result is idempotent if both are."""
    out: Subst = {v: apply_term(binding, t) for v, t in s.items()}
    for v, t in binding.items():
        if v not in out:
            out[v] = t
    return {v: t for v, t in out.items() if t != v}


# ---------------------------------------------------------------------------
# Unification

def unify(pairs: list[tuple[Term, Term]]) -> Subst:
    """Most general unifier of the given term pairs.

    Raises UnificationFailure when no unifier exists and SortMismatch when
    the pairs are ill-sorted (distinct exceptions: the second means the
    input program is broken, the first is a normal transformation outcome).

    >>> x, y = Var("X", INT), Var("Y", INT)
    >>> unify([(x, y)]) == {x: y}
    True
    """
    subst: Subst = {}
    work = list(pairs)
    while work:
        a, b = work.pop(0)
        a = apply_term(subst, a)
        b = apply_term(subst, b)
        if a == b:
            continue
        if isinstance(a, Var):
            subst = _bind(subst, a, b)
        elif isinstance(b, Var):
            subst = _bind(subst, b, a)
        elif isinstance(a, Ctor) and isinstance(b, Ctor):
            if a.name != b.name:
                raise UnificationFailure(f"{a.name} vs {b.name}")
            if a.sort != b.sort or len(a.args) != len(b.args):
                raise SortMismatch(f"constructor {a.name} used at two sorts")
            work[0:0] = list(zip(a.args, b.args))
        elif term_sort(a) == INT and term_sort(b) == INT:
            subst = _solve_int(subst, a, b)
        elif isinstance(a, BoolConst) and isinstance(b, BoolConst):
            raise UnificationFailure("true vs false")
        elif term_sort(a) != term_sort(b):
            raise SortMismatch(
                f"cannot unify {sort_str(term_sort(a))} with {sort_str(term_sort(b))}")
        else:
            raise UnificationFailure(f"{term_str(a)} vs {term_str(b)}")
    return subst


def _bind(subst: Subst, v: Var, t: Term) -> Subst:
    if term_sort(t) != v.sort:
        raise SortMismatch(
            f"{v.name}:{sort_str(v.sort)} against a {sort_str(term_sort(t))} term")
    if v in term_vars(t):
        raise UnificationFailure(f"occurs check: {v.name} in {term_str(t)}")
    return compose(subst, {v: t})


def _solve_int(subst: Subst, a: Term, b: Term) -> Subst:
    try:
        coeffs, const = lin_of(lin_add(a, b, -1))
    except SortMismatch:
        raise UnificationFailure(
            f"cannot unify conditionals: {term_str(a)} vs {term_str(b)}")
    if not coeffs:
        if const == 0:
            return subst
        raise UnificationFailure(f"{const} = 0")
    for v in sorted(coeffs, key=lambda w: w.name):
        c = coeffs[v]
        if c in (1, -1):
            rest = {w: -cw * c for w, cw in coeffs.items() if w != v}
            return compose(subst, {v: lin(rest, -const * c)})
    raise UnificationFailure("no unit coefficient to isolate")


def unify_atoms(a: Atom, b: Atom) -> Subst:
    if a.pred != b.pred:
        raise UnificationFailure(f"{a.pred} vs {b.pred}")
    if len(a.args) != len(b.args):
        raise SortMismatch(f"{a.pred} used at two arities")
    return unify(list(zip(a.args, b.args)))


# ---------------------------------------------------------------------------
# Fresh names

@dataclass
class NameSupply:
    var_counter: int = 0
    pred_counter: int = 0
    clause_counter: int = 0

    def fresh_var(self, sort: Sort) -> Var:
        self.var_counter += 1
        return Var(f"V{self.var_counter}", sort)

    def fresh_pred(self, taken: Iterable[str] = (), hint: str = "") -> str:
        taken = set(taken)
        while True:
            self.pred_counter += 1
            name = f"new{'_' + hint if hint else ''}{self.pred_counter}"
            if name not in taken:
                return name

    def next_clause_id(self) -> int:
        self.clause_counter += 1
        return self.clause_counter


def rename_apart(cl: Clause, supply: NameSupply) -> Clause:
    s: Subst = {v: supply.fresh_var(v.sort) for v in clause_vars(cl)}
    return apply_clause(s, cl)


# ---------------------------------------------------------------------------
# Normal form

def normalize_clause(cl: Clause, supply: NameSupply) -> Clause:
    """Bring a clause into the body-variable normal form.

    Head atoms keep constructor patterns and repeated variables, but
    non-variable basic arguments (also inside patterns) move into equality
    conjuncts. Body atom arguments must end up as variables: basic terms get
    a fresh variable plus an equality, repeated basic variables are split,
    and non-variable ADT arguments are rejected (there is no ADT equality
    constraint to push them into). Idempotent.
    """
    eqs: list[Constraint] = []

    def flush_basic(t: Term) -> Var:
        v = supply.fresh_var(term_sort(t))
        if term_sort(t) == BOOL:
            eqs.append(CEq(BVar(v), bool_term_to_constraint(t)))
        else:
            eqs.append(Rel("=", v, t))
        return v

    def norm_head_arg(t: Term) -> Term:
        if isinstance(t, Var):
            return t
        if isinstance(t, Ctor):
            return Ctor(t.name, tuple(norm_head_arg(a) for a in t.args), t.sort)
        if is_adt(term_sort(t)):
            return t
        return flush_basic(t)

    head = cl.head
    if head is not None:
        head = Atom(head.pred, tuple(norm_head_arg(t) for t in head.args))

    body: list[Atom] = []
    for atom in cl.body:
        seen_basic: set[Var] = set()
        args: list[Term] = []
        for t in atom.args:
            if isinstance(t, Var):
                if not is_adt(t.sort):
                    if t in seen_basic:
                        v = supply.fresh_var(t.sort)
                        if t.sort == BOOL:
                            eqs.append(CEq(BVar(v), BVar(t)))
                        else:
                            eqs.append(Rel("=", v, t))
                        t = v
                    else:
                        seen_basic.add(t)
                args.append(t)
            elif is_adt(term_sort(t)):
                raise NormalizationError(
                    f"non-variable ADT argument {term_str(t)} in body atom "
                    f"{atom.pred}; name it in the head or a helper predicate")
            else:
                args.append(flush_basic(t))
        body.append(Atom(atom.pred, tuple(args)))

    constraint = []
    for c in cl.constraint:
        constraint.extend(conjuncts_of(c))
    return replace(cl, head=head, constraint=tuple(constraint) + tuple(eqs),
                   body=tuple(body))


# ---------------------------------------------------------------------------
# Printing

_LEVEL = {"Implies": 1, "Or": 2, "And": 3, "Not": 4}


def term_str(t: Term, names: Optional[dict[Var, str]] = None) -> str:
    def name(v: Var) -> str:
        return names[v] if names is not None else v.name

    if isinstance(t, Var):
        return name(t)
    if isinstance(t, IntConst):
        return str(t.value)
    if isinstance(t, BoolConst):
        return "true" if t.value else "false"
    if isinstance(t, Ctor):
        return _ctor_str(t, names)
    if isinstance(t, LinExpr):
        items = t.coeffs
        if names is not None:
            items = tuple(sorted(items, key=lambda it: names[it[0]]))
        parts: list[str] = []
        for v, c in items:
            mag = name(v) if abs(c) == 1 else f"{abs(c)}*{name(v)}"
            if not parts:
                parts.append(("-" if c < 0 else "") + mag)
            else:
                parts.append((" - " if c < 0 else " + ") + mag)
        if t.const or not parts:
            if not parts:
                parts.append(str(t.const))
            else:
                parts.append(f" - {-t.const}" if t.const < 0 else f" + {t.const}")
        return "".join(parts)
    if isinstance(t, TermIte):
        return (f"ite({constraint_str(t.cond, names)}, "
                f"{term_str(t.then, names)}, {term_str(t.other, names)})")
    raise TypeError(t)


def _ctor_str(t: Ctor, names) -> str:
    if t.name == "nil" and not t.args:
        return "[]"
    if t.name == "cons" and len(t.args) == 2:
        elems = [term_str(t.args[0], names)]
        tail = t.args[1]
        while isinstance(tail, Ctor) and tail.name == "cons":
            elems.append(term_str(tail.args[0], names))
            tail = tail.args[1]
        if isinstance(tail, Ctor) and tail.name == "nil":
            return "[" + ", ".join(elems) + "]"
        return "[" + ", ".join(elems) + "|" + term_str(tail, names) + "]"
    if not t.args:
        return t.name
    return f"{t.name}({', '.join(term_str(a, names) for a in t.args)})"


def constraint_str(c: Constraint, names: Optional[dict[Var, str]] = None,
                   level: int = 0) -> str:
    def wrap(s: str, my_level: int) -> str:
        return f"({s})" if my_level < level else s

    if isinstance(c, Rel):
        return wrap(f"{term_str(c.lhs, names)} {c.op} {term_str(c.rhs, names)}", 5)
    if isinstance(c, BVar):
        return term_str(c.var, names)
    if isinstance(c, CBool):
        return "true" if c.value else "false"
    if isinstance(c, Not):
        return wrap(f"~{constraint_str(c.arg, names, 5)}", 4)
    if isinstance(c, And):
        lv = _LEVEL["And"]
        return wrap(f"{constraint_str(c.lhs, names, lv)} & "
                    f"{constraint_str(c.rhs, names, lv)}", lv)
    if isinstance(c, Or):
        lv = _LEVEL["Or"]
        return wrap(f"{constraint_str(c.lhs, names, lv)} | "
                    f"{constraint_str(c.rhs, names, lv)}", lv)
    if isinstance(c, Implies):
        lv = _LEVEL["Implies"]
        return wrap(f"{constraint_str(c.lhs, names, lv + 1)} => "
                    f"{constraint_str(c.rhs, names, lv)}", lv)
    if isinstance(c, CEq):
        return wrap(f"{constraint_str(c.lhs, names, 6)} = "
                    f"{constraint_str(c.rhs, names, 6)}", 5)
    if isinstance(c, CIte):
        return (f"ite({constraint_str(c.cond, names)}, "
                f"{constraint_str(c.then, names)}, "
                f"{constraint_str(c.other, names)})")
    raise TypeError(c)


def atom_str(a: Atom, names: Optional[dict[Var, str]] = None) -> str:
    if not a.args:
        return a.pred
    return f"{a.pred}({', '.join(term_str(t, names) for t in a.args)})"


def clause_str(cl: Clause, names: Optional[dict[Var, str]] = None) -> str:
    head = "false" if cl.head is None else atom_str(cl.head, names)
    parts = [constraint_str(c, names) for c in cl.constraint]
    parts += [atom_str(a, names) for a in cl.body]
    if not parts:
        return f"{head}."
    return f"{head} :- {', '.join(parts)}."


# ---------------------------------------------------------------------------
# Canonical forms

_PERM_CAP = 40320  # 8!; tie groups larger than this fall back to one ordering


def normal_rel(c: Rel) -> Constraint:
    """Orient a linear relation as `expr op 0` with a sign-normal expr.

    Relations whose operands leave the linear fragment (conditionals) are
    returned unchanged; canonical comparison is then purely structural.
    """
    try:
        diff = lin_add(c.lhs, c.rhs, -1)
    except SortMismatch:
        return c
    op = c.op
    if op == ">":
        op, diff = "<", lin_add(IntConst(0), diff, -1)
    elif op == ">=":
        op, diff = "=<", lin_add(IntConst(0), diff, -1)
    if op == "=":
        coeffs, const = lin_of(diff)
        first = min(coeffs, key=lambda v: v.name) if coeffs else None
        if first is not None and coeffs[first] < 0 or first is None and const < 0:
            diff = lin_add(IntConst(0), diff, -1)
    return Rel(op, diff, IntConst(0))


class _Lin:
    """Linear combination pending a canonical term order."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: dict[Var, int], const: int):
        self.coeffs = coeffs
        self.const = const


class _Group:
    """Body items sharing a blank template; their order is a render choice."""

    __slots__ = ("members",)

    def __init__(self, members: list):
        self.members = members


class _RelForm:
    """Relation `diff op 0` with a name-independent orientation. `alts`
    holds both diffs when an equality's two signs cannot be told apart
    without looking at variable names."""

    __slots__ = ("op", "alts")

    def __init__(self, op: str, alts: tuple):
        self.op = op
        self.alts = alts


def _diff_of(c: Rel) -> Optional[tuple[dict[Var, int], int]]:
    try:
        coeffs, const = lin_of(lin_add(c.lhs, c.rhs, -1))
    except SortMismatch:
        return None
    return coeffs, const


def _neg_diff(d: tuple) -> tuple:
    coeffs, const = d
    return {v: -k for v, k in coeffs.items()}, -const


def _canon_rel(c: Rel):
    d = _diff_of(c)
    if d is None:
        return c
    op = c.op
    if op == ">":
        op, d = "<", _neg_diff(d)
    elif op == ">=":
        op, d = "=<", _neg_diff(d)
    if op != "=":
        return _RelForm(op, (d,))
    nd = _neg_diff(d)

    def key(dd):
        return (sorted(dd[0].values()), dd[1])

    k1, k2 = key(d), key(nd)
    if k1 < k2:
        return _RelForm("=", (d,))
    if k2 < k1:
        return _RelForm("=", (nd,))
    return _RelForm("=", (d, nd))


def _expansions(x, names: dict) -> Iterator[list]:
    """Alternative flat spellings of one node. Branches exactly where a
    name-free choice cannot be made: tied equality orientations and the
    order of not-yet-named variables sharing a coefficient."""
    if isinstance(x, Atom):
        toks: list = [x.pred, "("]
        for i, t in enumerate(x.args):
            if i:
                toks.append(",")
            toks.append(t)
        toks.append(")")
        yield toks
    elif isinstance(x, _Group):
        if math.factorial(len(x.members)) > _PERM_CAP:
            yield [t for m in x.members for t in (m, ",")]
        else:
            for perm in itertools.permutations(x.members):
                yield [t for m in perm for t in (m, ",")]
    elif isinstance(x, _RelForm):
        for d in x.alts:
            yield [_Lin(*d), x.op, "0"]
    elif isinstance(x, _Lin):
        named = []
        unnamed: dict[int, list[Var]] = {}
        for v, k in x.coeffs.items():
            if v in names:
                named.append((k, (0, names[v]), v))
            else:
                unnamed.setdefault(k, []).append(v)
        blowup = 1
        for g in unnamed.values():
            blowup *= math.factorial(len(g))
        if blowup > 24:
            # pathological; fall back to source order, still sound
            orders: Iterable = [tuple(v for g in unnamed.values() for v in g)]
        else:
            orders = itertools.product(
                *[itertools.permutations(unnamed[k]) for k in sorted(unnamed)])
            orders = (tuple(v for g in combo for v in g) for combo in orders)
        for chosen in orders:
            ranks = {v: i for i, v in enumerate(chosen)}
            slots = named + [(k, (1, ranks[v]), v)
                             for k, g in unnamed.items() for v in g]
            # named before unnamed within one coefficient; coefficients,
            # first-emission indices, and branch ranks are all name-free
            slots.sort(key=lambda t: (t[0], t[1]))
            toks = []
            for k, _, v in slots:
                toks.extend([f"{k}*", v])
            toks.append(f"+{x.const}")
            yield toks
    elif isinstance(x, Rel):  # operands outside the linear fragment
        cf = _canon_rel(x)
        if isinstance(cf, _RelForm):
            yield from _expansions(cf, names)
        else:
            yield ["(", x.op, x.lhs, x.rhs, ")"]
    elif isinstance(x, LinExpr):
        yield [_Lin(dict(x.coeffs), x.const)]
    elif isinstance(x, IntConst):
        yield [str(x.value)]
    elif isinstance(x, (BoolConst, CBool)):
        yield [str(x.value)]
    elif isinstance(x, BVar):
        yield [x.var]
    elif isinstance(x, Ctor):
        toks = [x.name, "("]
        for i, t in enumerate(x.args):
            if i:
                toks.append(",")
            toks.append(t)
        toks.append(")")
        yield toks
    elif isinstance(x, TermIte):
        yield ["ite(", x.cond, ",", x.then, ",", x.other, ")"]
    elif isinstance(x, Not):
        yield ["~(", x.arg, ")"]
    elif isinstance(x, And):
        yield ["(&", x.lhs, x.rhs, ")"]
    elif isinstance(x, Or):
        yield ["(;", x.lhs, x.rhs, ")"]
    elif isinstance(x, Implies):
        yield ["(=>", x.lhs, x.rhs, ")"]
    elif isinstance(x, CEq):
        yield ["(<=>", x.lhs, x.rhs, ")"]
    elif isinstance(x, CIte):
        yield ["cite(", x.cond, ",", x.then, ",", x.other, ")"]
    else:  # pragma: no cover - exhaustive over the IR
        raise TypeError(x)


_RENDER_CAP = 200_000  # DFS node visits per clause

_EQ, _LT = 0, 1


def _best_render(items: list) -> str:
    """Smallest rendering over all branch choices, naming variables by first
    emission. Tokens never contain spaces or empty strings, so token-wise
    comparison against the incumbent agrees with comparing joined strings;
    a branch is cut as soon as its emitted prefix exceeds the incumbent."""
    names: dict[Var, int] = {}
    acc: list[str] = []
    best: list[Optional[list[str]]] = [None]
    version = [0]
    visits = [_RENDER_CAP]

    def refresh(sver: int, status):
        # revalidates a frame's comparison status after best moved under it
        if sver == version[0]:
            return status
        b = best[0]
        if b is None:
            return _LT
        m = min(len(acc), len(b))
        for i in range(m):
            if acc[i] != b[i]:
                return _LT if acc[i] < b[i] else None
        return _EQ if len(acc) < len(b) else None

    def token_status(status, tok: str):
        if status == _LT:
            return _LT
        b = best[0]
        i = len(acc)
        if i >= len(b):
            return None
        if tok == b[i]:
            return _EQ
        return _LT if tok < b[i] else None

    def dfs(stack: list, status, sver: int):
        if visits[0] <= 0:
            return
        visits[0] -= 1
        status = refresh(sver, status)
        if status is None:
            return
        sver = version[0]
        if not stack:
            # acc is strictly below best (or a proper prefix of it)
            best[0] = list(acc)
            version[0] += 1
            return
        x, rest = stack[0], stack[1:]
        if isinstance(x, str):
            st = token_status(status, x)
            if st is None:
                return
            acc.append(x)
            dfs(rest, st, version[0])
            acc.pop()
        elif isinstance(x, Var):
            fresh = x not in names
            if fresh:
                names[x] = len(names)
            tok = f"v{names[x]}"
            st = token_status(status, tok)
            if st is not None:
                acc.append(tok)
                dfs(rest, st, version[0])
                acc.pop()
            if fresh:
                del names[x]
        else:
            for exp in _expansions(x, names):
                dfs(list(exp) + rest, status, sver)

    dfs(list(items), _LT, -1)
    assert best[0] is not None
    return " ".join(best[0])


class _BlankNames(dict):
    """Every variable is named and outranked by none: templates collapse
    renaming before tie groups are formed."""

    def __contains__(self, v):
        return True

    def __getitem__(self, v):
        return -1


def _template(x, blanks: Optional[dict] = None) -> str:
    if blanks is None:
        blanks = _BlankNames()
    if isinstance(x, str):
        return x
    if isinstance(x, Var):
        return "_"
    exp = next(iter(_expansions(x, blanks)))
    return " ".join(_template(t, blanks) for t in exp)


def canonical_clause(cl: Clause,
                     pred_rename: Optional[dict[str, str]] = None,
                     arg_perms: Optional[dict[str, tuple[int, ...]]] = None) -> str:
    """Order- and naming-independent rendering of a clause.

    Equal strings imply the clauses agree up to variable renaming and
    reordering of body atoms and constraint conjuncts, and renaming or
    reordering a clause never changes its string (so inequality implies
    inequivalence too, short of the permutation caps on degenerate
    clauses). `pred_rename` maps predicate names before comparison;
    `arg_perms[p]` reorders the arguments of every `p` atom
    (new_args[i] = args[perm[i]]), which lets callers compare clause sets
    whose new predicates chose different argument orders for equivalent
    definitions.
    """
    def fix_atom(a: Atom) -> Atom:
        args = a.args
        if arg_perms and a.pred in arg_perms:
            perm = arg_perms[a.pred]
            args = tuple(args[i] for i in perm)
        pred = pred_rename.get(a.pred, a.pred) if pred_rename else a.pred
        return Atom(pred, args)

    head = None if cl.head is None else fix_atom(cl.head)
    constraints = [_canon_rel(c) if isinstance(c, Rel) else c
                   for c in cl.constraint]
    atoms = [fix_atom(a) for a in cl.body]

    items: list = []
    if head is not None:
        items.append(head)
    items.append("|")
    for group in _tie_groups(constraints):
        items.append(group[0] if len(group) == 1 else _Group(group))
        if len(group) == 1:
            items.append(",")
    items.append("|")
    for group in _tie_groups(atoms):
        items.append(group[0] if len(group) == 1 else _Group(group))
        if len(group) == 1:
            items.append(",")
    return _best_render(items)


def _tie_groups(items: list) -> list[list]:
    keyed = sorted(((_template(x), x) for x in items), key=lambda p: p[0])
    groups: list[list] = []
    for _, group in itertools.groupby(keyed, key=lambda p: p[0]):
        groups.append([x for _, x in group])
    return groups


# ---------------------------------------------------------------------------
# Declarations and programs

@dataclass(frozen=True)
class CtorDecl:
    name: str
    fields: tuple[Sort, ...]


@dataclass(frozen=True)
class DataDecl:
    name: str
    params: tuple[str, ...]
    ctors: tuple[CtorDecl, ...]


def instantiate_data(decl: DataDecl, args: tuple[Sort, ...]) -> tuple[CtorDecl, ...]:
    env = dict(zip(decl.params, args))

    def subst_sort(s: Sort) -> Sort:
        if isinstance(s, SortVar):
            return env[s.name]
        if isinstance(s, AdtSort):
            return AdtSort(s.name, tuple(subst_sort(a) for a in s.args))
        return s

    return tuple(CtorDecl(c.name, tuple(subst_sort(f) for f in c.fields))
                 for c in decl.ctors)


@dataclass(frozen=True)
class PredDecl:
    name: str
    sorts: tuple[Sort, ...]
    declared: bool = False
    synthetic: bool = False


@dataclass(frozen=True)
class CataDecl:
    """A catamorphism signature: input args, then the ADT arg, then outputs."""

    name: str
    ins: tuple[Sort, ...]
    adt: AdtSort
    outs: tuple[Sort, ...]

    @property
    def adt_index(self) -> int:
        return len(self.ins)

    @property
    def sorts(self) -> tuple[Sort, ...]:
        return self.ins + (self.adt,) + self.outs


@dataclass(frozen=True)
class Abstraction:
    """Catamorphism conjunction attached to an ADT sort."""

    sort: AdtSort
    adt_var: Var
    inputs: tuple[Var, ...]
    atoms: tuple[Atom, ...]


@dataclass(frozen=True)
class SpecOverride:
    pred: str
    params: tuple[Var, ...]
    atoms: tuple[Atom, ...]


@dataclass
class Program:
    datas: dict[str, DataDecl] = field(default_factory=dict)
    preds: dict[str, PredDecl] = field(default_factory=dict)
    catas: dict[str, CataDecl] = field(default_factory=dict)
    clauses: list[Clause] = field(default_factory=list)
    queries: list[Clause] = field(default_factory=list)
    abstractions: dict[AdtSort, Abstraction] = field(default_factory=dict)
    overrides: dict[str, SpecOverride] = field(default_factory=dict)
    coverage_preds: dict[AdtSort, str] = field(default_factory=dict)
    # argument positions of synthesized predicates holding catamorphism
    # outputs; such values are computed, never instantiated from a window
    outsig: dict[str, frozenset[int]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    supply: NameSupply = field(default_factory=NameSupply)

    def ctor_decl(self, sort: AdtSort, name: str) -> CtorDecl:
        for c in instantiate_data(self.datas[sort.name], sort.args):
            if c.name == name:
                return c
        raise KeyError(name)

    def ctors_of(self, sort: AdtSort) -> tuple[CtorDecl, ...]:
        return instantiate_data(self.datas[sort.name], sort.args)

    def is_cata(self, pred: str) -> bool:
        return pred in self.catas
