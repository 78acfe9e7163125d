"""Terms, unification, normal form, and clause canonicalization."""

import pytest
from hypothesis import given, settings, strategies as st

from catachc import ir
from catachc.ir import (
    Atom, Clause, Ctor, IntConst, NormalizationError, Rel, SortMismatch,
    UnificationFailure, Var, INT,
)

LIST_INT = ir.AdtSort("list", (INT,))

X = Var("X", INT)
Y = Var("Y", INT)
Z = Var("Z", INT)
L = Var("L", LIST_INT)
M = Var("M", LIST_INT)

NIL = Ctor("nil", (), LIST_INT)


def cons(h, t):
    return Ctor("cons", (h, t), LIST_INT)


# ---------------------------------------------------------------------------
# Unification

def test_unify_binds_variables():
    assert ir.unify([(X, Y)]) == {X: Y}
    s = ir.unify([(L, cons(X, NIL))])
    assert ir.apply_term(s, L) == cons(X, NIL)


def test_unify_constructors_recursively():
    s = ir.unify([(cons(X, M), cons(Y, NIL))])
    assert ir.apply_term(s, X) == Y or ir.apply_term(s, Y) == X
    assert ir.apply_term(s, M) == NIL


def test_unify_constructor_clash():
    with pytest.raises(UnificationFailure):
        ir.unify([(NIL, cons(X, NIL))])


def test_unify_occurs_check():
    with pytest.raises(UnificationFailure, match="occurs"):
        ir.unify([(M, cons(X, M))])


def test_unify_sort_mismatch_is_distinct():
    with pytest.raises(SortMismatch):
        ir.unify([(X, L)])


def test_unify_solves_linear_equations():
    s = ir.unify([(ir.lin_add(X, IntConst(1)), ir.lin_add(Y, IntConst(2)))])
    # X + 1 = Y + 2 has the unit-coefficient solution X = Y + 1
    assert ir.apply_term(s, X) == ir.lin_add(Y, IntConst(1))
    with pytest.raises(UnificationFailure):
        ir.unify([(IntConst(1), IntConst(2))])
    with pytest.raises(UnificationFailure, match="unit coefficient"):
        two_x = ir.lin({X: 2}, 0)
        two_y = ir.lin({Y: 2}, 1)
        ir.unify([(two_x, two_y)])


def test_unify_atoms_arity_guard():
    with pytest.raises(UnificationFailure):
        ir.unify_atoms(Atom("p", (X,)), Atom("q", (Y,)))
    with pytest.raises(SortMismatch):
        ir.unify_atoms(Atom("p", (X,)), Atom("p", (X, Y)))


@given(st.permutations([(X, Y), (Z, IntConst(3)), (M, NIL)]))
def test_unifier_is_idempotent(pairs):
    s = ir.unify(list(pairs))
    for _, t in s.items():
        assert ir.apply_term(s, t) == t


# ---------------------------------------------------------------------------
# Normal form

def test_normalize_flushes_basic_constants():
    supply = ir.NameSupply()
    cl = Clause(Atom("p", (IntConst(3),)), (), (Atom("q", (IntConst(1), X)),))
    out = ir.normalize_clause(cl, supply)
    assert all(isinstance(a, Var) for a in out.body[0].args)
    assert isinstance(out.head.args[0], Var)
    assert len(out.constraint) == 2


def test_normalize_splits_repeated_basic_body_variables():
    supply = ir.NameSupply()
    cl = Clause(None, (), (Atom("q", (X, X)),))
    out = ir.normalize_clause(cl, supply)
    a, b = out.body[0].args
    assert a != b
    assert out.constraint  # the split is recorded as an equality


def test_normalize_keeps_head_patterns():
    supply = ir.NameSupply()
    cl = Clause(Atom("p", (cons(X, M), X)), (), ())
    out = ir.normalize_clause(cl, supply)
    assert out.head.args[0] == cons(X, M)


def test_normalize_rejects_adt_terms_in_body():
    supply = ir.NameSupply()
    cl = Clause(None, (), (Atom("q", (cons(X, M),)),))
    with pytest.raises(NormalizationError, match="non-variable ADT"):
        ir.normalize_clause(cl, supply)


def test_rename_apart_freshens_every_variable():
    supply = ir.NameSupply()
    cl = Clause(Atom("p", (X, L)), (Rel("=", X, IntConst(0)),),
                (Atom("q", (L,)),))
    out = ir.rename_apart(cl, supply)
    assert not (set(ir.clause_vars(out)) & set(ir.clause_vars(cl)))


# ---------------------------------------------------------------------------
# Relation normalization and canonical clauses

def test_normal_rel_orients_comparisons():
    assert ir.normal_rel(Rel(">", X, Y)) == ir.normal_rel(Rel("<", Y, X))
    assert ir.normal_rel(Rel(">=", X, Y)) == ir.normal_rel(Rel("=<", Y, X))
    assert ir.normal_rel(Rel("=", X, Y)) == ir.normal_rel(Rel("=", Y, X))


_ATOMS = [
    Atom("p", (X, Y)),
    Atom("q", (Y, Z, L)),
    Atom("r", (L,)),
    Atom("p", (Z, X)),
]
_CONSTRAINTS = [
    Rel("=", X, ir.lin_add(Y, IntConst(1))),
    Rel("<", Y, Z),
    Rel("=", Z, IntConst(0)),
]


@st.composite
def small_clauses(draw):
    atoms = tuple(draw(st.permutations(_ATOMS))[:draw(st.integers(1, 4))])
    cons_ = tuple(draw(st.permutations(_CONSTRAINTS))[:draw(st.integers(0, 3))])
    head = draw(st.sampled_from([None, Atom("h", (X, L))]))
    return Clause(head, cons_, atoms)


@given(small_clauses(), st.randoms(use_true_random=False))
@settings(max_examples=200)
def test_canonical_clause_ignores_order_and_names(cl, rng):
    body = list(cl.body)
    cons_ = list(cl.constraint)
    rng.shuffle(body)
    rng.shuffle(cons_)
    pool = list(ir.clause_vars(cl))
    renamed = pool[:]
    rng.shuffle(renamed)
    subst = {v: Var(f"R{i}", v.sort)
             for i, v in enumerate(renamed)}
    other = ir.apply_clause(subst, Clause(cl.head, tuple(cons_), tuple(body)))
    assert ir.canonical_clause(cl) == ir.canonical_clause(other)


@given(small_clauses())
@settings(max_examples=100)
def test_canonical_clause_separates_distinct_clauses(cl):
    smaller = Clause(cl.head, cl.constraint, cl.body[1:])
    assert ir.canonical_clause(cl) != ir.canonical_clause(smaller)


def test_canonical_clause_pred_rename_and_arg_perm():
    cl = Clause(None, (), (Atom("p", (X, Y)),))
    want = Clause(None, (), (Atom("q", (Y, X)),))
    got = ir.canonical_clause(cl, pred_rename={"p": "q"},
                              arg_perms={"p": (1, 0)})
    assert got == ir.canonical_clause(want)


def test_lin_helpers():
    t = ir.lin({X: 2, Y: -1}, 3)
    coeffs, const = ir.lin_of(t)
    assert coeffs == {X: 2, Y: -1} and const == 3
    assert ir.lin({}, 5) == IntConst(5)
    assert ir.lin({X: 1}, 0) == X
    assert ir.lin_add(X, X, -1) == IntConst(0)
