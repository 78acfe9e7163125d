"""Sort checking, clause admission, query shape, and coverage synthesis."""

import pytest

import helpers
from catachc import ir, oracle
from catachc.frontend import (QueryShapeError, SortError, coverage_pred,
                              ensure_cata_coverage, load_program,
                              validate_query)


# ---------------------------------------------------------------------------
# Sort inference

def test_infers_undeclared_predicate_signature():
    prog = helpers.load_text(
        "p([], 0).\n"
        "p([H|T], N) :- N = M + H, p(T, M).\n")
    decl = prog.preds["p"]
    assert decl.sorts == (ir.AdtSort("list", (ir.INT,)), ir.INT)
    assert not decl.declared


def test_declared_signature_wins_over_usage():
    prog = helpers.load_text(
        ":- pred p(list(bool), int).\n"
        "p(L, N) :- N = 0.\n")
    assert prog.preds["p"].sorts[0] == ir.AdtSort("list", (ir.BOOL,))


def test_inference_spans_clauses():
    # q's argument sort is only pinned down by p's clause
    prog = helpers.load_text(
        "p(X) :- X = 1.\n"
        "q(Y, Z) :- p(Y), p(Z).\n")
    assert prog.preds["q"].sorts == (ir.INT, ir.INT)


def test_sort_mismatch_is_reported_with_position():
    with pytest.raises(SortError, match=r"mem.chc:3:.*sort mismatch"):
        load_program(
            ":- pred p(list(int)).\n"
            "p([]).\n"
            "p(X) :- X = 1.\n", "mem.chc")


def test_arity_conflict():
    with pytest.raises(SortError, match="used with 1 argument"):
        helpers.load_text("p(X, Y) :- X = Y.\nq(Z) :- p(Z).\n")


def test_unknown_sort_in_declaration():
    with pytest.raises(SortError, match="unknown sort heap"):
        helpers.load_text(":- pred p(heap).\n")


def test_unresolved_sort_needs_declaration():
    with pytest.raises(SortError, match=":- pred"):
        helpers.load_text("p(X).\n")


def test_occurs_check_on_sorts():
    with pytest.raises(SortError, match="infinite sort"):
        helpers.load_text("p(X, [X|T]) :- p(X, X).\n")


def test_unknown_function_symbol():
    with pytest.raises(SortError, match="unknown function symbol f"):
        helpers.load_text("p(X) :- X = f(1).\n")


def test_predicate_inside_expression():
    with pytest.raises(SortError, match="used inside an expression"):
        helpers.load_text("p(X) :- X = 1.\nq(Y) :- Y = p(1).\n")


def test_nonlinear_multiplication_rejected():
    with pytest.raises(SortError, match="nonlinear"):
        helpers.load_text("p(X, Y) :- X * Y = 2.\n")


def test_adt_equality_rejected():
    with pytest.raises(SortError, match="equality between data terms"):
        helpers.load_text(":- pred p(list(int), list(int)).\n"
                          "p(X, Y) :- X = Y.\n")


# ---------------------------------------------------------------------------
# Declarations

def test_data_declaration_and_use():
    prog = helpers.load_text(
        ":- data pair(A, B) ==> mk(A, B).\n"
        ":- pred p(pair(int, bool)).\n"
        "p(mk(1, true)).\n")
    assert prog.datas["pair"].params == ("A", "B")
    (cl,) = prog.clauses
    assert isinstance(cl.head.args[0], ir.Ctor)


def test_data_redeclaration():
    with pytest.raises(SortError, match="declared twice"):
        helpers.load_text(":- data t ==> a.\n:- data t ==> b.\n")


def test_constructor_owned_by_one_type():
    with pytest.raises(SortError, match="already belongs to"):
        helpers.load_text(":- data t ==> mk.\n:- data u ==> mk(int).\n")


def test_constructor_cannot_head_clause():
    with pytest.raises(SortError, match="used as a clause head"):
        helpers.load_text("cons(X, Y).\n")


def test_reserved_predicate_names():
    with pytest.raises(SortError, match="reserved"):
        helpers.load_text(":- pred ite(int).\n")


def test_cata_slots_adt_position():
    prog = helpers.load_text(
        ":- cata sum(adt: list(int), out: int).\n"
        "sum([], S) :- S = 0.\n"
        "sum([H|T], S) :- S = ST + H, sum(T, ST).\n")
    decl = prog.catas["sum"]
    assert decl.adt_index == 0
    assert decl.outs == (ir.INT,)


def test_cata_rejects_adt_output():
    with pytest.raises(SortError, match="must be basic"):
        helpers.load_text(":- cata c(adt: list(int), out: list(int)).\n")


def test_cata_adt_slot_must_be_data():
    with pytest.raises(SortError, match="must be a data sort"):
        helpers.load_text(":- cata c(adt: int, out: int).\n")


# ---------------------------------------------------------------------------
# Clause discipline

def test_queries_are_separated():
    prog = helpers.load_benchmark("double.chc")
    assert len(prog.queries) == 1
    assert prog.queries[0].head is None
    assert all(cl.head is not None for cl in prog.clauses)


def test_cata_clause_cannot_call_program_pred():
    with pytest.raises(SortError, match="mix only in queries"):
        helpers.load_text(
            ":- cata c(adt: list(int), out: int).\n"
            "p(X) :- X = 0.\n"
            "c([], N) :- N = 0.\n"
            "c([H|T], N) :- p(N), c(T, M).\n")


def test_program_clause_cannot_call_cata():
    with pytest.raises(SortError, match="cannot call c"):
        helpers.load_text(
            ":- cata c(adt: list(int), out: int).\n"
            "c([], N) :- N = 0.\n"
            "c([H|T], N) :- N = M + 1, c(T, M).\n"
            "p(L, N) :- c(L, N).\n")


def test_query_may_mix_kinds():
    prog = helpers.load_text(
        ":- cata c(adt: list(int), out: int).\n"
        "c([], N) :- N = 0.\n"
        "c([H|T], N) :- N = M + 1, c(T, M).\n"
        "p([]).\n"
        "false :- N > 0, p(L), c(L, N).\n")
    assert len(prog.queries) == 1


def test_irregular_conditional_warns():
    prog = helpers.load_text(
        "p(X, Y) :- ite(X > 0, X, ite(Y > 0, Y, 0)) = Y.\n")
    assert any("conditional term" in w for w in prog.warnings)
    regular = helpers.load_text("p(X, Y) :- Y = ite(X > 0, X, 0).\n")
    assert not regular.warnings


# ---------------------------------------------------------------------------
# Abstractions and spec overrides

def test_abstraction_directive():
    prog = helpers.load_benchmark("double.chc")
    sort = ir.AdtSort("list", (ir.INT,))
    ab = prog.abstractions[sort]
    assert [a.pred for a in ab.atoms] == ["listcount"]
    assert ab.inputs == (ab.atoms[0].args[0],)


def test_abstraction_requires_shared_template_var():
    with pytest.raises(SortError, match="same template variable"):
        helpers.load_text(
            ":- cata c(adt: list(int), out: int).\n"
            ":- cata d(adt: list(int), out: int).\n"
            "c([], N) :- N = 0.\n"
            "d([], N) :- N = 0.\n"
            ":- cata_abs list(int) ==> c(Xs, N), d(Ys, M).\n")


def test_abstraction_outputs_fresh():
    with pytest.raises(SortError, match="fresh"):
        helpers.load_text(
            ":- cata c(in: int, adt: list(int), out: int).\n"
            "c(X, [], N) :- N = 0.\n"
            ":- cata_abs list(int) ==> c(N, Xs, N).\n")


def test_spec_override_accepted():
    prog = helpers.load_text(
        ":- cata len(adt: list(int), out: int).\n"
        "len([], N) :- N = 0.\n"
        "len([H|T], N) :- N = M + 1, len(T, M).\n"
        ":- pred p(list(int), list(int)).\n"
        "p([], []).\n"
        ":- spec p(Xs, Ys) ==> len(Xs, N), len(Ys, M).\n")
    ov = prog.overrides["p"]
    assert [a.pred for a in ov.atoms] == ["len", "len"]
    assert [v.name for v in ov.params] == ["Xs", "Ys"]


def test_spec_override_must_fold_params():
    with pytest.raises(SortError, match="must fold one of"):
        helpers.load_text(
            ":- cata len(adt: list(int), out: int).\n"
            "len([], N) :- N = 0.\n"
            ":- pred p(list(int)).\n"
            "p([]).\n"
            ":- spec p(Xs) ==> len(Ys, N).\n")


# ---------------------------------------------------------------------------
# Query shape

def _mixed(text):
    prog = helpers.load_text(
        ":- cata len(adt: list(int), out: int).\n"
        "len([], N) :- N = 0.\n"
        "len([H|T], N) :- N = M + 1, len(T, M).\n"
        ":- pred p(list(int), int).\n:- pred q(list(int)).\n"
        "p(Xs, N) :- N = 0.\n"
        "q([]).\n" + text)
    return prog, prog.queries[0]


def test_query_one_program_atom():
    prog, q = _mixed("false :- p(Xs, N), q(Ys).\n")
    with pytest.raises(QueryShapeError, match="at most one program atom"):
        validate_query(prog, q)


def test_query_outputs_distinct_from_program_vars():
    prog, q = _mixed("false :- p(Xs, N), len(Xs, N).\n")
    with pytest.raises(QueryShapeError, match="name them apart"):
        validate_query(prog, q)


def test_query_merges_duplicate_cata_atoms():
    prog, q = _mixed("false :- N > M, q(Xs), len(Xs, N), len(Xs, M).\n")
    merged = validate_query(prog, q)
    lens = [a for a in merged.body if a.pred == "len"]
    assert len(lens) == 1
    # the constraint now relates one output variable to itself
    model = oracle.bounded_least_model(prog, list(prog.clauses))
    assert not oracle.check_query_bounded(prog, model, merged).violated


def test_query_distinct_outputs_required():
    prog, q = _mixed("false :- q(Xs), q(Ys), len(Xs, N), len(Ys, N).\n")
    with pytest.raises(QueryShapeError):
        validate_query(prog, q)


# ---------------------------------------------------------------------------
# Coverage predicates

_EXPECTED_LIST_COVER = """
:- pred t(list(int)).
t([]).
t([V0|V1]) :- t(V1).
"""

_EXPECTED_TREE_COVER = """
:- data tree(T) ==> leaf ; node(tree(T), T, tree(T)).
:- pred t(tree(int)).
t(leaf).
t(node(V0, V1, V2)) :- t(V0), t(V2).
"""


def test_coverage_clauses_for_lists():
    prog = helpers.load_text(":- pred p(list(int)).\np([]).\n")
    name = coverage_pred(prog, ir.AdtSort("list", (ir.INT,)))
    assert name == "true_list_int"
    got = [cl for cl in prog.clauses if cl.head.pred == name]
    want = helpers.load_text(_EXPECTED_LIST_COVER).clauses
    assert helpers.canon_set(got, rename={name: "t"}) == helpers.canon_set(want)


def test_coverage_clauses_for_trees():
    prog = helpers.load_text(
        ":- data tree(T) ==> leaf ; node(tree(T), T, tree(T)).\n"
        ":- pred p(tree(int)).\n"
        "p(leaf).\n")
    name = coverage_pred(prog, ir.AdtSort("tree", (ir.INT,)))
    got = [cl for cl in prog.clauses if cl.head.pred == name]
    want = [cl for cl in helpers.load_text(_EXPECTED_TREE_COVER).clauses
            if cl.head.pred == "t"]
    assert helpers.canon_set(got, rename={name: "t"}) == helpers.canon_set(want)


def test_coverage_pred_is_total_on_bounded_universe():
    # every universe value must be derivable: coverage must not constrain
    prog = helpers.load_text(
        ":- data tree(T) ==> leaf ; node(tree(T), T, tree(T)).\n"
        ":- pred p(tree(int)).\n:- pred q(list(int)).\n"
        "p(leaf).\nq([]).\n")
    for sortname, args in (("tree", (ir.INT,)), ("list", (ir.INT,))):
        sort = ir.AdtSort(sortname, args)
        name = coverage_pred(prog, sort)
        cfg = oracle.OracleConfig()
        model = oracle.bounded_least_model(prog, list(prog.clauses), cfg)
        values = oracle.enumerate_sort(prog, sort, cfg.universe)
        assert model[name] == {(v,) for v in values}


def test_coverage_name_avoids_collision():
    prog = helpers.load_text(
        ":- pred true_list_int(int).\ntrue_list_int(X) :- X = 0.\n"
        ":- pred p(list(int)).\np([]).\n")
    name = coverage_pred(prog, ir.AdtSort("list", (ir.INT,)))
    assert name != "true_list_int"
    assert prog.preds[name].synthetic


def test_ensure_cata_coverage_appends_only_when_needed():
    prog = helpers.load_text(
        ":- cata len(adt: list(int), out: int).\n"
        "len([], N) :- N = 0.\n"
        "len([H|T], N) :- N = M + 1, len(T, M).\n"
        "p([]).\n"
        "false :- N > 0, p(Xs), len(Xs, N).\n"
        "false :- N > 1, len(Ys, N).\n")
    covered = ensure_cata_coverage(prog, prog.queries[0])
    assert covered == prog.queries[0]
    uncovered = ensure_cata_coverage(prog, prog.queries[1])
    extra = [a for a in uncovered.body if a not in prog.queries[1].body]
    assert [a.pred for a in extra] == ["true_list_int"]
    assert extra[0].args == (uncovered.body[0].args[0],)
