"""Lexer and recursive-descent parser behavior on the .chc surface syntax."""

import pytest

import helpers
from catachc import ir
from catachc.parser import ParseError, parse_program, program_to_text, tokenize


def test_tokenize_skips_comments():
    toks = tokenize("% a comment\np(X). % trailing\n")
    assert [t.text for t in toks] == ["p", "(", "X", ")", ".", ""]


def test_tokenize_classifies_variables():
    kinds = {t.text: t.kind for t in tokenize("x X _x Foo foo _")}
    assert kinds["x"] == "IDENT"
    assert kinds["foo"] == "IDENT"
    assert kinds["X"] == "VAR"
    assert kinds["_x"] == "VAR"
    assert kinds["Foo"] == "VAR"
    assert kinds["_"] == "VAR"


def test_tokenize_reports_position():
    with pytest.raises(ParseError) as err:
        tokenize("p(X) ? q.")
    assert err.value.line == 1
    assert err.value.col == 6
    assert "unexpected character '?'" in str(err.value)


def test_data_directive():
    raw = parse_program(":- data tree(T) ==> leaf ; node(tree(T), T, tree(T)).")
    (d,) = raw.items
    assert d.name == "tree"
    assert d.params == ["T"]
    assert [name for name, _, _, _ in d.ctors] == ["leaf", "node"]
    assert len(d.ctors[1][1]) == 3


def test_cata_directive_slot_order():
    raw = parse_program(":- cata c(in: int, adt: list(int), out: int, out: bool).")
    (c,) = raw.items
    labels = [label for label, _ in c.slots]
    assert labels == ["in", "adt", "out", "out"]
    with pytest.raises(ParseError, match="in\\* adt out\\+"):
        parse_program(":- cata c(out: int, adt: list(int)).")
    with pytest.raises(ParseError):
        parse_program(":- cata c(in: int, out: int).")  # adt slot missing


def test_arithmetic_constant_folding():
    p = helpers.load_text(":- pred p(int).\np(X) :- X = 1 + 2 * 3.\n")
    assert ir.constraint_str(p.clauses[0].constraint[0]) == "X = 7"


def test_implication_is_right_associative():
    p = helpers.load_text(
        ":- pred p(bool, bool, bool).\np(A, B, C) :- A => B => C.\n")
    c = p.clauses[0].constraint[0]
    assert isinstance(c, ir.Implies)
    assert isinstance(c.rhs, ir.Implies)


def test_comparisons_do_not_chain():
    with pytest.raises(ParseError):
        helpers.load_text(":- pred p(int).\np(X) :- X < 1 < 2.\n")


def test_list_sugar():
    p = helpers.load_text(":- pred p(list(int)).\np([1, X | T]).\n")
    # normalization flushes the basic constant out of the head pattern
    assert ir.clause_str(p.clauses[0]) == "p([V1, X|T]) :- V1 = 1."
    q = helpers.load_text(":- pred p(list(int)).\np([]).\n")
    head = q.clauses[0].head
    assert isinstance(head.args[0], ir.Ctor) and head.args[0].name == "nil"


def test_ite_term():
    p = helpers.load_text(
        ":- pred p(int, int).\np(X, Y) :- Y = ite(X > 0, X, 0 - X).\n")
    rel = p.clauses[0].constraint[0]
    assert isinstance(rel.rhs, ir.TermIte)


def test_missing_period_position():
    with pytest.raises(ParseError) as err:
        parse_program(":- pred p(int)\np(X).")
    assert err.value.line == 2


@pytest.mark.parametrize("name", ["double.chc", "treesort.chc", "member.chc"])
def test_program_to_text_roundtrip(name):
    first = helpers.load_benchmark(name)
    text = program_to_text(first)
    second = helpers.load_text(text)
    assert set(second.preds) == set(first.preds)
    assert set(second.catas) == set(first.catas)
    assert helpers.canon_set(helpers.all_clauses(second)) == \
        helpers.canon_set(helpers.all_clauses(first))
    # rendering is a fixpoint: text -> program -> text is stable
    assert program_to_text(second) == text
