"""Surface syntax: lexer, recursive-descent parser, and program printer.

The parser produces a raw, unsorted AST; `frontend.sort_check` resolves
sorts and builds the IR. Syntax summary:

    % comment
    :- data tree(T) ==> leaf ; node(tree(T), T, tree(T)).
    :- pred append(list(int), list(int), list(int)).
    :- cata listcount(in: int, adt: list(int), out: int).
    :- cata_abs list(int) ==> listcount(X, L, N).
    :- spec append(A, B, C) ==> listcount(X, A, N1), listcount(X, B, N2).
    append([], Ys, Ys).
    append([X|Xs], Ys, [X|Zs]) :- append(Xs, Ys, Zs).
    false :- M = 2*N + 1, listcount(X, Zs, M), double(Xs, Zs).

Variables start with an uppercase letter or underscore. `list(T)` with
`[]`/`[H|T]` sugar is built in. Operators, loosest first: `=>` (right
associative), `|`, `&`, `~`, comparisons `= =< < >= >`, `+ -`, `*`,
unary `-`; `ite(c, t, e)` is the conditional.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .ir import CataChcError


class ParseError(CataChcError):
    def __init__(self, msg: str, line: int, col: int, path: str = "<input>"):
        super().__init__(f"{path}:{line}:{col}: {msg}")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Lexer

_PUNCT = (":-", "==>", "=>", "=<", ">=", "(", ")", "[", "]", ",", ".", ";",
          "|", "=", "<", ">", "+", "-", "*", "&", "~", ":")


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT VAR INT PUNCT EOF
    text: str
    line: int
    col: int


def tokenize(text: str, path: str = "<input>") -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch in " \t\r":
            i, col = i + 1, col + 1
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "VAR" if ch == "_" or ch.isupper() else "IDENT"
            toks.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(Token("PUNCT", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col, path)
    toks.append(Token("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Raw AST

@dataclass
class PVar:
    name: str
    line: int
    col: int


@dataclass
class PInt:
    value: int
    line: int
    col: int


@dataclass
class PBool:
    value: bool
    line: int
    col: int


@dataclass
class PApp:
    name: str
    args: list["PExpr"]
    line: int
    col: int


@dataclass
class PBin:
    op: str
    lhs: "PExpr"
    rhs: "PExpr"
    line: int
    col: int


@dataclass
class PUn:
    op: str  # "-" or "~"
    arg: "PExpr"
    line: int
    col: int


@dataclass
class PIte:
    cond: "PExpr"
    then: "PExpr"
    other: "PExpr"
    line: int
    col: int


PExpr = Union[PVar, PInt, PBool, PApp, PBin, PUn, PIte]


@dataclass
class RawSort:
    name: str
    args: list["RawSort"]
    is_var: bool
    line: int
    col: int


@dataclass
class RawClause:
    head: Optional[PApp]  # None = false
    body: list[PExpr]
    line: int
    col: int


@dataclass
class RawData:
    name: str
    params: list[str]
    ctors: list[tuple[str, list[RawSort], int, int]]
    line: int
    col: int


@dataclass
class RawPred:
    name: str
    sorts: list[RawSort]
    line: int
    col: int


@dataclass
class RawCata:
    name: str
    slots: list[tuple[str, RawSort]]  # label in {in, adt, out}
    line: int
    col: int


@dataclass
class RawAbs:
    sort: RawSort
    atoms: list[PApp]
    line: int
    col: int


@dataclass
class RawSpec:
    head: PApp
    atoms: list[PApp]
    line: int
    col: int


RawItem = Union[RawClause, RawData, RawPred, RawCata, RawAbs, RawSpec]


@dataclass
class RawProgram:
    items: list[RawItem] = field(default_factory=list)
    path: str = "<input>"


# ---------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, toks: list[Token], path: str):
        self.toks = toks
        self.pos = 0
        self.path = path

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col, self.path)

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.kind == "PUNCT" and t.text == text:
            return self.next()
        self.fail(f"expected {text!r}, found {t.text!r}" if t.kind != "EOF"
                  else f"expected {text!r}, found end of input")

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "PUNCT" and t.text == text

    def eat(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    # -- program

    def program(self) -> RawProgram:
        prog = RawProgram(path=self.path)
        while self.peek().kind != "EOF":
            if self.at(":-"):
                prog.items.append(self.directive())
            else:
                prog.items.append(self.clause())
        return prog

    def directive(self) -> RawItem:
        start = self.expect(":-")
        t = self.peek()
        if t.kind != "IDENT":
            self.fail("expected a directive keyword after ':-'")
        if t.text == "data":
            return self.data_decl(start)
        if t.text == "pred":
            return self.pred_decl(start)
        if t.text == "cata":
            return self.cata_decl(start)
        if t.text == "cata_abs":
            return self.abs_decl(start)
        if t.text == "spec":
            return self.spec_decl(start)
        self.fail(f"unknown directive {t.text!r}", t)

    def data_decl(self, start: Token) -> RawData:
        self.next()  # data
        name = self.ident("data type name")
        params: list[str] = []
        if self.eat("("):
            while True:
                t = self.peek()
                if t.kind != "VAR":
                    self.fail("expected a sort parameter (variable)")
                params.append(self.next().text)
                if not self.eat(","):
                    break
            self.expect(")")
        self.expect("==>")
        ctors: list[tuple[str, list[RawSort], int, int]] = []
        while True:
            t = self.peek()
            cname = self.ident("constructor name")
            fields: list[RawSort] = []
            if self.eat("("):
                while True:
                    fields.append(self.sort())
                    if not self.eat(","):
                        break
                self.expect(")")
            ctors.append((cname, fields, t.line, t.col))
            if not self.eat(";"):
                break
        self.expect(".")
        return RawData(name, params, ctors, start.line, start.col)

    def pred_decl(self, start: Token) -> RawPred:
        self.next()
        name = self.ident("predicate name")
        sorts: list[RawSort] = []
        if self.eat("("):
            while True:
                sorts.append(self.sort())
                if not self.eat(","):
                    break
            self.expect(")")
        self.expect(".")
        return RawPred(name, sorts, start.line, start.col)

    def cata_decl(self, start: Token) -> RawCata:
        self.next()
        name = self.ident("catamorphism name")
        self.expect("(")
        slots: list[tuple[str, RawSort]] = []
        while True:
            t = self.peek()
            if t.kind != "IDENT" or t.text not in ("in", "adt", "out"):
                self.fail("expected an 'in:', 'adt:' or 'out:' slot")
            label = self.next().text
            self.expect(":")
            slots.append((label, self.sort()))
            if not self.eat(","):
                break
        self.expect(")")
        self.expect(".")
        labels = [lb for lb, _ in slots]
        if (labels.count("adt") != 1
                or any(lb != "in" for lb in labels[:labels.index("adt")])
                or any(lb != "out" for lb in labels[labels.index("adt") + 1:])
                or labels[-1] != "out"):
            self.fail("catamorphism slots must be in* adt out+ in that order",
                      start)
        return RawCata(name, slots, start.line, start.col)

    def abs_decl(self, start: Token) -> RawAbs:
        self.next()
        sort = self.sort()
        self.expect("==>")
        atoms = self.atom_list()
        self.expect(".")
        return RawAbs(sort, atoms, start.line, start.col)

    def spec_decl(self, start: Token) -> RawSpec:
        self.next()
        head = self.app_or_const()
        if not isinstance(head, PApp):
            self.fail("expected a predicate template after 'spec'", start)
        self.expect("==>")
        atoms = self.atom_list()
        self.expect(".")
        return RawSpec(head, atoms, start.line, start.col)

    def atom_list(self) -> list[PApp]:
        atoms: list[PApp] = []
        while True:
            t = self.peek()
            a = self.expr()
            if not isinstance(a, PApp):
                self.fail("expected an atom", t)
            atoms.append(a)
            if not self.eat(","):
                break
        return atoms

    def sort(self) -> RawSort:
        t = self.peek()
        if t.kind == "VAR":
            self.next()
            return RawSort(t.text, [], True, t.line, t.col)
        name = self.ident("sort name")
        args: list[RawSort] = []
        if self.eat("("):
            while True:
                args.append(self.sort())
                if not self.eat(","):
                    break
            self.expect(")")
        return RawSort(name, args, False, t.line, t.col)

    def ident(self, what: str) -> str:
        t = self.peek()
        if t.kind != "IDENT":
            self.fail(f"expected {what}")
        return self.next().text

    # -- clauses

    def clause(self) -> RawClause:
        t = self.peek()
        head: Optional[PApp]
        if t.kind == "IDENT" and t.text == "false":
            self.next()
            head = None
        else:
            h = self.app_or_const()
            if not isinstance(h, PApp):
                self.fail("expected a clause head", t)
            head = h
        body: list[PExpr] = []
        if self.eat(":-"):
            while True:
                body.append(self.expr())
                if not self.eat(","):
                    break
        self.expect(".")
        if head is None and not body:
            self.fail("a query needs a body", t)
        return RawClause(head, body, t.line, t.col)

    def app_or_const(self) -> PExpr:
        t = self.peek()
        if t.kind != "IDENT":
            self.fail("expected an identifier")
        self.next()
        args: list[PExpr] = []
        if self.eat("("):
            while True:
                args.append(self.expr())
                if not self.eat(","):
                    break
            self.expect(")")
        return PApp(t.text, args, t.line, t.col)

    # -- expressions, loosest binding first

    def expr(self) -> PExpr:
        return self.implies()

    def implies(self) -> PExpr:
        lhs = self.disj()
        if self.at("=>"):
            t = self.next()
            rhs = self.implies()
            return PBin("=>", lhs, rhs, t.line, t.col)
        return lhs

    def disj(self) -> PExpr:
        e = self.conj()
        while self.at("|"):
            t = self.next()
            e = PBin("|", e, self.conj(), t.line, t.col)
        return e

    def conj(self) -> PExpr:
        e = self.negation()
        while self.at("&"):
            t = self.next()
            e = PBin("&", e, self.negation(), t.line, t.col)
        return e

    def negation(self) -> PExpr:
        if self.at("~"):
            t = self.next()
            return PUn("~", self.negation(), t.line, t.col)
        return self.comparison()

    def comparison(self) -> PExpr:
        lhs = self.additive()
        for op in ("=<", ">=", "=", "<", ">"):
            if self.at(op):
                t = self.next()
                return PBin(op, lhs, self.additive(), t.line, t.col)
        return lhs

    def additive(self) -> PExpr:
        e = self.multiplicative()
        while self.at("+") or self.at("-"):
            t = self.next()
            e = PBin(t.text, e, self.multiplicative(), t.line, t.col)
        return e

    def multiplicative(self) -> PExpr:
        e = self.unary()
        while self.at("*"):
            t = self.next()
            e = PBin("*", e, self.unary(), t.line, t.col)
        return e

    def unary(self) -> PExpr:
        if self.at("-"):
            t = self.next()
            arg = self.unary()
            if isinstance(arg, PInt):
                return PInt(-arg.value, t.line, t.col)
            return PUn("-", arg, t.line, t.col)
        return self.primary()

    def primary(self) -> PExpr:
        t = self.peek()
        if t.kind == "INT":
            self.next()
            return PInt(int(t.text), t.line, t.col)
        if t.kind == "VAR":
            self.next()
            return PVar(t.text, t.line, t.col)
        if t.kind == "IDENT":
            if t.text == "true":
                self.next()
                return PBool(True, t.line, t.col)
            if t.text == "false":
                self.next()
                return PBool(False, t.line, t.col)
            if t.text == "ite":
                self.next()
                self.expect("(")
                cond = self.expr()
                self.expect(",")
                then = self.expr()
                self.expect(",")
                other = self.expr()
                self.expect(")")
                return PIte(cond, then, other, t.line, t.col)
            return self.app_or_const()
        if self.eat("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.text == "[":
            return self.list_sugar()
        self.fail(f"unexpected {t.text!r}" if t.kind != "EOF"
                  else "unexpected end of input")

    def list_sugar(self) -> PExpr:
        # elements parse below `|`; parenthesize a disjunction element
        t = self.expect("[")
        if self.eat("]"):
            return PApp("nil", [], t.line, t.col)
        elems = [self.conj()]
        while self.eat(","):
            elems.append(self.conj())
        tail: PExpr
        if self.eat("|"):
            tail = self.conj()
        else:
            tail = PApp("nil", [], t.line, t.col)
        self.expect("]")
        for e in reversed(elems):
            tail = PApp("cons", [e, tail], t.line, t.col)
        return tail


def parse_program(text: str, path: str = "<input>") -> RawProgram:
    return _Parser(tokenize(text, path), path).program()


# ---------------------------------------------------------------------------
# Printing whole programs back to surface syntax

def program_to_text(program) -> str:
    """Render a sorted program; parsing the result reproduces the program."""
    from . import ir

    out: list[str] = []
    for d in program.datas.values():
        if d.name == "list":
            continue
        params = f"({', '.join(d.params)})" if d.params else ""
        ctors = []
        for c in d.ctors:
            fields = f"({', '.join(ir.sort_str(s) for s in c.fields)})" \
                if c.fields else ""
            ctors.append(c.name + fields)
        out.append(f":- data {d.name}{params} ==> {' ; '.join(ctors)}.")
    for p in program.preds.values():
        if p.name in program.catas:
            continue
        args = f"({', '.join(ir.sort_str(s) for s in p.sorts)})" if p.sorts else ""
        out.append(f":- pred {p.name}{args}.")
    for c in program.catas.values():
        slots = [f"in: {ir.sort_str(s)}" for s in c.ins]
        slots.append(f"adt: {ir.sort_str(c.adt)}")
        slots += [f"out: {ir.sort_str(s)}" for s in c.outs]
        out.append(f":- cata {c.name}({', '.join(slots)}).")
    for a in program.abstractions.values():
        atoms = ", ".join(ir.atom_str(x) for x in a.atoms)
        out.append(f":- cata_abs {ir.sort_str(a.sort)} ==> {atoms}.")
    for s in program.overrides.values():
        head = ir.atom_str(ir.Atom(s.pred, s.params))
        atoms = ", ".join(ir.atom_str(x) for x in s.atoms)
        out.append(f":- spec {head} ==> {atoms}.")
    for cl in program.clauses + program.queries:
        out.append(ir.clause_str(cl))
    return "\n".join(out) + "\n"
