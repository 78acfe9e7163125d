"""Shared test helpers: benchmark loading, clause-set comparison, and a
seeded random program generator used by the robustness suites."""

import itertools
import random
from pathlib import Path

from catachc import frontend, ir

ROOT = Path(__file__).resolve().parent.parent
BENCH = ROOT / "benchmarks"


def load_benchmark(name: str):
    path = BENCH / name
    return frontend.load_program(path.read_text(encoding="utf-8"), str(path))


def load_text(text: str):
    return frontend.load_program(text)


def all_clauses(program):
    return list(program.clauses) + list(program.queries)


def canon_set(clauses, rename=None):
    return frozenset(ir.canonical_clause(c, rename) for c in clauses)


def drop_coverage_atoms(program, clause):
    cov = set(program.coverage_preds.values())
    body = tuple(a for a in clause.body if a.pred not in cov)
    return ir.Clause(clause.head, clause.constraint, body, cid=clause.cid)


# ---------------------------------------------------------------------------
# Random small programs: at most 2 ADT sorts, 4 predicates, 2 catamorphisms.
# Everything is generated through the concrete syntax so the output is
# well-sorted by construction.

_TREE_DECL = ":- data tree(T) ==> leaf ; node(tree(T), T, tree(T)).\n"
_LIST = "list(int)"
_TREE = "tree(int)"

_CATA_LEN = (
    ":- cata len(adt: list(int), out: int).\n"
    "len([], N) :- N = 0.\n"
    "len([H|T], N) :- N = NT + 1, len(T, NT).\n"
    ":- cata_abs list(int) ==> len(Xs, N).\n")

_CATA_TSIZE = (
    ":- cata tsize(adt: tree(int), out: int).\n"
    "tsize(leaf, N) :- N = 0.\n"
    "tsize(node(L, X, R), N) :- N = NL + NR + 1, "
    "tsize(L, NL), tsize(R, NR).\n"
    ":- cata_abs tree(int) ==> tsize(T, N).\n")


def random_program(rng: random.Random) -> str:
    use_tree = rng.random() < 0.5
    sorts = ["int", _LIST] + ([_TREE] if use_tree else [])
    npred = rng.randint(1, 4)
    sigs = [[rng.choice(sorts) for _ in range(rng.randint(1, 3))]
            for _ in range(npred)]

    out = []
    if use_tree:
        out.append(_TREE_DECL)
    out.append(_CATA_LEN)
    if use_tree:
        out.append(_CATA_TSIZE)
    for i, sig in enumerate(sigs):
        out.append(f":- pred p{i}({', '.join(sig)}).\n")

    fresh = itertools.count()

    def var(prefix):
        return f"{prefix}{next(fresh)}"

    def clause_for(i, sig, recursive):
        head_args = []
        atoms = []
        rels = []
        scope = {}

        def note(v, s):
            scope.setdefault(s, []).append(v)

        for s in sig:
            if s == "int":
                v = var("N")
                head_args.append(v)
                note(v, s)
            elif s == _LIST:
                shape = rng.random()
                if recursive or shape < 0.4:
                    h, t = var("H"), var("T")
                    head_args.append(f"[{h}|{t}]")
                    note(h, "int")
                    note(t, s)
                elif shape < 0.7:
                    head_args.append("[]")
                else:
                    v = var("L")
                    head_args.append(v)
                    note(v, s)
            else:
                shape = rng.random()
                if recursive or shape < 0.4:
                    left, x, right = var("TL"), var("X"), var("TR")
                    head_args.append(f"node({left}, {x}, {right})")
                    note(left, s)
                    note(x, "int")
                    note(right, s)
                elif shape < 0.7:
                    head_args.append("leaf")
                else:
                    v = var("T")
                    head_args.append(v)
                    note(v, s)

        targets = [i] if recursive else [rng.randrange(npred)
                                         for _ in range(rng.randint(0, 2))]
        for j in targets:
            args = []
            for s in sigs[j]:
                pool = scope.get(s, [])
                if pool and rng.random() < 0.8:
                    args.append(rng.choice(pool))
                else:
                    v = var("B")
                    args.append(v)
                    note(v, s)
            atoms.append(f"p{j}({', '.join(args)})")

        ints = scope.get("int", [])
        if ints and rng.random() < 0.7:
            a = rng.choice(ints)
            others = [x for x in ints if x != a]
            if others and rng.random() < 0.5:
                rels.append(f"{a} = {rng.choice(others)} + {rng.randint(-1, 1)}")
            else:
                rels.append(f"{a} = {rng.randint(-1, 1)}")

        head = f"p{i}({', '.join(head_args)})"
        body = ", ".join(rels + atoms)
        return f"{head}.\n" if not body else f"{head} :- {body}.\n"

    for i, sig in enumerate(sigs):
        for _ in range(rng.randint(1, 2)):
            out.append(clause_for(i, sig, recursive=False))
        if any(s != "int" for s in sig) and rng.random() < 0.6:
            out.append(clause_for(i, sig, recursive=True))

    qi = rng.randrange(npred)
    qargs = [var("Q") for _ in sigs[qi]]
    qints = [a for a, s in zip(qargs, sigs[qi]) if s == "int"]
    cons = ""
    if qints and rng.random() < 0.7:
        cons = f"{rng.choice(qints)} > 0, "
    out.append(f"false :- {cons}p{qi}({', '.join(qargs)}).\n")
    return "".join(out)
