import itertools

import pytest
from hypothesis import given, strategies as st

from sessio import syntax as sx
from sessio.context import (
    Context, ContextError, TermError, ctx_split, ctx_update, is_un, type_term,
)
from sessio.parser import parse_type
from sessio.types import LIN, UN, Base, Session, qualifier_of

P = parse_type
LIN_OUT, LIN_IN, UN_IN = P("lin !Int"), P("lin ?Int"), P("un ?Int")
ENTRY_KINDS = {
    "un endpoint": UN_IN,
    "lin endpoint": LIN_OUT,
    "lin pair": Session(LIN_OUT, LIN_IN),
    "base": Base("Int"),
}


def derivable(g: dict, g1: dict, g2: dict) -> bool:
    """Whether g = g1 ∘ g2 follows from the split table, read rule by rule."""
    if not g:
        return not g1 and not g2
    n = next(iter(g))
    t = g[n]
    rest = {k: v for k, v in g.items() if k != n}
    r1 = {k: v for k, v in g1.items() if k != n}
    r2 = {k: v for k, v in g2.items() if k != n}
    here = (g1.get(n), g2.get(n))
    options = []
    if isinstance(t, Base):
        options.append((t, t))  # base entries are unrestricted
    elif isinstance(t, Session):
        q1, q2 = qualifier_of(t.left), qualifier_of(t.right)
        if q1 is UN and q2 is UN:
            options.append((t, t))
        if q1 is LIN and q2 is LIN:
            options += [(t, None), (None, t), (t.left, t.right), (t.right, t.left)]
    elif qualifier_of(t) is UN:
        options.append((t, t))
    else:
        options += [(t, None), (None, t)]
    return here in options and derivable(rest, r1, r2)


def brute_force(g: dict) -> set:
    keys = list(g)
    cands = []
    for k in keys:
        t = g[k]
        parts = {None, t}
        if isinstance(t, Session):
            parts |= {t.left, t.right}
        cands.append(list(parts))
    out = set()
    for c1 in itertools.product(*cands):
        for c2 in itertools.product(*cands):
            g1 = {k: v for k, v in zip(keys, c1) if v is not None}
            g2 = {k: v for k, v in zip(keys, c2) if v is not None}
            if derivable(g, g1, g2):
                out.add((tuple(sorted(g1.items())), tuple(sorted(g2.items()))))
    return out


def enumerated(g: dict) -> set:
    return {(tuple(sorted(a.items())), tuple(sorted(b.items()))) for a, b in ctx_split(Context(g))}


def all_small_contexts():
    kinds = list(ENTRY_KINDS.values()) + [Session(UN_IN, P("un !Int")), Session(LIN_OUT, P("un ?Int"))]
    for size in range(4):
        for combo in itertools.product(kinds, repeat=size):
            yield {f"n{i}": t for i, t in enumerate(combo)}


class TestSplit:
    def test_empty(self):
        assert list(ctx_split(Context())) == [(Context(), Context())]

    def test_un_endpoint_copied(self):
        g = Context({"n": UN_IN})
        assert list(ctx_split(g)) == [(g, g)]

    def test_lin_pair_four_ways(self):
        s = Session(LIN_OUT, LIN_IN)
        got = enumerated({"n": s})
        assert got == {
            ((("n", s),), ()), ((), (("n", s),)),
            ((("n", LIN_OUT),), (("n", LIN_IN),)), ((("n", LIN_IN),), (("n", LIN_OUT),)),
        }

    def test_mixed_pair_unsplittable(self):
        assert list(ctx_split(Context({"n": Session(LIN_OUT, P("un ?Int"))}))) == []

    def test_exact_against_table(self):
        for g in all_small_contexts():
            assert enumerated(g) == brute_force(g), g

    def test_sound(self):
        # recombining each side reproduces the original entries
        for g in all_small_contexts():
            for a, b in ctx_split(Context(g)):
                for k, t in g.items():
                    parts = [x for x in (a.get(k), b.get(k)) if x is not None]
                    if isinstance(t, Session) and len(parts) == 2 and parts[0] != parts[1]:
                        assert set(parts) == {t.left, t.right}
                    else:
                        assert t in parts


class TestUpdate:
    def test_fresh(self):
        assert ctx_update(Context(), "n", LIN_OUT) == Context({"n": LIN_OUT})

    def test_replace_lin(self):
        assert ctx_update(Context({"n": LIN_OUT}), "n", P("lin skip")) == Context({"n": P("lin skip")})

    def test_un_must_agree(self):
        g = Context({"n": UN_IN})
        assert ctx_update(g, "n", UN_IN) == g
        with pytest.raises(ContextError):
            ctx_update(g, "n", P("un !Int"))

    def test_extend_only_fresh(self):
        with pytest.raises(ContextError):
            Context({"x": Base("Int")}).extend("x", Base("Int"))


class TestTerms:
    funcs = {"fst": sx.FuncSig(("Tree",), "Int")}

    def test_variable(self):
        assert type_term(Context({"x": Base("Int")}), sx.Var("x")) == Base("Int")

    def test_linear_residue(self):
        with pytest.raises(TermError):
            type_term(Context({"x": Base("Int"), "c": LIN_OUT}), sx.Var("x"))

    def test_completed_residue_allowed(self):
        assert type_term(Context({"x": Base("Int"), "c": P("lin skip")}), sx.Var("x")) == Base("Int")

    def test_application(self):
        g = Context({"t": Base("Tree")}, self.funcs)
        assert type_term(g, sx.App("fst", (sx.Var("t"),))) == Base("Int")

    def test_bad_argument(self):
        g = Context({"t": Base("Int")}, self.funcs)
        with pytest.raises(TermError):
            type_term(g, sx.App("fst", (sx.Var("t"),)))

    def test_literals(self):
        assert type_term(Context(), sx.App("7")) == Base("Int")
        assert type_term(Context(), sx.App("false")) == Base("Bool")

    def test_un_predicate(self):
        assert is_un({"a": UN_IN, "b": Base("Int"), "c": P("lin skip")})
        assert not is_un({"c": LIN_OUT})
