import random

import pytest
from hypothesis import given, strategies as st

from conftest import PROGRAMS, load
from sessio import syntax as sx
from sessio.gen import generate_wt_program, random_process
from sessio.parser import ParseError, parse_process, parse_program, parse_type

N, V = sx.Name, sx.Var
processes = st.randoms(use_true_random=False).map(lambda r: random_process(r, r.randint(1, 4)))


class TestParse:
    def test_smallest(self):
        assert parse_program("main = 0").main == sx.Plain(sx.Nil())

    def test_par(self):
        p = parse_program("main = c!<x>.0 | c?(y).0").main
        assert p == sx.Plain(sx.Par(sx.Output(N("c"), N("x"), sx.Nil()),
                                    sx.Input(N("c"), "y", sx.Nil())))

    def test_binders_make_variables(self):
        p = parse_process("c?(y).y!<c>.0")
        assert p.proc.body == sx.Output(V("y"), N("c"), sx.Nil())

    @pytest.mark.parametrize("path", sorted(PROGRAMS.glob("*.apc")), ids=lambda p: p.name)
    def test_fixture_round_trip(self, path):
        prog = parse_program(path.read_text())
        assert parse_program(sx.pretty_print(prog)) == prog

    def test_tree_shape(self):
        prog = load("tree")
        assert set(prog.agents) == {"S", "R"}
        assert prog.agents["S"].tparams == ("K",)
        assert [x for x, _ in prog.agents["S"].params] == ["t", "c", "w"]
        assert len(prog.equations) == 3

    def test_positions(self):
        prog = parse_program("main =\n    c!<x>.0")
        assert prog.main.proc.pos == (2, 5)

    @pytest.mark.parametrize("src,where", [
        ("main = c!<x>.", (1, 14)),
        ("main = c > {A: 0, A: 0}", (1, 19)),
        ("main = S(c)", None),
        ("agent A(x : lin !Int) = 0\nagent A(x : lin !Int) = 0\nmain = 0", None),
        ("main = f(c)", None),
    ])
    def test_errors(self, src, where):
        with pytest.raises(ParseError) as e:
            parse_program(src)
        if where is not None:
            assert (e.value.line, e.value.col) == where

    def test_literals_are_constants(self):
        p = parse_process("c!<42>.c!<true>.0")
        assert p.proc.payload == sx.App("42")
        assert p.proc.body.payload == sx.App("true")

    def test_type_alias_expands(self):
        prog = load("tree")
        assert prog.aliases["T_C"] == parse_type("rec z . lin +{Leaf: lin skip, Node: lin !Int ; z ; z}")

    @given(processes)
    def test_process_round_trip(self, p):
        prog = sx.Program(main=sx.Plain(p))
        assert parse_program(sx.pretty_print(prog)) == prog

    def test_generated_round_trip(self):
        for seed in range(1, 30):
            prog = generate_wt_program(seed, 4)
            assert parse_program(sx.pretty_print(prog)) == prog


class TestPrint:
    def test_nil(self):
        assert sx.show(sx.Nil()) == "0"

    def test_select(self):
        assert sx.show(sx.Select(N("c"), "Leaf", sx.Nil())) == "c <+ Leaf . 0"

    def test_branch_keeps_source_order(self):
        p = parse_process("c > {Node: 0, Leaf: 0}")
        assert sx.show(p) == "c > {Node: 0, Leaf: 0}"


class TestIdentifiers:
    def test_nil(self):
        assert sx.free_identifiers(sx.Nil()) == (frozenset(), frozenset())

    def test_input_binds(self):
        p = sx.Input(N("c"), "x", sx.Output(N("c"), V("x"), sx.Nil()))
        assert sx.free_identifiers(p) == ({"c"}, frozenset())

    def test_restriction_binds(self):
        p = sx.Restrict("n", None, sx.Output(N("n"), N("m"), sx.Nil()))
        assert sx.free_identifiers(p) == ({"m"}, frozenset())

    def test_active_substitution(self):
        names, vs = sx.free_identifiers(sx.ActiveSubst("x", N("a")))
        assert names == {"a"} and vs == {"x"}


class TestSubstitute:
    def test_simple(self):
        p = sx.Output(V("x"), V("y"), sx.Nil())
        assert sx.substitute(p, {"x": N("n")}) == sx.Output(N("n"), V("y"), sx.Nil())

    def test_binder_shadows(self):
        p = sx.Input(N("c"), "x", sx.Output(V("x"), N("a"), sx.Nil()))
        assert sx.substitute(p, {"x": N("n")}) == p

    def test_condition(self):
        p = sx.If(V("x"), V("y"), sx.Nil(), sx.Nil())
        q = sx.substitute(p, {"x": sx.App("f", (N("m"),))})
        assert q.left == sx.App("f", (N("m"),)) and q.right == V("y")

    def test_capture_avoided(self):
        p = sx.Input(N("c"), "y", sx.Output(V("x"), V("y"), sx.Nil()))
        q = sx.substitute(p, {"x": V("y")})
        assert q.binder != "y"
        assert q.body.chan == V("y") and q.body.payload == V(q.binder)

    def test_compound_into_channel(self):
        with pytest.raises(sx.SubstitutionError):
            sx.substitute(sx.Output(V("x"), N("a"), sx.Nil()), {"x": sx.App("f", (N("a"),))})

    @given(processes, st.sampled_from(["x0", "x1", "x2"]), st.sampled_from(["a", "x1", "x0"]))
    def test_capture_avoiding_property(self, p, x, target):
        image = N(target) if target == "a" else V(target)
        names, vs = sx.free_identifiers(p)
        try:
            q = sx.substitute(p, {x: image})
        except sx.SubstitutionError:
            return
        names2, vs2 = sx.free_identifiers(q)
        if x in vs:
            # every free identifier of the image stays free
            assert (target in names2) if target == "a" else (target in vs2)
        assert vs2 - {target} <= vs - {x}
        assert names2 - {target} <= names

    @given(processes)
    def test_branch_labels_distinct(self, p):
        def walk(p):
            if isinstance(p, sx.Branch):
                labels = [l for l, _ in p.arms]
                assert len(labels) == len(set(labels))
            for f in ("left", "right", "body", "then", "orelse"):
                if hasattr(p, f):
                    walk(getattr(p, f))
            for _, a in getattr(p, "arms", ()):
                walk(a)
        walk(parse_program(sx.pretty_print(sx.Program(main=sx.Plain(p)))).main.proc)
