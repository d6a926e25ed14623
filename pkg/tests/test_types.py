import random

import pytest
from hypothesis import given, strategies as st

from conftest import T_C
from sessio.gen import random_type
from sessio.parser import parse_type
from sessio.types import (
    LIN, UN, BraL, Base, InL, OpenType, OutL, Qualified, Rec, SelL, Seq, Skip,
    TypeVar, UndefinedQualifier, UnguardedRecursion, check_well_formed, dual,
    dual_label, is_guarded, qual_leq, qualifier_of, show_type, skip, type_step,
    unfold,
)

P = parse_type
types = st.randoms(use_true_random=False).map(lambda r: random_type(r, r.randint(0, 4)))


def steps(src, self_loop=False):
    return {(str(l), show_type(t)) for l, t in type_step(P(src), self_loop)}


class TestQualifiers:
    @pytest.mark.parametrize("src,q", [
        ("lin !Int", LIN),
        ("un skip ; lin !Int", UN),
        ("rec z . lin +{Leaf: lin skip, Node: lin !Int ; z ; z}", LIN),
        ("un &{A: lin skip}", UN),
    ])
    def test_qualifier_of(self, src, q):
        assert qualifier_of(P(src)) is q

    def test_free_variable_has_no_qualifier(self):
        with pytest.raises(UndefinedQualifier):
            qualifier_of(TypeVar("z"))

    def test_order(self):
        assert qual_leq(LIN, UN)
        assert not qual_leq(UN, LIN)
        assert qual_leq(LIN, LIN) and qual_leq(UN, UN)


class TestDual:
    def test_examples(self):
        assert dual(P("lin ?Int")) == P("lin !Int")
        assert dual(P(T_C)) == P("rec z . lin &{Leaf: lin skip, Node: lin ?Int ; z ; z}")
        assert dual(P("un +{A: un !Bool ; lin ?Int}")) == P("un &{A: un ?Bool ; lin !Int}")

    def test_skip_is_self_dual(self):
        assert dual(skip(UN)) == skip(UN)

    def test_payload_untouched(self):
        t = P("lin !(lin ?Int, lin !Int)")
        assert dual(t) == P("lin ?(lin ?Int, lin !Int)")

    @given(types)
    def test_involution(self, t):
        assert dual(dual(t)) == t


class TestGuardedness:
    @pytest.mark.parametrize("src,ok", [
        ("rec z . lin !Int ; z", True),
        ("rec z . z ; lin !Int", False),
        (T_C, True),
        ("rec z . lin +{A: z}", False),
        ("rec z . lin skip ; z", False),
        ("rec z . lin +{A: lin ?Int, B: lin !Int} ; z", True),
        ("rec z . lin +{A: lin skip, B: lin !Int} ; z", False),
    ])
    def test_examples(self, src, ok):
        assert is_guarded(P(src)) is ok

    def test_unfold(self):
        t = P("rec z . lin !Int ; z")
        assert unfold(t) == Seq(Qualified(LIN, P("lin !Int").pre), t)

    def test_unfold_tree(self):
        t = P(T_C)
        r = show_type(t)
        assert show_type(unfold(t)) == f"lin +{{Leaf: lin skip, Node: lin !Int ; ({r}) ; {r}}}"

    def test_unfold_unguarded(self):
        with pytest.raises(UnguardedRecursion):
            unfold(P("rec z . z"))

    def test_open_type_rejected(self):
        with pytest.raises(OpenType):
            check_well_formed(Seq(P("lin !Int"), TypeVar("y")))


class TestTransitions:
    def test_output(self):
        assert steps("lin !Int") == {("!Int", "lin skip")}

    def test_seq2_through_skip(self):
        assert steps("lin skip ; lin ?Bool") == {("?Bool", "lin skip")}

    def test_seq2_qualifier_condition(self):
        # Q(un skip) = un is not below lin
        assert steps("un skip ; lin ?Bool") == set()
        assert steps("lin skip ; un ?Bool") == {("?Bool", "un skip")}

    def test_rec_select(self):
        r = show_type(P(T_C))
        assert steps(T_C) == {("+Leaf", "lin skip"), ("+Node", f"lin !Int ; ({r}) ; {r}")}

    def test_un_modes(self):
        assert steps("un ?Int") == {("?Int", "un skip")}
        assert steps("un ?Int", self_loop=True) == {("?Int", "un ?Int")}

    def test_select_side_condition(self):
        assert steps("un +{A: lin !Int, B: un !Int}") == {("+B", "un !Int")}

    def test_seq1_filter(self):
        # the left step must not lower the qualifier
        assert steps("lin +{A: un !Int} ; lin ?Int") == {("+A", "un !Int ; lin ?Int")}

    def test_skip_terminated(self):
        assert type_step(skip()) == ()

    def test_open_rejected(self):
        with pytest.raises(OpenType):
            type_step(TypeVar("z"))

    @given(types)
    def test_deterministic_per_label(self, t):
        labels = [l for l, _ in type_step(t)]
        assert len(labels) == len(set(labels))

    @given(types)
    def test_unfold_preserves_transitions(self, t):
        if isinstance(t, Rec):
            assert type_step(t) == type_step(unfold(t))

    @given(types)
    def test_qualifier_never_drops(self, t):
        for _, t2 in type_step(t):
            assert qual_leq(qualifier_of(t), qualifier_of(t2))

    @given(types)
    def test_duality_of_transitions(self, t):
        mine = {(dual_label(l), dual(t2)) for l, t2 in type_step(t)}
        assert mine == set(type_step(dual(t)))


class TestLabels:
    def test_dual_labels(self):
        assert dual_label(OutL(Base("Int"))) == InL(Base("Int"))
        assert dual_label(SelL("L")) == BraL("L")
        assert dual_label(dual_label(BraL("L"))) == BraL("L")

    def test_rendering(self):
        assert [str(l) for l in (OutL(Base("Int")), InL(Base("Bool")), SelL("A"), BraL("B"))] == \
            ["!Int", "?Bool", "+A", "&B"]


class TestPrinting:
    @given(types)
    def test_round_trip(self, t):
        assert P(show_type(t)) == t

    def test_default_qualifier(self):
        assert show_type(P("skip")) == "lin skip"

    def test_generator_closed_and_guarded(self):
        rng = random.Random(7)
        for _ in range(200):
            check_well_formed(random_type(rng, 4))
