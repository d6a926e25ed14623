import random

import pytest
from hypothesis import given, strategies as st

from conftest import T_C, T_C1, T_C2
from sessio.bisim import (
    Bisimilar, NotBisimilar, Unknown, bisimilar, canonical_repr, distributive_pair,
    labels_match, quotient_step, replay_failure,
)
from sessio.gen import perturb, random_choice_pair, random_type
from sessio.parser import parse_type
from sessio.types import (
    LIN, UN, Base, BraL, InL, OutL, Qualified, Select, Branch, SelL, Seq, dual,
    qualifier_of, show_type, skip, type_step,
)

P = parse_type
seeds = st.integers(0, 2**32 - 1)


def oracle(t1, t2) -> bool:
    """Greatest bisimulation on the finite reachable graph, by naive refinement."""
    states, todo = set(), [t1, t2]
    while todo:
        t = todo.pop()
        if t in states:
            continue
        states.add(t)
        todo.extend(t2 for _, t2 in type_step(t))
    rel = {(a, b) for a in states for b in states if qualifier_of(a) == qualifier_of(b)}
    changed = True
    while changed:
        changed = False
        for a, b in list(rel):
            sa, sb = type_step(a), type_step(b)
            fwd = all(any(l == l2 and (x, y) in rel for l2, y in sb) for l, x in sa)
            bwd = all(any(l == l2 and (x, y) in rel for l, x in sa) for l2, y in sb)
            if not (fwd and bwd):
                rel.discard((a, b))
                changed = True
    return (t1, t2) in rel


def finite_type(r: random.Random):
    return random_type(r, r.randint(0, 3), rec=False)


class TestExamples:
    def test_trailing_send(self):
        assert isinstance(bisimilar(P(T_C1), P(T_C2)), Bisimilar)

    def test_direction(self):
        r = bisimilar(P("lin !Int"), P("lin ?Int"))
        assert isinstance(r, NotBisimilar)
        assert str(r) == "NOT-BISIMILAR !Int"

    def test_qualifier_clause(self):
        r = bisimilar(P("lin !Int"), P("un !Int"))
        assert isinstance(r, NotBisimilar) and r.clause == "qualifier-mismatch"

    def test_budget(self):
        a = P("rec x . !Int ; !Int ; !Int ; !Int ; x")
        b = P("rec y . !Int ; !Int ; !Int ; !Int ; !Int ; y")
        assert isinstance(bisimilar(a, b, budget=10), Unknown)
        assert isinstance(bisimilar(a, b), Bisimilar)

    def test_tree_stack(self):
        r = P(T_C)
        assert isinstance(bisimilar(Seq(r, r), Seq(r, Seq(r, r))), NotBisimilar)
        assert isinstance(bisimilar(Seq(r, skip()), r), Bisimilar)

    def test_unnormed_stacks(self):
        a = P("rec x . lin +{A: lin !Int ; x ; x, B: lin !Int}")
        b = P("rec y . lin +{A: lin !Int ; y ; y, B: lin !Int}")
        assert isinstance(bisimilar(Seq(a, a), Seq(b, b)), Bisimilar)

    def test_left_skip_needs_matching_qualifier(self):
        # un skip ; lin !Int is stuck (un is not below lin)
        assert isinstance(bisimilar(P("un skip ; lin !Int"), P("lin !Int")), NotBisimilar)
        assert isinstance(bisimilar(P("lin skip ; lin !Int"), P("lin !Int")), Bisimilar)

    def test_distributivity_corner(self):
        # every arm blocked by the select side condition: the tail runs on the left only
        r = bisimilar(P("un +{L: lin skip} ; un !Int"), P("un +{L: lin skip ; un !Int}"))
        assert isinstance(r, NotBisimilar)
        assert replay_failure(P("un +{L: lin skip} ; un !Int"), P("un +{L: lin skip ; un !Int}"), r)


class TestLabels:
    def test_examples(self):
        assert labels_match(SelL("Leaf"), SelL("Leaf"))
        assert not labels_match(OutL(Base("Int")), InL(Base("Int")))
        assert labels_match(OutL(P("lin skip ; lin !Int")), OutL(P("lin !Int")))
        assert not labels_match(OutL(P("lin ?Int")), OutL(P("lin !Int")))


class TestCanonical:
    def test_skip_elimination(self):
        assert canonical_repr(P("lin skip ; lin !Int")).type == P("lin !Int")
        assert canonical_repr(P("lin skip")).type == P("lin skip")

    def test_trailing_send(self):
        assert canonical_repr(P(T_C1)).type == canonical_repr(P(T_C2)).type

    def test_quotient_steps(self):
        assert [(str(l), show_type(c.type)) for l, c in quotient_step(P("lin skip ; lin !Int"))] == \
            [("!Int", "lin skip")]
        assert quotient_step(P("lin skip")) == ()
        assert {l for l, _ in quotient_step(P(T_C1))} == {l for l, _ in type_step(P(T_C2))}

    @given(seeds)
    def test_sound(self, seed):
        t = random_type(random.Random(seed), 3)
        assert not isinstance(bisimilar(t, canonical_repr(t).type), NotBisimilar)

    @given(seeds)
    def test_quotient_agrees_with_representative(self, seed):
        t = random_type(random.Random(seed), 3)
        rep = canonical_repr(t).type
        q = quotient_step(t)
        assert [l for l, _ in q] == [l for l, _ in type_step(rep)]
        for (_, c), (_, y) in zip(q, type_step(rep)):
            assert not isinstance(bisimilar(c.type, y), NotBisimilar)


class TestDistributive:
    def test_schema(self):
        left, right = distributive_pair(LIN, "+", [("L", skip())], P("lin !Int"))
        assert left == P("lin +{L: lin skip} ; lin !Int")
        assert right == P("lin +{L: lin skip ; lin !Int}")

    def test_branch_two_arms(self):
        left, right = distributive_pair(LIN, "&", [("A", P("lin ?Int")), ("B", skip())], P("lin !Bool"))
        assert isinstance(bisimilar(left, right), Bisimilar)

    @given(seeds)
    def test_law_holds(self, seed):
        q, star, arms, tail = random_choice_pair(random.Random(seed))
        left, right = distributive_pair(q, star, arms, tail)
        assert isinstance(bisimilar(left, right), Bisimilar)

    @given(seeds, st.integers(0, 3))
    def test_dropped_arm(self, seed, k):
        q, star, arms, tail = random_choice_pair(random.Random(seed))
        left, right = distributive_pair(q, star, arms, tail)
        k %= len(arms)
        ctor = Select if star == "+" else Branch
        mutant = Qualified(q, ctor(tuple(a for i, a in enumerate(right.pre.arms) if i != k)))
        assert isinstance(bisimilar(left, mutant), NotBisimilar)

    @given(seeds)
    def test_flipped_arm(self, seed):
        q, star, arms, tail = random_choice_pair(random.Random(seed))
        live = [i for i, (_, a) in enumerate(arms) if type_step(a)]
        if not live:
            return
        k = live[0]
        left, _ = distributive_pair(q, star, arms, tail)
        flipped = [(l, dual(a) if i == k else a) for i, (l, a) in enumerate(arms)]
        _, right = distributive_pair(q, star, flipped, tail)
        assert isinstance(bisimilar(left, right), NotBisimilar)


class TestAgainstOracle:
    @given(st.randoms(use_true_random=False))
    def test_random_pairs(self, r):
        t1 = finite_type(r)
        t2 = perturb(t1, r) if r.random() < 0.5 else finite_type(r)
        res = bisimilar(t1, t2)
        assert not isinstance(res, Unknown)
        assert isinstance(res, Bisimilar) == oracle(t1, t2)

    @given(st.randoms(use_true_random=False))
    def test_raw_search(self, r):
        t1, t2 = finite_type(r), finite_type(r)
        res = bisimilar(t1, t2, canonicalise=False, decompose=False)
        assert isinstance(res, Bisimilar) == oracle(t1, t2)


class TestRelation:
    @given(seeds)
    def test_reflexive(self, seed):
        t = random_type(random.Random(seed), 4)
        assert isinstance(bisimilar(t, t), Bisimilar)

    @given(st.randoms(use_true_random=False))
    def test_symmetric(self, r):
        t1 = random_type(r, 3)
        t2 = perturb(t1, r) if r.random() < 0.5 else random_type(r, 3)
        a, b = bisimilar(t1, t2), bisimilar(t2, t1)
        if not isinstance(a, Unknown) and not isinstance(b, Unknown):
            assert type(a) is type(b)

    @given(st.randoms(use_true_random=False))
    def test_transitive(self, r):
        a = random_type(r, 3)
        b, c = perturb(a, r), perturb(a, r)
        if isinstance(bisimilar(a, b), Bisimilar) and isinstance(bisimilar(b, c), Bisimilar):
            assert isinstance(bisimilar(a, c), Bisimilar)

    @given(st.randoms(use_true_random=False))
    def test_counterexamples_replay(self, r):
        t1, t2 = random_type(r, 3), random_type(r, 3)
        res = bisimilar(t1, t2)
        if isinstance(res, NotBisimilar):
            assert replay_failure(t1, t2, res)

    @given(st.randoms(use_true_random=False))
    def test_witness_closed(self, r):
        t1 = random_type(r, 3)
        res = bisimilar(t1, perturb(t1, r))
        if isinstance(res, Bisimilar):
            for a, b in res.relation:
                assert qualifier_of(a) == qualifier_of(b)

    @given(st.randoms(use_true_random=False))
    def test_class_members_step_alike(self, r):
        t = random_type(r, 3)
        u = perturb(t, r)
        if not isinstance(bisimilar(t, u), Bisimilar):
            return
        qt, qu = quotient_step(t), quotient_step(u)
        assert [l for l, _ in qt] == [l for l, _ in qu]
        for (_, a), (_, b) in zip(qt, qu):
            assert not isinstance(bisimilar(a.type, b.type), NotBisimilar)
