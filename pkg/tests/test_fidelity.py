import pytest
from hypothesis import given, strategies as st

from conftest import T_C, load
from sessio import fidelity as fd
from sessio import semantics as sm
from sessio.context import Context
from sessio.gen import generate_wt_program
from sessio.parser import parse_program, parse_type
from sessio.typecheck import PLAIN, QUOTIENT, Checker, Options
from sessio.types import BraL, InL, SelL, Session, dual, show_type


def pair(a, b=None):
    t = parse_type(a)
    return Session(t, parse_type(b) if b else dual(t))


class TestAdvance:
    def test_comm(self):
        g = Context({"c": pair("lin !Int", "lin ?Int")})
        g2 = fd.advance_context(g, sm.TauInfo("comm", "c"))
        assert g2["c"] == pair("lin skip", "lin skip")

    def test_choice(self):
        g = Context({"c": pair(T_C)})
        rec = fd.advance(g, sm.TauInfo("choice", "c", "Node"))
        assert rec.labels == (SelL("Node"), BraL("Node"))
        assert show_type(rec.after["c"].left).startswith("lin !Int ;")
        assert rec.after["c"].right == dual(rec.after["c"].left)

    def test_match_is_silent(self):
        g = Context({"c": pair("lin !Int")})
        assert fd.advance(g, sm.TauInfo("match")) is None
        assert fd.advance_context(g, sm.TauInfo("match")) == g

    def test_missing_label(self):
        g = Context({"c": pair(T_C)})
        with pytest.raises(fd.AdvanceError):
            fd.advance(g, sm.TauInfo("choice", "c", "Other"))

    def test_wrong_kind(self):
        g = Context({"c": pair(T_C)})
        with pytest.raises(fd.AdvanceError):
            fd.advance(g, sm.TauInfo("comm", "c"))

    def test_unknown_channel(self):
        with pytest.raises(fd.AdvanceError):
            fd.advance(Context(), sm.TauInfo("comm", "c"))

    @pytest.mark.parametrize("mode", [PLAIN, QUOTIENT])
    def test_skip_prefix(self, mode):
        g = Context({"c": pair("lin skip ; lin !Int", "lin ?Int")})
        rec = fd.advance(g, sm.TauInfo("comm", "c"), mode)
        assert isinstance(rec.labels[1], InL)


class TestHarness:
    @pytest.mark.parametrize("name", ["tree", "tree_reuse"])
    @pytest.mark.parametrize("mode", [PLAIN, QUOTIENT])
    def test_fixtures(self, name, mode):
        prog = load(name)
        for seed in range(5):
            r = fd.subject_reduction_check(prog, 100, seed, mode)
            assert r.ok, r.detail
            assert r.outcome == "terminated"

    def test_report_line(self):
        r = fd.subject_reduction_check(load("tree"), 100, 7)
        assert r.line() == f"seed=7 steps={r.steps} verdict=OK"

    def test_precondition(self):
        with pytest.raises(fd.PreconditionFailed):
            fd.subject_reduction_check(load("tree_badlabel"))

    def test_runtime_fault_reported(self):
        r = fd.subject_reduction_check(load("mismatch"), precheck=False)
        assert r.kind == "LabelMismatch" and r.outcome == "error"

    def test_mutation_detected(self):
        r = fd.subject_reduction_check(load("tree"), 100, 0, mutate=True)
        assert not r.ok and r.kind in ("advance", "balance", "retype")

    def test_pairs_stay_balanced(self):
        chk = Checker(load("tree"), Options())
        seen = []

        def on_step(k, info, p, failure):
            if p is not None:
                seen.append(chk.balanced(p)[0])

        assert fd.subject_reduction_check(load("tree"), 100, 3, on_step=on_step).ok
        assert seen and all(seen)

    def test_summary(self):
        reps = [fd.Report(0, 3), fd.Report(1, 4, "retype", 2)]
        assert fd.summary(reps) == "programs=2 violations=1 steps=7"


class TestGenerated:
    @given(st.integers(1, 10_000))
    def test_generated_programs_keep_typing(self, seed):
        prog = generate_wt_program(seed, 4)
        r = fd.subject_reduction_check(prog, 50, seed)
        assert r.ok, r.detail

    @given(st.integers(1, 10_000))
    def test_duality_preserved(self, seed):
        prog = generate_wt_program(seed, 4)
        chk = Checker(prog, Options())
        bad = []

        def on_step(k, info, p, failure):
            if p is not None and not chk.balanced(p)[0]:
                bad.append((k, info))

        assert fd.subject_reduction_check(prog, 50, seed, on_step=on_step).ok
        assert bad == []

    def test_mutation_sensitivity(self):
        bad = 0
        for seed in range(1, 41):
            r = fd.subject_reduction_check(generate_wt_program(seed, 4), 50, seed, mutate=True)
            bad += not r.ok
        assert bad >= 1

    def test_arm_coverage(self):
        # selector choices are fixed when a program is drawn, so arms are
        # counted across program seeds
        taken = {}
        for seed in range(1, 101):
            res = sm.run(sm.load(generate_wt_program(seed, 4)), 50, seed)
            for info, _ in res.trace:
                if info.kind == "choice":
                    taken.setdefault(info.label, 0)
                    taken[info.label] += 1
        assert len(taken) >= 4
