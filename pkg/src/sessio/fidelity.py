"""Run well-typed programs and check that their typing follows them.

Each synchronisation on a channel advances that channel's session pair by
a pair of dual labels; the residual configuration must then typecheck
against the advanced context.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import semantics as sm
from . import syntax as sx
from .bisim import labels_match, quotient_step
from .context import Context
from .typecheck import PLAIN, QUOTIENT, Checker, Options, Verdict, check_program, initial_context
from .types import (
    BraL, InL, OutL, SelL, Session, TypeLabel, dual_label, show_type, type_step,
)


class AdvanceError(Exception):
    pass


class PreconditionFailed(Exception):
    def __init__(self, verdict: Verdict):
        super().__init__(verdict.render())
        self.verdict = verdict


@dataclass(frozen=True)
class AdvanceRecord:
    channel: str
    labels: tuple[TypeLabel, TypeLabel]
    before: Context
    after: Context


def _steps(t, mode: str, self_loop: bool):
    if mode == QUOTIENT:
        return [(lab, rep.type) for lab, rep in quotient_step(t, self_loop)]
    return list(type_step(t, self_loop))


def _wanted(kind: str, lab: TypeLabel, label: Optional[str]) -> bool:
    if kind == "comm":
        return isinstance(lab, (OutL, InL))
    return isinstance(lab, (SelL, BraL)) and lab.label == label


def advance(g: Context, info: sm.TauInfo, mode: str = PLAIN, self_loop: bool = False) -> Optional[AdvanceRecord]:
    """Step the pair at ``info.chan`` by dual labels; ``None`` for match steps."""
    if info.chan is None:
        return None
    c = info.chan
    if c not in g:
        raise AdvanceError(f"{c} is not in the context")
    pair = g[c]
    if not isinstance(pair, Session):
        raise AdvanceError(f"{c} : {show_type(pair)} is not a session pair")
    left = [(l, t) for l, t in _steps(pair.left, mode, self_loop) if _wanted(info.kind, l, info.label)]
    right = _steps(pair.right, mode, self_loop)
    for lab, t1 in left:
        for lab2, t2 in right:
            if labels_match(dual_label(lab), lab2):
                after = g.set(c, Session(t1, t2))
                return AdvanceRecord(c, (lab, lab2), g, after)
    detail = f" {info.label}" if info.label else ""
    raise AdvanceError(
        f"{c} : ({show_type(pair.left)}, {show_type(pair.right)}) cannot take a {info.kind}{detail} step")


def advance_context(g: Context, info: sm.TauInfo, mode: str = PLAIN, self_loop: bool = False) -> Context:
    rec = advance(g, info, mode, self_loop)
    return g if rec is None else rec.after


def _resync(g: Context, before: sm.Configuration, after: sm.Configuration) -> Context:
    # restrictions born from unfolding enter with their annotation; dropped ones leave
    old = {n for n, _ in before.restricted}
    new = dict(after.restricted)
    for n in old - set(new):
        g = g.remove(n)
    for n, s in new.items():
        if n not in old:
            g = g.set(n, s)
    return g


@dataclass(frozen=True)
class Report:
    seed: int
    steps: int
    kind: Optional[str] = None  # None means no violation
    at: int = 0
    detail: str = ""
    outcome: str = ""

    @property
    def ok(self) -> bool:
        return self.kind is None

    def line(self) -> str:
        verdict = "OK" if self.ok else f"VIOLATION({self.kind}@{self.at})"
        return f"seed={self.seed} steps={self.steps} verdict={verdict}"


def subject_reduction_check(prog: sx.Program, steps: int = 50, seed: int = 0, mode: str = PLAIN,
                            self_loop: bool = False, mutate: bool = False,
                            repl_budget: int = sm.DEFAULT_REPL_BUDGET, on_step=None,
                            precheck: bool = True) -> Report:
    """Run ``prog`` and re-typecheck after every step.

    Violations: a runtime error, a step the context cannot follow
    (``advance``), an unbalanced pair after advancing (``balance``) or a
    residual that no longer typechecks (``retype``).
    """
    opts = Options(mode=mode, self_loop=self_loop)
    if precheck:
        v = check_program(prog, options=opts)
        if not v.accepted:
            raise PreconditionFailed(v)
    chk = Checker(prog, opts)
    c = sm.load(prog, repl_budget)
    g = initial_context(prog)
    g = _resync(g, sm.Configuration((), (), ()), c)
    violation: list[tuple[str, int, str]] = []

    def hook(k: int, info: sm.TauInfo, before: sm.Configuration, after: sm.Configuration):
        nonlocal g
        try:
            g2 = advance_context(g, info, mode, self_loop)
        except AdvanceError as e:
            violation.append(("advance", k, str(e)))
            return False
        if info.chan is not None:
            ok, why = chk.balanced(g2[info.chan])
            if not ok:
                violation.append(("balance", k, why))
                return False
        pair = g2[info.chan] if info.chan is not None else None
        g2 = _resync(g2, before, after)
        f = chk.check(g2, after.body())
        if on_step is not None:
            on_step(k, info, pair, f)
        if f is not None:
            violation.append(("retype", k, f.render()))
            return False
        g = g2
        return True

    res = sm.run(c, steps, seed, mutate, on_step=hook)
    if violation:
        kind, at, detail = violation[0]
        return Report(seed, len(res.trace), kind, at, detail, "stopped")
    if not res.ok:
        return Report(seed, len(res.trace), type(res.outcome).__name__, len(res.trace) + 1,
                      str(res.outcome), "error")
    return Report(seed, len(res.trace), outcome=res.outcome)


def summary(reports: list[Report]) -> str:
    bad = [r for r in reports if not r.ok]
    return f"programs={len(reports)} violations={len(bad)} steps={sum(r.steps for r in reports)}"
