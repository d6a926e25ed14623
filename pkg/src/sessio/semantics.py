"""Structural normalisation, reductions, labelled transitions and a seeded executor.

A configuration is a process in normal form: top-level restrictions are
hoisted (and renamed apart where they would clash), active substitutions
are applied to every thread, agent calls in thread position are unfolded
and inert ``0`` threads are dropped.  Replication is expanded lazily, one
copy per replicated thread per step.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Union

from . import syntax as sx
from .node import Node
from .types import Session

DEFAULT_REPL_BUDGET = 32
UNFOLD_DEPTH = 64


# -- actions and errors -----------------------------------------------------

@dataclass(frozen=True)
class TauInfo:
    kind: str  # "comm" | "choice" | "match"
    chan: Optional[str] = None
    label: Optional[str] = None

    def __str__(self) -> str:
        parts = [self.kind]
        if self.chan is not None:
            parts.append(self.chan)
        if self.label is not None:
            parts.append(self.label)
        return " ".join(parts)


@dataclass(frozen=True)
class SelA:
    chan: str
    label: str

    def __str__(self) -> str:
        return f"{self.chan} <+ {self.label}"


@dataclass(frozen=True)
class BraA:
    chan: str
    label: str

    def __str__(self) -> str:
        return f"{self.chan} > {self.label}"


@dataclass(frozen=True)
class InA:
    chan: str
    binder: str

    def __str__(self) -> str:
        return f"{self.chan}({self.binder})"


@dataclass(frozen=True)
class OutA:
    chan: str
    value: sx.Term

    def __str__(self) -> str:
        return f"~{self.chan}<{sx.show_term(self.value)}>"


@dataclass(frozen=True)
class Tau:
    info: TauInfo

    def __str__(self) -> str:
        return f"tau {self.info}"


ProcAction = Union[SelA, BraA, InA, OutA, Tau]


@dataclass(frozen=True)
class LabelMismatch:
    chan: str
    offered: tuple[str, ...]
    selected: str

    def __str__(self) -> str:
        return f"LabelMismatch on {self.chan}: selected {self.selected}, offered {{{', '.join(self.offered)}}}"


@dataclass(frozen=True)
class IllFormedSend:
    where: str

    def __str__(self) -> str:
        return f"IllFormedSend: {self.where}"


@dataclass(frozen=True)
class UnboundAgent:
    name: str

    def __str__(self) -> str:
        return f"UnboundAgent: {self.name}"


RuntimeFault = Union[LabelMismatch, IllFormedSend, UnboundAgent]


class RuntimeFailure(Exception):
    def __init__(self, fault: RuntimeFault):
        super().__init__(str(fault))
        self.fault = fault


# -- term evaluation --------------------------------------------------------

def _match(pat: sx.Term, m: sx.Term, env: dict[str, sx.Term]) -> bool:
    match pat:
        case sx.Var(x):
            if x in env:
                return env[x] == m
            env[x] = m
            return True
        case sx.App(f, args):
            if not isinstance(m, sx.App) or m.fn != f or len(m.args) != len(args):
                return False
            return all(_match(p, a, env) for p, a in zip(args, m.args))
    return pat == m


def evaluate(m: sx.Term, equations: tuple[sx.Equation, ...], fuel: int = 1000) -> sx.Term:
    """Innermost rewriting with the program's equations."""
    def go(m: sx.Term, fuel: int) -> sx.Term:
        if fuel <= 0 or not isinstance(m, sx.App) or not m.args and not equations:
            return m
        m = sx.App(m.fn, tuple(go(a, fuel - 1) for a in m.args), m.pos)
        for eq in equations:
            env: dict[str, sx.Term] = {}
            if _match(eq.lhs, m, env):
                return go(sx.subst_term(eq.rhs, env), fuel - 1)
        return m

    return go(m, fuel)


# -- configurations ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Configuration(Node):
    restricted: tuple[tuple[str, Session], ...]
    substs: tuple[tuple[str, sx.Term], ...]
    threads: tuple[sx.Process, ...]
    repl_used: int = 0
    program: sx.Program = field(default_factory=sx.Program, compare=False, repr=False)
    repl_budget: int = field(default=DEFAULT_REPL_BUDGET, compare=False, repr=False)

    def body(self) -> sx.Extended:
        """Threads and substitutions in parallel, without the top-level restrictions."""
        return sx.lower(_compose(self.threads, self.substs))

    def process(self) -> sx.Extended:
        """The configuration as an extended process."""
        a = _compose(self.threads, self.substs)
        for n, s in reversed(self.restricted):
            a = sx.ANuName(n, s, a)
        return sx.lower(a)

    def show(self) -> str:
        return sx.show(self.process())

    def names_in_use(self) -> set[str]:
        out = {n for n, _ in self.restricted}
        for t in self.threads:
            names, _ = sx.free_identifiers(t)
            out |= names
            out |= sx.bound_identifiers(t)
        return out


class _Normaliser:
    def __init__(self, program: sx.Program, avoid: set[str]):
        self.program = program
        self.in_use: set[str] = set(avoid)
        self.restricted: list[tuple[str, Session]] = []
        self.bound_vars: set[str] = set()
        self.substs: list[tuple[str, sx.Term]] = []
        self.threads: list[sx.Process] = []

    def name_for(self, n: str, body) -> tuple[str, object]:
        if n in self.in_use:
            n2 = sx.fresh(n, self.in_use | sx.bound_identifiers(body))
            body = sx.rename_name(body, n, n2)
            n = n2
        self.in_use.add(n)
        return n, body

    def walk(self, a, depth: int = 0) -> None:
        match a:
            case sx.Plain(p):
                self.walk(p, depth)
            case sx.APar(l, r) | sx.Par(l, r):
                self.walk(l, depth)
                self.walk(r, depth)
            case sx.ANuName(n, s, body) | sx.Restrict(n, s, body):
                n, body = self.name_for(n, body)
                self.restricted.append((n, s))
                self.walk(body, depth)
            case sx.ANuVar(x, _, body):
                if x in self.bound_vars or x in self.in_use:
                    x2 = sx.fresh(x, self.bound_vars | self.in_use | sx.free_identifiers(body)[1])
                    body = sx.substitute(body, {x: sx.Var(x2)})
                    x = x2
                self.bound_vars.add(x)
                self.in_use.add(x)
                self.walk(body, depth)
            case sx.ActiveSubst(x, m):
                self.substs.append((x, m))
            case sx.Nil():
                pass
            case sx.Call(name, targs, args) if depth < UNFOLD_DEPTH:
                self.walk(unfold_call(self.program, a), depth + 1)
            case _:
                self.threads.append(a)

    def apply_substs(self) -> list[tuple[str, sx.Term]]:
        keep: list[tuple[str, sx.Term]] = []
        for x, m in self.substs:
            sigma = {x: m}
            try:
                self.threads = [sx.substitute(t, sigma) for t in self.threads]
            except sx.SubstitutionError:
                raise RuntimeFailure(IllFormedSend(f"compound term {sx.show_term(m)} substituted for channel {x}"))
            keep = [(y, sx.subst_term(n, sigma)) for y, n in keep]
            if x not in self.bound_vars:
                keep.append((x, m))
        return keep


def unfold_call(program: sx.Program, call: sx.Call) -> sx.Extended:
    ag = program.agents.get(call.agent)
    if ag is None:
        raise RuntimeFailure(UnboundAgent(call.agent))
    body = sx.subst_types(ag.body, dict(zip(ag.tparams, call.targs)))
    args = [evaluate(m, program.equations) for m in call.args]
    try:
        return sx.substitute(body, {x: m for (x, _), m in zip(ag.params, args)})
    except sx.SubstitutionError:
        raise RuntimeFailure(IllFormedSend(f"compound argument passed as a channel to {call.agent}"))


def sc_normalize(a: sx.Extended, program: Optional[sx.Program] = None, repl_used: int = 0,
                 repl_budget: int = DEFAULT_REPL_BUDGET) -> Configuration:
    """Normal form of ``a`` up to structural congruence."""
    program = program or sx.Program()
    names, _ = sx.free_identifiers(a)
    norm = _Normaliser(program, set(names))
    norm.walk(a)
    substs = norm.apply_substs()
    threads = tuple(sorted(norm.threads, key=sx.show))
    live: set[str] = set()
    for t in threads:
        live |= sx.free_identifiers(t)[0]
    for _, m in substs:
        live |= sx.term_free(m)[0]
    restricted = tuple(sorted((n, s) for n, s in norm.restricted if n in live))
    return Configuration(restricted, tuple(sorted(substs, key=lambda p: p[0])), threads,
                         repl_used, program, repl_budget)


def _compose(threads, substs) -> sx.Extended:
    parts: list[sx.Extended] = [sx.Plain(t) for t in threads]
    parts += [sx.ActiveSubst(x, m) for x, m in substs]
    if not parts:
        return sx.Plain(sx.Nil())
    a = parts[0]
    for p in parts[1:]:
        a = sx.APar(a, p)
    return a


def _rebuild(c: Configuration, threads: list[sx.Process], extra_restricted=(), extra_repl: int = 0) -> Configuration:
    a = _compose(threads, c.substs)
    for n, s in reversed(tuple(c.restricted) + tuple(extra_restricted)):
        a = sx.ANuName(n, s, a)
    return sc_normalize(a, c.program, c.repl_used + extra_repl, c.repl_budget)


# -- candidates: threads plus one lazy copy per replication ----------------

@dataclass
class _Cand:
    proc: sx.Process
    origin: Optional[int]  # index of the Repl thread a copy came from


def _candidates(c: Configuration):
    cands = [_Cand(t, None) for t in c.threads]
    copies: dict[int, tuple[list, list[int]]] = {}
    if c.repl_used < c.repl_budget:
        in_use = c.names_in_use()
        for i, t in enumerate(c.threads):
            if isinstance(t, sx.Repl):
                sub = _Normaliser(c.program, in_use)
                sub.walk(t.body)
                in_use |= sub.in_use
                idx = []
                for p in sub.threads:
                    idx.append(len(cands))
                    cands.append(_Cand(p, i))
                copies[i] = (sub.restricted, idx)
    return cands, copies


def _assemble(c: Configuration, cands, copies, used: list[int], residues: list[sx.Process]) -> Configuration:
    origins = {cands[k].origin for k in used if cands[k].origin is not None}
    threads = [cands[k].proc for k in range(len(c.threads)) if k not in used]
    extra = []
    for o in sorted(origins):
        restricted, idx = copies[o]
        extra += restricted
        threads += [cands[k].proc for k in idx if k not in used]
    return _rebuild(c, threads + residues, extra, len(origins))


def _chan_key(m: sx.Term) -> Optional[str]:
    if isinstance(m, (sx.Name, sx.Var)):
        return m.id
    if isinstance(m, sx.App) and not m.args:
        return m.fn
    return None


def _value(c: Configuration, m: sx.Term) -> sx.Term:
    v = evaluate(m, c.program.equations)
    if not sx.is_sendable(v):
        raise RuntimeFailure(IllFormedSend(f"payload {sx.show_term(m)} does not evaluate to a name or constant"))
    return v


def _bind(c: Configuration, x: str, body: sx.Process, v: sx.Term) -> sx.Process:
    try:
        return sx.substitute(body, {x: v})
    except sx.SubstitutionError:
        raise RuntimeFailure(IllFormedSend(f"received compound term used as channel"))


def _select_arm(arms, label: str, mutate: bool) -> int:
    labels = [l for l, _ in arms]
    k = labels.index(label)
    return (k + 1) % len(labels) if mutate else k


# -- reductions -------------------------------------------------------------

def reductions(c: Configuration, mutate: bool = False) -> list[tuple[TauInfo, Configuration]]:
    """Com, Select, Match-True and Match-False steps of ``c``.

    With ``mutate`` a select continues the branch in the arm after the
    chosen one; this deliberately broken executor exercises the fidelity
    harness.
    """
    cands, copies = _candidates(c)
    out: list[tuple[TauInfo, Configuration]] = []
    for i, ci in enumerate(cands):
        p = ci.proc
        match p:
            case sx.If(m1, m2, p1, p2):
                v1 = evaluate(m1, c.program.equations)
                v2 = evaluate(m2, c.program.equations)
                out.append((TauInfo("match"), _assemble(c, cands, copies, [i], [p1 if v1 == v2 else p2])))
            case sx.Output(ch, m, cont):
                key = _chan_key(ch)
                for j, cj in enumerate(cands):
                    q = cj.proc
                    if isinstance(q, sx.Input) and _chan_key(q.chan) == key and i != j:
                        v = _value(c, m)
                        res = [cont, _bind(c, q.binder, q.body, v)]
                        out.append((TauInfo("comm", key), _assemble(c, cands, copies, [i, j], res)))
            case sx.Select(ch, lab, cont):
                key = _chan_key(ch)
                for j, cj in enumerate(cands):
                    q = cj.proc
                    if isinstance(q, sx.Branch) and _chan_key(q.chan) == key and i != j:
                        if lab not in {l for l, _ in q.arms}:
                            continue
                        k = _select_arm(q.arms, lab, mutate)
                        res = [cont, q.arms[k][1]]
                        out.append((TauInfo("choice", key, lab), _assemble(c, cands, copies, [i, j], res)))
    return out


def find_errors(c: Configuration) -> list[RuntimeFault]:
    """Communication errors visible in ``c``: a select meeting a branch without its label."""
    errs: list[RuntimeFault] = []
    cands, _ = _candidates(c)
    for i, ci in enumerate(cands):
        if not isinstance(ci.proc, sx.Select):
            continue
        key = _chan_key(ci.proc.chan)
        for j, cj in enumerate(cands):
            q = cj.proc
            if isinstance(q, sx.Branch) and _chan_key(q.chan) == key and i != j:
                labels = tuple(l for l, _ in q.arms)
                if ci.proc.label not in labels:
                    errs.append(LabelMismatch(key, labels, ci.proc.label))
    return list(dict.fromkeys(errs))


# -- labelled transitions ---------------------------------------------------

def _capabilities(c: Configuration, cand: _Cand, avoid_vars: set[str]):
    """Visible actions of a single thread, each with its residue."""
    p = cand.proc
    match p:
        case sx.Output(ch, m, cont):
            yield OutA(_chan_key(ch), m), cont
        case sx.Input(ch, x, body):
            if x in avoid_vars:
                x2 = sx.fresh(x, avoid_vars | sx.free_identifiers(body)[1])
                body = sx.substitute(body, {x: sx.Var(x2)})
                x = x2
            yield InA(_chan_key(ch), x), body
        case sx.Select(ch, lab, cont):
            yield SelA(_chan_key(ch), lab), cont
        case sx.Branch(ch, arms):
            for lab, q in arms:
                yield BraA(_chan_key(ch), lab), q


def transitions(c: Configuration, mutate: bool = False) -> list[tuple[ProcAction, Configuration]]:
    """Labelled transitions; tau steps come from synchronising thread capabilities."""
    cands, copies = _candidates(c)
    restricted = {n for n, _ in c.restricted}
    all_vars: set[str] = set()
    for t in c.threads:
        all_vars |= sx.free_identifiers(t)[1]
    caps = [list(_capabilities(c, cd, all_vars)) for cd in cands]
    out: list[tuple[ProcAction, Configuration]] = []
    for i, lst in enumerate(caps):
        for act, res in lst:
            # New: actions on restricted names stay internal
            if act.chan not in restricted:
                out.append((act, _assemble(c, cands, copies, [i], [res])))
    for i, lst in enumerate(caps):
        for act, res in lst:
            for j, lst2 in enumerate(caps):
                if i == j:
                    continue
                for act2, res2 in lst2:
                    if isinstance(act, OutA) and isinstance(act2, InA) and act.chan == act2.chan:
                        v = _value(c, act.value)
                        step = [res, _bind(c, act2.binder, res2, v)]
                        out.append((Tau(TauInfo("comm", act.chan)), _assemble(c, cands, copies, [i, j], step)))
                    elif isinstance(act, SelA) and isinstance(act2, BraA) and act.chan == act2.chan:
                        if act.label != act2.label:
                            continue
                        if mutate:
                            arms = cands[j].proc.arms
                            res2 = arms[_select_arm(arms, act.label, True)][1]
                        step = [res, res2]
                        out.append((Tau(TauInfo("choice", act.chan, act.label)),
                                    _assemble(c, cands, copies, [i, j], step)))
    for i, cd in enumerate(cands):
        if isinstance(cd.proc, sx.If):
            p = cd.proc
            same = evaluate(p.left, c.program.equations) == evaluate(p.right, c.program.equations)
            out.append((Tau(TauInfo("match")), _assemble(c, cands, copies, [i], [p.then if same else p.orelse])))
    return out


# -- executor ---------------------------------------------------------------

@dataclass
class RunResult:
    trace: list[tuple[TauInfo, Configuration]]
    outcome: Union[str, RuntimeFault]  # "terminated" | "budget" | fault
    final: Configuration

    @property
    def ok(self) -> bool:
        return isinstance(self.outcome, str)


def load(program: sx.Program, repl_budget: int = DEFAULT_REPL_BUDGET) -> Configuration:
    return sc_normalize(program.main, program, 0, repl_budget)


def run(c: Configuration, steps: int = 100, seed: int = 0, mutate: bool = False,
        on_step=None) -> RunResult:
    """Execute by seeded uniform choice among the available reductions."""
    rng = random.Random(seed)
    trace: list[tuple[TauInfo, Configuration]] = []
    for _ in range(steps):
        errs = find_errors(c)
        if errs:
            return RunResult(trace, errs[0], c)
        try:
            options = reductions(c, mutate)
        except RuntimeFailure as e:
            return RunResult(trace, e.fault, c)
        if not options:
            return RunResult(trace, "terminated", c)
        info, c2 = options[rng.randrange(len(options))]
        trace.append((info, c2))
        if on_step is not None and on_step(len(trace), info, c, c2) is False:
            return RunResult(trace, "stopped", c2)
        c = c2
    errs = find_errors(c)
    if errs:
        return RunResult(trace, errs[0], c)
    return RunResult(trace, "budget" if reductions(c, mutate) else "terminated", c)


def format_trace(res: RunResult) -> list[str]:
    lines = []
    for k, (info, conf) in enumerate(res.trace, 1):
        chan = f" {info.chan}" if info.chan else ""
        lines.append(f"{k} TAU {info.kind}{chan} :: {conf.show()}")
    return lines
