"""Typing rules for processes and extended processes.

The rules are nondeterministic in how a context is split between parallel
components.  The checker searches the splits, but prunes them using free
identifiers: a linear endpoint can only usefully go to the side that
mentions it.  Judgements are memoised on ``(process, context)``.

Agents are checked once, against their declared parameter types, and calls
are checked against the (instantiated) signature.  Type parameters stay
opaque inside agent bodies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from . import syntax as sx
from .bisim import (
    DEFAULT_BUDGET, DEFAULT_SEQ_DEPTH, Bisimilar, Unknown, bisimilar,
    canonical_repr, quotient_step,
)
from .context import (
    Context, ContextError, TermError, ctx_update, dischargeable, is_un,
    type_term,
)
from .types import (
    UN, Base, BraL, EndpointType, InL, OutL, PayloadType, SelL, Session,
    TypeLanguageError, check_well_formed, dual, is_endpoint, qualifier_of,
    show_type, subst_params, type_step,
)

PLAIN = "plain"
QUOTIENT = "quotient"


@dataclass(frozen=True)
class Failure:
    rule: str
    pos: Optional[tuple[int, int]]
    reason: str
    depth: int = 0

    def render(self, filename: str = "<input>") -> str:
        line, col = self.pos or (0, 0)
        return f"FAIL {self.rule} at {filename}:{line}:{col}: {self.reason}"


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    failure: Optional[Failure] = None
    mode: str = PLAIN
    trail: tuple[str, ...] = field(default=(), compare=False)

    def render(self, filename: str = "<input>") -> str:
        return "OK" if self.accepted else self.failure.render(filename)


class _Reject(Exception):
    def __init__(self, failure: Failure):
        self.failure = failure


def _deepest(fails: list[Failure]) -> Failure:
    return max(fails, key=lambda f: f.depth)


@dataclass
class Options:
    mode: str = PLAIN
    self_loop: bool = False
    bisim_budget: int = DEFAULT_BUDGET
    seq_depth: int = DEFAULT_SEQ_DEPTH


class Checker:
    def __init__(self, program: sx.Program, options: Optional[Options] = None):
        self.program = program
        self.opt = options or Options()
        self.memo: dict[tuple, Optional[Failure]] = {}
        self.equiv_memo: dict[tuple, bool] = {}

    # -- helpers ------------------------------------------------------------

    @property
    def quotient(self) -> bool:
        return self.opt.mode == QUOTIENT

    def steps(self, t: EndpointType):
        if self.quotient:
            return [(lab, rep.type) for lab, rep in quotient_step(t, self.opt.self_loop)]
        return list(type_step(t, self.opt.self_loop))

    def norm(self, t: PayloadType) -> PayloadType:
        if self.quotient and is_endpoint(t):
            rep = canonical_repr(t, self_loop=self.opt.self_loop)
            return rep.type if rep.canonical else t
        return t

    def equiv(self, a: PayloadType, b: PayloadType) -> bool:
        """Payload equality up to bisimilarity; Unknown counts as different."""
        if a == b:
            return True
        key = (a, b)
        if key in self.equiv_memo:
            return self.equiv_memo[key]
        match a, b:
            case Base(x), Base(y):
                ok = x == y
            case Session(a1, a2), Session(b1, b2):
                ok = self.equiv(a1, b1) and self.equiv(a2, b2)
            case (Base() | Session()), _:
                ok = False
            case _, (Base() | Session()):
                ok = False
            case _:
                r = bisimilar(a, b, self.opt.bisim_budget, self.opt.seq_depth, self.opt.self_loop)
                ok = isinstance(r, Bisimilar)
        self.equiv_memo[key] = ok
        return ok

    def balanced(self, s: Session) -> tuple[bool, str]:
        try:
            check_well_formed(s.left)
            check_well_formed(s.right)
        except TypeLanguageError as e:
            return False, str(e)
        if dual(s.left) == s.right:
            return True, ""
        if self.quotient:
            r = bisimilar(dual(s.left), s.right, self.opt.bisim_budget,
                          self.opt.seq_depth, self.opt.self_loop)
            if isinstance(r, Bisimilar):
                return True, ""
            if isinstance(r, Unknown):
                return False, f"balance undecided ({r})"
        return False, f"{show_type(s.left)} and {show_type(s.right)} are not dual"

    def fail(self, rule: str, node, reason: str, depth: int) -> Failure:
        return Failure(rule, getattr(node, "pos", None), reason, depth)

    # -- entry points -------------------------------------------------------

    def check(self, g: Context, a, depth: int = 0) -> Optional[Failure]:
        key = (a, g)
        if key in self.memo:
            return self.memo[key]
        self.memo[key] = Failure("Agent", getattr(a, "pos", None), "cyclic judgement", depth)
        try:
            res = self._check(g, a, depth)
        except _Reject as r:
            res = r.failure
        self.memo[key] = res
        return res

    def _check(self, g: Context, a, depth: int) -> Optional[Failure]:
        match a:
            case sx.Plain(p):
                return self.check(g, p, depth)
            case sx.Nil():
                return self._nil(g, a, "Nil", depth)
            case sx.Par(l, r) | sx.APar(l, r):
                return self._par(g, a, l, r, depth)
            case sx.Repl(body):
                f = self._nil(g, a, "Repl", depth)
                return f or self.check(g, body, depth + 1)
            case sx.Restrict(n, s, body) | sx.ANuName(n, s, body):
                rule = "Res" if isinstance(a, sx.Restrict) else "Name-Res"
                ok, why = self.balanced(s)
                if not ok:
                    return self.fail(rule, a, f"annotation of {n} is not balanced: {why}", depth)
                if n in g:
                    fresh = sx.fresh(n, set(g) | sx.free_identifiers(body)[0] | sx.bound_identifiers(body))
                    body, n = sx.rename_name(body, n, fresh), fresh
                s = Session(self.norm(s.left), self.norm(s.right))
                return self.check(g.extend(n, s), body, depth + 1)
            case sx.ANuVar(x, t, body):
                if x in g:
                    return self.fail("Var-Res", a, f"{x} is already bound", depth)
                return self.check(g.extend(x, self.norm(t)), body, depth + 1)
            case sx.ActiveSubst(x, m):
                try:
                    tx = type_term(g, sx.Var(x), self.opt.self_loop)
                    tm = type_term(g, m, self.opt.self_loop)
                except TermError as e:
                    return self.fail("Sub", a, str(e), depth)
                if not self.equiv(tx, tm):
                    return self.fail("Sub", a, f"{x} : {show_type(tx)} but {sx.show_term(m)} : {show_type(tm)}", depth)
                return None
            case sx.If(m1, m2, p1, p2):
                try:
                    t1 = self.term_un(g, m1)
                    t2 = self.term_un(g, m2)
                except TermError as e:
                    return self.fail("If", a, str(e), depth)
                if not self.equiv(t1, t2):
                    return self.fail("If", a, f"compared terms have types {show_type(t1)} and {show_type(t2)}", depth)
                return self.check(g, p1, depth + 1) or self.check(g, p2, depth + 1)
            case sx.Input(c, x, body):
                return self._comm(g, a, c, body, depth, inp=True, binder=x)
            case sx.Output(c, m, body):
                return self._comm(g, a, c, body, depth, inp=False, payload=m)
            case sx.Select(c, lab, body):
                return self._select(g, a, c, lab, body, depth)
            case sx.Branch(c, arms):
                return self._branch(g, a, c, arms, depth)
            case sx.Call():
                return self._call(g, a, depth)
        raise TypeError(f"not a process: {a!r}")

    # -- rules --------------------------------------------------------------

    def _nil(self, g: Context, node, rule: str, depth: int) -> Optional[Failure]:
        if is_un(g, self.opt.self_loop):
            return None
        live = ", ".join(f"{k} : {show_type(v)}" for k, v in g.items()
                         if not dischargeable(v, self.opt.self_loop))
        return self.fail(rule, node, f"linear entries not used up: {live}", depth)

    def term_un(self, g: Context, m: sx.Term) -> PayloadType:
        """Type a term in the unrestricted part of ``g`` (consumes nothing)."""
        sub = g.with_entries({k: v for k, v in g.items() if dischargeable(v, self.opt.self_loop)})
        return type_term(sub, m, self.opt.self_loop)

    def _par(self, g: Context, node, left, right, depth: int) -> Optional[Failure]:
        rule = "Par"
        fl = set().union(*sx.free_identifiers(left))
        fr = set().union(*sx.free_identifiers(right))
        keys = list(g)
        options = []
        for k in keys:
            opts = self.par_options(k, g[k], k in fl, k in fr)
            if not opts:
                return self.fail(rule, node, f"no way to split {k} : {show_type(g[k])} between the two sides", depth)
            options.append(opts)
        fails: list[Failure] = []
        for choice in itertools.product(*options):
            gl = g.with_entries({k: l for k, (l, _) in zip(keys, choice) if l is not None})
            gr = g.with_entries({k: r for k, (_, r) in zip(keys, choice) if r is not None})
            f = self.check(gl, left, depth + 1) or self.check(gr, right, depth + 1)
            if f is None:
                return None
            fails.append(f)
        return _deepest(fails)

    def par_options(self, k: str, t: PayloadType, in_left: bool, in_right: bool):
        """The split-table options worth trying for one entry."""
        if isinstance(t, Base):
            return [(t, t)]
        if isinstance(t, Session):
            qa, qb = qualifier_of(t.left), qualifier_of(t.right)
            if qa is UN and qb is UN:
                return [(t, t)]
            if qa is UN or qb is UN:
                return []
            a, b = t.left, t.right
            if in_left and in_right:
                return list(dict.fromkeys([(a, b), (b, a)]))
            done = lambda x: dischargeable(x, self.opt.self_loop)
            if in_right:
                return [(None, t)] + [(x, y) for x, y in ((a, b), (b, a)) if done(x)]
            return [(t, None)] + [(x, y) for x, y in ((a, b), (b, a)) if done(y)]
        if qualifier_of(t) is UN:
            return [(t, t)]
        if in_left and in_right:
            return []
        return [(None, t)] if in_right else [(t, None)]

    def _endpoint(self, g: Context, node, c: sx.Term, rule: str, depth: int):
        if not isinstance(c, (sx.Name, sx.Var)):
            raise _Reject(self.fail(rule, node, f"{sx.show_term(c)} is not a channel", depth))
        k = c.id
        if k not in g:
            raise _Reject(self.fail(rule, node, f"{k} is not in the context", depth))
        return k, g[k]

    def _comm(self, g: Context, node, c, body, depth: int, inp: bool,
              binder: str = "", payload: Optional[sx.Term] = None) -> Optional[Failure]:
        rule = "Input" if inp else "Output"
        k, entry = self._endpoint(g, node, c, rule, depth)
        # (endpoint given to the channel premise, what stays behind for the continuation)
        if isinstance(entry, Session):
            qa, qb = qualifier_of(entry.left), qualifier_of(entry.right)
            if qa is UN or qb is UN:
                return self.fail(rule, node, f"{k} has session type {show_type(entry)}, not an endpoint type", depth)
            uses = [(entry.left, entry.right), (entry.right, entry.left)]
        elif isinstance(entry, Base):
            return self.fail(rule, node, f"{k} has base type {show_type(entry)}", depth)
        elif qualifier_of(entry) is UN:
            uses = [(entry, entry)]
        else:
            uses = [(entry, None)]
        fails: list[Failure] = []
        for t, rest in dict.fromkeys(uses):
            want = InL if inp else OutL
            found = [(lab, t2) for lab, t2 in self.steps(t) if isinstance(lab, want)]
            if not found:
                fails.append(self.fail(rule, node, f"{k} : {show_type(t)} cannot {'receive' if inp else 'send'}", depth))
                continue
            lab, t2 = found[0]
            if rest is not None and not dischargeable(rest, self.opt.self_loop) and qualifier_of(rest) is not UN:
                fails.append(self.fail(rule, node, f"the other endpoint of {k} would be overwritten", depth))
                continue
            g2 = g.remove(k) if rest is None else g.set(k, rest)
            try:
                if inp:
                    x = binder
                    if x in g2:
                        fresh = sx.fresh(x, set(g2) | sx.free_identifiers(body)[1] | sx.bound_identifiers(body))
                        body = sx.substitute(body, {x: sx.Var(fresh)})
                        x = fresh
                    g3 = ctx_update(g2.extend(x, self.norm(lab.payload)), k, self.norm(t2))
                else:
                    g2 = self._consume_payload(g2, node, payload, lab.payload, depth)
                    g3 = ctx_update(g2, k, self.norm(t2))
            except ContextError as e:
                fails.append(self.fail(rule, node, str(e), depth))
                continue
            except _Reject as r:
                fails.append(r.failure)
                continue
            f = self.check(g3, body, depth + 1)
            if f is None:
                return None
            fails.append(f)
        return _deepest(fails)

    def _consume_payload(self, g: Context, node, m: sx.Term, want: PayloadType, depth: int) -> Context:
        """Type ``m`` at ``want``, removing the linear entry it uses."""
        if isinstance(m, (sx.Name, sx.Var)) and m.id in g:
            got = g[m.id]
            rest = g if dischargeable(got, self.opt.self_loop) else g.remove(m.id)
        else:
            try:
                got = self.term_un(g, m)
            except TermError as e:
                raise _Reject(self.fail("Output", node, str(e), depth))
            rest = g
        if not self.equiv(got, want):
            raise _Reject(self.fail("Output", node,
                                    f"payload {sx.show_term(m)} : {show_type(got)} does not match {show_type(want)}", depth))
        return rest

    def _select(self, g: Context, node, c, lab: str, body, depth: int) -> Optional[Failure]:
        k, t = self._endpoint(g, node, c, "Select", depth)
        if not is_endpoint(t):
            return self.fail("Select", node, f"{k} : {show_type(t)} is not an endpoint type", depth)
        for l2, t2 in self.steps(t):
            if l2 == SelL(lab):
                return self.check(g.set(k, self.norm(t2)), body, depth + 1)
        return self.fail("Select", node, f"{k} : {show_type(t)} cannot select {lab}", depth)

    def _branch(self, g: Context, node, c, arms, depth: int) -> Optional[Failure]:
        k, t = self._endpoint(g, node, c, "Branch", depth)
        if not is_endpoint(t):
            return self.fail("Branch", node, f"{k} : {show_type(t)} is not an endpoint type", depth)
        offered = {lab.label: t2 for lab, t2 in self.steps(t) if isinstance(lab, BraL)}
        labels = {l for l, _ in arms}
        if not offered or labels != set(offered):
            return self.fail("Branch", node,
                             f"{k} : {show_type(t)} offers {{{', '.join(sorted(offered))}}}, "
                             f"process handles {{{', '.join(sorted(labels))}}}", depth)
        for l, p in arms:
            f = self.check(g.set(k, self.norm(offered[l])), p, depth + 1)
            if f is not None:
                return f
        return None

    def _call(self, g: Context, node: sx.Call, depth: int) -> Optional[Failure]:
        ag = self.program.agents.get(node.agent)
        if ag is None:
            return self.fail("Agent", node, f"unbound agent {node.agent}", depth)
        if len(ag.params) != len(node.args) or len(ag.tparams) != len(node.targs):
            return self.fail("Agent", node, f"arity mismatch calling {node.agent}", depth)
        mapping = dict(zip(ag.tparams, node.targs))
        for t in node.targs:
            try:
                check_well_formed(t)
            except TypeLanguageError as e:
                return self.fail("Agent", node, f"bad type argument: {e}", depth)
        rest = g
        for (x, want), m in zip(ag.params, node.args):
            want = subst_params(want, mapping)
            if isinstance(m, (sx.Name, sx.Var)):
                if m.id not in rest:
                    return self.fail("Agent", node, f"argument {m.id} is not available", depth)
                got = rest[m.id]
                if not dischargeable(got, self.opt.self_loop):
                    rest = rest.remove(m.id)
            else:
                try:
                    got = self.term_un(rest, m)
                except TermError as e:
                    return self.fail("Agent", node, str(e), depth)
            if not self.equiv(got, want):
                return self.fail("Agent", node,
                                 f"argument {sx.show_term(m)} : {show_type(got)} does not match "
                                 f"{x} : {show_type(want)}", depth)
        return self._nil(rest, node, "Agent", depth)

    # -- agents and programs ------------------------------------------------

    def check_agent(self, ag: sx.AgentDef) -> Optional[Failure]:
        g = Context({}, self.program.funcs)
        for x, t in ag.params:
            if isinstance(t, Session):
                ok, why = self.balanced(t)
                if not ok:
                    return Failure("Agent", ag.body.pos, f"parameter {x}: {why}")
            elif is_endpoint(t):
                try:
                    check_well_formed(t)
                except TypeLanguageError as e:
                    return Failure("Agent", ag.body.pos, f"parameter {x}: {e}")
            g = g.extend(x, self.norm(t))
        return self.check(g, ag.body, 0)


def initial_context(prog: sx.Program) -> Context:
    return Context(dict(prog.main_params), prog.funcs)


def check_balanced(g, mode: str = PLAIN, budget: int = DEFAULT_BUDGET,
                   self_loop: bool = False) -> bool:
    """Every session pair in ``g`` has dual endpoints (up to bisimilarity in quotient mode)."""
    chk = Checker(sx.Program(), Options(mode=mode, self_loop=self_loop, bisim_budget=budget))
    return all(chk.balanced(t)[0] for t in g.values() if isinstance(t, Session))


def check_program(prog: sx.Program, mode: str = PLAIN, options: Optional[Options] = None,
                  context: Optional[Context] = None) -> Verdict:
    """``Γ ⊢bal main`` plus a once-only check of every agent body."""
    opt = options or Options(mode=mode)
    if options is not None:
        mode = opt.mode
    chk = Checker(prog, opt)
    for ag in prog.agents.values():
        f = chk.check_agent(ag)
        if f is not None:
            return Verdict(False, f, mode)
    g = context if context is not None else initial_context(prog)
    for k, t in g.items():
        if isinstance(t, Session):
            ok, why = chk.balanced(t)
            if not ok:
                return Verdict(False, Failure("Balance", None, f"{k}: {why}"), mode)
    f = chk.check(g, prog.main)
    return Verdict(f is None, f, mode)


def type_process(g: Context, p, prog: Optional[sx.Program] = None,
                 mode: str = PLAIN, self_loop: bool = False) -> Verdict:
    chk = Checker(prog or sx.Program(funcs=dict(g.funcs)), Options(mode=mode, self_loop=self_loop))
    f = chk.check(g, p)
    return Verdict(f is None, f, mode)


type_extended = type_process
