"""Random types, processes and well-typed programs for property tests."""

from __future__ import annotations

import random
from typing import Optional, Sequence

from . import syntax as sx
from .types import (
    LIN, UN, Base, Branch, EndpointType, In, Out, Qualified, Qualifier, Rec,
    Select, Seq, Session, Skip, TypeVar, dual, is_guarded, type_step,
)

LABELS = ("A", "B", "L", "N", "R")
BASES = ("Int", "Bool")


def _labels(rng: random.Random, k: int) -> list[str]:
    return sorted(rng.sample(LABELS, k))


def random_type(rng: random.Random, depth: int = 3, quals: Sequence[Qualifier] = (LIN, UN),
                rec: bool = True, max_arms: int = 3, _vars: tuple[str, ...] = ()) -> EndpointType:
    """A closed guarded endpoint type of nesting depth at most ``depth``."""
    for _ in range(20):
        t = _draw(rng, depth, tuple(quals), rec, max_arms, _vars)
        if not _vars and is_guarded(t):
            return t
        if _vars:
            return t
    return Qualified(rng.choice(quals), Out(Base(rng.choice(BASES))))


def _draw(rng, depth, quals, rec, max_arms, vs) -> EndpointType:
    q = rng.choice(quals)
    if depth <= 0:
        r = rng.random()
        if vs and r < 0.3:
            return TypeVar(rng.choice(vs))
        if r < 0.45:
            return Qualified(q, Skip())
        if r < 0.75:
            return Qualified(q, Out(Base(rng.choice(BASES))))
        return Qualified(q, In(Base(rng.choice(BASES))))
    kind = rng.choice(["leaf", "seq", "seq", "choice", "choice", "rec"] if rec else ["leaf", "seq", "choice"])
    match kind:
        case "leaf":
            return _draw(rng, 0, quals, rec, max_arms, vs)
        case "seq":
            return Seq(_draw(rng, depth - 1, quals, rec, max_arms, vs),
                       _draw(rng, depth - 1, quals, rec, max_arms, vs))
        case "choice":
            ctor = rng.choice([Select, Branch])
            labels = _labels(rng, rng.randint(1, max_arms))
            return Qualified(q, ctor(tuple((l, _draw(rng, depth - 1, quals, rec, max_arms, vs))
                                           for l in labels)))
    z = f"z{len(vs)}"
    prefix = _draw(rng, 0, quals, False, max_arms, ())
    if isinstance(prefix, Qualified) and isinstance(prefix.pre, Skip):
        prefix = Qualified(prefix.qual, Out(Base("Int")))
    body = Seq(prefix, _draw(rng, depth - 1, quals, rec, max_arms, vs + (z,)))
    t = Rec(z, body)
    return t if is_guarded(t) else body


def random_payload(rng: random.Random, depth: int = 2) -> Session | Base:
    if rng.random() < 0.7:
        return Base(rng.choice(BASES))
    t = random_type(rng, depth, quals=(LIN,), rec=False)
    return Session(t, dual(t))


def random_choice_pair(rng: random.Random, depth: int = 3):
    """``(q, star, arms, tail)`` for a distributive pair whose arms can all fire.

    With ``q = un`` every arm is un-qualified, otherwise the select/branch
    side condition would block the arms.
    """
    q = rng.choice((LIN, UN))
    quals = (UN,) if q is UN else (LIN, UN)
    star = rng.choice("+&")
    arms = []
    for l in _labels(rng, rng.randint(1, 4)):
        arm = random_type(rng, rng.randint(0, depth), quals=quals)
        arms.append((l, arm))
    tail = random_type(rng, rng.randint(0, depth))
    return q, star, arms, tail


# -- untyped processes ------------------------------------------------------

def random_process(rng: random.Random, depth: int = 3, names: Sequence[str] = ("a", "b", "c"),
                   width: int = 3, _vars: tuple[str, ...] = ()) -> sx.Process:
    """A small process over a few names; payloads are channels so every send is well formed."""
    threads = [_proc(rng, depth, tuple(names), _vars) for _ in range(rng.randint(1, width))]
    p = threads[0]
    for t in threads[1:]:
        p = sx.Par(p, t)
    return p


def _chan(rng, names, vs) -> sx.Term:
    pool = [sx.Name(n) for n in names] + [sx.Var(x) for x in vs]
    return rng.choice(pool)


def _proc(rng, depth, names, vs) -> sx.Process:
    if depth <= 0:
        return sx.Nil()
    r = rng.random()
    d = depth - 1
    if r < 0.25:
        x = f"x{len(vs)}"
        return sx.Input(_chan(rng, names, vs), x, _proc(rng, d, names, vs + (x,)))
    if r < 0.5:
        return sx.Output(_chan(rng, names, vs), _chan(rng, names, vs), _proc(rng, d, names, vs))
    if r < 0.62:
        return sx.Select(_chan(rng, names, vs), rng.choice(LABELS[:3]), _proc(rng, d, names, vs))
    if r < 0.74:
        labels = _labels(rng, rng.randint(1, 3))
        return sx.Branch(_chan(rng, names, vs), tuple((l, _proc(rng, d, names, vs)) for l in labels))
    if r < 0.82:
        a, b = _chan(rng, names, vs), _chan(rng, names, vs)
        return sx.If(a, b, _proc(rng, d, names, vs), _proc(rng, d, names, vs))
    if r < 0.88:
        n = f"n{depth}"
        s = Session(Qualified(LIN, Out(Base("Int"))), Qualified(LIN, In(Base("Int"))))
        return sx.Restrict(n, s, _proc(rng, d, names + (n,), vs))
    if r < 0.92:
        return sx.Repl(_proc(rng, d, names, vs))
    if r < 0.97:
        return sx.Par(_proc(rng, d, names, vs), _proc(rng, d, names, vs))
    return sx.Nil()


# -- well-typed programs ----------------------------------------------------

def random_protocol(rng: random.Random, depth: int, max_arms: int = 3) -> EndpointType:
    """A closed lin protocol with at least one action."""
    while True:
        t = _draw(rng, depth, (LIN,), False, max_arms, ())
        if type_step(t):
            return t


def _const(rng: random.Random, base: str, counter: list[int]) -> sx.Term:
    counter[0] += 1
    if base == "Bool":
        return sx.App(rng.choice(("true", "false")))
    return sx.App(str(counter[0]))


def walk(t: EndpointType, chan: str, rng: random.Random, counter: Optional[list[int]] = None,
         matches: bool = True) -> sx.Process:
    """A process that follows ``t`` on ``chan`` to completion.

    Outputs send fresh constants, selects draw an arm from ``rng`` and
    branches offer every arm.
    """
    counter = counter if counter is not None else [0]
    steps = type_step(t)
    if not steps:
        return sx.Nil()
    c = sx.Name(chan)
    lab, t2 = steps[0]
    match lab.__class__.__name__:
        case "OutL":
            return sx.Output(c, _const(rng, lab.payload.name, counter), walk(t2, chan, rng, counter, matches))
        case "InL":
            counter[0] += 1
            return sx.Input(c, f"x{counter[0]}", walk(t2, chan, rng, counter, matches))
        case "SelL":
            if matches and len(steps) > 1 and rng.random() < 0.25:
                # a match whose two sides take different arms
                k = str(rng.randint(0, 1))
                return sx.If(sx.App(k), sx.App("0"), _select(steps, c, chan, rng, counter),
                             _select(steps, c, chan, rng, counter))
            return _select(steps, c, chan, rng, counter)
        case "BraL":
            return sx.Branch(c, tuple((l.label, walk(tk, chan, rng, counter, matches)) for l, tk in steps))
    raise ValueError(f"unexpected transition {lab}")


def _select(steps, c, chan, rng, counter) -> sx.Process:
    lab, tk = rng.choice(steps)
    return sx.Select(c, lab.label, walk(tk, chan, rng, counter))


def emit_program(protocols: Sequence[EndpointType], rng: random.Random) -> sx.Program:
    """One restricted channel per protocol, with both ends walked in parallel."""
    threads: list[sx.Process] = []
    names = [f"c{i}" for i in range(len(protocols))]
    counter = [0]
    for n, t in zip(names, protocols):
        threads.append(walk(t, n, rng, counter))
        threads.append(walk(dual(t), n, rng, counter))
    rng.shuffle(threads)
    p = threads[0]
    for t in threads[1:]:
        p = sx.Par(p, t)
    for n, t in reversed(list(zip(names, protocols))):
        p = sx.Restrict(n, Session(t, dual(t)), p)
    return sx.Program(main=sx.Plain(p))


def generate_wt_program(seed: int, size: int = 3) -> sx.Program:
    """A program that typechecks by construction (and is checked)."""
    from .typecheck import check_program

    rng = random.Random(seed)
    size = max(1, size)
    width = rng.randint(1, min(size, 3))
    protocols = [random_protocol(rng, rng.randint(1, min(size, 4))) for _ in range(width)]
    prog = emit_program(protocols, rng)
    v = check_program(prog)
    assert v.accepted, f"generated program for seed {seed} rejected: {v.render()}"
    return prog


def perturb(t: EndpointType, rng: random.Random, rounds: int = 3) -> EndpointType:
    """A type bisimilar to ``t``, built by applying sound laws at random positions."""
    for _ in range(rounds):
        t = _perturb_once(t, rng)
    return t


def _perturb_once(t: EndpointType, rng: random.Random) -> EndpointType:
    from .types import qualifier_of, skip, unfold

    r = rng.random()
    match t:
        case Rec() if r < 0.4:
            return unfold(t)
        case Seq(Seq(a, b), c) if r < 0.6 and qualifier_of(b) == qualifier_of(c):
            return Seq(a, Seq(b, c))
        case Seq(Qualified(q, Select(arms) | Branch(arms)) as ch, tail) if r < 0.8 and arms and all(
                type_step(ch) for _ in [0]):
            ctor = type(ch.pre)
            return Qualified(q, ctor(tuple((l, Seq(a, tail)) for l, a in arms)))
        case Seq(a, b) if r < 0.9:
            return Seq(_perturb_once(a, rng), b) if rng.random() < 0.5 else Seq(a, _perturb_once(b, rng))
        case Qualified(q, Select(arms) | Branch(arms)) if arms and r < 0.9:
            k = rng.randrange(len(arms))
            arms2 = tuple((l, _perturb_once(a, rng) if i == k else a) for i, (l, a) in enumerate(arms))
            return Qualified(q, type(t.pre)(arms2))
    if rng.random() < 0.5:
        return Seq(skip(qualifier_of(t)), t)
    return Seq(t, skip(qualifier_of(t)))
