"""Terms, processes and extended processes, plus the pretty printer.

Names and variables live in separate namespaces: input binders, agent
parameters, ``newvar`` binders and active-substitution targets are
variables, everything else that is not a function symbol is a name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from . import types as ty
from .node import Node

Pos = Optional[tuple[int, int]]


class SubstitutionError(Exception):
    """A compound term was substituted into a channel position."""


# -- terms ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Name(Node):
    id: str
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Var(Node):
    id: str
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class App(Node):
    fn: str
    args: tuple["Term", ...] = ()
    pos: Pos = field(default=None, compare=False, repr=False)


Term = Union[Name, Var, App]


def is_sendable(m: Term) -> bool:
    return isinstance(m, (Name, Var)) or (isinstance(m, App) and not m.args)


# -- processes --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Nil(Node):
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Par(Node):
    left: "Process"
    right: "Process"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Repl(Node):
    body: "Process"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Restrict(Node):
    name: str
    ann: ty.Session
    body: "Process"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class If(Node):
    left: Term
    right: Term
    then: "Process"
    orelse: "Process"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Input(Node):
    chan: Term
    binder: str
    body: "Process"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Output(Node):
    chan: Term
    payload: Term
    body: "Process"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Select(Node):
    chan: Term
    label: str
    body: "Process"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Branch(Node):
    chan: Term
    arms: tuple[tuple[str, "Process"], ...]
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Call(Node):
    agent: str
    targs: tuple[ty.EndpointType, ...]
    args: tuple[Term, ...]
    pos: Pos = field(default=None, compare=False, repr=False)


Process = Union[Nil, Par, Repl, Restrict, If, Input, Output, Select, Branch, Call]


# -- extended processes -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class Plain(Node):
    proc: Process
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class APar(Node):
    left: "Extended"
    right: "Extended"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class ANuName(Node):
    name: str
    ann: ty.Session
    body: "Extended"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class ANuVar(Node):
    var: str
    ann: ty.PayloadType
    body: "Extended"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class ActiveSubst(Node):
    var: str
    term: Term
    pos: Pos = field(default=None, compare=False, repr=False)


Extended = Union[Plain, APar, ANuName, ANuVar, ActiveSubst]


def lower(a: Extended) -> Extended:
    """Fold extended constructors over plain processes back into processes."""
    match a:
        case APar(l, r, pos):
            l, r = lower(l), lower(r)
            if isinstance(l, Plain) and isinstance(r, Plain):
                return Plain(Par(l.proc, r.proc, pos), pos)
            return APar(l, r, pos)
        case ANuName(n, s, body, pos):
            body = lower(body)
            if isinstance(body, Plain):
                return Plain(Restrict(n, s, body.proc, pos), pos)
            return ANuName(n, s, body, pos)
        case ANuVar(x, t, body, pos):
            return ANuVar(x, t, lower(body), pos)
    return a


# -- programs ---------------------------------------------------------------

@dataclass(frozen=True)
class FuncSig:
    args: tuple[str, ...]
    result: str


@dataclass(frozen=True)
class Equation:
    lhs: App
    rhs: Term


@dataclass(frozen=True)
class AgentDef:
    name: str
    tparams: tuple[str, ...]
    params: tuple[tuple[str, ty.PayloadType], ...]
    body: Extended


@dataclass(frozen=True)
class Program:
    bases: tuple[str, ...] = ()
    funcs: dict[str, FuncSig] = field(default_factory=dict)
    equations: tuple[Equation, ...] = ()
    aliases: dict[str, ty.PayloadType] = field(default_factory=dict)
    agents: dict[str, AgentDef] = field(default_factory=dict)
    main: Extended = Plain(Nil())
    main_params: tuple[tuple[str, ty.PayloadType], ...] = ()


BUILTIN_BASES = ("Int", "Bool")


def literal_type(fn: str) -> Optional[str]:
    """Integer and boolean literals are nullary symbols of the builtin bases."""
    if fn.lstrip("-").isdigit():
        return "Int"
    if fn in ("true", "false"):
        return "Bool"
    return None


# -- free identifiers -------------------------------------------------------

def term_free(m: Term) -> tuple[frozenset[str], frozenset[str]]:
    match m:
        case Name(n):
            return frozenset({n}), frozenset()
        case Var(x):
            return frozenset(), frozenset({x})
        case App(_, args):
            names: set[str] = set()
            vs: set[str] = set()
            for a in args:
                n2, v2 = term_free(a)
                names |= n2
                vs |= v2
            return frozenset(names), frozenset(vs)
    raise TypeError(m)


def free_identifiers(p: Union[Process, Extended]) -> tuple[frozenset[str], frozenset[str]]:
    """Free names and free variables of a process or extended process."""
    names: set[str] = set()
    vs: set[str] = set()

    def terms(*ms: Term) -> None:
        for m in ms:
            n2, v2 = term_free(m)
            names.update(n2)
            vs.update(v2)

    def sub(q, bound_name: str | None = None, bound_var: str | None = None) -> None:
        n2, v2 = free_identifiers(q)
        names.update(n2 - {bound_name})
        vs.update(v2 - {bound_var})

    match p:
        case Nil():
            pass
        case Par(l, r) | APar(l, r):
            sub(l)
            sub(r)
        case Repl(body) | Plain(body):
            sub(body)
        case Restrict(n, _, body) | ANuName(n, _, body):
            sub(body, bound_name=n)
        case ANuVar(x, _, body):
            sub(body, bound_var=x)
        case If(m1, m2, p1, p2):
            terms(m1, m2)
            sub(p1)
            sub(p2)
        case Input(c, x, body):
            terms(c)
            sub(body, bound_var=x)
        case Output(c, m, body):
            terms(c, m)
            sub(body)
        case Select(c, _, body):
            terms(c)
            sub(body)
        case Branch(c, arms):
            terms(c)
            for _, q in arms:
                sub(q)
        case Call(_, _, args):
            terms(*args)
        case ActiveSubst(x, m):
            terms(m)
            vs.add(x)
        case _:
            raise TypeError(p)
    return frozenset(names), frozenset(vs)


def bound_identifiers(p: Union[Process, Extended]) -> set[str]:
    out: set[str] = set()

    def go(q) -> None:
        match q:
            case Par(l, r) | APar(l, r):
                go(l)
                go(r)
            case Repl(b) | Plain(b):
                go(b)
            case Restrict(n, _, b) | ANuName(n, _, b) | ANuVar(n, _, b) | Input(_, n, b):
                out.add(n)
                go(b)
            case If(_, _, a, b):
                go(a)
                go(b)
            case Output(_, _, b) | Select(_, _, b):
                go(b)
            case Branch(_, arms):
                for _, b in arms:
                    go(b)

    go(p)
    return out


# -- substitution -----------------------------------------------------------

def fresh(base: str, avoid: set[str] | frozenset[str]) -> str:
    stem = base.rstrip("0123456789_")
    if stem == "" or stem == base:
        stem = base
    i = 1
    while f"{stem}_{i}" in avoid:
        i += 1
    return f"{stem}_{i}"


def subst_term(m: Term, sigma: dict[str, Term]) -> Term:
    match m:
        case Var(x) if x in sigma:
            return sigma[x]
        case App(f, args, pos) if args:
            return App(f, tuple(subst_term(a, sigma) for a in args), pos)
    return m


def rename_name_term(m: Term, old: str, new: str) -> Term:
    match m:
        case Name(n, pos) if n == old:
            return Name(new, pos)
        case App(f, args, pos) if args:
            return App(f, tuple(rename_name_term(a, old, new) for a in args), pos)
    return m


def _chan(m: Term, sigma: dict[str, Term]) -> Term:
    out = subst_term(m, sigma)
    if not is_sendable(out):
        raise SubstitutionError(f"compound term substituted into channel position")
    return out


def substitute(p, sigma: dict[str, Term]):
    """Capture-avoiding substitution of terms for free variables."""
    if not sigma:
        return p
    img_names: set[str] = set()
    img_vars: set[str] = set()
    for m in sigma.values():
        n2, v2 = term_free(m)
        img_names |= n2
        img_vars |= v2

    def under_var(x: str, body):
        # substitute below a variable binder x
        inner = {k: v for k, v in sigma.items() if k != x}
        if not inner:
            return x, body
        if x in img_vars:
            avoid = img_vars | set(free_identifiers(body)[1]) | set(inner)
            x2 = fresh(x, avoid)
            body = substitute(body, {x: Var(x2)})
            x = x2
        return x, substitute(body, inner)

    def under_name(n: str, body):
        if n in img_names:
            avoid = img_names | set(free_identifiers(body)[0])
            n2 = fresh(n, avoid)
            body = rename_name(body, n, n2)
            n = n2
        return n, substitute(body, sigma)

    match p:
        case Nil():
            return p
        case Par(l, r, pos):
            return Par(substitute(l, sigma), substitute(r, sigma), pos)
        case APar(l, r, pos):
            return APar(substitute(l, sigma), substitute(r, sigma), pos)
        case Repl(b, pos):
            return Repl(substitute(b, sigma), pos)
        case Plain(b, pos):
            return Plain(substitute(b, sigma), pos)
        case Restrict(n, s, b, pos):
            n, b = under_name(n, b)
            return Restrict(n, s, b, pos)
        case ANuName(n, s, b, pos):
            n, b = under_name(n, b)
            return ANuName(n, s, b, pos)
        case ANuVar(x, t, b, pos):
            x, b = under_var(x, b)
            return ANuVar(x, t, b, pos)
        case If(m1, m2, a, b, pos):
            return If(subst_term(m1, sigma), subst_term(m2, sigma),
                      substitute(a, sigma), substitute(b, sigma), pos)
        case Input(c, x, b, pos):
            c = _chan(c, sigma)
            x, b = under_var(x, b)
            return Input(c, x, b, pos)
        case Output(c, m, b, pos):
            return Output(_chan(c, sigma), subst_term(m, sigma), substitute(b, sigma), pos)
        case Select(c, l, b, pos):
            return Select(_chan(c, sigma), l, substitute(b, sigma), pos)
        case Branch(c, arms, pos):
            return Branch(_chan(c, sigma), tuple((l, substitute(b, sigma)) for l, b in arms), pos)
        case Call(a, targs, args, pos):
            return Call(a, targs, tuple(subst_term(m, sigma) for m in args), pos)
        case ActiveSubst(x, m, pos):
            return ActiveSubst(x, subst_term(m, sigma), pos)
    raise TypeError(p)


def rename_name(p, old: str, new: str):
    """Rename free occurrences of name ``old`` (binders of ``old`` stop it)."""
    t = lambda m: rename_name_term(m, old, new)
    r = lambda q: rename_name(q, old, new)
    match p:
        case Nil():
            return p
        case Par(l, rr, pos):
            return Par(r(l), r(rr), pos)
        case APar(l, rr, pos):
            return APar(r(l), r(rr), pos)
        case Repl(b, pos):
            return Repl(r(b), pos)
        case Plain(b, pos):
            return Plain(r(b), pos)
        case Restrict(n, s, b, pos):
            if n == old:
                return p
            if n == new:
                n2 = fresh(n, free_identifiers(b)[0] | {old, new})
                b = rename_name(b, n, n2)
                n = n2
            return Restrict(n, s, r(b), pos)
        case ANuName(n, s, b, pos):
            if n == old:
                return p
            if n == new:
                n2 = fresh(n, free_identifiers(b)[0] | {old, new})
                b = rename_name(b, n, n2)
                n = n2
            return ANuName(n, s, r(b), pos)
        case ANuVar(x, ty_, b, pos):
            return ANuVar(x, ty_, r(b), pos)
        case If(m1, m2, a, b, pos):
            return If(t(m1), t(m2), r(a), r(b), pos)
        case Input(c, x, b, pos):
            return Input(t(c), x, r(b), pos)
        case Output(c, m, b, pos):
            return Output(t(c), t(m), r(b), pos)
        case Select(c, l, b, pos):
            return Select(t(c), l, r(b), pos)
        case Branch(c, arms, pos):
            return Branch(t(c), tuple((l, r(b)) for l, b in arms), pos)
        case Call(a, targs, args, pos):
            return Call(a, targs, tuple(t(m) for m in args), pos)
        case ActiveSubst(x, m, pos):
            return ActiveSubst(x, t(m), pos)
    raise TypeError(p)


def subst_types(p, mapping: dict[str, ty.EndpointType]):
    """Instantiate agent type parameters in annotations and call type arguments."""
    if not mapping:
        return p
    s = lambda t: ty.subst_params(t, mapping)
    r = lambda q: subst_types(q, mapping)
    match p:
        case Par(l, rr, pos):
            return Par(r(l), r(rr), pos)
        case APar(l, rr, pos):
            return APar(r(l), r(rr), pos)
        case Repl(b, pos):
            return Repl(r(b), pos)
        case Plain(b, pos):
            return Plain(r(b), pos)
        case Restrict(n, ann, b, pos):
            return Restrict(n, s(ann), r(b), pos)
        case ANuName(n, ann, b, pos):
            return ANuName(n, s(ann), r(b), pos)
        case ANuVar(x, ann, b, pos):
            return ANuVar(x, s(ann), r(b), pos)
        case If(m1, m2, a, b, pos):
            return If(m1, m2, r(a), r(b), pos)
        case Input(c, x, b, pos):
            return Input(c, x, r(b), pos)
        case Output(c, m, b, pos):
            return Output(c, m, r(b), pos)
        case Select(c, l, b, pos):
            return Select(c, l, r(b), pos)
        case Branch(c, arms, pos):
            return Branch(c, tuple((l, r(b)) for l, b in arms), pos)
        case Call(a, targs, args, pos):
            return Call(a, tuple(s(t) for t in targs), args, pos)
    return p


# -- printing ---------------------------------------------------------------

def show_term(m: Term) -> str:
    match m:
        case Name(n) | Var(n):
            return n
        case App(f, ()):
            return f
        case App(f, args):
            return f"{f}({', '.join(show_term(a) for a in args)})"
    raise TypeError(m)


def _atom(p) -> str:
    s = show(p)
    if isinstance(p, (Par, APar)) or (isinstance(p, Plain) and isinstance(p.proc, Par)):
        return f"({s})"
    return s


def show(p) -> str:
    """Concrete syntax for a process or extended process."""
    match p:
        case Nil():
            return "0"
        case Par(l, r) | APar(l, r):
            return f"{show(l)} | {_atom(r)}"
        case Repl(b):
            return f"repl {_atom(b)}"
        case Restrict(n, s, b) | ANuName(n, s, b):
            return f"new {n} : {ty.show_payload(s)} in {_atom(b)}"
        case ANuVar(x, t, b):
            return f"newvar {x} : {ty.show_type(t)} in {_atom(b)}"
        case If(m1, m2, a, b):
            return f"if {show_term(m1)} = {show_term(m2)} then {_atom(a)} else {_atom(b)}"
        case Input(c, x, b):
            return f"{show_term(c)}?({x}).{_atom(b)}"
        case Output(c, m, b):
            return f"{show_term(c)}!<{show_term(m)}>.{_atom(b)}"
        case Select(c, l, b):
            return f"{show_term(c)} <+ {l} . {_atom(b)}"
        case Branch(c, arms):
            inner = ", ".join(f"{l}: {show(b)}" for l, b in arms)
            return f"{show_term(c)} > {{{inner}}}"
        case Call(a, targs, args):
            ts = f"[{', '.join(ty.show_type(t) for t in targs)}]" if targs else ""
            return f"{a}{ts}({', '.join(show_term(m) for m in args)})"
        case Plain(b):
            return show(b)
        case ActiveSubst(x, m):
            return f"{{{show_term(m)} / {x}}}"
    raise TypeError(p)


def _show_params(params) -> str:
    return ", ".join(f"{x} : {ty.show_type(t)}" for x, t in params)


def pretty_print(prog: Program) -> str:
    lines: list[str] = []
    for b in prog.bases:
        lines.append(f"base {b}")
    for f, sig in prog.funcs.items():
        if sig.args:
            lines.append(f"func {f} : {' * '.join(sig.args)} -> {sig.result}")
        else:
            lines.append(f"func {f} : {sig.result}")
    for eq in prog.equations:
        lines.append(f"eq {show_term(eq.lhs)} = {show_term(eq.rhs)}")
    for name, t in prog.aliases.items():
        lines.append(f"typealias {name} = {ty.show_type(t)}")
    for ag in prog.agents.values():
        tps = f"[{', '.join(ag.tparams)}]" if ag.tparams else ""
        lines.append(f"agent {ag.name}{tps}({_show_params(ag.params)}) =\n    {show(ag.body)}")
    head = f"main({_show_params(prog.main_params)})" if prog.main_params else "main"
    lines.append(f"{head} =\n    {show(prog.main)}")
    return "\n".join(lines) + "\n"
