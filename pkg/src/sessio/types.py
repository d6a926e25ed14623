"""The type language: qualifiers, endpoint types and their transitions.

Endpoint types are BPA-like terms::

    T ::= q p | z | rec z . T | T ; T | K
    p ::= skip | ?P | !P | &{l: T, ...} | +{l: T, ...}

where ``P`` is a payload (base type, endpoint type or session pair) and
``K`` is an agent-level type parameter.  Parameters are opaque: they have a
single private transition that no process action can match, which is what
lets an agent body be checked once for every continuation it might be
called with.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

from .node import Node


class Qualifier(enum.Enum):
    LIN = "lin"
    UN = "un"

    def __str__(self) -> str:
        return self.value


LIN = Qualifier.LIN
UN = Qualifier.UN


def qual_leq(a: Qualifier, b: Qualifier) -> bool:
    """The order lin <= un on qualifiers; only (un, lin) is excluded."""
    return not (a is UN and b is LIN)


class TypeLanguageError(Exception):
    pass


class UndefinedQualifier(TypeLanguageError):
    pass


class UnguardedRecursion(TypeLanguageError):
    pass


class OpenType(TypeLanguageError):
    pass


# -- payloads ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Base(Node):
    name: str


@dataclass(frozen=True, eq=False)
class Session(Node):
    left: "EndpointType"
    right: "EndpointType"


# -- pretypes ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Skip(Node):
    pass


@dataclass(frozen=True, eq=False)
class In(Node):
    payload: "PayloadType"


@dataclass(frozen=True, eq=False)
class Out(Node):
    payload: "PayloadType"


@dataclass(frozen=True, eq=False)
class Branch(Node):
    arms: tuple[tuple[str, "EndpointType"], ...]


@dataclass(frozen=True, eq=False)
class Select(Node):
    arms: tuple[tuple[str, "EndpointType"], ...]


Pretype = Union[Skip, In, Out, Branch, Select]


# -- endpoint types ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Qualified(Node):
    qual: Qualifier
    pre: Pretype


@dataclass(frozen=True, eq=False)
class TypeVar(Node):
    name: str


@dataclass(frozen=True, eq=False)
class Rec(Node):
    var: str
    body: "EndpointType"


@dataclass(frozen=True, eq=False)
class Seq(Node):
    left: "EndpointType"
    right: "EndpointType"


@dataclass(frozen=True, eq=False)
class Param(Node):
    """Agent type parameter; ``dualized`` marks ``dual K``."""

    name: str
    qual: Qualifier = LIN
    dualized: bool = False


EndpointType = Union[Qualified, TypeVar, Rec, Seq, Param]
PayloadType = Union[Base, Session, Qualified, TypeVar, Rec, Seq, Param]


def skip(q: Qualifier = LIN) -> Qualified:
    return Qualified(q, Skip())


def is_endpoint(t: object) -> bool:
    return isinstance(t, (Qualified, TypeVar, Rec, Seq, Param))


# -- labels -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OutL(Node):
    payload: PayloadType

    def __str__(self) -> str:
        return "!" + show_payload(self.payload)


@dataclass(frozen=True, eq=False)
class InL(Node):
    payload: PayloadType

    def __str__(self) -> str:
        return "?" + show_payload(self.payload)


@dataclass(frozen=True, eq=False)
class SelL(Node):
    label: str

    def __str__(self) -> str:
        return "+" + self.label


@dataclass(frozen=True, eq=False)
class BraL(Node):
    label: str

    def __str__(self) -> str:
        return "&" + self.label


@dataclass(frozen=True, eq=False)
class ParamL(Node):
    name: str
    dualized: bool = False

    def __str__(self) -> str:
        return ("#~" if self.dualized else "#") + self.name


TypeLabel = Union[OutL, InL, SelL, BraL, ParamL]


def dual_label(lab: TypeLabel) -> TypeLabel:
    match lab:
        case OutL(p):
            return InL(p)
        case InL(p):
            return OutL(p)
        case SelL(l):
            return BraL(l)
        case BraL(l):
            return SelL(l)
        case ParamL(n, d):
            return ParamL(n, not d)
    raise TypeError(lab)


# -- Q, duality, substitution ----------------------------------------------

def qualifier_of(t: EndpointType) -> Qualifier:
    """Q(q p) = q, Q(T1;T2) = Q(T1), Q(rec z.T) = Q(T)."""
    while True:
        match t:
            case Qualified(q, _):
                return q
            case Seq(left, _):
                t = left
            case Rec(_, body):
                t = body
            case Param(_, q, _):
                return q
            case TypeVar(name):
                raise UndefinedQualifier(f"qualifier of type variable {name!r} is undefined")
            case _:
                raise TypeError(f"not an endpoint type: {t!r}")


@lru_cache(maxsize=None)
def dual(t: EndpointType) -> EndpointType:
    match t:
        case Qualified(q, Skip()):
            return t
        case Qualified(q, In(p)):
            return Qualified(q, Out(p))
        case Qualified(q, Out(p)):
            return Qualified(q, In(p))
        case Qualified(q, Branch(arms)):
            return Qualified(q, Select(tuple((l, dual(a)) for l, a in arms)))
        case Qualified(q, Select(arms)):
            return Qualified(q, Branch(tuple((l, dual(a)) for l, a in arms)))
        case Rec(z, body):
            return Rec(z, dual(body))
        case Seq(a, b):
            return Seq(dual(a), dual(b))
        case TypeVar():
            return t
        case Param(n, q, d):
            return Param(n, q, not d)
    raise TypeError(f"not an endpoint type: {t!r}")


def free_type_vars(t: PayloadType) -> frozenset[str]:
    match t:
        case TypeVar(name):
            return frozenset({name})
        case Rec(z, body):
            return free_type_vars(body) - {z}
        case Seq(a, b) | Session(a, b):
            return free_type_vars(a) | free_type_vars(b)
        case Qualified(_, In(p) | Out(p)):
            return free_type_vars(p)
        case Qualified(_, Branch(arms) | Select(arms)):
            out: frozenset[str] = frozenset()
            for _, a in arms:
                out |= free_type_vars(a)
            return out
    return frozenset()


def _fresh_var(base: str, avoid: set[str] | frozenset[str]) -> str:
    i = 1
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def subst_type(t: PayloadType, var: str, repl: EndpointType) -> PayloadType:
    """Capture-avoiding replacement of free ``var`` by ``repl``."""
    repl_free = free_type_vars(repl)

    def go(t):
        match t:
            case TypeVar(name):
                return repl if name == var else t
            case Rec(z, body):
                if z == var:
                    return t
                if z in repl_free:
                    z2 = _fresh_var(z, repl_free | free_type_vars(body))
                    body = subst_type(body, z, TypeVar(z2))
                    z = z2
                return Rec(z, go(body))
            case Seq(a, b):
                return Seq(go(a), go(b))
            case Session(a, b):
                return Session(go(a), go(b))
            case Qualified(q, In(p)):
                return Qualified(q, In(go(p)))
            case Qualified(q, Out(p)):
                return Qualified(q, Out(go(p)))
            case Qualified(q, Branch(arms)):
                return Qualified(q, Branch(tuple((l, go(a)) for l, a in arms)))
            case Qualified(q, Select(arms)):
                return Qualified(q, Select(tuple((l, go(a)) for l, a in arms)))
        return t

    return go(t)


def subst_params(t: PayloadType, mapping: dict[str, EndpointType]) -> PayloadType:
    """Instantiate agent type parameters; ``dual K`` becomes the dual of K's image."""
    if not mapping:
        return t

    def go(t):
        match t:
            case Param(name, _, d) if name in mapping:
                img = mapping[name]
                return dual(img) if d else img
            case Rec(z, body):
                return Rec(z, go(body))
            case Seq(a, b):
                return Seq(go(a), go(b))
            case Session(a, b):
                return Session(go(a), go(b))
            case Qualified(q, In(p)):
                return Qualified(q, In(go(p)))
            case Qualified(q, Out(p)):
                return Qualified(q, Out(go(p)))
            case Qualified(q, Branch(arms)):
                return Qualified(q, Branch(tuple((l, go(a)) for l, a in arms)))
            case Qualified(q, Select(arms)):
                return Qualified(q, Select(tuple((l, go(a)) for l, a in arms)))
        return t

    return go(t)


def type_params(t: PayloadType) -> frozenset[str]:
    match t:
        case Param(name):
            return frozenset({name})
        case Rec(_, body):
            return type_params(body)
        case Seq(a, b) | Session(a, b):
            return type_params(a) | type_params(b)
        case Qualified(_, In(p) | Out(p)):
            return type_params(p)
        case Qualified(_, Branch(arms) | Select(arms)):
            out: frozenset[str] = frozenset()
            for _, a in arms:
                out |= type_params(a)
            return out
    return frozenset()


# -- guardedness and unfolding ---------------------------------------------

def _always_prefixed(t: EndpointType) -> bool:
    # every way of running t to completion passes an input or output
    match t:
        case Qualified(_, In() | Out()):
            return True
        case Qualified(_, Branch(arms) | Select(arms)):
            return all(_always_prefixed(a) for _, a in arms)
        case Seq(a, b):
            return _always_prefixed(a) or _always_prefixed(b)
        case Rec(_, body):
            return _always_prefixed(body)
    return False


def _guarded_in(z: str, t: EndpointType) -> bool:
    match t:
        case TypeVar(name):
            return name != z
        case Qualified(_, Branch(arms) | Select(arms)):
            return all(_guarded_in(z, a) for _, a in arms)
        case Seq(a, b):
            return _guarded_in(z, a) and (_always_prefixed(a) or _guarded_in(z, b))
        case Rec(y, body):
            return y == z or _guarded_in(z, body)
    return True


@lru_cache(maxsize=None)
def is_guarded(t: PayloadType) -> bool:
    """Every recursion variable sits behind an input or output within its binder.

    Under a branch or select the prefix must occur inside the arm itself.
    Payload types are checked recursively.
    """
    match t:
        case Rec(z, body):
            return _guarded_in(z, body) and is_guarded(body)
        case Seq(a, b) | Session(a, b):
            return is_guarded(a) and is_guarded(b)
        case Qualified(_, In(p) | Out(p)):
            return is_guarded(p)
        case Qualified(_, Branch(arms) | Select(arms)):
            return all(is_guarded(a) for _, a in arms)
    return True


def payloads_closed(t: PayloadType) -> bool:
    """Recursion variables never escape into message payloads."""
    match t:
        case Rec(_, body):
            return payloads_closed(body)
        case Seq(a, b) | Session(a, b):
            return payloads_closed(a) and payloads_closed(b)
        case Qualified(_, In(p) | Out(p)):
            return not free_type_vars(p) and payloads_closed(p)
        case Qualified(_, Branch(arms) | Select(arms)):
            return all(payloads_closed(a) for _, a in arms)
    return True


def is_closed(t: PayloadType) -> bool:
    return not free_type_vars(t)


def check_well_formed(t: PayloadType) -> None:
    """Raise unless ``t`` is closed, guarded and has closed payloads."""
    free = free_type_vars(t)
    if free:
        raise OpenType(f"free type variable(s): {', '.join(sorted(free))}")
    if not payloads_closed(t):
        raise OpenType("recursion variable occurs inside a payload")
    if not is_guarded(t):
        raise UnguardedRecursion(f"unguarded recursion in {show_type(t)}")


@lru_cache(maxsize=None)
def unfold(t: Rec) -> EndpointType:
    if not isinstance(t, Rec):
        raise TypeError("unfold expects a recursive type")
    if not _guarded_in(t.var, t.body):
        raise UnguardedRecursion(f"cannot unfold unguarded {show_type(t)}")
    return subst_type(t.body, t.var, t)


# -- transitions ------------------------------------------------------------

Step = tuple[TypeLabel, EndpointType]


def _label_order(step: Step) -> str:
    return str(step[0])


@lru_cache(maxsize=None)
def type_step(t: EndpointType, self_loop: bool = False) -> tuple[Step, ...]:
    """All transitions derivable for a closed endpoint type.

    ``self_loop`` makes un-qualified inputs and outputs step to themselves
    instead of to ``un skip``.
    """
    out: list[Step]
    match t:
        case Qualified(_, Skip()):
            return ()
        case Qualified(q, In(p)):
            return ((InL(p), t if self_loop and q is UN else skip(q)),)
        case Qualified(q, Out(p)):
            return ((OutL(p), t if self_loop and q is UN else skip(q)),)
        case Qualified(q, Select(arms)):
            out = [(SelL(l), a) for l, a in arms if qual_leq(q, qualifier_of(a))]
        case Qualified(q, Branch(arms)):
            out = [(BraL(l), a) for l, a in arms if qual_leq(q, qualifier_of(a))]
        case Rec():
            return type_step(unfold(t), self_loop)
        case Seq(a, b):
            left = type_step(a, self_loop)
            if left:
                qa = qualifier_of(a)
                out = [(lab, Seq(a2, b)) for lab, a2 in left if qual_leq(qa, qualifier_of(a2))]
            else:
                qa, qb = qualifier_of(a), qualifier_of(b)
                if not qual_leq(qa, qb):
                    return ()
                out = [(lab, b2) for lab, b2 in type_step(b, self_loop)
                       if qual_leq(qb, qualifier_of(b2))]
        case Param(name, q, d):
            return ((ParamL(name, d), skip(q)),)
        case TypeVar(name):
            raise OpenType(f"type variable {name!r} has no transitions")
        case _:
            raise TypeError(f"not an endpoint type: {t!r}")
    return tuple(sorted(out, key=_label_order))


def is_terminated(t: EndpointType, self_loop: bool = False) -> bool:
    return not type_step(t, self_loop)


# -- alpha equivalence -------------------------------------------------------

@lru_cache(maxsize=None)
def alpha_key(t: PayloadType) -> PayloadType:
    """Rename every recursion binder by nesting depth; equal keys mean alpha-equal."""

    def go(t, env: dict[str, str], depth: int):
        match t:
            case TypeVar(name):
                return TypeVar(env.get(name, name))
            case Rec(z, body):
                fresh = f"%{depth}"
                return Rec(fresh, go(body, {**env, z: fresh}, depth + 1))
            case Seq(a, b):
                return Seq(go(a, env, depth), go(b, env, depth))
            case Session(a, b):
                return Session(go(a, env, depth), go(b, env, depth))
            case Qualified(q, In(p)):
                return Qualified(q, In(go(p, env, depth)))
            case Qualified(q, Out(p)):
                return Qualified(q, Out(go(p, env, depth)))
            case Qualified(q, Branch(arms)):
                return Qualified(q, Branch(tuple((l, go(a, env, depth)) for l, a in arms)))
            case Qualified(q, Select(arms)):
                return Qualified(q, Select(tuple((l, go(a, env, depth)) for l, a in arms)))
        return t

    return go(t, {}, 0)


# -- printing ---------------------------------------------------------------

def show_payload(p: PayloadType) -> str:
    match p:
        case Base(name):
            return name
        case Session(a, b):
            return f"({show_type(a)}, {show_type(b)})"
    return f"({show_type(p)})"


def _show_arms(arms) -> str:
    return ", ".join(f"{l}: {show_type(a)}" for l, a in arms)


def show_type(t: PayloadType) -> str:
    match t:
        case Base() | Session():
            return show_payload(t)
        case Qualified(q, Skip()):
            return f"{q} skip"
        case Qualified(q, In(p)):
            return f"{q} ?{show_payload(p)}"
        case Qualified(q, Out(p)):
            return f"{q} !{show_payload(p)}"
        case Qualified(q, Branch(arms)):
            return f"{q} &{{{_show_arms(arms)}}}"
        case Qualified(q, Select(arms)):
            return f"{q} +{{{_show_arms(arms)}}}"
        case TypeVar(name):
            return name
        case Param(name, _, d):
            return f"dual {name}" if d else name
        case Rec(z, body):
            return f"rec {z} . {show_type(body)}"
        case Seq(a, b):
            left = show_type(a)
            if isinstance(a, (Seq, Rec)):
                left = f"({left})"
            return f"{left} ; {show_type(b)}"
    raise TypeError(f"not a type: {t!r}")
