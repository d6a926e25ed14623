"""Typing contexts: split, update, the un predicate and term typing."""

from __future__ import annotations

import itertools
from collections.abc import Iterator, Mapping
from functools import cached_property
from typing import Optional

from . import syntax as sx
from .types import (
    UN, Base, PayloadType, Session, is_endpoint, qualifier_of, show_type,
    type_step,
)


class ContextError(Exception):
    pass


class Context(Mapping):
    """Immutable map from names and variables to payload types.

    Function signatures ride along and are shared by every split.
    """

    def __init__(self, entries: Optional[Mapping[str, PayloadType]] = None,
                 funcs: Optional[Mapping[str, sx.FuncSig]] = None):
        self._entries = dict(sorted((entries or {}).items()))
        self.funcs = funcs if funcs is not None else {}

    def __getitem__(self, key: str) -> PayloadType:
        return self._entries[key]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    @cached_property
    def _key(self) -> tuple:
        return tuple(self._entries.items())

    def __hash__(self) -> int:
        return hash(self._key)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Context):
            return NotImplemented
        return self._key == other._key

    def with_entries(self, entries: Mapping[str, PayloadType]) -> "Context":
        return Context(entries, self.funcs)

    def extend(self, key: str, t: PayloadType) -> "Context":
        """``Γ, x : T``; only defined for fresh ``x``."""
        if key in self._entries:
            raise ContextError(f"{key} is already bound")
        return self.with_entries({**self._entries, key: t})

    def set(self, key: str, t: PayloadType) -> "Context":
        return self.with_entries({**self._entries, key: t})

    def remove(self, key: str) -> "Context":
        return self.with_entries({k: v for k, v in self._entries.items() if k != key})

    def __repr__(self) -> str:
        return "{" + ", ".join(f"{k}: {show_type(v)}" for k, v in self._entries.items()) + "}"


# -- entry classification ---------------------------------------------------

def is_un_entry(t: PayloadType) -> bool:
    match t:
        case Base():
            return True
        case Session(a, b):
            return qualifier_of(a) is UN and qualifier_of(b) is UN
    return qualifier_of(t) is UN


def is_completed(t: PayloadType, self_loop: bool = False) -> bool:
    """A lin endpoint with no transitions left (or a pair of them)."""
    if isinstance(t, Session):
        return is_completed(t.left, self_loop) and is_completed(t.right, self_loop)
    return is_endpoint(t) and not type_step(t, self_loop)


def dischargeable(t: PayloadType, self_loop: bool = False) -> bool:
    return is_un_entry(t) or is_completed(t, self_loop)


def is_un(g: Mapping[str, PayloadType], self_loop: bool = False) -> bool:
    """``un(Γ)``, with finished lin protocols counted as unrestricted."""
    return all(dischargeable(t, self_loop) for t in g.values())


def un_part(g: Context, self_loop: bool = False) -> Context:
    return g.with_entries({k: v for k, v in g.items() if dischargeable(v, self_loop)})


# -- split ------------------------------------------------------------------

def entry_splits(t: PayloadType) -> list[tuple[Optional[PayloadType], Optional[PayloadType]]]:
    """Per-entry options of the split table; ``None`` means absent on that side."""
    match t:
        case Base():
            return [(t, t)]
        case Session(a, b):
            qa, qb = qualifier_of(a), qualifier_of(b)
            if qa is UN and qb is UN:
                return [(t, t)]
            if qa is UN or qb is UN:
                return []
            out = [(t, None), (None, t), (a, b), (b, a)]
            return list(dict.fromkeys(out))
    if qualifier_of(t) is UN:
        return [(t, t)]
    return [(t, None), (None, t)]


def ctx_split(g: Context) -> Iterator[tuple[Context, Context]]:
    """Every ``(Γ1, Γ2)`` with ``Γ1 ∘ Γ2 = Γ`` derivable from the split rules."""
    keys = list(g)
    options = [entry_splits(g[k]) for k in keys]
    for choice in itertools.product(*options):
        left = {k: l for k, (l, _) in zip(keys, choice) if l is not None}
        right = {k: r for k, (_, r) in zip(keys, choice) if r is not None}
        yield g.with_entries(left), g.with_entries(right)


# -- update -----------------------------------------------------------------

def ctx_update(g: Context, key: str, t: PayloadType) -> Context:
    """``Γ + (x : T)``.

    A fresh ``x`` is added.  An existing un endpoint must already have type
    ``T``.  An existing lin entry is replaced by ``T``.
    """
    if key not in g:
        return g.set(key, t)
    old = g[key]
    if is_endpoint(old) and qualifier_of(old) is UN:
        if old != t:
            raise ContextError(
                f"cannot update un endpoint {key} : {show_type(old)} to {show_type(t)}")
        return g
    if isinstance(old, Base):
        raise ContextError(f"{key} has base type {show_type(old)}")
    return g.set(key, t)


# -- terms ------------------------------------------------------------------

class TermError(Exception):
    pass


def term_ids(m: sx.Term) -> set[str]:
    names, vs = sx.term_free(m)
    return set(names) | set(vs)


def type_term(g: Context, m: sx.Term, self_loop: bool = False) -> PayloadType:
    """Name, Variable and Fun rules, with application typed argument-wise."""
    match m:
        case sx.Name(n) | sx.Var(n):
            if n not in g:
                raise TermError(f"unbound identifier {n}")
            rest = {k: v for k, v in g.items() if k != n}
            if not is_un(rest, self_loop):
                live = ", ".join(f"{k} : {show_type(v)}" for k, v in rest.items()
                                 if not dischargeable(v, self_loop))
                raise TermError(f"typing {n} leaves linear entries unused: {live}")
            return g[n]
        case sx.App(f, args):
            lit = sx.literal_type(f)
            if lit is not None and not args:
                return Base(lit)
            sig = g.funcs.get(f)
            if sig is None:
                raise TermError(f"unknown function symbol {f}")
            if len(sig.args) != len(args):
                raise TermError(f"{f} expects {len(sig.args)} argument(s)")
            for a, want in zip(args, sig.args):
                got = type_term(g, a, self_loop)
                if got != Base(want):
                    raise TermError(
                        f"argument {sx.show_term(a)} of {f} has type {show_type(got)}, expected {want}")
            return Base(sig.result)
    raise TermError(f"not a term: {m!r}")
