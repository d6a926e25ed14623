"""Immutable AST node base with cached structural hashing.

Trees in this package get hashed a lot (memo tables, visited sets in the
bisimulation search), so each node caches its hash on first use.  Fields
declared with ``compare=False`` (source positions) are ignored by both
equality and hashing.
"""

from __future__ import annotations

from dataclasses import fields
from functools import cached_property


class Node:
    @classmethod
    def _compared_fields(cls) -> tuple[str, ...]:
        names = cls.__dict__.get("_compared_cache")
        if names is None:
            names = tuple(f.name for f in fields(cls) if f.compare)
            cls._compared_cache = names
        return names

    def _values(self) -> tuple:
        return tuple(getattr(self, n) for n in self._compared_fields())

    @cached_property
    def _hash(self) -> int:
        return hash((type(self).__name__, *self._values()))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(self) is not type(other) or hash(self) != hash(other):
            return False
        return self._values() == other._values()

    def __ne__(self, other: object) -> bool:
        return not self == other
