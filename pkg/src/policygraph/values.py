"""Value domain shared by predicates, traces, and reports.

Values are plain Python scalars (str, bool, int, float) plus ValueSet for
finite sets.  Python's own equality conflates bool with int (True == 1), which
would corrupt predicate semantics, so comparisons go through values_equal and
sets get a dedicated class with structural membership.
"""

from __future__ import annotations

from typing import Any, Iterable, Iterator


def is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def is_value(v: Any) -> bool:
    return isinstance(v, (str, bool, ValueSet)) or is_number(v)


def values_equal(a: Any, b: Any) -> bool:
    """Structural equality; values of different kinds are never equal."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if is_number(a) and is_number(b):
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, ValueSet) and isinstance(b, ValueSet):
        return a == b
    return False


def canonical(v: Any):
    """Hashable, kind-tagged form of a value; used for set storage and match keys."""
    if isinstance(v, bool):
        return ("flag", v)
    if is_number(v):
        return ("num", float(v))
    if isinstance(v, str):
        return ("text", v)
    if isinstance(v, ValueSet):
        return ("set", tuple(canonical(m) for m in v))
    raise TypeError(f"not a value: {v!r}")


def sort_key(v: Any):
    kind, payload = canonical(v)
    order = {"num": 0, "text": 1, "flag": 2, "set": 3}[kind]
    return (order, repr(payload))


class ValueSet:
    """Immutable set of values with structural (kind-aware) membership.

    Members are deduplicated with values_equal and kept in a canonical order,
    so two sets with the same members compare and hash equal regardless of
    construction order.
    """

    __slots__ = ("_items",)

    def __init__(self, items: Iterable[Any] = ()):
        kept: list[Any] = []
        for item in items:
            if not is_value(item):
                raise TypeError(f"not a value: {item!r}")
            if not any(values_equal(item, k) for k in kept):
                kept.append(item)
        kept.sort(key=sort_key)
        self._items = tuple(kept)

    def __contains__(self, v: Any) -> bool:
        return any(values_equal(v, item) for item in self._items)

    def __iter__(self) -> Iterator[Any]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, ValueSet):
            return NotImplemented
        return len(self._items) == len(other._items) and all(
            values_equal(a, b) for a, b in zip(self._items, other._items)
        )

    def __hash__(self) -> int:
        return hash(canonical(self))

    def __repr__(self) -> str:
        return "ValueSet({%s})" % ", ".join(repr(i) for i in self._items)

    def union(self, other: "ValueSet") -> "ValueSet":
        return ValueSet(list(self._items) + list(other._items))

    def intersect(self, other: "ValueSet") -> "ValueSet":
        return ValueSet(i for i in self._items if i in other)

    def issubset(self, other: "ValueSet") -> bool:
        return all(i in other for i in self._items)

    def ispropersubset(self, other: "ValueSet") -> bool:
        return self.issubset(other) and len(self) < len(other)


def from_json(x: Any) -> Any:
    """Coerce a decoded JSON value into the engine's value domain.

    Arrays become sets (duplicates collapse structurally); objects and null
    have no counterpart and are rejected.
    """
    if isinstance(x, list):
        return ValueSet(from_json(m) for m in x)
    if isinstance(x, (str, bool)) or is_number(x):
        return x
    raise TypeError(f"unsupported value in trace: {x!r}")


def to_json(v: Any) -> Any:
    """Inverse of from_json; sets serialize as sorted arrays."""
    if isinstance(v, ValueSet):
        return [to_json(m) for m in v]
    if is_value(v):
        return v
    raise TypeError(f"not a value: {v!r}")
