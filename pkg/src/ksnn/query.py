"""Query, answer and bookkeeping types shared by every engine."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Collection, Iterable

from .graph import DomainError, RoadGraph, Signature, pss


@dataclass(frozen=True)
class QuerySpec:
    """A kSNN query: ``k`` POIs from ``source`` with path length ``< d_c``."""

    source: int
    k: int
    d_c: int

    def validate(self, graph: RoadGraph) -> None:
        graph.check_vertex(self.source)
        if not isinstance(self.k, int) or self.k < 1:
            raise DomainError(f"k must be a positive integer, got {self.k!r}")
        if not isinstance(self.d_c, int) or self.d_c <= 1:
            raise DomainError(f"d_c must be an integer > 1, got {self.d_c!r}")


@dataclass(frozen=True)
class AnswerEntry:
    poi: int
    path: tuple[int, ...]
    length: int
    signature: Signature
    pss: Fraction | float

    @property
    def rank_key(self) -> tuple:
        return (self.signature, self.length, self.poi, self.path)


@dataclass
class SearchStats:
    """Work counters reported by an engine for one query.

    ``vertices_accessed`` counts distinct vertices that became the tail of an
    enqueued path (plus the source); ``valid_paths_explored`` counts enqueued
    paths shorter than ``d_c``.  Engines may add their own entries to ``extra``.
    """

    vertices_accessed: int = 0
    valid_paths_explored: int = 0
    extra: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class Answer:
    """Ranked kSNN result; ``stats`` is excluded from equality."""

    entries: tuple[AnswerEntry, ...]
    stats: SearchStats = field(default_factory=SearchStats, compare=False, repr=False)

    @property
    def pois(self) -> list[int]:
        return [e.poi for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


class SearchBudgetExceeded(DomainError):
    """A search enqueued more paths than its ``max_paths`` budget allows."""

    def __init__(self, max_paths: int) -> None:
        super().__init__(f"search exceeded its budget of {max_paths} enqueued paths")
        self.max_paths = max_paths


def make_entry(poi: int, path: tuple[int, ...], length: int,
               signature: Signature, d_c: int) -> AnswerEntry:
    return AnswerEntry(poi, tuple(path), length, tuple(signature), pss(signature, d_c))


def rank_entries(entries: Iterable[AnswerEntry], k: int) -> tuple[AnswerEntry, ...]:
    return tuple(sorted(entries, key=lambda e: e.rank_key)[:k])


class Trail:
    """Persistent linked list of the vertices of a search path.

    Stored in heap items after the (signature, length, tail) key, so the
    vertex sequence is materialised only when everything before it ties.
    """

    __slots__ = ("prev", "vertex")

    def __init__(self, prev: "Trail | None", vertex: int) -> None:
        self.prev = prev
        self.vertex = vertex

    def vertices(self) -> tuple[int, ...]:
        out = []
        t: Trail | None = self
        while t is not None:
            out.append(t.vertex)
            t = t.prev
        out.reverse()
        return tuple(out)

    def contains(self, v: int) -> bool:
        t: Trail | None = self
        while t is not None:
            if t.vertex == v:
                return True
            t = t.prev
        return False

    def __lt__(self, other: "Trail") -> bool:
        return self.vertices() < other.vertices()

    def __repr__(self) -> str:
        return f"Trail{self.vertices()}"


def resolve_rules(rules: Collection[int] | None, available: Collection[int]) -> frozenset[int]:
    """Validate a pruning-rule selection; ``None`` selects all ``available``."""
    if rules is None:
        return frozenset(available)
    chosen = frozenset(rules)
    unknown = chosen - frozenset(available)
    if unknown:
        raise DomainError(f"pruning rules {sorted(unknown)} do not apply to this engine "
                          f"(available: {sorted(available)})")
    return chosen
