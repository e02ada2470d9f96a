"""Road-network model and exact path-safety arithmetic.

A path's safety is carried as a *signature*: a tuple ``d`` of length
``s_max`` where ``d[s - 1]`` is the total length of the path's edges whose
edge safety score (ESS) equals ``s``.  Python's tuple ordering is exactly the
lexicographic order we need, so a smaller signature is a safer path.  The
scalar path safety score (PSS) depends on the query's distance constraint and
is only materialised, as an exact :class:`~fractions.Fraction`, for reporting.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

Signature = tuple[int, ...]

#: PSS of the empty path (query vertex is itself the POI).
PSS_INF = math.inf


class KsnnError(Exception):
    """Base class for errors raised by this package."""


class DomainError(KsnnError, ValueError):
    """An argument violates an operation's precondition."""


@dataclass(frozen=True, slots=True)
class Edge:
    u: int
    v: int
    length: int
    ess: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.u, self.v)

    def other(self, x: int) -> int:
        if x == self.u:
            return self.v
        if x == self.v:
            return self.u
        raise DomainError(f"vertex {x} is not an endpoint of edge {self.key}")


def edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


def make_edge(u: int, v: int, length: int, ess: int) -> Edge:
    a, b = edge_key(u, v)
    return Edge(a, b, length, ess)


class RoadGraph:
    """Undirected road network with integer lengths and integer ESS values.

    Vertices are the dense integers ``0 .. num_vertices - 1``.  Instances are
    treated as immutable; the ``with_*`` methods return modified copies.
    """

    __slots__ = ("num_vertices", "s_max", "pois", "coords", "length_scale",
                 "_edges", "_adj", "_hash")

    def __init__(
        self,
        num_vertices: int,
        edges: Iterable[Edge],
        pois: Iterable[int] = (),
        s_max: int | None = None,
        coords: Mapping[int, tuple[float, float]] | None = None,
        length_scale: float = 1.0,
    ) -> None:
        if num_vertices < 0:
            raise DomainError("num_vertices must be nonnegative")
        self.num_vertices = num_vertices
        self._edges: dict[tuple[int, int], Edge] = {}
        adj: list[list[tuple[int, int, int]]] = [[] for _ in range(num_vertices)]
        for e in edges:
            if e.u == e.v:
                raise DomainError(f"self-loop at vertex {e.u}")
            e = make_edge(e.u, e.v, e.length, e.ess)
            for x in (e.u, e.v):
                if not 0 <= x < num_vertices:
                    raise DomainError(f"edge {e.key} references unknown vertex {x}")
            if isinstance(e.length, bool) or not isinstance(e.length, int) or e.length < 1:
                raise DomainError(f"edge {e.key} has invalid length {e.length!r}")
            if not isinstance(e.ess, int) or e.ess < 1:
                raise DomainError(f"edge {e.key} has invalid ESS {e.ess!r}")
            if e.key in self._edges:
                raise DomainError(f"duplicate edge {e.key}")
            self._edges[e.key] = e
            adj[e.u].append((e.v, e.length, e.ess))
            adj[e.v].append((e.u, e.length, e.ess))
        for lst in adj:
            lst.sort()
        self._adj = tuple(tuple(lst) for lst in adj)
        top = max((e.ess for e in self._edges.values()), default=1)
        if s_max is None:
            s_max = top
        if s_max < top:
            raise DomainError(f"s_max={s_max} below the largest ESS {top}")
        self.s_max = s_max
        pois = frozenset(pois)
        for p in pois:
            if not 0 <= p < num_vertices:
                raise DomainError(f"POI {p} is not a vertex")
        self.pois = pois
        self.coords = dict(coords) if coords is not None else None
        self.length_scale = length_scale
        self._hash: str | None = None

    # -- access ---------------------------------------------------------
    def neighbors(self, u: int) -> tuple[tuple[int, int, int], ...]:
        """``(v, length, ess)`` triples for the edges incident to ``u``."""
        return self._adj[u]

    @property
    def adjacency(self) -> tuple[tuple[tuple[int, int, int], ...], ...]:
        return self._adj

    def edges(self) -> Iterator[Edge]:
        return iter(sorted(self._edges.values(), key=lambda e: e.key))

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def edge(self, u: int, v: int) -> Edge:
        try:
            return self._edges[edge_key(u, v)]
        except KeyError:
            raise DomainError(f"no edge between {u} and {v}") from None

    def has_edge(self, u: int, v: int) -> bool:
        return edge_key(u, v) in self._edges

    def total_length(self) -> int:
        return sum(e.length for e in self._edges.values())

    def is_poi(self, v: int) -> bool:
        return v in self.pois

    def check_vertex(self, v: int) -> None:
        if not isinstance(v, int) or not 0 <= v < self.num_vertices:
            raise DomainError(f"vertex {v!r} is not in the graph")

    # -- copies ---------------------------------------------------------
    def _replace(self, edges=None, pois=None, s_max=None) -> "RoadGraph":
        return RoadGraph(
            self.num_vertices,
            self._edges.values() if edges is None else edges,
            self.pois if pois is None else pois,
            s_max=self.s_max if s_max is None else s_max,
            coords=self.coords,
            length_scale=self.length_scale,
        )

    def with_edge(self, u: int, v: int, length: int, ess: int) -> "RoadGraph":
        if self.has_edge(u, v):
            raise DomainError(f"edge {edge_key(u, v)} already exists")
        edges = list(self._edges.values()) + [make_edge(u, v, length, ess)]
        return self._replace(edges=edges, s_max=max(self.s_max, ess))

    def without_edge(self, u: int, v: int) -> "RoadGraph":
        key = edge_key(u, v)
        if key not in self._edges:
            raise DomainError(f"no edge {key} to remove")
        return self._replace(edges=[e for k, e in self._edges.items() if k != key])

    def with_ess(self, u: int, v: int, ess: int) -> "RoadGraph":
        old = self.edge(u, v)
        edges = [e for e in self._edges.values() if e.key != old.key]
        edges.append(Edge(old.u, old.v, old.length, ess))
        return self._replace(edges=edges, s_max=max(self.s_max, ess))

    def with_poi(self, v: int) -> "RoadGraph":
        self.check_vertex(v)
        if v in self.pois:
            raise DomainError(f"vertex {v} is already a POI")
        return self._replace(pois=self.pois | {v})

    def without_poi(self, v: int) -> "RoadGraph":
        if v not in self.pois:
            raise DomainError(f"vertex {v} is not a POI")
        return self._replace(pois=self.pois - {v})

    # -- identity -------------------------------------------------------
    def content_hash(self) -> str:
        """SHA-256 over the canonical edge list, POIs and ``s_max``."""
        if self._hash is None:
            h = hashlib.sha256()
            h.update(f"n={self.num_vertices};s={self.s_max}\n".encode())
            for e in self.edges():
                h.update(f"{e.u}\t{e.v}\t{e.length}\t{e.ess}\n".encode())
            h.update(("p=" + ",".join(map(str, sorted(self.pois)))).encode())
            self._hash = h.hexdigest()
        return self._hash

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RoadGraph):
            return NotImplemented
        return (
            self.num_vertices == other.num_vertices
            and self.s_max == other.s_max
            and self.pois == other.pois
            and self._edges == other._edges
            and self.coords == other.coords
        )

    def __hash__(self) -> int:
        return hash(self.content_hash())

    def __repr__(self) -> str:
        return (f"RoadGraph(n={self.num_vertices}, m={self.num_edges}, "
                f"pois={len(self.pois)}, s_max={self.s_max})")

    def __getstate__(self):
        return {s: getattr(self, s) for s in self.__slots__}

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)


# -- graph changes ------------------------------------------------------

@dataclass(frozen=True)
class EdgeChange:
    """``kind`` is ``"add"``, ``"remove"`` or ``"ess"``."""

    kind: str
    u: int
    v: int
    length: int | None = None
    ess: int | None = None


@dataclass(frozen=True)
class PoiChange:
    """``kind`` is ``"add"`` or ``"remove"``."""

    kind: str
    v: int


def apply_change(graph: RoadGraph, change: EdgeChange | PoiChange) -> RoadGraph:
    if isinstance(change, EdgeChange):
        if change.kind == "add":
            if change.length is None or change.ess is None:
                raise DomainError("edge add needs length and ess")
            return graph.with_edge(change.u, change.v, change.length, change.ess)
        if change.kind == "remove":
            return graph.without_edge(change.u, change.v)
        if change.kind == "ess":
            if change.ess is None:
                raise DomainError("ESS change needs the new ess")
            return graph.with_ess(change.u, change.v, change.ess)
    elif isinstance(change, PoiChange):
        if change.kind == "add":
            return graph.with_poi(change.v)
        if change.kind == "remove":
            return graph.without_poi(change.v)
    raise DomainError(f"unknown change {change!r}")


# -- signatures and PSS -------------------------------------------------

def empty_signature(s_max: int) -> Signature:
    return (0,) * s_max


def add_to_signature(sig: Signature, ess: int, length: int) -> Signature:
    i = ess - 1
    return sig[:i] + (sig[i] + length,) + sig[i + 1:]


def signature_sum(a: Signature, b: Signature) -> Signature:
    if len(a) != len(b):
        raise DomainError("signatures have different s_max")
    return tuple(x + y for x, y in zip(a, b))


def compare_safety(a: Signature, b: Signature) -> int:
    """-1 if ``a`` is safer, 1 if ``b`` is safer, 0 if equally safe."""
    if len(a) != len(b):
        raise DomainError("signatures have different s_max")
    return (a > b) - (a < b)


def pss_denominator(sig: Signature, d_c: int) -> int:
    s_max = len(sig)
    return sum(d * d_c ** (s_max - s) for s, d in enumerate(sig, start=1))


def pss(sig: Signature, d_c: int) -> Fraction | float:
    """Exact path safety score of a valid path with signature ``sig``."""
    if d_c <= 1:
        raise DomainError("d_c must be greater than 1")
    total = sum(sig)
    if total >= d_c:
        raise DomainError(f"path of length {total} is not valid under d_c={d_c}")
    if total == 0:
        return PSS_INF
    return Fraction(1, pss_denominator(sig, d_c))


def min_ess_of(sig: Signature) -> int:
    for s, d in enumerate(sig, start=1):
        if d:
            return s
    raise DomainError("empty path has no minimum ESS")


# -- explicit paths -----------------------------------------------------

@dataclass(frozen=True)
class SearchPath:
    """An explicit simple path starting at ``vertices[0]``."""

    vertices: tuple[int, ...]
    length: int
    signature: Signature
    visited: frozenset[int] = field(default=frozenset(), compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.visited:
            object.__setattr__(self, "visited", frozenset(self.vertices))

    @property
    def tail(self) -> int:
        return self.vertices[-1]

    @property
    def source(self) -> int:
        return self.vertices[0]

    @classmethod
    def start(cls, v: int, s_max: int) -> "SearchPath":
        return cls((v,), 0, empty_signature(s_max))


def path_from_vertices(graph: RoadGraph, vertices: Sequence[int]) -> SearchPath:
    """Build a :class:`SearchPath` by walking ``vertices`` through ``graph``."""
    if not vertices:
        raise DomainError("a path needs at least one vertex")
    p = SearchPath.start(vertices[0], graph.s_max)
    for v in vertices[1:]:
        nxt = concat(p, graph.edge(p.tail, v))
        if nxt is None:
            raise DomainError(f"vertex sequence {tuple(vertices)} is not simple")
        p = nxt
    return p


def concat(path: SearchPath, edge: Edge) -> SearchPath | None:
    """Extend ``path`` by ``edge``; ``None`` if that would close a cycle."""
    nxt = edge.other(path.tail)
    if nxt in path.visited:
        return None
    return SearchPath(
        path.vertices + (nxt,),
        path.length + edge.length,
        add_to_signature(path.signature, edge.ess, edge.length),
        path.visited | {nxt},
    )


def s_distance(path: SearchPath, s: int) -> int:
    if not 1 <= s <= len(path.signature):
        raise DomainError(f"safety level {s} outside 1..{len(path.signature)}")
    return path.signature[s - 1]


def min_ess(path: SearchPath) -> int:
    return min_ess_of(path.signature)


def path_pss(path: SearchPath, d_c: int) -> Fraction | float:
    return pss(path.signature, d_c)
