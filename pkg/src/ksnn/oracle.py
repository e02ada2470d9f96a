"""Brute-force ground truth for small graphs.

Every valid simple path from the query vertex is enumerated explicitly and
the best one per POI is kept.  Nothing here imports an engine, so the oracle
stays independent of the code it checks.
"""

from __future__ import annotations

from typing import Iterator

from .graph import KsnnError, RoadGraph, Signature
from .query import Answer, AnswerEntry, QuerySpec, make_entry

DEFAULT_VERTEX_CAP = 14


class OracleRefused(KsnnError):
    """The graph is too large for exhaustive enumeration."""


def _guard(graph: RoadGraph, cap: int) -> None:
    if graph.num_vertices > cap:
        raise OracleRefused(
            f"graph has {graph.num_vertices} vertices; oracle cap is {cap}")


def enumerate_valid_paths(
    graph: RoadGraph, source: int, d_c: int, cap: int = DEFAULT_VERTEX_CAP,
) -> Iterator[tuple[int, tuple[int, ...], Signature, int]]:
    """Yield ``(target, vertices, signature, length)`` for every valid simple path.

    The empty path at ``source`` is included.
    """
    _guard(graph, cap)
    graph.check_vertex(source)
    s_max = graph.s_max
    on_path = [False] * graph.num_vertices
    verts = [source]
    sig = [0] * s_max
    on_path[source] = True
    incident = _incident(graph)

    def walk(v: int, length: int):
        yield v, tuple(verts), tuple(sig), length
        for e in incident[v]:
            w = e.u if e.v == v else e.v
            nl = length + e.length
            if on_path[w] or nl >= d_c:
                continue
            on_path[w] = True
            verts.append(w)
            sig[e.ess - 1] += e.length
            yield from walk(w, nl)
            sig[e.ess - 1] -= e.length
            verts.pop()
            on_path[w] = False

    yield from walk(source, 0)


def _incident(graph: RoadGraph) -> list[list]:
    # Built from the edge table rather than the adjacency lists the engines use.
    out: list[list] = [[] for _ in range(graph.num_vertices)]
    for e in graph.edges():
        out[e.u].append(e)
        out[e.v].append(e)
    return out


def enumerate_valid_paths_bfs(
    graph: RoadGraph, source: int, d_c: int, cap: int = DEFAULT_VERTEX_CAP,
) -> list[tuple[int, tuple[int, ...], Signature, int]]:
    """Second, iterative enumeration used to cross-check the recursive one.

    Paths are grown level by level from explicit vertex tuples and their
    signatures recomputed from scratch.
    """
    _guard(graph, cap)
    graph.check_vertex(source)
    lengths = {}
    for e in graph.edges():
        lengths[(e.u, e.v)] = lengths[(e.v, e.u)] = (e.length, e.ess)
    nbrs: dict[int, list[int]] = {v: [] for v in range(graph.num_vertices)}
    for a, b in lengths:
        nbrs[a].append(b)

    def describe(p: tuple[int, ...]):
        sig = [0] * graph.s_max
        total = 0
        for a, b in zip(p, p[1:]):
            w, s = lengths[(a, b)]
            sig[s - 1] += w
            total += w
        return p[-1], p, tuple(sig), total

    out = []
    frontier = [(source,)]
    while frontier:
        nxt = []
        for p in frontier:
            item = describe(p)
            if item[3] >= d_c:
                continue
            out.append(item)
            for w in nbrs[p[-1]]:
                if w not in p:
                    nxt.append(p + (w,))
        frontier = nxt
    return out


def best_paths(graph: RoadGraph, source: int, d_c: int,
               cap: int = DEFAULT_VERTEX_CAP) -> dict[int, AnswerEntry]:
    """Best valid path (signature, length, vertex sequence) to every reachable POI."""
    best: dict[int, tuple] = {}
    for target, verts, sig, length in enumerate_valid_paths(graph, source, d_c, cap):
        if target not in graph.pois:
            continue
        key = (sig, length, verts)
        if target not in best or key < best[target]:
            best[target] = key
    return {p: make_entry(p, v, l, s, d_c) for p, (s, l, v) in best.items()}


def brute_ksnn(graph: RoadGraph, q: QuerySpec, cap: int = DEFAULT_VERTEX_CAP) -> Answer:
    """Reference kSNN answer by exhaustive enumeration."""
    q.validate(graph)
    entries = sorted(best_paths(graph, q.source, q.d_c, cap).values(),
                     key=lambda e: (e.signature, e.length, e.poi))
    return Answer(tuple(entries[:q.k]))
