"""Plain shortest-distance Dijkstra helpers (lengths only, no safety)."""

from __future__ import annotations

import heapq
import math
from typing import Callable, Iterable, Sequence

Adjacency = Sequence[Sequence[tuple[int, int, int]]]


def multi_source_distances(
    adj: Adjacency,
    sources: Iterable[int],
    edge_ok: Callable[[int], bool] | None = None,
    vertex_ok: Callable[[int], bool] | None = None,
    limit: float = math.inf,
) -> dict[int, int]:
    """Shortest distance from the nearest source to every reachable vertex.

    ``edge_ok`` filters edges by ESS and ``vertex_ok`` restricts the vertices
    that may be entered.  Vertices at distance ``>= limit`` are not reported.
    """
    dist: dict[int, int] = {}
    heap = [(0, s) for s in sources]
    heapq.heapify(heap)
    while heap:
        d, u = heapq.heappop(heap)
        if u in dist:
            continue
        dist[u] = d
        for v, w, s in adj[u]:
            if v in dist or (edge_ok is not None and not edge_ok(s)):
                continue
            if vertex_ok is not None and not vertex_ok(v):
                continue
            nd = d + w
            if nd < limit:
                heapq.heappush(heap, (nd, v))
    return dist


def shortest_distances(adj: Adjacency, source: int, limit: float = math.inf) -> dict[int, int]:
    return multi_source_distances(adj, (source,), limit=limit)


def kth_poi_distance(adj: Adjacency, source: int, pois: Iterable[int], k: int) -> int | None:
    """Network distance to the ``k``-th closest POI, or ``None`` if fewer exist."""
    pois = set(pois)
    if not pois:
        return None
    seen = 0
    dist: dict[int, int] = {}
    heap = [(0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in dist:
            continue
        dist[u] = d
        if u in pois:
            seen += 1
            if seen == k:
                return d
        for v, w, _ in adj[u]:
            if v not in dist:
                heapq.heappush(heap, (d + w, v))
    return None
