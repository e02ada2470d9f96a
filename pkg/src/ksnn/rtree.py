"""Euclidean baseline: an R-tree over POIs plus one constrained search per candidate.

Straight-line distance never exceeds network distance on a consistent
embedding.  Every POI that can have a valid path therefore lies within
Euclidean distance ``d_c`` of the query vertex.  The baseline enumerates
those POIs with an incremental best-first nearest-neighbour scan.  It then
runs a safest-valid-path search to each of them.  Each search is narrowed by
two exact bounds: distance-to-target (only vertices inside the ellipse
``d(s, v) + d(v, t) < d_c`` are kept) and, once k answers are known, the
k-th best signature.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .dijkstra import shortest_distances
from .graph import DomainError, RoadGraph
from .ine import safest_valid_path
from .query import Answer, QuerySpec, SearchStats, rank_entries

NODE_CAPACITY = 8


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @staticmethod
    def around(points: Sequence[tuple[float, float]]) -> "Rect":
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        return Rect(min(xs), min(ys), max(xs), max(ys))

    @staticmethod
    def union(rects: Sequence["Rect"]) -> "Rect":
        return Rect(min(r.xmin for r in rects), min(r.ymin for r in rects),
                    max(r.xmax for r in rects), max(r.ymax for r in rects))

    def min_dist(self, x: float, y: float) -> float:
        dx = max(self.xmin - x, 0.0, x - self.xmax)
        dy = max(self.ymin - y, 0.0, y - self.ymax)
        return math.hypot(dx, dy)


@dataclass
class RNode:
    rect: Rect
    leaf: bool
    # Leaf entries are (x, y, poi); internal entries are child nodes.
    entries: list = field(default_factory=list)


def _str_pack(items: list, key_xy, capacity: int) -> list[list]:
    """Sort-Tile-Recursive grouping of ``items`` into runs of ``capacity``."""
    n = len(items)
    pages = math.ceil(n / capacity)
    slices = max(1, math.ceil(math.sqrt(pages)))
    per_slice = slices * capacity
    by_x = sorted(items, key=lambda it: (key_xy(it)[0], key_xy(it)[1]))
    groups = []
    for i in range(0, n, per_slice):
        run = sorted(by_x[i:i + per_slice], key=lambda it: (key_xy(it)[1], key_xy(it)[0]))
        for j in range(0, len(run), capacity):
            groups.append(run[j:j + capacity])
    return groups


class PoiSpatialIndex:
    """Static STR-bulk-loaded R-tree over the POIs of a graph."""

    def __init__(self, graph: RoadGraph, capacity: int = NODE_CAPACITY) -> None:
        if graph.coords is None:
            raise DomainError("the Euclidean baseline needs vertex coordinates")
        if capacity < 2:
            raise DomainError("node capacity must be at least 2")
        self.graph_hash = graph.content_hash()
        self.size = len(graph.pois)
        self.pois = frozenset(graph.pois)
        points = [(*graph.coords[p], p) for p in sorted(graph.pois)]
        self.root: RNode | None = None
        if not points:
            return
        level = [RNode(Rect.around([pt[:2] for pt in g]), True, list(g))
                 for g in _str_pack(points, lambda pt: pt[:2], capacity)]
        while len(level) > 1:
            centre = lambda nd: ((nd.rect.xmin + nd.rect.xmax) / 2, (nd.rect.ymin + nd.rect.ymax) / 2)
            level = [RNode(Rect.union([c.rect for c in g]), False, list(g))
                     for g in _str_pack(level, centre, capacity)]
        self.root = level[0]

    def nearest(self, x: float, y: float) -> Iterator[tuple[float, int]]:
        """Yield ``(distance, poi)`` in increasing Euclidean distance."""
        if self.root is None:
            return
        tick = itertools.count()
        heap = [(self.root.rect.min_dist(x, y), 1, next(tick), self.root)]
        while heap:
            d, kind, _, item = heapq.heappop(heap)
            if kind == 0:
                yield d, item
                continue
            if item.leaf:
                for px, py, p in item.entries:
                    # Points sort before nodes at equal distance, then by id.
                    heapq.heappush(heap, (math.hypot(px - x, py - y), 0, p, p))
            else:
                for child in item.entries:
                    heapq.heappush(heap, (child.rect.min_dist(x, y), 1, next(tick), child))

    def within(self, x: float, y: float, radius: float) -> list[int]:
        """POIs at Euclidean distance strictly less than ``radius``."""
        out = []
        for d, p in self.nearest(x, y):
            if d >= radius:
                break
            out.append(p)
        return out

    def height(self) -> int:
        h, node = 0, self.root
        while node is not None:
            h += 1
            node = None if node.leaf else node.entries[0]
        return h


def build_rtree(graph: RoadGraph, capacity: int = NODE_CAPACITY) -> PoiSpatialIndex:
    return PoiSpatialIndex(graph, capacity)


def ellipse_distances(graph: RoadGraph, target: int, forward: dict[int, int],
                      d_c: int) -> dict[int, int]:
    """Distance to ``target`` for vertices v with forward[v] + d(v, target) < d_c.

    ``forward`` holds distances from the query vertex (cut at ``d_c``).  A
    vertex outside that ellipse lies on no valid path to the target, so it is
    neither settled nor expanded.
    """
    dist: dict[int, int] = {}
    if target not in forward:
        return dist
    adj = graph.adjacency
    heap = [(0, target)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in dist:
            continue
        dist[u] = d
        for v, w, _ in adj[u]:
            nd = d + w
            if v not in dist and v in forward and forward[v] + nd < d_c:
                heapq.heappush(heap, (nd, v))
    return dist


def rtree_ksnn(graph: RoadGraph, index: PoiSpatialIndex, q: QuerySpec) -> Answer:
    """Answer a kSNN query with Euclidean candidates and per-candidate searches."""
    q.validate(graph)
    if graph.coords is None:
        raise DomainError("the Euclidean baseline needs vertex coordinates")
    if index.graph_hash != graph.content_hash():
        raise DomainError("R-tree was built for a different graph")
    x, y = graph.coords[q.source]
    candidates = index.within(x, y, q.d_c)
    stats = SearchStats()
    entries = []
    forward = shortest_distances(graph.adjacency, q.source, q.d_c) if candidates else {}
    for p in candidates:
        # Once k answers are known, paths strictly less safe than the k-th
        # cannot enter the answer, so later searches may drop them.
        ceiling = None
        if len(entries) >= q.k:
            entries = list(rank_entries(entries, q.k))
            ceiling = entries[-1].signature
        remaining = ellipse_distances(graph, p, forward, q.d_c)
        ans = safest_valid_path(graph, q.source, p, q.d_c, rules=(1, 2),
                                remaining=remaining, ceiling=ceiling)
        stats.vertices_accessed += ans.stats.vertices_accessed
        stats.valid_paths_explored += ans.stats.valid_paths_explored
        entries.extend(ans.entries)
    stats.extra = {"searches": len(candidates)}
    return Answer(rank_entries(entries, q.k), stats)
