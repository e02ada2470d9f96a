"""Connected-component tree (Ct-tree) index and its kSNN search.

The tree recursively splits the road network by deleting its least safe
edges.  A node at floor ``f`` is a connected component of the graph
restricted to edges with ESS ``> f``; its children are obtained by also
deleting the node's smallest remaining ESS level (or, with a height cap, the
next bucket of levels).  Every path that stays inside a node is strictly
safer than any path that leaves it, so the search can finish a node before
looking at its parent.

Per node we keep the border vertices (vertices with an incident edge of ESS
``<= f``) and, for each border, the in-node shortest distance to the nearest
other border (``min_border``) and to the nearest POI (``min_poi``).

Pruning rules (Rules 1 and 2 are as in :mod:`ksnn.ine`):

* Rule 3: a path at ``v`` whose in-node continuations can neither reach
  another border within ``d_c`` nor a POI within ``d_c`` may only leave
  through ``v``'s own exit edges.
* Rule 4: as Rule 3, with the POI bound tightened to ``maxD``, the largest
  shortest-dequeued distance over the node's POIs once all have been reached.

Rather than discarding such a path outright, the search keeps it but caps its
next edge at the node's floor.  Dropping it would be unsound whenever ``v``
can exit the node directly.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Collection, Iterable

from .dijkstra import multi_source_distances
from .graph import DomainError, EdgeChange, PoiChange, RoadGraph, add_to_signature, \
    apply_change, empty_signature
from .query import (Answer, QuerySpec, SearchBudgetExceeded, SearchStats, Trail,
                    make_entry, resolve_rules)

CT_RULES = (1, 2, 3, 4)
INF = math.inf


@dataclass(eq=False)
class CtNode:
    floor: int
    depth: int
    vertices: frozenset[int]
    parent: "CtNode | None" = None
    children: list["CtNode"] = field(default_factory=list)
    pois: frozenset[int] = frozenset()
    borders: frozenset[int] = frozenset()
    min_border: dict[int, float] = field(default_factory=dict)
    min_poi: dict[int, float] = field(default_factory=dict)
    id: int = -1

    @property
    def poi_count(self) -> int:
        return len(self.pois)

    def canonical(self) -> tuple:
        """Id-free description used to compare trees."""
        return (
            self.floor,
            self.depth,
            tuple(sorted(self.vertices)),
            tuple(sorted(self.pois)),
            tuple(sorted(self.borders)),
            tuple(sorted(self.min_border.items())),
            tuple(sorted(self.min_poi.items())),
            tuple(sorted(tuple(sorted(c.vertices)) for c in self.children)),
        )

    def __repr__(self) -> str:
        return (f"CtNode(id={self.id}, floor={self.floor}, depth={self.depth}, "
                f"|V|={len(self.vertices)}, pois={len(self.pois)}, "
                f"borders={len(self.borders)})")


def _thresholds(s_max: int, height_cap: int | None) -> tuple[int, ...]:
    if height_cap is None or height_cap >= s_max:
        return tuple(range(1, s_max + 1))
    if height_cap < 1:
        raise DomainError("height_cap must be at least 1")
    return tuple(sorted({math.ceil(i * s_max / height_cap) for i in range(1, height_cap + 1)}))


class CtTree:
    """Ct-tree over a :class:`RoadGraph`; see the module docstring."""

    def __init__(self, graph: RoadGraph, height_cap: int | None = None) -> None:
        self.height_cap = height_cap
        self._install(graph)

    # -- construction ---------------------------------------------------
    def _install(self, graph: RoadGraph) -> None:
        self.graph = graph
        self.thresholds = _thresholds(graph.s_max, self.height_cap)
        self.root = CtNode(0, 0, frozenset(range(graph.num_vertices)))
        self._grow(self.root)
        self._index()

    def _child_floor(self, node: CtNode) -> int | None:
        """Floor of ``node``'s children, or ``None`` if ``node`` is a leaf."""
        adj = self.graph.adjacency
        lo, hi = INF, -INF
        for v in node.vertices:
            for _, _, s in adj[v]:
                if s > node.floor:
                    if s < lo:
                        lo = s
                    if s > hi:
                        hi = s
        if lo is INF:
            return None
        cut = next(t for t in self.thresholds if t >= lo)
        return cut if hi > cut else None

    def _components(self, vertices: Iterable[int], floor: int) -> list[frozenset[int]]:
        adj = self.graph.adjacency
        seen: set[int] = set()
        comps = []
        for start in sorted(vertices):
            if start in seen:
                continue
            seen.add(start)
            comp = [start]
            todo = deque([start])
            while todo:
                x = todo.popleft()
                for y, _, s in adj[x]:
                    if s > floor and y not in seen:
                        seen.add(y)
                        comp.append(y)
                        todo.append(y)
            comps.append(frozenset(comp))
        return comps

    def _grow(self, node: CtNode) -> None:
        """Fill metadata and build the subtree below ``node`` from scratch."""
        self._fill_metadata(node)
        node.children = []
        cut = self._child_floor(node)
        if cut is None:
            return
        for comp in self._components(node.vertices, cut):
            child = CtNode(cut, node.depth + 1, comp, parent=node)
            node.children.append(child)
            self._grow(child)

    def _fill_metadata(self, node: CtNode) -> None:
        adj = self.graph.adjacency
        f = node.floor
        node.pois = frozenset(p for p in self.graph.pois if p in node.vertices) \
            if len(self.graph.pois) < len(node.vertices) \
            else frozenset(v for v in node.vertices if v in self.graph.pois)
        node.borders = frozenset(
            v for v in node.vertices if any(s <= f for _, _, s in adj[v]))
        self._fill_border_dist(node)
        self._fill_poi_dist(node)

    def _fill_border_dist(self, node: CtNode) -> None:
        node.min_border = {}
        if not node.borders:
            return
        f = node.floor
        adj = self.graph.adjacency
        # Multi-source Dijkstra labelled by nearest border; the closest other
        # border of b is found across an edge joining b's region to another.
        dist: dict[int, int] = {}
        label: dict[int, int] = {}
        heap = [(0, b, b) for b in node.borders]
        heapq.heapify(heap)
        while heap:
            d, v, src = heapq.heappop(heap)
            if v in dist:
                continue
            dist[v] = d
            label[v] = src
            for w, length, s in adj[v]:
                if s > f and w not in dist:
                    heapq.heappush(heap, (d + length, w, src))
        best = {b: INF for b in node.borders}
        for x, dx in dist.items():
            lx = label[x]
            for y, length, s in adj[x]:
                if s > f and label[y] != lx:
                    cand = dx + length + dist[y]
                    if cand < best[lx]:
                        best[lx] = cand
        node.min_border = best

    def _fill_poi_dist(self, node: CtNode) -> None:
        node.min_poi = {}
        if not node.borders:
            return
        f = node.floor
        dist = multi_source_distances(self.graph.adjacency, node.pois,
                                      edge_ok=lambda s: s > f) if node.pois else {}
        node.min_poi = {b: dist.get(b, INF) for b in node.borders}

    def _index(self) -> None:
        """Assign ids and rebuild vertex locators and border tops."""
        n = self.graph.num_vertices
        self.nodes: list[CtNode] = []
        self.locator: list[list[CtNode]] = [[] for _ in range(n)]
        stack = [self.root]
        while stack:
            node = stack.pop()
            node.id = len(self.nodes)
            self.nodes.append(node)
            for v in node.vertices:
                self.locator[v].append(node)
            stack.extend(reversed(node.children))
        for chain in self.locator:
            chain.sort(key=lambda nd: nd.depth)
        # Depth of the highest node in which v is a border (None: never).
        self.border_top: list[int | None] = [None] * n
        for v, chain in enumerate(self.locator):
            for nd in chain:
                if v in nd.borders:
                    self.border_top[v] = nd.depth
                    break
        self.graph_hash = self.graph.content_hash()

    # -- inspection -----------------------------------------------------
    @property
    def height(self) -> int:
        return max(nd.depth for nd in self.nodes)

    def canonical(self) -> tuple:
        return tuple(sorted(nd.canonical() for nd in self.nodes))

    def canonical_locators(self) -> tuple:
        return tuple(tuple((nd.floor, tuple(sorted(nd.vertices))) for nd in chain)
                     for chain in self.locator)

    def structurally_equal(self, other: "CtTree") -> bool:
        return (self.canonical() == other.canonical()
                and self.canonical_locators() == other.canonical_locators()
                and self.border_top == other.border_top)

    def locate_start(self, v: int, k: int) -> CtNode:
        """Deepest node containing ``v`` that holds at least ``k`` POIs."""
        self.graph.check_vertex(v)
        chosen = self.root
        for nd in self.locator[v]:
            if nd.poi_count >= k:
                chosen = nd
            else:
                break
        return chosen

    def check_border(self, v: int, node: CtNode) -> CtNode | None:
        """Highest node in ``node``'s subtree for which ``v`` is a border."""
        top = self.border_top[v]
        if top is None:
            return None
        chain = self.locator[v]
        depth = max(top, node.depth)
        return chain[depth] if depth < len(chain) else None

    # -- updates --------------------------------------------------------
    def update_edge(self, change: EdgeChange) -> None:
        """Apply an edge addition, removal or ESS change in place."""
        if not isinstance(change, EdgeChange):
            raise DomainError("update_edge expects an EdgeChange")
        graph = apply_change(self.graph, change)
        if _thresholds(graph.s_max, self.height_cap) != self.thresholds:
            self._install(graph)
            return
        self.graph = graph
        self._refresh(self.root, {change.u, change.v})
        self._index()

    def _refresh(self, node: CtNode, touched: set[int]) -> None:
        """Bring ``node``'s metadata and subtree in line with the current graph."""
        self._fill_metadata(node)
        cut = self._child_floor(node)
        if cut is None:
            node.children = []
            return
        old = {c.vertices: c for c in node.children if c.floor == cut}
        children = []
        for comp in self._components(node.vertices, cut):
            child = old.get(comp)
            if child is None:
                child = CtNode(cut, node.depth + 1, comp, parent=node)
                self._grow(child)
            elif touched & comp:
                self._refresh(child, touched)
            children.append(child)
        node.children = children

    def update_poi(self, change: PoiChange) -> None:
        """Apply a POI addition or removal in place."""
        if not isinstance(change, PoiChange):
            raise DomainError("update_poi expects a PoiChange")
        self.graph = apply_change(self.graph, change)
        for nd in self.locator[change.v]:
            if change.kind == "add":
                nd.pois = nd.pois | {change.v}
            else:
                nd.pois = nd.pois - {change.v}
            self._fill_poi_dist(nd)
        self.graph_hash = self.graph.content_hash()

    def update(self, change: EdgeChange | PoiChange) -> None:
        if isinstance(change, PoiChange):
            self.update_poi(change)
        else:
            self.update_edge(change)


def build(graph: RoadGraph, height_cap: int | None = None) -> CtTree:
    return CtTree(graph, height_cap)


def locate_start(tree: CtTree, v: int, k: int) -> CtNode:
    return tree.locate_start(v, k)


def prune_path(length: int, d_c: int, d_sh_tail: float, node: CtNode | None,
               tail: int, max_d: float, rules: Collection[int] = CT_RULES) -> bool:
    """Pruning test for a path ending at ``tail``.

    ``node`` is the highest node (within the current search node's subtree)
    for which ``tail`` is a border.  True means the path has no continuation
    inside ``node`` worth expanding: Rule 2 fires, or both the border and the
    POI conditions hold.  The search then keeps only the path's exits through
    ``tail`` itself (see the module docstring).
    """
    if 2 in rules and length >= d_sh_tail:
        return True
    if node is None or not (3 in rules or 4 in rules):
        return False
    bound = max_d if 4 in rules else d_c
    return (length + node.min_border.get(tail, INF) >= d_c
            and length + node.min_poi.get(tail, INF) >= bound)


class _MaxD:
    """Incremental maxD per node over the POIs' shortest dequeued distances."""

    def __init__(self, tree: CtTree, d_c: int, d_sh: list[float]) -> None:
        self.tree = tree
        self.d_c = d_c
        self.d_sh = d_sh
        self.touched: dict[int, int] = {}
        self.version = 0
        self.cache: dict[int, tuple[int, float]] = {}

    def poi_improved(self, p: int, first: bool) -> None:
        self.version += 1
        if first:
            for nd in self.tree.locator[p]:
                self.touched[nd.id] = self.touched.get(nd.id, 0) + 1

    def value(self, node: CtNode) -> float:
        if not node.pois:
            return -INF
        if self.touched.get(node.id, 0) < node.poi_count:
            return self.d_c
        hit = self.cache.get(node.id)
        if hit is not None and hit[0] == self.version:
            return hit[1]
        val = max(self.d_sh[p] for p in node.pois)
        self.cache[node.id] = (self.version, val)
        return val


def ct_ksnn(tree: CtTree, graph: RoadGraph, q: QuerySpec,
            rules: Collection[int] | None = None, max_paths: int | None = None) -> Answer:
    """Answer a kSNN query with the Ct-tree (``max_paths`` as in ``ine_ksnn``)."""
    q.validate(graph)
    if graph.content_hash() != tree.graph_hash:
        raise DomainError("Ct-tree was built for a different graph")
    rules = resolve_rules(rules, CT_RULES)
    rule1, rule2 = 1 in rules, 2 in rules
    border_rules = 3 in rules or 4 in rules
    d_c, k = q.d_c, q.k
    adj = graph.adjacency
    pois = graph.pois
    limit = d_c if rule1 else INF
    d_sh: list[float] = [d_c] * graph.num_vertices
    max_d = _MaxD(tree, d_c, d_sh)
    pois_reached: set[int] = set()

    node = tree.locate_start(q.source, k)
    touched = {q.source}
    enqueued = pushes = 0
    budget = INF if max_paths is None else max_paths
    found = []
    answered: set[int] = set()

    def cap_for(tail: int, length: int, cap: float) -> float:
        if not border_rules:
            return cap
        top = tree.check_border(tail, node)
        if top is None or top.floor >= cap:
            return cap
        if prune_path(length, d_c, INF, top, tail, max_d.value(top), rules):
            return top.floor
        return cap

    q_cur = [(empty_signature(graph.s_max), 0, q.source, Trail(None, q.source), INF, False)]
    q_next: list = []
    while True:
        while q_cur:
            sig, length, tail, trail, cap, resumed = heapq.heappop(q_cur)
            if not resumed:
                if length >= d_sh[tail]:
                    if rule2:
                        continue
                else:
                    d_sh[tail] = length
                    if tail in pois:
                        max_d.poi_improved(tail, tail not in pois_reached)
                        pois_reached.add(tail)
                if length < d_c and tail not in answered and tail in pois:
                    answered.add(tail)
                    found.append(make_entry(tail, trail.vertices(), length, sig, d_c))
                    if len(found) >= k:
                        break
            cap = cap_for(tail, length, cap)
            if tail in node.borders:
                q_next.append((sig, length, tail, trail, min(cap, node.floor), True))
            floor = node.floor
            for nxt, w, s in adj[tail]:
                if s <= floor or s > cap:
                    continue
                nl = length + w
                if nl >= limit or (rule2 and nl >= d_sh[nxt]):
                    continue
                if not rule2 and trail.contains(nxt):
                    continue
                ncap = cap_for(nxt, nl, INF)
                if ncap < INF and nxt not in node.borders and nxt not in pois:
                    # Capped path: worth keeping only if it has an exit edge.
                    if not any(y != tail and floor < t <= ncap for y, _, t in adj[nxt]):
                        continue
                touched.add(nxt)
                if nl < d_c:
                    enqueued += 1
                pushes += 1
                if pushes > budget:
                    raise SearchBudgetExceeded(max_paths)
                heapq.heappush(q_cur, (add_to_signature(sig, s, w), nl, nxt,
                                       Trail(trail, nxt), ncap, False))
        if len(found) >= k or node.parent is None:
            break
        node = node.parent
        q_cur = q_next
        heapq.heapify(q_cur)
        q_next = []

    stats = SearchStats(vertices_accessed=len(touched), valid_paths_explored=enqueued)
    return Answer(tuple(found), stats)
