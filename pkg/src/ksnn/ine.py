"""Index-free kSNN search by incremental network expansion.

Valid paths are expanded best-first in safety order.  Because a prefix is
always at least as safe as any of its extensions, the first path dequeued at
a POI is that POI's safest valid path, and the search can stop once ``k``
distinct POIs have been dequeued.

Two pruning rules are available:

* Rule 1 drops a path whose length reaches ``d_c``.
* Rule 2 drops a path whose length reaches ``D_sh[tail]``, the length of the
  shortest path dequeued so far at that tail.  Such a path is dominated in
  both length and safety by an earlier one, so no extension of it can win.
"""

from __future__ import annotations

import heapq
import math
from typing import Collection, Mapping

from .graph import RoadGraph, Signature, add_to_signature, empty_signature
from .query import (Answer, QuerySpec, SearchBudgetExceeded, SearchStats, Trail,
                    make_entry, resolve_rules)

INE_RULES = (1, 2)


def admit(length: int, tail: int, d_sh: dict[int, int] | list[float], d_c: int,
          rules: Collection[int] = INE_RULES) -> bool:
    """Return False iff a candidate path is pruned by Rule 1 or Rule 2."""
    if 1 in rules and length >= d_c:
        return False
    if 2 in rules:
        seen = d_sh[tail] if isinstance(d_sh, list) else d_sh.get(tail, d_c)
        if length >= seen:
            return False
    return True


def ine_ksnn(graph: RoadGraph, q: QuerySpec, rules: Collection[int] | None = None,
             max_paths: int | None = None) -> Answer:
    """Answer a kSNN query by best-first expansion of valid paths.

    With ``max_paths`` set, :class:`SearchBudgetExceeded` is raised once more
    than that many paths have been enqueued.
    """
    q.validate(graph)
    rules = resolve_rules(rules, INE_RULES)
    return _expand(graph, q.source, q.d_c, q.k, None, rules, max_paths)


def safest_valid_path(graph: RoadGraph, source: int, target: int, d_c: int,
                      rules: Collection[int] | None = None,
                      remaining: Mapping[int, int] | None = None,
                      ceiling: Signature | None = None) -> Answer:
    """Safest valid path from ``source`` to a single ``target`` vertex.

    Returns an :class:`Answer` with zero or one entry.  Two optional exact
    bounds shrink the search without changing its answer:

    * ``remaining`` maps vertices to a lower bound on their distance to the
      target; absent vertices cannot be on a valid path at all.  A path is
      dropped once its length plus that bound reaches ``d_c``.
    * ``ceiling`` drops paths whose signature is strictly worse than the given
      one; the caller uses it when such answers could not be kept anyway.
    """
    graph.check_vertex(source)
    graph.check_vertex(target)
    rules = resolve_rules(rules, INE_RULES)
    return _expand(graph, source, d_c, 1, target, rules, bound=remaining, ceiling=ceiling)


def _expand(graph: RoadGraph, source: int, d_c: int, k: int, target: int | None,
            rules: frozenset[int], max_paths: int | None = None,
            bound: Mapping[int, int] | None = None,
            ceiling: Signature | None = None) -> Answer:
    rule1 = 1 in rules
    rule2 = 2 in rules
    adj = graph.adjacency
    is_goal = graph.pois.__contains__ if target is None else target.__eq__
    limit = d_c if rule1 else math.inf
    # D_sh starts at d_c, so Rule 2 on its own also rejects invalid paths.
    d_sh: list[float] = [d_c] * graph.num_vertices
    touched = {source}
    enqueued = pushes = 0
    budget = math.inf if max_paths is None else max_paths
    found = []
    answered: set[int] = set()

    heap = [(empty_signature(graph.s_max), 0, source, Trail(None, source))]
    if bound is not None and source not in bound:
        heap = []
    while heap:
        sig, length, tail, trail = heapq.heappop(heap)
        if rule2:
            if length >= d_sh[tail]:
                continue
            d_sh[tail] = length
        if length < d_c and tail not in answered and is_goal(tail):
            answered.add(tail)
            found.append(make_entry(tail, trail.vertices(), length, sig, d_c))
            if len(found) >= k:
                break
        for nxt, w, s in adj[tail]:
            nl = length + w
            if nl >= limit or (rule2 and nl >= d_sh[nxt]):
                continue
            if not rule2 and trail.contains(nxt):
                continue
            if bound is not None and nl + bound.get(nxt, d_c) >= d_c:
                continue
            nsig = add_to_signature(sig, s, w)
            if ceiling is not None and nsig > ceiling:
                continue
            touched.add(nxt)
            if nl < d_c:
                enqueued += 1
            pushes += 1
            if pushes > budget:
                raise SearchBudgetExceeded(max_paths)
            heapq.heappush(heap, (nsig, nl, nxt, Trail(trail, nxt)))

    stats = SearchStats(vertices_accessed=len(touched), valid_paths_explored=enqueued)
    return Answer(tuple(found), stats)
