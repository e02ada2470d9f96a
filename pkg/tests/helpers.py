"""Shared fixtures: the worked example graph and small random instances."""

from __future__ import annotations

import math
import random

from ksnn.dijkstra import shortest_distances
from ksnn.graph import Edge, RoadGraph

# Worked example: three paths from s to p1.
#   P1: s-a-b-c-p1, ESS (4,5,4,5), lengths (1,3,3,2)      -> d4=4, d5=5
#   P2: s-d-e-f-p1, ESS (1,2,4,5), lengths (1,1,1,2)      -> (1,1,0,1,2)
#   P3: s-g-h-i-j-p1, ESS (5,2,1,2,5), lengths (2,2,1,2,2) -> (1,4,0,0,4)
# plus p2 hanging off e, and p3 hanging off b beyond d_c = 10.
NAMES = ["s", "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "p1", "p2", "p3"]
V = {name: i for i, name in enumerate(NAMES)}
EXAMPLE_EDGES = [
    ("s", "a", 1, 4), ("a", "b", 3, 5), ("b", "c", 3, 4), ("c", "p1", 2, 5),
    ("s", "d", 1, 1), ("d", "e", 1, 2), ("e", "f", 1, 4), ("f", "p1", 2, 5),
    ("s", "g", 2, 5), ("g", "h", 2, 2), ("h", "i", 1, 1), ("i", "j", 2, 2),
    ("j", "p1", 2, 5), ("e", "p2", 3, 1), ("b", "p3", 8, 3),
]
P1 = tuple(V[x] for x in ("s", "a", "b", "c", "p1"))
P2 = tuple(V[x] for x in ("s", "d", "e", "f", "p1"))
P3 = tuple(V[x] for x in ("s", "g", "h", "i", "j", "p1"))


def example_graph() -> RoadGraph:
    edges = [Edge(V[a], V[b], w, s) for a, b, w, s in EXAMPLE_EDGES]
    g = RoadGraph(len(NAMES), edges, pois=[V["p1"], V["p2"], V["p3"]], s_max=5)
    # Collinear embedding at each vertex's network distance from s: the
    # triangle inequality makes every straight-line distance a lower bound.
    dist = shortest_distances(g.adjacency, V["s"])
    coords = {v: (float(dist[v]), 0.0) for v in range(g.num_vertices)}
    return RoadGraph(g.num_vertices, g.edges(), g.pois, s_max=5, coords=coords)


def random_graph(rng: random.Random, n_max: int = 12, m_max: int = 20,
                 s_max_max: int = 4, max_len_extra: int = 3,
                 poi_frac: tuple[float, float] = (0.2, 0.6)) -> RoadGraph:
    """Small random connected-ish graph with a consistent planar embedding."""
    n = rng.randint(2, n_max)
    s_max = rng.randint(1, s_max_max)
    coords = {v: (rng.uniform(0, 4), rng.uniform(0, 4)) for v in range(n)}
    pairs = set()
    order = list(range(n))
    rng.shuffle(order)
    for i in range(1, n):
        if rng.random() < 0.9:
            j = order[rng.randrange(i)]
            pairs.add(tuple(sorted((order[i], j))))
    m_target = rng.randint(len(pairs), max(len(pairs), min(m_max, n * (n - 1) // 2)))
    tries = 0
    while len(pairs) < m_target and tries < 200:
        tries += 1
        a, b = rng.sample(range(n), 2)
        pairs.add(tuple(sorted((a, b))))
    edges = []
    for a, b in sorted(pairs):
        eu = math.dist(coords[a], coords[b])
        length = max(1, math.ceil(eu)) + rng.randint(0, max_len_extra)
        edges.append(Edge(a, b, length, rng.randint(1, s_max)))
    lo, hi = poi_frac
    n_poi = max(1, round(n * rng.uniform(lo, hi)))
    pois = rng.sample(range(n), min(n, n_poi))
    return RoadGraph(n, edges, pois, s_max=s_max, coords=coords)


def pick_dc(rng: random.Random, g: RoadGraph, source: int, max_reach: int = 4) -> int | None:
    """A d_c under which between 1 and ``max_reach`` POIs are reachable."""
    dist = shortest_distances(g.adjacency, source)
    ds = sorted(dist[p] for p in g.pois if p in dist)
    if not ds:
        return None
    j = rng.randint(1, min(max_reach, len(ds)))
    lo = ds[j - 1] + 1
    hi = ds[j] if j < len(ds) else ds[j - 1] + 6
    return max(2, rng.randint(lo, max(lo, hi)))


def random_instance(seed: int, **kw):
    rng = random.Random(seed)
    while True:
        g = random_graph(rng, **kw)
        source = rng.randrange(g.num_vertices)
        d_c = pick_dc(rng, g, source)
        if d_c is None:
            continue
        dist = shortest_distances(g.adjacency, source)
        if 1 <= sum(1 for p in g.pois if dist.get(p, d_c) < d_c) <= 4:
            return g, source, d_c


def build_graph(n: int, edges, pois=(), s_max: int | None = None, coords=None) -> RoadGraph:
    """Graph from ``(u, v, length, ess)`` tuples."""
    return RoadGraph(n, [Edge(u, v, w, s) for u, v, w, s in edges], pois, s_max=s_max,
                     coords=coords)


def unconstrained_best(g: RoadGraph, source: int) -> dict[int, tuple]:
    """Per POI, the (signature, length, vertices)-minimal simple path, any length."""
    from ksnn.oracle import enumerate_valid_paths
    budget = g.total_length() + 1 if g.num_edges else 2
    best: dict[int, tuple] = {}
    for target, verts, sig, length in enumerate_valid_paths(g, source, max(2, budget)):
        if target in g.pois:
            key = (sig, length, verts)
            if target not in best or key < best[target]:
                best[target] = key
    return best


def random_change(rng: random.Random, g: RoadGraph):
    """A random edge add/remove/ESS change or POI add/remove (``None`` if unusable)."""
    from ksnn.graph import EdgeChange, PoiChange
    kind = rng.random()
    es = list(g.edges())
    if kind < 0.25 and es:
        e = rng.choice(es)
        return EdgeChange("remove", e.u, e.v)
    if kind < 0.5 and es:
        e = rng.choice(es)
        return EdgeChange("ess", e.u, e.v, ess=rng.randint(1, g.s_max))
    if kind < 0.75 and g.num_vertices >= 2:
        a, b = rng.sample(range(g.num_vertices), 2)
        if g.has_edge(a, b):
            return None
        return EdgeChange("add", a, b, length=rng.randint(1, 9), ess=rng.randint(1, g.s_max))
    v = rng.randrange(g.num_vertices)
    if v in g.pois and len(g.pois) == 1:
        return None
    return PoiChange("remove" if v in g.pois else "add", v)
