"""Euclidean baseline: POI R-tree and per-candidate searches."""

from __future__ import annotations

import math
import random

import pytest

from helpers import V, build_graph, example_graph, random_instance
from ksnn.graph import DomainError
from ksnn.dijkstra import shortest_distances
from ksnn.ine import ine_ksnn, safest_valid_path
from ksnn.oracle import brute_ksnn
from ksnn.query import QuerySpec
from ksnn.rtree import PoiSpatialIndex, build_rtree, ellipse_distances, rtree_ksnn


def scattered(n_pois: int, seed: int):
    rng = random.Random(seed)
    coords = {v: (rng.uniform(0, 100), rng.uniform(0, 100)) for v in range(n_pois)}
    return build_graph(n_pois, [], pois=range(n_pois), coords=coords)


@pytest.mark.parametrize("seed, capacity", [(0, 2), (1, 4), (2, 8), (3, 16)])
def test_nearest_order_matches_sorted_scan(seed, capacity):
    g = scattered(150, seed)
    idx = build_rtree(g, capacity)
    x, y = 40.0, 60.0
    expected = sorted((math.hypot(px - x, py - y), p) for p, (px, py) in g.coords.items())
    got = list(idx.nearest(x, y))
    assert [p for _, p in got] == [p for _, p in expected]
    assert [d for d, _ in got] == pytest.approx([d for d, _ in expected])
    assert idx.within(x, y, 20.0) == [p for d, p in expected if d < 20.0]


def test_index_holds_exactly_the_pois():
    g = example_graph()
    idx = build_rtree(g)
    assert idx.pois == g.pois and idx.size == 3
    assert sorted(p for _, p in idx.nearest(0.0, 0.0)) == sorted(g.pois)
    assert idx.height() >= 1


def test_requires_coordinates():
    with pytest.raises(DomainError):
        PoiSpatialIndex(build_graph(2, [(0, 1, 1, 1)], pois=[1]))


def test_empty_poi_set():
    g = build_graph(2, [(0, 1, 1, 1)], coords={0: (0.0, 0.0), 1: (1.0, 0.0)})
    idx = build_rtree(g)
    assert list(idx.nearest(0.0, 0.0)) == []
    assert rtree_ksnn(g, idx, QuerySpec(0, 1, 5)).entries == ()


def test_example_matches_ine_and_skips_far_poi():
    g = example_graph()
    idx = build_rtree(g)
    q = QuerySpec(V["s"], 3, 10)
    ans = rtree_ksnn(g, idx, q)
    assert ans == ine_ksnn(g, q)
    # p3 lies at Euclidean distance 12 >= d_c, so only p1 and p2 are searched.
    assert ans.stats.extra["searches"] == 2


@pytest.mark.parametrize("seed", range(200))
def test_matches_oracle(seed):
    g, s, d_c = random_instance(seed)
    idx = build_rtree(g)
    for k in (1, 3):
        q = QuerySpec(s, k, d_c)
        assert rtree_ksnn(g, idx, q) == brute_ksnn(g, q)


def test_stale_index_rejected():
    g = example_graph()
    idx = build_rtree(g)
    with pytest.raises(DomainError):
        rtree_ksnn(g.with_ess(V["s"], V["a"], 1), idx, QuerySpec(V["s"], 1, 10))


# -- exact search bounds --------------------------------------------------------

@pytest.mark.parametrize("seed", range(60))
def test_ellipse_matches_two_full_searches(seed):
    g, s, d_c = random_instance(seed)
    forward = shortest_distances(g.adjacency, s, d_c)
    from_s = shortest_distances(g.adjacency, s)
    for t in range(g.num_vertices):
        from_t = shortest_distances(g.adjacency, t)
        expected = {v: d for v, d in from_t.items()
                    if v in from_s and from_s[v] + d < d_c}
        assert ellipse_distances(g, t, forward, d_c) == expected


@pytest.mark.parametrize("seed", range(60))
def test_bounded_single_target_search_is_exact(seed):
    g, s, d_c = random_instance(seed)
    forward = shortest_distances(g.adjacency, s, d_c)
    for t in sorted(g.pois):
        plain = safest_valid_path(g, s, t, d_c, rules=(1, 2))
        bounded = safest_valid_path(g, s, t, d_c, rules=(1, 2),
                                    remaining=ellipse_distances(g, t, forward, d_c))
        assert bounded.entries == plain.entries
        assert bounded.stats.valid_paths_explored <= plain.stats.valid_paths_explored
        if plain.entries:
            sig = plain.entries[0].signature
            # An equal ceiling keeps the answer; a strictly safer one removes it.
            assert safest_valid_path(g, s, t, d_c, rules=(1, 2), ceiling=sig).entries \
                == plain.entries
            if any(sig):
                safer = tuple(0 for _ in sig)
                assert safest_valid_path(g, s, t, d_c, rules=(1, 2),
                                         ceiling=safer).entries == ()


def test_grid_answers_match_ine_with_many_candidates():
    from ksnn.bench import dc_from_delta, sample_queries
    from ksnn.ingestion import gen_synthetic
    g = gen_synthetic("grid", rows=25, cols=25, rho=0.06, s_max=6, seed=2)
    idx = build_rtree(g)
    for v in sample_queries(g, 8, 2, k=4):
        q = QuerySpec(v, 4, dc_from_delta(g, v, 4, 2.0))
        ans = rtree_ksnn(g, idx, q)
        assert ans.entries == ine_ksnn(g, q).entries and ans.stats.extra["searches"] > 4
