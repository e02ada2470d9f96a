"""Road graph model, signatures, exact PSS and explicit paths."""

from __future__ import annotations

import math
import pickle
from fractions import Fraction

import pytest

from helpers import P1, P2, P3, V, build_graph, example_graph
from ksnn.graph import (DomainError, Edge, EdgeChange, PoiChange, RoadGraph, SearchPath,
                        add_to_signature, apply_change, compare_safety, concat,
                        empty_signature, min_ess, path_from_vertices, path_pss, pss,
                        pss_denominator, s_distance, signature_sum)


@pytest.fixture(scope="module")
def g():
    return example_graph()


def test_s_distance_of_first_path(g):
    p1 = path_from_vertices(g, P1)
    assert s_distance(p1, 4) == 4
    assert s_distance(p1, 1) == 0
    assert s_distance(p1, 5) == 5


def test_s_distance_of_empty_path_is_zero():
    p = SearchPath.start(0, 5)
    assert all(s_distance(p, s) == 0 for s in range(1, 6))


def test_s_distance_level_out_of_range(g):
    p1 = path_from_vertices(g, P1)
    with pytest.raises(DomainError):
        s_distance(p1, 0)
    with pytest.raises(DomainError):
        s_distance(p1, 6)


@pytest.mark.parametrize("verts, expected", [
    (P1, Fraction(1, 45)),
    (P2, Fraction(1, 11012)),
    (P3, Fraction(1, 14004)),
])
def test_exact_pss_of_example_paths(g, verts, expected):
    assert path_pss(path_from_vertices(g, verts), 10) == expected


def test_pss_from_signatures_directly():
    assert pss((0, 0, 0, 4, 5), 10) == Fraction(1, 45)
    assert pss((1, 1, 0, 1, 2), 10) == Fraction(1, 11012)
    assert pss((1, 4, 0, 0, 4), 10) == Fraction(1, 14004)


def test_pss_of_empty_path_is_infinite():
    assert pss(empty_signature(4), 10) == math.inf


def test_pss_rejects_invalid_inputs():
    with pytest.raises(DomainError):
        pss((1, 2), 1)
    with pytest.raises(DomainError):
        pss((5, 5), 10)          # length 10 is not < d_c


def test_pss_denominator_positive_for_nonempty():
    assert pss_denominator((0, 0, 1), 7) == 1
    assert pss_denominator((1, 0, 0), 7) == 49


def test_compare_safety_orders_example_paths(g):
    s1, s2, s3 = (path_from_vertices(g, p).signature for p in (P1, P2, P3))
    assert compare_safety(s1, s2) == -1
    assert compare_safety(s2, s3) == -1
    assert compare_safety(s3, s1) == 1
    assert compare_safety(s2, s2) == 0


def test_compare_safety_rejects_mismatched_lengths():
    with pytest.raises(DomainError):
        compare_safety((1, 2), (1, 2, 3))


def test_concat_single_edge_from_empty_path():
    p = concat(SearchPath.start(0, 5), Edge(0, 1, 3, 4))
    assert p.length == 3 and s_distance(p, 4) == 3 and p.vertices == (0, 1)


def test_concat_accumulates_same_level(g):
    p = path_from_vertices(g, (V["s"], V["a"]))
    assert s_distance(p, 4) == 1
    q = concat(path_from_vertices(g, (V["a"], V["b"], V["c"])), g.edge(V["c"], V["b"]))
    assert q is None                       # closing a cycle is refused
    r = path_from_vertices(g, (V["s"], V["a"], V["b"], V["c"]))
    assert s_distance(r, 4) == 1 + 3


def test_concat_refuses_cycle():
    g = build_graph(3, [(0, 1, 1, 1), (1, 2, 1, 1), (0, 2, 1, 1)])
    p = path_from_vertices(g, (0, 1, 2))
    assert concat(p, g.edge(2, 0)) is None


def test_min_ess_of_examples(g):
    assert min_ess(path_from_vertices(g, P1)) == 4
    assert min_ess(path_from_vertices(g, P2)) == 1
    single = concat(SearchPath.start(0, 5), Edge(0, 1, 2, 3))
    assert min_ess(single) == 3


def test_min_ess_of_empty_path_raises():
    with pytest.raises(DomainError):
        min_ess(SearchPath.start(0, 3))


def test_signature_helpers():
    assert add_to_signature((0, 0, 0), 2, 5) == (0, 5, 0)
    assert signature_sum((1, 2), (3, 4)) == (4, 6)
    with pytest.raises(DomainError):
        signature_sum((1,), (1, 2))


# -- graph invariants ---------------------------------------------------

@pytest.mark.parametrize("edges, pois, s_max", [
    ([(0, 5, 1, 1)], (), None),            # unknown endpoint
    ([(0, 1, 0, 1)], (), None),            # zero length
    ([(0, 1, 1, 0)], (), None),            # ESS below 1
    ([(0, 1, 1, 4)], (), 3),               # ESS above s_max
    ([(0, 0, 1, 1)], (), None),            # self-loop
    ([(0, 1, 1, 1), (1, 0, 2, 1)], (), None),   # duplicate pair
    ([(0, 1, 1, 1)], (7,), None),          # POI not a vertex
])
def test_graph_invariants_rejected(edges, pois, s_max):
    with pytest.raises(DomainError):
        build_graph(3, edges, pois, s_max=s_max)


def test_non_integer_length_rejected():
    with pytest.raises(DomainError):
        RoadGraph(2, [Edge(0, 1, 1.5, 1)])


def test_edges_are_canonical_and_undirected():
    g = build_graph(3, [(2, 0, 4, 1)])
    e = g.edge(0, 2)
    assert (e.u, e.v) == (0, 2)
    assert g.edge(2, 0) is e
    assert g.neighbors(0) == ((2, 4, 1),) and g.neighbors(2) == ((0, 4, 1),)


def test_copy_on_write_updates(g):
    h = g.with_edge(V["a"], V["d"], 2, 3)
    assert h.has_edge(V["a"], V["d"]) and not g.has_edge(V["a"], V["d"])
    assert h.without_edge(V["a"], V["d"]) == g
    assert g.with_ess(V["s"], V["a"], 1).edge(V["s"], V["a"]).ess == 1
    assert V["a"] in g.with_poi(V["a"]).pois
    assert V["p1"] not in g.without_poi(V["p1"]).pois
    with pytest.raises(DomainError):
        g.with_edge(V["s"], V["a"], 1, 1)
    with pytest.raises(DomainError):
        g.without_edge(V["s"], V["p1"])
    with pytest.raises(DomainError):
        g.with_poi(V["p1"])


def test_apply_change_dispatch(g):
    h = apply_change(g, EdgeChange("ess", V["s"], V["a"], ess=2))
    assert h.edge(V["s"], V["a"]).ess == 2
    h = apply_change(g, PoiChange("add", V["c"]))
    assert V["c"] in h.pois
    with pytest.raises(DomainError):
        apply_change(g, EdgeChange("add", V["a"], V["d"]))
    with pytest.raises(DomainError):
        apply_change(g, EdgeChange("bogus", V["a"], V["d"]))


def test_content_hash_and_pickle(g):
    h = pickle.loads(pickle.dumps(g))
    assert h == g and h.content_hash() == g.content_hash()
    assert g.with_ess(V["s"], V["a"], 1).content_hash() != g.content_hash()


def test_path_from_vertices_rejects_non_simple(g):
    with pytest.raises(DomainError):
        path_from_vertices(g, (V["s"], V["a"], V["s"]))
    with pytest.raises(DomainError):
        path_from_vertices(g, ())
