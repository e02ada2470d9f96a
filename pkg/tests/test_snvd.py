"""Safety-score network Voronoi diagram: construction, search and updates."""

from __future__ import annotations

import heapq
import itertools
import math
import random
from fractions import Fraction

import pytest

from helpers import (V, build_graph, example_graph, random_change, random_graph,
                     random_instance, unconstrained_best)
from ksnn.graph import DomainError, PoiChange
from ksnn.ine import ine_ksnn
from ksnn.oracle import brute_ksnn
from ksnn.query import QuerySpec
from ksnn.snvd import (SCALE, SNVD, admit_constrained, build_snvd, deciding_level, decode,
                       encode, next_usn, snvd_ksnn, split_position, update_snvd)

INF = math.inf


def two_cells(extra_level1_on_j: bool = False, edge_ess: int = 1, side_ess: int = 3):
    """p_i=0 - x=1 - y=2 - p_j=3, optionally with a detour of ESS 1 on j's side."""
    if not extra_level1_on_j:
        edges = [(0, 1, 1, side_ess), (1, 2, 4, edge_ess), (2, 3, 1, side_ess)]
        return build_graph(4, edges, pois=[0, 3], s_max=3)
    edges = [(0, 1, 1, 3), (1, 2, 4, 1), (2, 4, 2, 1), (4, 3, 1, 3)]
    return build_graph(5, edges, pois=[0, 3], s_max=3)


def three_cell_chain():
    """POIs 0, 3, 6 on a path; vertices 1 and 5 tie between two generators."""
    edges = [(0, 1, 4, 1), (1, 2, 2, 1), (2, 3, 2, 1), (3, 4, 2, 1), (4, 5, 2, 1),
             (5, 6, 4, 1)]
    return build_graph(7, edges, pois=[0, 3, 6], s_max=1)


def reference_locator(g):
    """Per vertex, argmin over POIs of (signature, length, poi) by per-POI search."""
    best = [None] * g.num_vertices
    for p in sorted(g.pois):
        dist = {p: ((0,) * g.s_max, 0)}
        heap = [((0,) * g.s_max, 0, p)]
        while heap:
            sig, length, v = heapq.heappop(heap)
            if (sig, length) > dist[v]:
                continue
            for e in g.edges():
                if v not in (e.u, e.v):
                    continue
                w = e.v if e.u == v else e.u
                nsig = tuple(x + (e.length if i == e.ess - 1 else 0) for i, x in enumerate(sig))
                key = (nsig, length + e.length)
                if w not in dist or key < dist[w]:
                    dist[w] = key
                    heapq.heappush(heap, (*key, w))
        for v, (sig, length) in dist.items():
            cand = (sig, length, p)
            if best[v] is None or cand < best[v]:
                best[v] = cand
    return [b[2] if b else None for b in best]


# -- signatures and border placement -------------------------------------

def test_packed_signatures_round_trip_and_order():
    rng = random.Random(0)
    for _ in range(500):
        s_max = rng.randint(1, 6)
        a = tuple(rng.randint(0, 50) for _ in range(s_max))
        b = tuple(rng.randint(0, 50) for _ in range(s_max))
        assert decode(encode(a), s_max) == a
        assert (encode(a) < encode(b)) == (a < b)
        assert decode(encode(a) + encode(b), s_max) == tuple(x + y for x, y in zip(a, b))


def test_split_midpoint_when_levels_balance():
    sig = (0, 0, 1)
    assert deciding_level(sig, sig, 1) == 1
    assert split_position(sig, sig, 4, 1) == 2
    sv = build_snvd(two_cells())
    assert sv.split_info == [(1, 2, SCALE * 2)]
    b = sv.n
    assert sv.labels[b] == frozenset({0, 3})
    assert sv.locator[1] == 0 and sv.locator[2] == 3


def test_split_off_centre_with_extra_level1_edge():
    g = two_cells(extra_level1_on_j=True)
    sv = build_snvd(g)
    assert sv.locator[2] == 3
    assert split_position((0, 0, 1), (2, 0, 1), 4, 1) == 3
    assert sv.split_info == [(1, 2, SCALE * 3)]
    assert sv.border_balance_violations() == []


def test_deciding_level_above_minimum_ess():
    sig = (1, 0, 0)
    assert deciding_level(sig, sig, 2) == 2
    g = two_cells(edge_ess=2, side_ess=1)
    sv = build_snvd(g)
    assert sv.split_info == [(1, 2, SCALE * 2)]
    assert split_position((1, 0, 0), (1, 0, 0), 4, 2) == Fraction(2)


def test_deciding_level_rejects_unbalanced_lower_levels():
    with pytest.raises(DomainError):
        deciding_level((1, 0, 0), (2, 0, 0), 2)


def test_equal_signature_vertex_becomes_border():
    sv = build_snvd(three_cell_chain())
    assert sv.split_info == []
    assert sv.labels[1] == frozenset({0, 3}) and sv.labels[5] == frozenset({3, 6})
    cell = sv.cells[3]
    assert cell.borders == frozenset({1, 5})
    assert cell.adjacent == frozenset({0, 6})
    assert cell.min_border[1] == SCALE * 8 and cell.min_poi[1] == SCALE * 4


def test_single_poi_gives_one_cell_without_borders():
    g = build_graph(4, [(0, 1, 1, 1), (1, 2, 2, 2), (2, 3, 1, 1)], pois=[2], s_max=2)
    sv = build_snvd(g)
    assert list(sv.cells) == [2]
    assert sv.borders == frozenset()
    assert sv.locator == [2, 2, 2, 2]


def test_no_poi_rejected():
    with pytest.raises(DomainError):
        build_snvd(build_graph(2, [(0, 1, 1, 1)]))


@pytest.mark.parametrize("seed", range(60))
def test_construction_invariants(seed):
    g = random_graph(random.Random(seed), n_max=30, m_max=55, s_max_max=5)
    sv = build_snvd(g)
    assert sv.border_balance_violations() == []
    expected = reference_locator(g)
    assert sv.locator[:g.num_vertices] == expected
    covered = [0] * sv.overlay_n
    for p, cell in sv.cells.items():
        for v in cell.members:
            covered[v] += 1
            assert p in sv.labels[v]
        assert cell.borders == frozenset(v for v in cell.members if len(sv.labels[v]) > 1)
    for v in range(sv.overlay_n):
        if sv.locator[v] is None:
            assert covered[v] == 0 and v < g.num_vertices
        elif len(sv.labels[v]) == 1:
            assert covered[v] == 1
        else:
            assert covered[v] == len(sv.labels[v])


# -- candidate generation -------------------------------------------------

@pytest.mark.parametrize("seed", range(80))
def test_usn_order_matches_unconstrained_oracle(seed):
    rng = random.Random(seed)
    g = random_graph(rng, n_max=10, m_max=16, s_max_max=4)
    sv = build_snvd(g)
    source = rng.randrange(g.num_vertices)
    best = unconstrained_best(g, source)
    expected = sorted((sig, length, p) for p, (sig, length, _) in best.items())
    got = [(tuple(x // SCALE for x in sig), length // SCALE, p)
           for p, sig, length, _ in next_usn(sv, source)]
    assert got == expected
    if expected:
        assert got[0][2] == sv.locator[source]


@pytest.mark.parametrize("seed", range(80))
def test_safest_path_stays_in_safer_cells(seed):
    rng = random.Random(seed)
    g = random_graph(rng, n_max=10, m_max=16, s_max_max=4)
    sv = build_snvd(g)
    source = rng.randrange(g.num_vertices)
    best = unconstrained_best(g, source)
    ranked = sorted((sig, length, p) for p, (sig, length, _) in best.items())
    for j, (sig, length, p) in enumerate(ranked):
        allowed = {q for s2, l2, q in ranked if s2 <= sig}
        for v in best[p][2]:
            assert sv.labels[v] & allowed, (p, v)
        if j == 1 and len(sv.labels[source]) == 1 and ranked[0][0] < sig:
            # The runner-up lies in a cell adjacent to the query's own cell.
            assert p in sv.cells[sv.locator[source]].adjacent


# -- constrained search ---------------------------------------------------

def test_admit_constrained_rules_5_and_6():
    sv = build_snvd(three_cell_chain())
    d_sh = [INF] * sv.overlay_n
    zero = (0,)
    args = dict(sig=zero, length=0, tail=1, nxt=2, edge_len=SCALE * 2, edge_ess=1,
                d_sh=d_sh, snvd=sv, s_k=None)
    # Cell 3 is not a target: entering it pays only if another border is in reach.
    assert admit_constrained(targets=set(), d_c=SCALE * 8, **args) is False
    assert admit_constrained(targets=set(), d_c=SCALE * 8 + 1, **args) is True
    assert admit_constrained(targets=set(), d_c=SCALE * 8, rules=(1, 2), **args) is True
    # Cell 3 is a target: its POI must also be out of reach.
    assert admit_constrained(targets={3}, d_c=SCALE * 4 + 1, **args) is True
    assert admit_constrained(targets={3}, d_c=SCALE * 4, rules=(6,), **args) is False
    assert admit_constrained(targets={3}, d_c=SCALE * 4, rules=(5,), **args) is True


def test_admit_constrained_rule_7_is_strict():
    sv = build_snvd(three_cell_chain())
    d_sh = [INF] * sv.overlay_n
    args = dict(sig=(2,), length=2, tail=2, nxt=3, edge_len=4, edge_ess=1, targets={3},
                d_c=100, d_sh=d_sh, snvd=sv)
    assert admit_constrained(s_k=(6,), **args) is True
    assert admit_constrained(s_k=(5,), **args) is False
    assert admit_constrained(s_k=(5,), rules=(1, 2), **args) is True


def test_admit_constrained_rules_1_and_2():
    sv = build_snvd(three_cell_chain())
    d_sh = [INF] * sv.overlay_n
    d_sh[3] = 6
    args = dict(sig=(2,), length=2, tail=2, nxt=3, edge_len=4, edge_ess=1, targets={3},
                d_sh=d_sh, snvd=sv, s_k=None)
    assert admit_constrained(d_c=6, **args) is False
    assert admit_constrained(d_c=7, **args) is False       # 6 >= D_sh[3]
    d_sh[3] = 7
    assert admit_constrained(d_c=7, **args) is True


def test_example_1snn_matches_ine():
    g = example_graph()
    q = QuerySpec(V["s"], 1, 10)
    assert snvd_ksnn(build_snvd(g), g, q) == ine_ksnn(g, q)


def test_unconstrained_regime_needs_no_constrained_search():
    rng = random.Random(5)
    for _ in range(30):
        g = random_graph(rng, n_max=15, m_max=25)
        sv = build_snvd(g)
        s = rng.randrange(g.num_vertices)
        if sv.locator[s] is None:
            continue
        ans = snvd_ksnn(sv, g, QuerySpec(s, 1, g.total_length() + 2))
        assert ans.pois == [sv.locator[s]]
        assert ans.stats.extra["find_a"] == 0


@pytest.mark.parametrize("seed", range(200))
def test_matches_oracle(seed):
    g, s, d_c = random_instance(seed)
    sv = build_snvd(g)
    for k in (1, 3, 5):
        q = QuerySpec(s, k, d_c)
        assert snvd_ksnn(sv, g, q) == brute_ksnn(g, q)


RULE_SUBSETS = [c for r in range(6) for c in itertools.combinations((1, 2, 5, 6, 7), r)]


@pytest.mark.parametrize("seed", range(40))
def test_every_rule_subset_agrees(seed):
    g, s, d_c = random_instance(seed)
    sv = build_snvd(g)
    q = QuerySpec(s, 3, d_c)
    expected = brute_ksnn(g, q)
    counts = {}
    for rules in RULE_SUBSETS:
        ans = snvd_ksnn(sv, g, q, rules=rules)
        assert ans == expected, rules
        counts[rules] = ans.stats.valid_paths_explored
    assert counts[(1, 2, 5, 6, 7)] <= counts[(1,)]


def test_stale_diagram_rejected():
    g = example_graph()
    sv = build_snvd(g)
    with pytest.raises(DomainError):
        snvd_ksnn(sv, g.with_ess(V["s"], V["a"], 1), QuerySpec(V["s"], 1, 10))


# -- updates --------------------------------------------------------------

def test_generator_removal_merges_cells():
    g = three_cell_chain()
    sv = build_snvd(g)
    update_snvd(sv, PoiChange("remove", 6))
    assert set(sv.cells) == {0, 3}
    assert {4, 5, 6} <= sv.cells[3].members
    assert sv.structurally_equal(build_snvd(sv.graph))


def test_poi_addition_splits_cell():
    g = three_cell_chain()
    sv = build_snvd(g)
    before = sv.cells[3].members
    update_snvd(sv, PoiChange("add", 5))
    assert 5 in sv.cells and sv.cells[3].members < before
    assert sv.structurally_equal(build_snvd(sv.graph))


def test_removing_last_poi_rejected():
    g = build_graph(2, [(0, 1, 1, 1)], pois=[1])
    with pytest.raises(DomainError):
        build_snvd(g).update(PoiChange("remove", 1))


def run_update_sequence(seed: int, n_max: int = 30, m_max: int = 60, steps: int = 8) -> bool:
    rng = random.Random(seed)
    g = random_graph(rng, n_max=n_max, m_max=m_max, s_max_max=5)
    sv = SNVD(g)
    for _ in range(steps):
        change = random_change(rng, sv.graph)
        if change is None:
            continue
        sv.update(change)
        if not sv.structurally_equal(SNVD(sv.graph)):
            return False
    return True


@pytest.mark.parametrize("seed", range(100))
def test_random_update_sequences_equal_rebuild(seed):
    assert run_update_sequence(seed)
