"""Safety-score network Voronoi diagram (SNVD) and its kSNN search.

Every vertex is assigned to the POI(s) reachable along its unconstrained
safest path, i.e. the path with the lexicographically smallest signature when
the distance budget is ignored.  Cells meet at *border* vertices.  A border
is either a vertex with several equally safe generators, or a point placed
on an edge whose endpoints belong to different cells.  The point sits where
the two sides' signatures balance at the edge's own ESS level.

Construction details:

* All edge lengths are doubled before anything else.  A split point then
  always lies at an integer offset of at least 1, so split vertices can be
  added to an *overlay* graph without another rescaling pass.  Query budgets
  are doubled on the way in and answer lengths halved on the way out.
* Each cell stores, for each of its borders, the in-cell safest path to the
  generator and to every other border.  It also stores in-cell shortest
  distances to the nearest other border (``min_border``) and to the nearest
  POI (``min_poi``).

Query:

1. Unconstrained safest neighbours (USNs) are produced in order by a
   label-setting search over the border graph.  The seeds are the query
   vertex's in-cell paths.  A border's cells are expanded when that border
   is settled.
2. Candidates are drawn until ``k`` of them have an unconstrained safest
   path that is already valid (shorter than ``d_c``).  A valid unconstrained
   path is also the constrained answer.
3. The remaining candidates are searched for together by one constrained
   search on the overlay (FindA), with pruning rules:

   * Rule 5: do not enter a cell interior from a border when the cell's
     generator is not a pending target and no other border is within reach.
   * Rule 6: as Rule 5 for the cell of a pending target, when every POI of
     the cell is also out of reach.
   * Rule 7: drop paths strictly less safe than the current k-th best.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Collection, Iterator, NamedTuple

from .dijkstra import multi_source_distances
from .graph import (DomainError, EdgeChange, PoiChange, RoadGraph, Signature,
                    apply_change, empty_signature)
from .query import (Answer, AnswerEntry, QuerySpec, SearchBudgetExceeded, SearchStats,
                    make_entry, rank_entries, resolve_rules)

SNVD_RULES = (1, 2, 5, 6, 7)
SCALE = 2
INF = math.inf


class Arc(NamedTuple):
    """A precomputed in-cell safest path; ``seq`` omits the start vertex.

    ``direct`` is true when no border lies strictly inside the path.  An
    indirect arc is the concatenation of direct ones through the borders it
    passes, so the candidate search only needs the direct arcs.
    """

    sig: Signature
    length: int
    seq: tuple[int, ...]
    direct: bool = True
    code: int = 0


class SegTrail:
    """Linked list of path segments over original (non-split) vertices."""

    __slots__ = ("prev", "seg")

    def __init__(self, prev: "SegTrail | None", seg: tuple[int, ...]) -> None:
        self.prev = prev
        self.seg = seg

    def vertices(self) -> tuple[int, ...]:
        parts = []
        t: SegTrail | None = self
        while t is not None:
            parts.append(t.seg)
            t = t.prev
        out: tuple[int, ...] = ()
        for p in reversed(parts):
            out += p
        return out

    def contains(self, v: int) -> bool:
        t: SegTrail | None = self
        while t is not None:
            if v in t.seg:
                return True
            t = t.prev
        return False

    def __lt__(self, other: "SegTrail") -> bool:
        return self.vertices() < other.vertices()


# Signatures are also packed into one integer with a fixed-width field per
# level, most significant first.  Integer order is then lexicographic order
# and signature addition is integer addition, as long as no level overflows.
FIELD_BITS = 64


def encode(sig: Signature) -> int:
    code = 0
    for x in sig:
        code = (code << FIELD_BITS) | x
    return code


def decode(code: int, s_max: int) -> Signature:
    mask = (1 << FIELD_BITS) - 1
    return tuple((code >> (FIELD_BITS * (s_max - 1 - i))) & mask for i in range(s_max))


def _bump(sig: Signature, ess: int, length: int) -> Signature:
    i = ess - 1
    return sig[:i] + (sig[i] + length,) + sig[i + 1:]


def deciding_level(sig_i: Signature, sig_j: Signature, edge_ess: int) -> int:
    """Level at which a border on an edge between two cells is balanced.

    ``sig_i`` and ``sig_j`` are the unconstrained signatures at the edge's
    endpoints.  Levels below the edge's ESS cannot be changed by moving a
    point along the edge, so they must already agree.  The deciding level is
    then the edge's own ESS.  Equal endpoint signatures are the symmetric case
    and balance at the midpoint.
    """
    if len(sig_i) != len(sig_j):
        raise DomainError("signatures have different s_max")
    for level in range(1, edge_ess):
        if sig_i[level - 1] != sig_j[level - 1]:
            raise DomainError(f"signatures differ at level {level} below the edge ESS "
                              f"{edge_ess}; no point on the edge balances them")
    return edge_ess


def split_position(sig_i: Signature, sig_j: Signature, length: int, edge_ess: int) -> Fraction:
    """Offset from the ``i`` endpoint of the balancing point, in input units."""
    level = deciding_level(sig_i, sig_j, edge_ess)
    return Fraction(length + sig_j[level - 1] - sig_i[level - 1], 2)


@dataclass
class VoronoiCell:
    generator: int
    members: frozenset[int]
    borders: frozenset[int]
    adjacent: frozenset[int]
    border_to_gen: dict[int, Arc]
    border_to_border: dict[int, dict[int, Arc]]
    min_border: dict[int, float]
    min_poi: dict[int, float]

    def __post_init__(self) -> None:
        # Per border, the direct arcs leaving it (to borders and generator).
        direct: dict[int, list[tuple[int, Arc]]] = {}
        for b, row in self.border_to_border.items():
            direct[b] = [(c, a) for c, a in row.items() if a.direct]
        for b, a in self.border_to_gen.items():
            if a.direct and b != self.generator:
                direct.setdefault(b, []).append((self.generator, a))
        self.direct_arcs = direct


class SNVD:
    """Safety-score network Voronoi diagram over a road network."""

    def __init__(self, graph: RoadGraph) -> None:
        if not graph.pois:
            raise DomainError("an SNVD needs at least one POI")
        self.cells: dict[int, VoronoiCell] = {}
        self._install(graph, previous=None)

    # -- construction ---------------------------------------------------
    def _install(self, graph: RoadGraph, previous: "SNVD | None") -> None:
        self.graph = graph
        self.scale = SCALE
        self.n = n = graph.num_vertices
        self.s_max = graph.s_max
        base = [[(w, SCALE * length, s) for w, length, s in nbrs] for nbrs in graph.adjacency]
        total = SCALE * sum(e.length for e in graph.edges())
        if (total * (2 * n + 1)).bit_length() >= FIELD_BITS:
            raise DomainError("total edge length too large for packed signatures")
        best, gens = self._label(graph, base)
        self.best = best

        # Edge splits and endpoint borders.
        labels: list[set[int]] = [set(g) for g in gens]
        splits: list[tuple[int, int, int, int, int]] = []     # (x, y, a, L, ess)
        for e in graph.edges():
            x, y = e.u, e.v
            if not gens[x] or set(gens[x]) & set(gens[y]):
                continue
            big = SCALE * e.length
            a = self._split_offset(best[x][0], best[y][0], big, e.ess)
            if a == 0:
                labels[x] |= set(gens[y])
            elif a == big:
                labels[y] |= set(gens[x])
            else:
                splits.append((x, y, a, big, e.ess))

        adj = [list(nbrs) for nbrs in base]
        self.split_info: list[tuple[int, int, int]] = []
        for x, y, a, big, s in splits:
            b = n + len(self.split_info)
            self.split_info.append((x, y, a))
            adj[x] = [(w, L, t) if w != y else (b, a, s) for w, L, t in adj[x]]
            adj[y] = [(w, L, t) if w != x else (b, big - a, s) for w, L, t in adj[y]]
            adj.append([(x, a, s), (y, big - a, s)])
            labels.append(set(gens[x]) | set(gens[y]))
        self.overlay_n = len(adj)
        self.adj = tuple(tuple(sorted(nbrs)) for nbrs in adj)
        self.labels: list[frozenset[int]] = [frozenset(l) for l in labels]

        # Locator: the safest generator, ties by length then generator id.
        self.locator: list[int | None] = []
        for v in range(n):
            self.locator.append(min(gens[v].items(), key=lambda kv: (kv[1][0], kv[1][1], kv[0]))[0]
                                if gens[v] else None)
        for x, y, a, big, s in splits:
            opts = []
            for end, off in ((x, a), (y, big - a)):
                for g, (sig, length) in gens[end].items():
                    opts.append((_bump(sig, s, off), length + off, g))
            self.locator.append(min(opts)[2])

        members: dict[int, set[int]] = {p: set() for p in graph.pois}
        for v, lab in enumerate(self.labels):
            for p in lab:
                members[p].add(v)
        old = previous.cells if previous is not None else {}
        old_keys = previous._cell_keys() if previous is not None else {}
        remap = self._remap_from(previous) if previous is not None else None
        new_keys = self._cell_keys(members)
        self.cells = {}
        self.recomputed: list[int] = []
        for p in sorted(members):
            if p in old and old_keys.get(p) == new_keys[p] and remap is not None:
                self.cells[p] = self._remapped_cell(old[p], remap, frozenset(members[p]))
            else:
                self.cells[p] = self._make_cell(p, frozenset(members[p]))
                self.recomputed.append(p)
        self.graph_hash = graph.content_hash()

    @staticmethod
    def _label(graph: RoadGraph, adj) -> tuple[list, list[dict[int, tuple[Signature, int]]]]:
        """Multi-source safest-path labelling from all POIs.

        Returns the best ``(signature, length)`` per vertex, plus for each
        vertex the generators that reach it with that minimum signature.  The
        length stored for each generator is the shortest among its safest
        paths.
        """
        n = graph.num_vertices
        zero = empty_signature(graph.s_max)
        best: list = [None] * n
        heap = [(zero, 0, p) for p in graph.pois]
        heapq.heapify(heap)
        order = []
        while heap:
            sig, length, v = heapq.heappop(heap)
            if best[v] is not None:
                continue
            best[v] = (sig, length)
            order.append(v)
            for w, L, s in adj[v]:
                if best[w] is None:
                    heapq.heappush(heap, (_bump(sig, s, L), length + L, w))
        gens: list[dict[int, tuple[Signature, int]]] = [{} for _ in range(n)]
        for v in order:
            sig_v = best[v][0]
            if v in graph.pois:
                gens[v] = {v: (sig_v, 0)}
                continue
            acc: dict[int, tuple[Signature, int]] = {}
            for u, L, s in adj[v]:
                if best[u] is None or _bump(best[u][0], s, L) != sig_v:
                    continue
                for g, (_, lu) in gens[u].items():
                    if g not in acc or lu + L < acc[g][1]:
                        acc[g] = (sig_v, lu + L)
            gens[v] = acc
        return best, gens

    @staticmethod
    def _split_offset(sig_x: Signature, sig_y: Signature, big: int, ess: int) -> int:
        level = deciding_level(sig_x, sig_y, ess)
        twice = big + sig_y[level - 1] - sig_x[level - 1]
        if twice % 2 or not 0 <= twice // 2 <= big:
            raise AssertionError("split point outside the edge; labelling is inconsistent")
        return twice // 2

    def _cell_keys(self, members: dict[int, set[int]] | None = None) -> dict[int, tuple]:
        """Id-independent description of each cell's subgraph."""
        if members is None:
            members = {p: c.members for p, c in self.cells.items()}
        out = {}
        ck = self.canonical_vertex
        for p, mem in members.items():
            edges = []
            for v in mem:
                for w, L, s in self.adj[v]:
                    if w in mem:
                        edges.append((ck(v), ck(w), L, s))
            out[p] = (
                frozenset(ck(v) for v in mem),
                frozenset(ck(v) for v in mem if len(self.labels[v]) > 1),
                frozenset(edges),
                frozenset(ck(v) for v in mem if v < self.n and v in self.graph.pois),
            )
        return out

    def canonical_vertex(self, v: int):
        if v < self.n:
            return v
        x, y, a = self.split_info[v - self.n]
        return ("split", x, y, a)

    def _remap_from(self, previous: "SNVD") -> dict[int, int]:
        index = {self.canonical_vertex(v): v for v in range(self.overlay_n)}
        out = {}
        for v in range(previous.overlay_n):
            w = index.get(previous.canonical_vertex(v))
            if w is not None:
                out[v] = w
        return out

    def _remapped_cell(self, cell: VoronoiCell, m: dict[int, int],
                       members: frozenset[int]) -> VoronoiCell:
        return VoronoiCell(
            generator=cell.generator,
            members=members,
            borders=frozenset(m[b] for b in cell.borders),
            adjacent=self._adjacent(cell.generator, frozenset(m[b] for b in cell.borders)),
            border_to_gen={m[b]: a for b, a in cell.border_to_gen.items()},
            border_to_border={m[b]: {m[c]: a for c, a in row.items()}
                              for b, row in cell.border_to_border.items()},
            min_border={m[b]: d for b, d in cell.min_border.items()},
            min_poi={m[b]: d for b, d in cell.min_poi.items()},
        )

    def _adjacent(self, p: int, borders: frozenset[int]) -> frozenset[int]:
        out: set[int] = set()
        for b in borders:
            out |= self.labels[b]
        out.discard(p)
        return frozenset(out)

    def _make_cell(self, p: int, members: frozenset[int]) -> VoronoiCell:
        borders = frozenset(v for v in members if len(self.labels[v]) > 1)
        to_gen: dict[int, Arc] = {}
        to_border: dict[int, dict[int, Arc]] = {}
        for b in sorted(borders):
            reach = self._cell_search(b, p, None)
            row = {}
            for c in borders:
                if c != b and c in reach:
                    row[c] = reach[c]
            to_border[b] = row
            if p in reach:
                to_gen[b] = reach[p]
        in_cell = lambda v, p=p: p in self.labels[v]
        min_border: dict[int, float] = {}
        if borders:
            min_border = self._nearest_other(borders, in_cell)
        pois_in = [v for v in members if v < self.n and v in self.graph.pois]
        dist = multi_source_distances(self.adj, pois_in, vertex_ok=in_cell)
        min_poi = {b: dist.get(b, INF) for b in borders}
        return VoronoiCell(p, members, borders, self._adjacent(p, borders),
                           to_gen, to_border, min_border, min_poi)

    def _nearest_other(self, borders: frozenset[int], in_cell) -> dict[int, float]:
        """In-cell distance from each border to the closest other border."""
        dist: dict[int, int] = {}
        label: dict[int, int] = {}
        heap = [(0, b, b) for b in borders]
        heapq.heapify(heap)
        while heap:
            d, v, src = heapq.heappop(heap)
            if v in dist:
                continue
            dist[v] = d
            label[v] = src
            for w, L, _ in self.adj[v]:
                if w not in dist and in_cell(w):
                    heapq.heappush(heap, (d + L, w, src))
        best = {b: INF for b in borders}
        for x, dx in dist.items():
            for y, L, _ in self.adj[x]:
                if y in label and label[y] != label[x]:
                    cand = dx + L + dist[y]
                    if cand < best[label[x]]:
                        best[label[x]] = cand
        return best

    def _cell_search(self, start: int, p: int, stats: SearchStats | None = None,
                     d_c: float = INF) -> dict[int, Arc]:
        """In-cell label-setting safest-path search from ``start``.

        Returns an :class:`Arc` for every reachable member of cell ``p``; ties
        on signature are broken by length, then by vertex sequence.  When
        ``stats`` is given, pushed paths shorter than ``d_c`` are counted.
        """
        n = self.n
        labels = self.labels
        root = SegTrail(None, (start,) if start < n else ())
        heap = [(empty_signature(self.s_max), 0, start, root, False)]
        done: dict[int, Arc] = {}
        while heap:
            sig, length, v, trail, via = heapq.heappop(heap)
            if v in done:
                continue
            seq = trail.vertices()
            done[v] = Arc(sig, length, seq[1:] if start < n else seq, not via, encode(sig))
            via = via or (v != start and len(labels[v]) > 1)
            for w, L, s in self.adj[v]:
                if w in done or p not in labels[w]:
                    continue
                if stats is not None and length + L < d_c:
                    stats.valid_paths_explored += 1
                heapq.heappush(heap, (_bump(sig, s, L), length + L, w,
                                      SegTrail(trail, (w,)) if w < n else trail, via))
        return done

    # -- inspection -----------------------------------------------------
    @property
    def borders(self) -> frozenset[int]:
        return frozenset(v for v in range(self.overlay_n) if len(self.labels[v]) > 1)

    def border_fraction(self) -> float:
        """Borders (including split points) per original vertex."""
        return len(self.borders) / max(1, self.n)

    def canonical(self) -> tuple:
        """Id-independent description used to compare diagrams."""
        ck = self.canonical_vertex

        def arc(a: Arc):
            return (a.sig, a.length, a.seq, a.direct)

        cells = []
        for p in sorted(self.cells):
            c = self.cells[p]
            cells.append((
                p,
                frozenset(ck(v) for v in c.members),
                frozenset(ck(v) for v in c.borders),
                c.adjacent,
                frozenset((ck(b), arc(a)) for b, a in c.border_to_gen.items()),
                frozenset((ck(b), ck(d), arc(a)) for b, row in c.border_to_border.items()
                          for d, a in row.items()),
                frozenset((ck(b), d) for b, d in c.min_border.items()),
                frozenset((ck(b), d) for b, d in c.min_poi.items()),
            ))
        locs = frozenset((ck(v), self.locator[v]) for v in range(self.overlay_n))
        return (self.scale, self.overlay_n, locs, tuple(cells))

    def structurally_equal(self, other: "SNVD") -> bool:
        return self.canonical() == other.canonical()

    def border_balance_violations(self) -> list[tuple]:
        """Split borders whose two sides do not agree up to the deciding level."""
        bad = []
        for i, (x, y, a) in enumerate(self.split_info):
            b = self.n + i
            piece = {w: (L, t) for w, L, t in self.adj[b]}
            (a_x, s), (a_y, _) = piece[x], piece[y]
            via_x = _bump(self.best[x][0], s, a_x)
            via_y = _bump(self.best[y][0], s, a_y)
            if via_x[:s] != via_y[:s]:
                bad.append((x, y, a, via_x, via_y))
        return bad

    # -- updates --------------------------------------------------------
    def update(self, change: EdgeChange | PoiChange) -> None:
        """Apply a graph change, recomputing only cells whose subgraph changed."""
        graph = apply_change(self.graph, change)
        if not graph.pois:
            raise DomainError("an SNVD needs at least one POI")
        prev = SNVD.__new__(SNVD)
        prev.__dict__.update(self.__dict__)
        self._install(graph, previous=prev)


def build_snvd(graph: RoadGraph) -> SNVD:
    return SNVD(graph)


def update_snvd(snvd: SNVD, change: EdgeChange | PoiChange) -> None:
    snvd.update(change)


@dataclass
class CandidateState:
    """Bookkeeping of one query's candidate generation."""

    candidates: list[tuple[int, Signature, int, SegTrail]]
    explored_cells: set[int]
    s_k: Signature | None = None


def next_usn(snvd: SNVD, source: int, stats: SearchStats | None = None,
             state: CandidateState | None = None,
             d_c: float = INF) -> Iterator[tuple[int, Signature, int, SegTrail]]:
    """Yield POIs in unconstrained-safety order from ``source``.

    Items are ``(poi, signature, length, trail)`` in overlay units, ordered
    by ``(signature, length, poi)``.  Only direct arcs are relaxed.  Pushed
    paths shorter than ``d_c`` (overlay units) count as explored valid paths.
    """
    if stats is None:
        stats = SearchStats()
    n = snvd.n
    s_max = snvd.s_max
    labels = snvd.labels
    pois = snvd.graph.pois
    settled: set[int] = set()
    tentative: dict[int, tuple[int, int]] = {}
    push = heapq.heappush
    heap = [(0, 0, source, SegTrail(None, (source,)))]
    while heap:
        code, length, u, trail = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        if u < n and u in pois:
            item = (u, decode(code, s_max), length, trail)
            if state is not None:
                state.candidates.append(item)
            yield item
        if u == source and len(labels[u]) == 1:
            (p,) = labels[u]
            arcs = snvd._cell_search(u, p, stats, d_c)
            reach = [(v, a) for v, a in arcs.items()
                     if v != u and a.direct and (v == p or len(labels[v]) > 1)]
            cells = (p,)
        elif len(labels[u]) > 1:
            reach = []
            for p in labels[u]:
                cell = snvd.cells[p]
                reach.extend(cell.direct_arcs.get(u, ()))
            cells = labels[u]
        else:
            continue
        if state is not None:
            state.explored_cells.update(cells)
        for v, arc in reach:
            if v in settled:
                continue
            key = (code + arc.code, length + arc.length)
            old = tentative.get(v)
            if old is not None and key > old:
                continue
            tentative[v] = key
            if key[1] < d_c:
                stats.valid_paths_explored += 1
            push(heap, (*key, v, SegTrail(trail, arc.seq)))


def admit_constrained(sig: Signature, length: int, tail: int, nxt: int, edge_len: int,
                      edge_ess: int, targets: Collection[int], d_c: int, d_sh: list[float],
                      snvd: SNVD, s_k: Signature | None,
                      rules: Collection[int] = SNVD_RULES) -> bool:
    """Whether extending a FindA path at ``tail`` over the edge to ``nxt`` survives.

    ``sig`` and ``length`` describe the path at ``tail``; ``targets`` are the
    candidates still being searched for.  All distances are in overlay units,
    and so is ``d_c``.
    """
    nl = length + edge_len
    if 1 in rules and nl >= d_c:
        return False
    if 2 in rules and nl >= d_sh[nxt]:
        return False
    if (5 in rules or 6 in rules) and len(snvd.labels[tail]) > 1 \
            and len(snvd.labels[nxt]) == 1:
        (p,) = snvd.labels[nxt]
        cell = snvd.cells[p]
        if length + cell.min_border[tail] >= d_c:
            if 5 in rules and p not in targets:
                return False
            if 6 in rules and p in targets and length + cell.min_poi[tail] >= d_c:
                return False
    if 7 in rules and s_k is not None and _bump(sig, edge_ess, edge_len) > s_k:
        return False
    return True


def _find_a(snvd: SNVD, source: int, targets: set[int], d_c: int, k: int,
            known: list[Signature], rules: frozenset[int], stats: SearchStats,
            touched: set[int], budget: float = INF) -> list[tuple[int, Signature, int, SegTrail]]:
    """Safest valid overlay paths from ``source`` to each of ``targets``.

    One constrained search serves all targets.  ``known`` holds the overlay
    signatures of answers found so far; with Rule 7 the k-th smallest of
    them (tightened as targets are reached) bounds the search.
    """
    rule2 = 2 in rules
    rule7 = 7 in rules
    limit = d_c if 1 in rules else INF
    n = snvd.n
    adj = snvd.adj
    remaining = set(targets)
    sigs = sorted(known)
    s_k = sigs[k - 1] if rule7 and len(sigs) >= k else None
    out = []
    pushes = 0
    d_sh: list[float] = [d_c] * snvd.overlay_n
    heap = [(empty_signature(snvd.s_max), 0, source, SegTrail(None, (source,)))]
    while heap and remaining:
        sig, length, tail, trail = heapq.heappop(heap)
        if s_k is not None and sig > s_k:
            break
        if rule2:
            if length >= d_sh[tail]:
                continue
            d_sh[tail] = length
        if tail in remaining and length < d_c:
            remaining.discard(tail)
            out.append((tail, sig, length, trail))
            if rule7:
                heapq.heappush(sigs, sig)
                if len(sigs) >= k:
                    s_k = heapq.nsmallest(k, sigs)[-1]
        for nxt, w, s in adj[tail]:
            nl = length + w
            if nl >= limit:
                continue
            if not admit_constrained(sig, length, tail, nxt, w, s, remaining, d_c, d_sh,
                                     snvd, s_k, rules):
                continue
            if not rule2 and nxt < n and trail.contains(nxt):
                continue
            if nxt < n:
                touched.add(nxt)
            if nl < d_c:
                stats.valid_paths_explored += 1
            pushes += 1
            if pushes > budget:
                raise SearchBudgetExceeded(int(budget))
            heapq.heappush(heap, (_bump(sig, s, w), nl, nxt,
                                  SegTrail(trail, (nxt,)) if nxt < n else trail))
    return out


def _entry(poi: int, sig: Signature, length: int, trail: SegTrail, d_c: int) -> AnswerEntry:
    return make_entry(poi, trail.vertices(), length // SCALE,
                      tuple(x // SCALE for x in sig), d_c)


def snvd_ksnn(snvd: SNVD, graph: RoadGraph, q: QuerySpec,
              rules: Collection[int] | None = None, max_paths: int | None = None) -> Answer:
    """Answer a kSNN query with the SNVD (``max_paths`` bounds the FindA search)."""
    q.validate(graph)
    if graph.content_hash() != snvd.graph_hash:
        raise DomainError("SNVD was built for a different graph")
    rules = resolve_rules(rules, SNVD_RULES)
    stats = SearchStats()
    k = q.k
    d_c = SCALE * q.d_c
    if snvd.locator[q.source] is None:
        stats.vertices_accessed = 1
        return Answer((), stats)

    state = CandidateState([], set())
    valid: list[AnswerEntry] = []
    valid_sigs: list[Signature] = []
    pending: list[tuple[int, Signature]] = []
    for poi, sig, length, trail in next_usn(snvd, q.source, stats, state, d_c):
        if length < d_c:
            valid.append(_entry(poi, sig, length, trail, q.d_c))
            valid_sigs.append(sig)
            if len(valid) >= k:
                break
        else:
            pending.append((poi, sig))
    usn_work = stats.valid_paths_explored

    results = list(valid)
    touched: set[int] = {q.source}
    for entry in valid:
        touched.update(entry.path)

    # A candidate whose unconstrained signature is already worse than the
    # k-th valid one cannot be in the answer: constraints only lower safety.
    s_k = sorted(valid_sigs)[k - 1] if 7 in rules and len(valid_sigs) >= k else None
    targets = {poi for poi, usig in pending if s_k is None or usig <= s_k}
    if targets:
        for poi, sig, length, trail in _find_a(snvd, q.source, targets, d_c, k, valid_sigs,
                                                rules, stats, touched,
                                                INF if max_paths is None else max_paths):
            results.append(_entry(poi, sig, length, trail, q.d_c))

    stats.vertices_accessed = len(touched)
    stats.extra = {"candidates": len(state.candidates), "find_a": len(targets),
                   "usn_paths": usn_work, "cells_explored": len(state.explored_cells)}
    return Answer(rank_entries(results, k), stats)
