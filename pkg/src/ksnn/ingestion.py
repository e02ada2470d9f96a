"""Loading, saving, crime-based ESS assignment and synthetic graph generation.

File formats (UTF-8, ``#`` starts a comment line, blank lines ignored):

* edges: ``u<TAB>v<TAB>length<TAB>ess``.  An optional metadata line
  ``#! n=<vertices> s_max=<levels> scale=<factor>`` (written by
  :func:`save_graph`) fixes the vertex count and ESS range, and says that
  lengths are already integers scaled by ``factor``.
* POIs: one vertex id per line
* coordinates: ``v<TAB>x<TAB>y``
* crimes: CSV with header ``x,y`` (planar) or ``lat,lon`` (projected with an
  equirectangular approximation to metres)
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .graph import DomainError, Edge, KsnnError, RoadGraph

DEFAULT_FLOAT_SCALE = 1000
EARTH_RADIUS_M = 6_371_000.0


class IngestError(KsnnError, ValueError):
    """A malformed or inconsistent input record."""

    def __init__(self, path: str | Path, line: int | None, message: str) -> None:
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


def _records(path: str | Path, width: int) -> Iterable[tuple[int, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t") if "\t" in line else line.split()
            if len(fields) != width:
                raise IngestError(path, no, f"expected {width} fields, got {len(fields)}")
            yield no, fields


def _metadata(path: str | Path) -> dict[str, str]:
    meta: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line.startswith("#!"):
                for item in line[2:].split():
                    key, sep, val = item.partition("=")
                    if not sep or key not in ("n", "s_max", "scale"):
                        raise IngestError(path, no, f"bad metadata item {item!r}")
                    meta[key] = val
            elif line and not line.startswith("#"):
                break
    return meta


def _int(path, no, text, what) -> int:
    try:
        return int(text)
    except ValueError:
        raise IngestError(path, no, f"{what} {text!r} is not an integer") from None


def _float(path, no, text, what) -> float:
    try:
        val = float(text)
    except ValueError:
        raise IngestError(path, no, f"{what} {text!r} is not a number") from None
    if not math.isfinite(val):
        raise IngestError(path, no, f"{what} {text!r} is not finite")
    return val


@dataclass(frozen=True)
class _RawEdge:
    u: int
    v: int
    length: float
    ess: int
    line: int


def load_graph(edges_path: str | Path, pois_path: str | Path | None = None,
               coords_path: str | Path | None = None, *, scale: float | None = None,
               s_max: int | None = None, check_embedding: bool = True) -> RoadGraph:
    """Read and validate a road network.

    Lengths that are all integers are kept as they are.  Otherwise every
    length (and coordinate) is multiplied by ``scale`` (default 1000) and
    rounded; the factor is recorded as ``graph.length_scale``.  For parallel
    edges, the safer one wins, then the shorter.
    """
    meta = _metadata(edges_path)
    if s_max is None and "s_max" in meta:
        s_max = _int(edges_path, None, meta["s_max"], "s_max")
    raw: dict[tuple[int, int], _RawEdge] = {}
    top = _int(edges_path, None, meta["n"], "vertex count") - 1 if "n" in meta else -1
    for no, (a, b, length, ess) in _records(edges_path, 4):
        u = _int(edges_path, no, a, "vertex")
        v = _int(edges_path, no, b, "vertex")
        w = _float(edges_path, no, length, "length")
        s = _int(edges_path, no, ess, "ess")
        if u < 0 or v < 0:
            raise IngestError(edges_path, no, "vertex ids must be nonnegative")
        if u == v:
            raise IngestError(edges_path, no, f"self-loop at vertex {u}")
        if w <= 0:
            raise IngestError(edges_path, no, f"length must be positive, got {length}")
        if s < 1 or (s_max is not None and s > s_max):
            raise IngestError(edges_path, no,
                              f"ess must lie in [1, {s_max or 's_max'}], got {s}")
        key = (min(u, v), max(u, v))
        cand = _RawEdge(key[0], key[1], w, s, no)
        cur = raw.get(key)
        if cur is None or (cand.ess, -cand.length) > (cur.ess, -cur.length):
            raw[key] = cand
        top = max(top, u, v)

    pois: list[int] = []
    if pois_path is not None:
        for no, (text,) in _records(pois_path, 1):
            p = _int(pois_path, no, text, "POI")
            if p < 0:
                raise IngestError(pois_path, no, "vertex ids must be nonnegative")
            pois.append(p)
            top = max(top, p)

    coords_raw: dict[int, tuple[float, float]] = {}
    if coords_path is not None:
        for no, (a, x, y) in _records(coords_path, 3):
            v = _int(coords_path, no, a, "vertex")
            if v < 0:
                raise IngestError(coords_path, no, "vertex ids must be nonnegative")
            coords_raw[v] = (_float(coords_path, no, x, "x"), _float(coords_path, no, y, "y"))
            top = max(top, v)

    all_int = all(float(e.length).is_integer() for e in raw.values())
    factor = scale if scale is not None else (1 if all_int else DEFAULT_FLOAT_SCALE)
    recorded = factor
    if scale is None and "scale" in meta:
        # Lengths were saved already scaled: keep them, remember the factor.
        recorded = _float(edges_path, None, meta["scale"], "scale")
        if recorded.is_integer():
            recorded = int(recorded)
    edges = []
    for e in raw.values():
        length = round(e.length * factor)
        if length < 1:
            raise IngestError(edges_path, e.line,
                              f"length {e.length} scales to {length} (< 1) with factor {factor}")
        edges.append(Edge(e.u, e.v, int(length), e.ess))

    n = top + 1
    if "n" in meta and n != int(meta["n"]):
        raise IngestError(edges_path, None,
                          f"vertex id {top} exceeds the declared vertex count {meta['n']}")
    coords = None
    if coords_path is not None:
        missing = [v for v in range(n) if v not in coords_raw]
        if missing:
            raise IngestError(coords_path, None, f"no coordinates for vertices {missing[:5]}")
        coords = {v: (x * factor, y * factor) for v, (x, y) in coords_raw.items()}
    try:
        graph = RoadGraph(n, edges, pois, s_max=s_max, coords=coords, length_scale=recorded)
    except DomainError as exc:
        raise IngestError(edges_path, None, str(exc)) from None
    if coords is not None and check_embedding:
        validate_embedding(graph)
    return graph


def validate_embedding(graph: RoadGraph) -> None:
    """Reject coordinates whose straight-line distances exceed edge lengths."""
    if graph.coords is None:
        raise DomainError("graph has no coordinates")
    for e in graph.edges():
        d = math.dist(graph.coords[e.u], graph.coords[e.v])
        if d > e.length * (1 + 1e-9):
            raise DomainError(
                f"edge ({e.u}, {e.v}) has length {e.length} shorter than the "
                f"straight-line distance {d:.3f} between its endpoints")


def save_graph(graph: RoadGraph, edges_path: str | Path, pois_path: str | Path | None = None,
               coords_path: str | Path | None = None) -> None:
    """Write a graph in the TSV formats read by :func:`load_graph` (scaled units)."""
    with open(edges_path, "w", encoding="utf-8") as fh:
        fh.write(f"#! n={graph.num_vertices} s_max={graph.s_max} scale={graph.length_scale}\n")
        fh.write("# u\tv\tlength\tess\n")
        for e in graph.edges():
            fh.write(f"{e.u}\t{e.v}\t{e.length}\t{e.ess}\n")
    if pois_path is not None:
        with open(pois_path, "w", encoding="utf-8") as fh:
            for p in sorted(graph.pois):
                fh.write(f"{p}\n")
    if coords_path is not None:
        if graph.coords is None:
            raise DomainError("graph has no coordinates to save")
        with open(coords_path, "w", encoding="utf-8") as fh:
            for v in range(graph.num_vertices):
                x, y = graph.coords[v]
                fh.write(f"{v}\t{x!r}\t{y!r}\n")


def load_crimes(path: str | Path) -> list[tuple[float, float]]:
    """Read crime locations from a CSV with an ``x,y`` or ``lat,lon`` header."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        cols = [c.strip().lower() for c in (reader.fieldnames or [])]
        reader.fieldnames = cols
        if {"x", "y"} <= set(cols):
            planar = True
        elif {"lat", "lon"} <= set(cols):
            planar = False
        else:
            raise IngestError(path, 1, "header must contain x,y or lat,lon")
        rows = []
        for no, row in enumerate(reader, start=2):
            if planar:
                rows.append((_float(path, no, row["x"], "x"), _float(path, no, row["y"], "y")))
            else:
                rows.append((_float(path, no, row["lat"], "lat"),
                             _float(path, no, row["lon"], "lon")))
    if planar or not rows:
        return rows
    lat0 = math.radians(sum(r[0] for r in rows) / len(rows))
    return [(EARTH_RADIUS_M * math.radians(lon) * math.cos(lat0),
             EARTH_RADIUS_M * math.radians(lat)) for lat, lon in rows]


def crime_counts(graph: RoadGraph, crimes: Sequence[tuple[float, float]],
                 radius: float) -> dict[tuple[int, int], int]:
    """Number of crimes within ``radius`` of each edge's straight segment."""
    if graph.coords is None:
        raise DomainError("crime counting needs vertex coordinates")
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    counts = {e.key: 0 for e in graph.edges()}
    if not crimes:
        return counts
    pts = np.asarray(crimes, dtype=float)
    tree = cKDTree(pts)
    for e in graph.edges():
        a = np.asarray(graph.coords[e.u], dtype=float)
        b = np.asarray(graph.coords[e.v], dtype=float)
        seg = b - a
        half = float(np.hypot(*seg)) / 2
        idx = tree.query_ball_point((a + b) / 2, radius + half + 1e-9)
        if not idx:
            continue
        p = pts[idx]
        denom = float(seg @ seg)
        t = np.clip(((p - a) @ seg) / denom, 0.0, 1.0) if denom > 0 else np.zeros(len(p))
        nearest = a + t[:, None] * seg
        d = np.hypot(*(p - nearest).T)
        counts[e.key] = int(np.count_nonzero(d <= radius))
    return counts


def crime_score(count: int, lo: int, hi: int, s_max: int) -> int:
    """Equal-width binning of a crime count into ``[1, s_max]``."""
    if hi <= lo:
        return 1
    return min(s_max, 1 + math.floor((count - lo) / (hi - lo) * s_max))


def assign_ess(graph: RoadGraph, crimes: Sequence[tuple[float, float]],
               radius: float = 1000.0, s_max: int = 10) -> RoadGraph:
    """Return a copy of ``graph`` with ESS derived from nearby crime counts.

    ``ess = s_max + 1 - crimescore``, so the most crime-ridden edges get ESS 1.
    ``radius`` is in the graph's coordinate units.
    """
    if s_max < 1:
        raise DomainError("s_max must be positive")
    counts = crime_counts(graph, crimes, radius)
    lo = min(counts.values(), default=0)
    hi = max(counts.values(), default=0)
    edges = [Edge(e.u, e.v, e.length, s_max + 1 - crime_score(counts[e.key], lo, hi, s_max))
             for e in graph.edges()]
    return RoadGraph(graph.num_vertices, edges, graph.pois, s_max=s_max,
                     coords=graph.coords, length_scale=graph.length_scale)


def gen_synthetic(kind: str = "grid", *, rows: int = 100, cols: int = 100,
                  n: int | None = None, rho: float = 0.01, s_max: int = 10,
                  seed: int = 0, spacing: int = 10, max_length: int = 20,
                  degree: int = 4) -> RoadGraph:
    """Deterministic synthetic road network with a planar embedding.

    ``grid``: a ``rows x cols`` lattice with spacing ``spacing``; each edge
    length is uniform in ``[spacing, max_length]``, which keeps straight-line
    distances a lower bound on network distances.  ``random``: ``n`` uniform
    points joined to their ``degree`` nearest neighbours, with lengths equal
    to the rounded-up straight-line distance plus a random detour.  ESS values are
    uniform over ``[1, s_max]``.  Exactly ``round(rho * |V|)`` POIs are drawn.
    """
    rng = random.Random(seed)
    if s_max < 1:
        raise DomainError("s_max must be positive")
    if kind == "grid":
        if rows < 1 or cols < 1:
            raise DomainError("grid needs positive dimensions")
        if max_length < spacing or spacing < 1:
            raise DomainError("need 1 <= spacing <= max_length")
        nv = rows * cols
        coords = {r * cols + c: (float(c * spacing), float(r * spacing))
                  for r in range(rows) for c in range(cols)}
        pairs = []
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    pairs.append((v, v + 1))
                if r + 1 < rows:
                    pairs.append((v, v + cols))
        edges = [Edge(u, v, rng.randint(spacing, max_length), rng.randint(1, s_max))
                 for u, v in pairs]
    elif kind == "random":
        nv = n if n is not None else rows * cols
        if nv < 2:
            raise DomainError("random graph needs at least 2 vertices")
        side = spacing * math.sqrt(nv)
        pts = [(rng.uniform(0, side), rng.uniform(0, side)) for _ in range(nv)]
        coords = dict(enumerate(pts))
        tree = cKDTree(np.asarray(pts))
        kk = min(degree + 1, nv)
        _, nbrs = tree.query(np.asarray(pts), k=kk)
        keys = sorted({(min(u, int(v)), max(u, int(v)))
                       for u in range(nv) for v in np.atleast_1d(nbrs[u])[1:]})
        edges = []
        for u, v in keys:
            base = max(1, math.ceil(math.dist(pts[u], pts[v])))
            edges.append(Edge(u, v, base + rng.randint(0, spacing), rng.randint(1, s_max)))
    else:
        raise DomainError(f"unknown synthetic graph kind {kind!r}")
    if not 0 < rho <= 1:
        raise DomainError(f"POI density rho={rho} must lie in (0, 1]")
    n_pois = round(rho * nv)
    if n_pois < 1:
        raise DomainError(f"rho={rho} yields no POI on {nv} vertices")
    pois = rng.sample(range(nv), n_pois)
    return RoadGraph(nv, edges, pois, s_max=s_max, coords=coords)
