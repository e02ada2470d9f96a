"""Benchmark harness: parameter sweeps, pruning ablations and kNN comparison.

Sweep configuration (YAML or JSON)::

    seed: 0
    queries: 100
    graph: {kind: grid, rows: 100, cols: 100}     # or {edges:, pois:, coords:}
    defaults: {k: 10, delta: 2.0, s_max: 10, rho: 0.01}
    sweep: {k: [1, 5, 10, 25, 50], delta: [1.25, 1.5, 1.75, 2.0]}
    engines: [ine, ct, snvd, rtree]
    ablation: true        # Basic / +rule / All rows at the defaults
    max_paths: 200000     # per-query budget; over-budget queries are counted, not averaged
    timing: true          # false leaves time columns empty (byte-stable CSV)
    verify: true          # all engines must return identical answers
    workers: 1            # >1 shards queries over threads

The sweep varies one parameter at a time around the defaults.  ``s_max`` and
``rho`` need a synthetic graph because they change the graph itself.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
import random
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

import yaml

from .cttree import CT_RULES, build as build_ct, ct_ksnn
from .dijkstra import kth_poi_distance
from .graph import DomainError, KsnnError, RoadGraph, Signature, add_to_signature, \
    empty_signature, pss
from .ine import INE_RULES, ine_ksnn, safest_valid_path
from .ingestion import gen_synthetic, load_graph
from .query import Answer, QuerySpec, SearchBudgetExceeded
from .rtree import build_rtree, rtree_ksnn
from .snvd import SNVD_RULES, build_snvd, snvd_ksnn

SCHEMA_VERSION = 1
ENGINES = ("ine", "ct", "snvd", "rtree")
ENGINE_RULES = {"ine": INE_RULES, "ct": CT_RULES, "snvd": SNVD_RULES, "rtree": ()}
DEFAULTS = {"k": 10, "delta": 2.0, "s_max": 10, "rho": 0.01}
SWEEP_PARAMS = ("k", "delta", "s_max", "rho")

BENCH_FIELDS = ("schema_version", "engine", "graph", "vertices", "k", "delta", "s_max",
                "rho", "rules", "queries", "completed", "over_budget", "build_time_s",
                "mean_time_s", "median_time_s", "mean_vertices_accessed",
                "mean_valid_paths")
KNN_FIELDS = ("schema_version", "row", "query", "k", "delta", "d_c", "common_pois",
              "snn1_in_knn", "mean_pss_knn", "mean_pss_ksnn", "pss_ratio",
              "mean_length_knn", "mean_length_ksnn", "length_ratio", "pss_1snn",
              "pss_safest_to_1nn")


class ConfigError(KsnnError, ValueError):
    """A benchmark configuration that cannot be run."""


# -- shared helpers -------------------------------------------------------

def dc_from_delta(graph: RoadGraph, source: int, k: int, delta: float) -> int | None:
    """``ceil(delta * d^k) + 1``, or ``None`` with fewer than ``k`` reachable POIs."""
    if delta <= 0:
        raise DomainError("delta must be positive")
    dk = kth_poi_distance(graph.adjacency, source, graph.pois, k)
    if dk is None:
        return None
    return math.ceil(Fraction(str(delta)) * dk) + 1


def sample_queries(graph: RoadGraph, count: int, seed: int, k: int = 1) -> list[int]:
    """Deterministic query vertices: non-POI vertices with ``k`` reachable POIs."""
    pool = [v for v in range(graph.num_vertices) if v not in graph.pois]
    random.Random(seed).shuffle(pool)
    out = []
    for v in pool:
        if len(out) == count:
            break
        if kth_poi_distance(graph.adjacency, v, graph.pois, k) is not None:
            out.append(v)
    return out


@dataclass
class Engine:
    name: str
    index: Any
    build_time: float
    run: Callable[..., Answer]


def make_engine(name: str, graph: RoadGraph, index: Any = None,
                height_cap: int | None = None) -> Engine:
    """Build (or wrap a prebuilt) index and return a uniform query callable."""
    t0 = time.perf_counter()
    if name == "ine":
        run = lambda q, rules=None, max_paths=None: ine_ksnn(graph, q, rules, max_paths)
    elif name == "ct":
        index = index if index is not None else build_ct(graph, height_cap)
        run = lambda q, rules=None, max_paths=None: ct_ksnn(index, graph, q, rules, max_paths)
    elif name == "snvd":
        index = index if index is not None else build_snvd(graph)
        run = lambda q, rules=None, max_paths=None: snvd_ksnn(index, graph, q, rules, max_paths)
    elif name == "rtree":
        index = index if index is not None else build_rtree(graph)
        run = lambda q, rules=None, max_paths=None: rtree_ksnn(graph, index, q)
    else:
        raise DomainError(f"unknown engine {name!r}; choose from {', '.join(ENGINES)}")
    return Engine(name, index, time.perf_counter() - t0, run)


def rule_label(rules: Sequence[int] | None, engine: str) -> str:
    if rules is None or set(rules) == set(ENGINE_RULES[engine]):
        return "all"
    if set(rules) == {1}:
        return "basic"
    return "+".join(str(r) for r in sorted(rules))


def ablation_sets(engine: str) -> list[tuple[int, ...] | None]:
    """Basic (Rule 1 only), Basic plus each other rule, and all rules."""
    rules = ENGINE_RULES[engine]
    if not rules:
        return [None]
    out: list[tuple[int, ...] | None] = [(1,)]
    out += [(1, r) for r in rules if r != 1 and {1, r} != set(rules)]
    out.append(None)
    return out


def _fmt(x: float | None, digits: int = 6) -> str:
    if x is None:
        return ""
    return f"{x:.{digits}g}"


# -- sweep ---------------------------------------------------------------

@dataclass
class BenchConfig:
    seed: int = 0
    queries: int = 100
    graph: dict = field(default_factory=lambda: {"kind": "grid", "rows": 100, "cols": 100})
    defaults: dict = field(default_factory=lambda: dict(DEFAULTS))
    sweep: dict = field(default_factory=dict)
    engines: list = field(default_factory=lambda: list(ENGINES))
    ablation: bool = False
    max_paths: int | None = None
    timing: bool = True
    verify: bool = True
    workers: int = 1
    height_cap: int | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "BenchConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping")
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        cfg = cls(**raw)
        cfg.defaults = {**DEFAULTS, **(cfg.defaults or {})}
        cfg.sweep = cfg.sweep or {}
        for key in set(cfg.defaults) | set(cfg.sweep):
            if key not in SWEEP_PARAMS:
                raise ConfigError(f"unknown sweep parameter {key!r}")
        for key, vals in cfg.sweep.items():
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"sweep.{key} must be a non-empty list")
        for e in cfg.engines:
            if e not in ENGINES:
                raise ConfigError(f"unknown engine {e!r}")
        if not isinstance(cfg.queries, int) or cfg.queries < 1:
            raise ConfigError("queries must be a positive integer")
        if not isinstance(cfg.workers, int) or cfg.workers < 1:
            raise ConfigError("workers must be a positive integer")
        synthetic = "kind" in cfg.graph
        if not synthetic and ({"s_max", "rho"} & set(cfg.sweep)):
            raise ConfigError("sweeping s_max or rho needs a synthetic graph")
        return cfg

    def settings(self) -> list[dict]:
        """One-factor-at-a-time parameter settings, defaults first, no repeats."""
        out = [dict(self.defaults)]
        for key in SWEEP_PARAMS:
            for val in self.sweep.get(key, []):
                s = {**self.defaults, key: val}
                if s not in out:
                    out.append(s)
        return out


def load_config(path: str | Path) -> BenchConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: cannot parse configuration: {exc}") from None
    return BenchConfig.from_dict(raw or {})


def _graph_for(cfg: BenchConfig, s_max: int, rho: float) -> tuple[str, RoadGraph]:
    spec = dict(cfg.graph)
    if "kind" in spec:
        g = gen_synthetic(spec.pop("kind"), rho=rho, s_max=s_max, seed=cfg.seed, **spec)
        return f"{cfg.graph['kind']}", g
    g = load_graph(spec["edges"], spec.get("pois"), spec.get("coords"))
    return Path(spec["edges"]).name, g


def _run_queries(engine: Engine, queries: list[QuerySpec], rules, max_paths, workers):
    def one(q: QuerySpec):
        t0 = time.perf_counter()
        try:
            ans = engine.run(q, rules, max_paths)
        except SearchBudgetExceeded:
            return None, time.perf_counter() - t0
        return ans, time.perf_counter() - t0

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, queries))
    return [one(q) for q in queries]


def run_bench(cfg: BenchConfig, progress: Callable[[str], None] | None = None) -> list[dict]:
    """Run every setting of ``cfg`` and return CSV-ready rows."""
    rows: list[dict] = []
    graphs: dict[tuple, tuple[str, RoadGraph, dict[str, Engine], list[int]]] = {}
    for setting in cfg.settings():
        k, delta = int(setting["k"]), float(setting["delta"])
        gkey = (setting["s_max"], setting["rho"])
        if gkey not in graphs:
            name, g = _graph_for(cfg, int(setting["s_max"]), float(setting["rho"]))
            engines = {e: make_engine(e, g, height_cap=cfg.height_cap) for e in cfg.engines}
            pool = sample_queries(g, cfg.queries, cfg.seed)
            graphs[gkey] = (name, g, engines, pool)
        name, g, engines, pool = graphs[gkey]
        queries = []
        for v in pool:
            d_c = dc_from_delta(g, v, k, delta)
            if d_c is not None:
                queries.append(QuerySpec(v, k, d_c))
        is_default = setting == cfg.defaults
        reference: list[Answer | None] | None = None
        for ename in cfg.engines:
            engine = engines[ename]
            rule_sets = ablation_sets(ename) if (cfg.ablation and is_default) else [None]
            for rules in rule_sets:
                if progress:
                    progress(f"{ename} {rule_label(rules, ename)} {setting}")
                results = _run_queries(engine, queries, rules, cfg.max_paths, cfg.workers)
                done = [(a, t) for a, t in results if a is not None]
                if cfg.verify:
                    answers = [a for a, _ in results]
                    if reference is None:
                        reference = answers
                    for i, (mine, ref) in enumerate(zip(answers, reference)):
                        if mine is not None and ref is not None and mine != ref:
                            raise KsnnError(f"engine {ename} ({rule_label(rules, ename)}) "
                                            f"disagrees on query {queries[i]}")
                times = [t for _, t in done]
                rows.append({
                    "schema_version": SCHEMA_VERSION,
                    "engine": ename,
                    "graph": name,
                    "vertices": g.num_vertices,
                    "k": k,
                    "delta": _fmt(delta),
                    "s_max": g.s_max,
                    "rho": _fmt(len(g.pois) / g.num_vertices),
                    "rules": rule_label(rules, ename),
                    "queries": len(queries),
                    "completed": len(done),
                    "over_budget": len(queries) - len(done),
                    "build_time_s": _fmt(engine.build_time) if cfg.timing else "",
                    "mean_time_s": _fmt(statistics.fmean(times)) if cfg.timing and times else "",
                    "median_time_s": _fmt(statistics.median(times)) if cfg.timing and times else "",
                    "mean_vertices_accessed": _fmt(statistics.fmean(
                        a.stats.vertices_accessed for a, _ in done)) if done else "",
                    "mean_valid_paths": _fmt(statistics.fmean(
                        a.stats.valid_paths_explored for a, _ in done)) if done else "",
                })
    return rows


def write_csv(rows: list[dict], path: str | Path | None, fields: Sequence[str]) -> str:
    """Write rows as CSV to ``path`` (if given) and return the text."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# -- kNN versus kSNN ------------------------------------------------------

def knn_paths(graph: RoadGraph, source: int, k: int) -> list[tuple[int, int, Signature]]:
    """The ``k`` nearest POIs by network distance, each with its shortest path.

    Returns ``(poi, length, signature)`` in increasing ``(length, signature,
    poi)`` order; among equally short paths the safest is used.
    """
    done: set[int] = set()
    out = []
    heap = [(0, empty_signature(graph.s_max), source)]
    while heap and len(out) < k:
        d, sig, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u in graph.pois:
            out.append((u, d, sig))
        for v, w, s in graph.adjacency[u]:
            if v not in done:
                heapq.heappush(heap, (d + w, add_to_signature(sig, s, w), v))
    return out


def _ratio(a: float, b: float) -> float | None:
    return a / b if b else None


def compare_knn(graph: RoadGraph, queries: Sequence[int], k: int,
                deltas: Sequence[float]) -> list[dict]:
    """Per-query and aggregate kNN-versus-kSNN rows (3 significant digits)."""
    rows = []
    scale = graph.length_scale
    for delta in deltas:
        per = []
        for v in queries:
            d_c = dc_from_delta(graph, v, k, delta)
            if d_c is None:
                continue
            knn = knn_paths(graph, v, k)
            ksnn = ine_ksnn(graph, QuerySpec(v, k, d_c))
            knn_set = {p for p, _, _ in knn}
            first_nn = knn[0][0]
            to_nn = safest_valid_path(graph, v, first_nn, d_c)
            m = {
                "query": v, "d_c": d_c,
                "common_pois": len(knn_set & set(ksnn.pois)),
                "snn1_in_knn": int(bool(ksnn.entries) and ksnn.entries[0].poi in knn_set),
                "mean_pss_knn": statistics.fmean(float(pss(sig, d_c)) for _, _, sig in knn),
                "mean_pss_ksnn": statistics.fmean(float(e.pss) for e in ksnn.entries),
                "mean_length_knn": statistics.fmean(length for _, length, _ in knn) / scale,
                "mean_length_ksnn": statistics.fmean(e.length for e in ksnn.entries) / scale,
                "pss_1snn": float(ksnn.entries[0].pss),
                "pss_safest_to_1nn": float(to_nn.entries[0].pss),
            }
            per.append(m)
            rows.append(_knn_row("query", k, delta, m))
        if per:
            agg = {key: statistics.fmean(m[key] for m in per)
                   for key in ("common_pois", "snn1_in_knn", "mean_pss_knn", "mean_pss_ksnn",
                               "mean_length_knn", "mean_length_ksnn", "pss_1snn",
                               "pss_safest_to_1nn")}
            agg.update(query="", d_c="")
            rows.append(_knn_row("aggregate", k, delta, agg))
    return rows


def _knn_row(kind: str, k: int, delta: float, m: dict) -> dict:
    g3 = lambda x: "" if x is None else f"{x:.3g}"
    return {
        "schema_version": SCHEMA_VERSION, "row": kind, "query": m["query"], "k": k,
        "delta": f"{delta:g}", "d_c": m["d_c"],
        "common_pois": g3(m["common_pois"]), "snn1_in_knn": g3(m["snn1_in_knn"]),
        "mean_pss_knn": g3(m["mean_pss_knn"]), "mean_pss_ksnn": g3(m["mean_pss_ksnn"]),
        "pss_ratio": g3(_ratio(m["mean_pss_ksnn"], m["mean_pss_knn"])),
        "mean_length_knn": g3(m["mean_length_knn"]),
        "mean_length_ksnn": g3(m["mean_length_ksnn"]),
        "length_ratio": g3(_ratio(m["mean_length_ksnn"], m["mean_length_knn"])),
        "pss_1snn": g3(m["pss_1snn"]), "pss_safest_to_1nn": g3(m["pss_safest_to_1nn"]),
    }
