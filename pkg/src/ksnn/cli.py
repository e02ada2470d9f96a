"""Command-line interface: ``ksnn <subcommand> ...``.

Subcommands: ``gen``, ``assign-ess``, ``build-index {ct|snvd|rtree}``,
``query``, ``bench`` and ``compare-knn``.  Global flags (``--graph``,
``--pois``, ``--coords``, ``--index``, ``--seed``, ``--out``) may be given
before or after the subcommand.  Lengths and ``--d-c`` are in the graph's
integer length units (input units times the recorded scale factor).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .bench import (BENCH_FIELDS, ENGINES, KNN_FIELDS, compare_knn,
                    dc_from_delta, load_config, make_engine, run_bench, sample_queries,
                    write_csv)
from .graph import KsnnError, RoadGraph
from .ingestion import assign_ess, gen_synthetic, load_crimes, load_graph, save_graph
from .persist import IndexFileError, index_kind, load_index, save_index
from .query import Answer, QuerySpec

log = logging.getLogger("ksnn")

DEFAULT_K = 10
DEFAULT_DELTA = 2.0


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--graph", default=default, help="edge file (u, v, length, ess)")
    g.add_argument("--pois", default=default, help="POI file (one vertex per line)")
    g.add_argument("--coords", default=default, help="coordinate file (v, x, y)")
    g.add_argument("--index", default=default, help="index file")
    g.add_argument("--seed", type=int, default=default, help="random seed (default 0)")
    g.add_argument("--out", default=default, help="output path or prefix")
    g.add_argument("-v", "--verbose", action="store_true",
                   default=argparse.SUPPRESS if suppress else False, help="log progress")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ksnn", description="k safest nearby neighbour queries")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_flags(p, suppress=True)
        return p

    p = add("gen", "generate a synthetic road network (writes PREFIX.graph.tsv, .pois.tsv, .coords.tsv)")
    p.add_argument("--kind", choices=("grid", "random"), default="grid")
    p.add_argument("--rows", type=int, default=100)
    p.add_argument("--cols", type=int, default=100)
    p.add_argument("--n", type=int, default=None, help="vertex count for --kind random")
    p.add_argument("--rho", type=float, default=0.01, help="POI density")
    p.add_argument("--s-max", type=int, default=10, help="ESS range 1..s_max")

    p = add("assign-ess", "derive ESS values from crime locations (writes PREFIX.* files)")
    p.add_argument("--crimes", required=True, help="CSV with x,y or lat,lon header")
    p.add_argument("--radius", type=float, default=1000.0, help="radius in coordinate units")
    p.add_argument("--s-max", type=int, default=10)

    p = add("build-index", "build and save an index")
    p.add_argument("kind", choices=("ct", "snvd", "rtree"))
    p.add_argument("--height-cap", type=int, default=None, help="Ct-tree height cap")

    p = add("query", "answer one kSNN query")
    p.add_argument("--engine", choices=ENGINES, default="ine")
    p.add_argument("--source", type=int, required=True, help="query vertex")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--d-c", type=int, default=None, help="distance constraint")
    grp.add_argument("--delta", type=float, default=None,
                     help=f"d_c = ceil(delta * d^k) + 1 (default {DEFAULT_DELTA})")
    p.add_argument("--rules", default=None, help="comma-separated pruning rules (default: all)")
    p.add_argument("--verify", choices=ENGINES, default=None,
                   help="also run this engine and require an identical answer")

    p = add("bench", "run a benchmark sweep from a YAML/JSON config and write CSV")
    p.add_argument("--config", required=True)

    p = add("compare-knn", "compare kNN and kSNN answers and write CSV")
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--delta", type=float, nargs="+", default=[DEFAULT_DELTA])
    return parser


def _load(args, need_coords: bool = False) -> RoadGraph:
    if not args.graph:
        raise KsnnError("--graph is required")
    if need_coords and not args.coords:
        raise KsnnError("--coords is required for this command")
    return load_graph(args.graph, args.pois, args.coords)


def _seed(args) -> int:
    return args.seed if args.seed is not None else 0


def _prefix_paths(prefix: str) -> tuple[str, str, str]:
    return f"{prefix}.graph.tsv", f"{prefix}.pois.tsv", f"{prefix}.coords.tsv"


def format_answer(answer: Answer, graph: RoadGraph, q: QuerySpec) -> str:
    """Engine-independent text block for a ranked answer."""
    lines = [f"answer source={q.source} k={q.k} d_c={q.d_c} scale={graph.length_scale}"]
    for rank, e in enumerate(answer.entries, start=1):
        sig = ",".join(str(x) for x in e.signature)
        lines.append(f"{rank}. poi={e.poi} length={e.length} pss={e.pss} ({float(e.pss):.6e}) "
                     f"signature=({sig}) path={' '.join(map(str, e.path))}")
    if len(answer.entries) < q.k:
        lines.append(f"notice: only {len(answer.entries)} of {q.k} requested POIs have a "
                     f"valid path (length < {q.d_c})")
    return "\n".join(lines)


def _engine_for(name: str, graph: RoadGraph, index_path: str | None, height_cap=None):
    index = None
    if name != "ine" and index_path:
        index = load_index(index_path, graph, kind=name)
    return make_engine(name, graph, index=index, height_cap=height_cap)


def cmd_gen(args) -> int:
    if not args.out:
        raise KsnnError("--out PREFIX is required")
    g = gen_synthetic(args.kind, rows=args.rows, cols=args.cols, n=args.n, rho=args.rho,
                      s_max=args.s_max, seed=_seed(args))
    paths = _prefix_paths(args.out)
    save_graph(g, *paths)
    print(f"wrote {g.num_vertices} vertices, {g.num_edges} edges, {len(g.pois)} POIs "
          f"to {', '.join(paths)}")
    return 0


def cmd_assign_ess(args) -> int:
    if not args.out:
        raise KsnnError("--out PREFIX is required")
    g = _load(args, need_coords=True)
    # Coordinates are stored in scaled length units; bring crimes along.
    scale = g.length_scale
    crimes = [(x * scale, y * scale) for x, y in load_crimes(args.crimes)]
    radius = args.radius * scale
    out = assign_ess(g, crimes, radius=radius, s_max=args.s_max)
    paths = _prefix_paths(args.out)
    save_graph(out, *paths)
    print(f"assigned ESS from {len(crimes)} crimes; wrote {', '.join(paths)}")
    return 0


def cmd_build_index(args) -> int:
    if not args.index:
        raise KsnnError("--index PATH is required")
    g = _load(args, need_coords=args.kind == "rtree")
    t0 = time.perf_counter()
    engine = make_engine(args.kind, g, height_cap=args.height_cap)
    save_index(engine.index, args.index)
    print(f"built {index_kind(engine.index)} index in {time.perf_counter() - t0:.3f}s; "
          f"wrote {args.index}")
    return 0


def _parse_rules(text: str | None):
    if text is None:
        return None
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise KsnnError(f"--rules must be comma-separated integers, got {text!r}") from None


def cmd_query(args) -> int:
    g = _load(args, need_coords="rtree" in (args.engine, args.verify))
    g.check_vertex(args.source)
    if args.d_c is not None:
        d_c = args.d_c
    else:
        delta = args.delta if args.delta is not None else DEFAULT_DELTA
        d_c = dc_from_delta(g, args.source, args.k, delta)
        if d_c is None:
            raise KsnnError(f"fewer than {args.k} POIs are reachable from {args.source}; "
                            "give --d-c explicitly")
    q = QuerySpec(args.source, args.k, d_c)
    rules = _parse_rules(args.rules)
    if rules is not None and args.engine == "rtree":
        raise KsnnError("the rtree engine has no pruning rules to select")
    engine = _engine_for(args.engine, g, args.index)
    t0 = time.perf_counter()
    answer = engine.run(q, rules)
    elapsed = time.perf_counter() - t0
    print(format_answer(answer, g, q))
    print(f"stats engine={args.engine} rules={args.rules or 'all'} time_s={elapsed:.6f} "
          f"vertices_accessed={answer.stats.vertices_accessed} "
          f"valid_paths_explored={answer.stats.valid_paths_explored}")
    for key, val in sorted(answer.stats.extra.items()):
        print(f"  {key}={val}")
    if args.verify:
        other = make_engine(args.verify, g).run(q)
        if other != answer:
            print(f"verify: MISMATCH between {args.engine} and {args.verify}")
            print(format_answer(other, g, q))
            return 1
        print(f"verify: {args.verify} returned an identical answer")
    return 0


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    rows = run_bench(cfg, progress=log.info)
    text = write_csv(rows, args.out, BENCH_FIELDS)
    if not args.out:
        sys.stdout.write(text)
    else:
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_compare_knn(args) -> int:
    g = _load(args)
    queries = sample_queries(g, args.queries, _seed(args), k=args.k)
    rows = compare_knn(g, queries, args.k, args.delta)
    text = write_csv(rows, args.out, KNN_FIELDS)
    if not args.out:
        sys.stdout.write(text)
    else:
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


COMMANDS = {"gen": cmd_gen, "assign-ess": cmd_assign_ess, "build-index": cmd_build_index,
            "query": cmd_query, "bench": cmd_bench, "compare-knn": cmd_compare_knn}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (KsnnError, IndexFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
