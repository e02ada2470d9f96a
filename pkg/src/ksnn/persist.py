"""Versioned on-disk storage for the Ct-tree, SNVD and R-tree indexes.

An index file is a pickled header dictionary:

``{"magic", "version", "kind", "graph_hash", "scale", "payload"}``

``graph_hash`` is the content hash of the graph the index was built for.
Loading checks the magic, version and kind, and compares the hash with the
graph supplied by the caller.  Index files are trusted input: only load
files you produced yourself.
"""

from __future__ import annotations

import pickle
from pathlib import Path
from typing import Any

from .cttree import CtTree
from .graph import KsnnError, RoadGraph
from .rtree import PoiSpatialIndex
from .snvd import SNVD

MAGIC = "ksnn-index"
VERSION = 1
KINDS = {"ct": CtTree, "snvd": SNVD, "rtree": PoiSpatialIndex}


class IndexFileError(KsnnError):
    """An index file is unreadable, of the wrong kind, or for another graph."""


def index_kind(index: Any) -> str:
    for kind, cls in KINDS.items():
        if isinstance(index, cls):
            return kind
    raise IndexFileError(f"not an index object: {type(index).__name__}")


def save_index(index: Any, path: str | Path) -> None:
    kind = index_kind(index)
    scale = getattr(index, "scale", 1)
    header = {"magic": MAGIC, "version": VERSION, "kind": kind,
              "graph_hash": index.graph_hash, "scale": scale, "payload": index}
    with open(path, "wb") as fh:
        pickle.dump(header, fh, protocol=pickle.HIGHEST_PROTOCOL)


def read_header(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            header = pickle.load(fh)
    except FileNotFoundError:
        raise IndexFileError(f"{path}: index file not found") from None
    except (pickle.UnpicklingError, EOFError, AttributeError, ImportError) as exc:
        raise IndexFileError(f"{path}: not a readable index file ({exc})") from None
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise IndexFileError(f"{path}: not an index file")
    if header.get("version") != VERSION:
        raise IndexFileError(f"{path}: unsupported index version {header.get('version')!r}")
    return header


def load_index(path: str | Path, graph: RoadGraph, kind: str | None = None) -> Any:
    """Load an index and check that it belongs to ``graph`` (and ``kind``)."""
    header = read_header(path)
    if kind is not None and header["kind"] != kind:
        raise IndexFileError(f"{path}: holds a {header['kind']} index, not {kind}")
    if header["graph_hash"] != graph.content_hash():
        raise IndexFileError(f"{path}: index was built for a different graph")
    payload = header["payload"]
    if not isinstance(payload, KINDS[header["kind"]]):
        raise IndexFileError(f"{path}: payload does not match kind {header['kind']}")
    return payload
