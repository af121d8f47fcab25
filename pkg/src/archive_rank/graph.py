"""Directed link graphs over core URLs (and their domain projection) with
power-iteration PageRank.

A built :class:`Graph` is immutable, so any number of PageRank runs may
share it concurrently; construction itself is single-writer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import sparse

from .ingest import LinkRecord
from .urls import core_url_str

__all__ = [
    "Graph",
    "RankVector",
    "GraphError",
    "build_page_graph",
    "project_domain_graph",
    "inlink_count",
    "pagerank",
    "write_graph",
    "read_graph",
    "write_ranks",
    "read_ranks",
]

DEDUP_UNIQUE = "unique_per_revision"
DEDUP_ALL = "all"


class GraphError(ValueError):
    """Raised for graph operations on unusable inputs (e.g. empty graphs)."""


@dataclass(frozen=True)
class Graph:
    """Dense-id directed graph. ``names[i]`` is the node behind id ``i``;
    edges are deduplicated and sorted; self-loops are never stored."""

    names: tuple[str, ...]
    src: np.ndarray  # int64 edge sources
    dst: np.ndarray  # int64 edge targets

    def __post_init__(self):
        if len(self.src) != len(self.dst):
            raise GraphError("edge arrays disagree in length")

    @property
    def node_count(self) -> int:
        return len(self.names)

    @property
    def edge_count(self) -> int:
        return len(self.src)

    def id_of(self, name: str) -> int | None:
        ids = self.ids
        return ids.get(name)

    @property
    def ids(self) -> dict[str, int]:
        cached = self.__dict__.get("_ids")
        if cached is None:
            cached = {name: i for i, name in enumerate(self.names)}
            self.__dict__["_ids"] = cached
        return cached

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]]) -> "Graph":
        """Build from (source, target) name pairs; parallel edges collapse,
        self-loops drop, node ids are assigned in sorted-name order."""
        pairs = {(s, t) for s, t in edges if s != t}
        names = sorted({n for pair in pairs for n in pair})
        ids = {n: i for i, n in enumerate(names)}
        if pairs:
            arr = np.array(sorted((ids[s], ids[t]) for s, t in pairs), dtype=np.int64)
            src, dst = arr[:, 0].copy(), arr[:, 1].copy()
        else:
            src = np.empty(0, dtype=np.int64)
            dst = np.empty(0, dtype=np.int64)
        return cls(tuple(names), src, dst)


@dataclass(frozen=True)
class RankVector:
    """PageRank scores by node id; scores sum to one."""

    scores: np.ndarray
    damping: float
    iterations_run: int
    residual: float


def build_page_graph(links: Iterable[LinkRecord]) -> Graph:
    """Graph over core URLs of content-link sources and targets."""
    edges = (
        (core_url_str(link.source_full_url), core_url_str(link.target_url))
        for link in links
    )
    return Graph.from_edges(edges)


def project_domain_graph(g: Graph, domain_fn: Callable[[str], str]) -> Graph:
    """Collapse page nodes to domains; intra-domain edges are dropped but
    every domain keeps a node, even when all its edges were internal."""
    domains = [domain_fn(name) for name in g.names]
    pairs = set()
    for s, t in zip(g.src, g.dst):
        ds, dt = domains[s], domains[t]
        if ds != dt:
            pairs.add((ds, dt))
    names = sorted(set(domains))
    ids = {n: i for i, n in enumerate(names)}
    if pairs:
        arr = np.array(sorted((ids[s], ids[t]) for s, t in pairs), dtype=np.int64)
        src, dst = arr[:, 0].copy(), arr[:, 1].copy()
    else:
        src = np.empty(0, dtype=np.int64)
        dst = np.empty(0, dtype=np.int64)
    return Graph(tuple(names), src, dst)


def inlink_count(links: Iterable[LinkRecord], doc: str, dedup: str = DEDUP_ALL) -> int:
    """Number of content links pointing at ``doc`` (a core URL).

    ``all`` counts every record; ``unique_per_revision`` collapses repeats
    of the same (source revision, target, anchor) tuple, mirroring the
    per-revision surrogate dedup strategy.
    """
    target = core_url_str(doc)
    if dedup == DEDUP_ALL:
        return sum(1 for link in links if core_url_str(link.target_url) == target)
    if dedup == DEDUP_UNIQUE:
        seen = {
            (link.source_full_url, link.source_capture_time, link.anchor_text)
            for link in links
            if core_url_str(link.target_url) == target
        }
        return len(seen)
    raise ValueError(f"unknown dedup mode: {dedup!r}")


def pagerank(
    g: Graph,
    damping: float = 0.85,
    tolerance: float = 1e-9,
    max_iterations: int = 100,
) -> RankVector:
    """Power iteration with uniform teleport; dangling mass is spread
    uniformly each step, so scores stay a probability distribution."""
    n = g.node_count
    if n == 0:
        raise GraphError("pagerank over an empty graph")
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must lie in (0, 1)")
    if tolerance <= 0.0:
        raise ValueError("tolerance must be positive")
    outdeg = np.bincount(g.src, minlength=n).astype(np.float64)
    has_out = outdeg > 0
    weights = np.zeros(g.edge_count, dtype=np.float64)
    if g.edge_count:
        weights = 1.0 / outdeg[g.src]
    transition = sparse.csr_matrix((weights, (g.dst, g.src)), shape=(n, n))
    scores = np.full(n, 1.0 / n)
    residual = 0.0
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        dangling = scores[~has_out].sum()
        nxt = damping * (transition @ scores)
        nxt += (damping * dangling + (1.0 - damping)) / n
        residual = float(np.abs(nxt - scores).sum())
        scores = nxt
        if residual < tolerance:
            break
    return RankVector(scores, damping, iterations, residual)


# ---------------------------------------------------------------------------
# persistence


def write_graph(g: Graph, graph_fh, nodes_fh) -> None:
    graph_fh.write(f"#nodes {g.node_count} #edges {g.edge_count}\n")
    for s, t in zip(g.src, g.dst):
        graph_fh.write(f"{s} {t}\n")
    for i, name in enumerate(g.names):
        nodes_fh.write(f"{i}\t{name}\n")


def read_graph(graph_fh, nodes_fh) -> Graph:
    header = graph_fh.readline().split()
    n_nodes, n_edges = int(header[1]), int(header[3])
    src = np.empty(n_edges, dtype=np.int64)
    dst = np.empty(n_edges, dtype=np.int64)
    for i in range(n_edges):
        a, b = graph_fh.readline().split()
        src[i], dst[i] = int(a), int(b)
    names: list[str] = [""] * n_nodes
    for line in nodes_fh:
        line = line.rstrip("\n")
        if not line:
            continue
        idx, name = line.split("\t", 1)
        names[int(idx)] = name
    return Graph(tuple(names), src, dst)


def write_ranks(rank: RankVector, fh) -> None:
    for i, score in enumerate(rank.scores.tolist()):
        fh.write(f"{i} {score!r}\n")


def read_ranks(fh) -> np.ndarray:
    scores = [float(line.split()[1]) for line in fh if line.strip()]
    return np.array(scores, dtype=np.float64)
