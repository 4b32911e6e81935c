"""First-order subgraph network (line graph) construction and incidence features."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .matrices import SparseMatrix

if TYPE_CHECKING:
    from .kg import KnowledgeGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Skeleton:
    """Undirected simple graph over entity ids: directions, relations, self-loops
    and duplicate edges erased."""

    n_nodes: int
    edges: np.ndarray   # (m, 2) int64, u < v, lexicographically sorted

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", edges)
        if len(edges):
            if edges.min() < 0 or edges.max() >= self.n_nodes:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ValueError("edges must satisfy u < v")
        edges.setflags(write=False)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_nodes).astype(np.int64)


def build_skeleton(kg: "KnowledgeGraph") -> Skeleton:
    """Collapse relation triples into the undirected deduplicated entity graph.

    (h, r, t) and (t, r', h) map to one edge; self-loops are dropped (a
    one-endpoint line degenerates the shared-node rule) and counted in the log.
    """
    triples = kg.relation_triples
    if len(triples) == 0:
        return Skeleton(kg.n_entities, np.empty((0, 2), dtype=np.int64))
    heads = triples[:, 0]
    tails = triples[:, 2]
    loops = int(np.sum(heads == tails))
    if loops:
        log.info("dropped %d self-loop triples from the skeleton", loops)
    keep = heads != tails
    lo = np.minimum(heads[keep], tails[keep])
    hi = np.maximum(heads[keep], tails[keep])
    codes = np.unique(lo * np.int64(kg.n_entities) + hi)
    edges = np.column_stack([codes // kg.n_entities, codes % kg.n_entities])
    return Skeleton(kg.n_entities, edges)


@dataclass(frozen=True)
class SubgraphNetwork:
    """Line graph of a skeleton: one node per skeleton edge ("line"), links
    between lines sharing a skeleton endpoint."""

    lines: np.ndarray     # (L, 2) int64, u < v, lexicographically sorted
    links: np.ndarray     # (K, 2) int64 line-index pairs, i < j, lexsorted

    def __post_init__(self):
        lines = np.asarray(self.lines, dtype=np.int64).reshape(-1, 2)
        links = np.asarray(self.links, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "lines", lines)
        object.__setattr__(self, "links", links)
        if len(links):
            if links.min() < 0 or links.max() >= len(lines):
                raise ValueError("link references an unknown line index")
            if np.any(links[:, 0] >= links[:, 1]):
                raise ValueError("links must satisfy i < j")
        lines.setflags(write=False)
        links.setflags(write=False)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def n_links(self) -> int:
        return len(self.links)

    def link_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.links}


def build_sgn1(skeleton: Skeleton, order: int = 1) -> SubgraphNetwork:
    """First-order subgraph network of the skeleton.

    Lines are the skeleton edges in lexicographic order; two lines are linked
    iff they share an endpoint.  Pair enumeration runs per endpoint bucket
    (sum of deg(v)^2 work), not over all line pairs.  Only order 1 is
    supported; higher orders are an extension seam.
    """
    if order != 1:
        raise ValueError(f"subgraph network order {order} is not supported; "
                         "only first-order (lines) construction is implemented")
    lines = skeleton.edges
    buckets: list[list[int]] = [[] for _ in range(skeleton.n_nodes)]
    for idx in range(len(lines)):
        buckets[int(lines[idx, 0])].append(idx)
        buckets[int(lines[idx, 1])].append(idx)
    links: list[tuple[int, int]] = []
    for bucket in buckets:
        # bucket indices are increasing, so combinations yield i < j; two
        # distinct lines of a simple graph share at most one endpoint, hence
        # each pair appears in exactly one bucket.
        links.extend(combinations(bucket, 2))
    if links:
        arr = np.asarray(links, dtype=np.int64)
        arr = arr[np.lexsort((arr[:, 1], arr[:, 0]))]
    else:
        arr = np.empty((0, 2), dtype=np.int64)
    return SubgraphNetwork(lines=lines, links=arr)


def line_feature_matrix(n_entities: int, lines: np.ndarray) -> SparseMatrix:
    """Entity-by-line incidence: entry (e, i) = 1 iff e is an endpoint of line i.

    Needs only the lines themselves, so large pipelines can skip the (possibly
    huge) line-graph link enumeration.
    """
    if len(lines) and lines.max() >= n_entities:
        raise ValueError("lines reference entities beyond this graph")
    rows = lines.ravel()
    cols = np.repeat(np.arange(len(lines), dtype=np.int64), 2)
    return SparseMatrix.from_triplets(n_entities, len(lines), rows, cols,
                                      np.ones(len(rows)))


def subgraph_features(kg: "KnowledgeGraph", sgn: SubgraphNetwork) -> SparseMatrix:
    """Incidence feature matrix of a built subgraph network."""
    return line_feature_matrix(kg.n_entities, sgn.lines)


def write_sgn_edge_list(sgn: SubgraphNetwork, path) -> None:
    """Export the line-graph links as `line_index TAB line_index` rows."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for i, j in sgn.links:
            fh.write(f"{i}\t{j}\n")
