"""Simple undirected graphs and edge-list ingestion.

Node ids are dense integers ``0..N-1``; the original labels (arbitrary
strings from the input file) are kept alongside in ``Graph.labels``.
"""
from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np

__all__ = [
    "EdgeRecord",
    "Graph",
    "ParseError",
    "degree",
    "label_sort_key",
    "load_edge_list",
    "preprocess",
    "read_graph",
    "write_label_map",
]

FORMATS = ("plain", "konect-tsv")


class ParseError(ValueError):
    """Malformed edge-list input."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class EdgeRecord:
    source: str
    target: str
    weight: Optional[float] = None


RawEdgeList = list  # list[EdgeRecord]


def load_edge_list(stream: TextIO, format: str = "plain") -> list[EdgeRecord]:
    """Parse a whitespace-separated edge list.

    Lines starting with ``#`` or ``%`` are comments (KONECT puts its metadata
    on ``%`` lines). A third token is kept as the weight when it parses as a
    float; anything past it (timestamps) is dropped.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown edge-list format {format!r}")
    records = []
    for lineno, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#%":
            continue
        tokens = stripped.split()
        if len(tokens) < 2:
            raise ParseError(lineno, f"expected at least 2 tokens, got {len(tokens)}")
        weight = None
        if len(tokens) > 2:
            try:
                weight = float(tokens[2])
            except ValueError:
                weight = None
        records.append(EdgeRecord(tokens[0], tokens[1], weight))
    return records


def label_sort_key(label: str):
    """Numeric labels sort numerically and before non-numeric ones."""
    try:
        return (0, int(label), "")
    except ValueError:
        return (1, 0, label)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph in CSR form.

    ``edges`` holds each edge once as ``(i, j)`` with ``i < j``, sorted
    lexicographically. ``indptr``/``indices`` give the sorted neighbor list
    of every node.
    """

    n_nodes: int
    edges: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    labels: tuple = field(default=())

    @classmethod
    def from_edges(cls, n_nodes: int, edges, labels: Optional[Sequence[str]] = None) -> "Graph":
        """Build a graph from integer pairs; loops are dropped, duplicates merged."""
        n_nodes = int(n_nodes)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n_nodes):
            raise ValueError("edge endpoint out of range")
        e = e[e[:, 0] != e[:, 1]]
        e = np.sort(e, axis=1)
        if e.size:
            e = np.unique(e, axis=0)
        both = np.concatenate([e, e[:, ::-1]])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(both[:, 0], minlength=n_nodes), out=indptr[1:])
        indices = np.ascontiguousarray(both[:, 1])
        if labels is None:
            labels = tuple(str(i) for i in range(n_nodes))
        elif len(labels) != n_nodes:
            raise ValueError("labels must have one entry per node")
        for arr in (e, indptr, indices):
            arr.flags.writeable = False
        return cls(n_nodes, e, indptr, indices, tuple(str(x) for x in labels))

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix (small graphs only)."""
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int64)
        a[self.edges[:, 0], self.edges[:, 1]] = 1
        a[self.edges[:, 1], self.edges[:, 0]] = 1
        return a

    def to_records(self) -> list[EdgeRecord]:
        return [EdgeRecord(self.labels[i], self.labels[j]) for i, j in self.edges]

    def structurally_equal(self, other: "Graph") -> bool:
        return (
            self.n_nodes == other.n_nodes
            and self.labels == other.labels
            and np.array_equal(self.edges, other.edges)
        )

    def __repr__(self) -> str:
        return f"Graph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


def degree(g: Graph, i: int) -> int:
    if not 0 <= i < g.n_nodes:
        raise IndexError(f"node id {i} out of range for graph with {g.n_nodes} nodes")
    return int(g.indptr[i + 1] - g.indptr[i])


def _components(n: int, indptr: np.ndarray, indices: np.ndarray) -> np.ndarray:
    comp = np.full(n, -1, dtype=np.int64)
    c = 0
    for start in range(n):
        if comp[start] >= 0:
            continue
        comp[start] = c
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in indices[indptr[u]:indptr[u + 1]]:
                if comp[v] < 0:
                    comp[v] = c
                    queue.append(v)
        c += 1
    return comp


def preprocess(raw: Union[Iterable[EdgeRecord], Graph]) -> Graph:
    """Clean a raw edge list into the largest connected simple graph.

    Weights are dropped, directions and multi-edges collapsed, self-loops
    removed. Among equally large components the one holding the smallest
    original label wins. Retained nodes are relabeled ``0..N-1`` in label
    order.
    """
    records = raw.to_records() if isinstance(raw, Graph) else list(raw)
    if isinstance(raw, Graph) and raw.n_edges == 0:
        records = []
    if not records:
        raise ValueError("empty edge list")

    labels = sorted({r.source for r in records} | {r.target for r in records}, key=label_sort_key)
    index = {lab: k for k, lab in enumerate(labels)}
    pairs = np.array([(index[r.source], index[r.target]) for r in records], dtype=np.int64)
    full = Graph.from_edges(len(labels), pairs, labels)
    if full.n_edges == 0:
        raise ValueError("graph is empty after removing self-loops")

    comp = _components(full.n_nodes, full.indptr, full.indices)
    sizes = np.bincount(comp)
    # Nodes are already in label order, so the first node of a component is
    # its smallest label and argmax's first-hit rule breaks ties correctly.
    best = int(np.argmax(sizes))
    keep = np.flatnonzero(comp == best)
    remap = np.full(full.n_nodes, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    e = full.edges
    e = e[(remap[e[:, 0]] >= 0) & (remap[e[:, 1]] >= 0)]
    g = Graph.from_edges(keep.size, remap[e], [labels[k] for k in keep])
    if g.n_edges == 0:
        raise ValueError("graph is empty after preprocessing")
    return g


def read_graph(path, format: str = "plain") -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        return preprocess(load_edge_list(fh, format=format))


def write_label_map(g: Graph, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["node_id", "label"])
    for i, lab in enumerate(g.labels):
        w.writerow([i, lab])


def label_map_csv(g: Graph) -> str:
    buf = io.StringIO()
    write_label_map(g, buf)
    return buf.getvalue()
