"""Immutable sparse graph storage and symmetric self-loop normalization.

Graphs are undirected, stored in CSR form with sorted, duplicate-free
neighbor lists and no explicit self-loops. Self-loops enter only through
``normalize_adjacency``, which builds D̂^{-1/2}(A + I)D̂^{-1/2} with
d̂_i = deg(i) + 1.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, GraphFormatError, UnknownNodeError

logger = logging.getLogger(__name__)

# Guard against pathological inputs; dense ids are int64 throughout.
MAX_NODES = 100_000_000


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Graph:
    """Undirected graph with per-node binary activation state.

    ``indptr``/``indices`` hold the symmetric adjacency in CSR form.
    ``node_ids`` maps dense index -> external id; dense indices are
    assigned in first-seen order so loading is deterministic.
    """

    indptr: np.ndarray
    indices: np.ndarray
    activation: np.ndarray
    node_ids: tuple[str, ...]
    timestamps: np.ndarray | None = None
    _id_index: dict[str, int] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if not self._id_index:
            self._id_index.update({x: i for i, x in enumerate(self.node_ids)})
        for arr in (self.indptr, self.indices, self.activation):
            _freeze(arr)
        if self.timestamps is not None:
            _freeze(self.timestamps)

    @property
    def node_count(self) -> int:
        return len(self.node_ids)

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    def degree(self, i: int | None = None):
        deg = np.diff(self.indptr)
        return deg if i is None else int(deg[i])

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        k = np.searchsorted(row, v)
        return k < len(row) and row[k] == v

    def dense_index(self, external_id: str) -> int:
        try:
            return self._id_index[external_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node id {external_id!r}") from None

    def structure_hash(self) -> str:
        """Fingerprint of node count and adjacency structure (not state)."""
        h = hashlib.sha256(b"egoprop-graph-v1")
        h.update(np.int64(self.node_count).tobytes())
        h.update(np.ascontiguousarray(self.indptr, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.indices, dtype=np.int64).tobytes())
        return h.hexdigest()

    def active_ids(self) -> list[str]:
        return [self.node_ids[i] for i in np.flatnonzero(self.activation)]

    def with_timestamps(self, stamps: dict[str, int]) -> "Graph":
        """Attach per-node epoch-second timestamps (unknown ids rejected)."""
        ts = np.full(self.node_count, -1, dtype=np.int64)
        for ext, t in stamps.items():
            ts[self.dense_index(ext)] = int(t)
        return Graph(self.indptr, self.indices, self.activation, self.node_ids, ts)

    def induced_subgraph(self, nodes: Sequence[int]) -> "Graph":
        """Subgraph induced by dense indices ``nodes``, in the given order."""
        nodes = np.asarray(nodes, dtype=np.int64)
        pos = {int(v): k for k, v in enumerate(nodes)}
        rows: list[list[int]] = [[] for _ in nodes]
        for k, v in enumerate(nodes):
            for w in self.neighbors(int(v)):
                j = pos.get(int(w))
                if j is not None:
                    rows[k].append(j)
        return _from_neighbor_lists(
            [sorted(r) for r in rows],
            activation=self.activation[nodes].copy(),
            node_ids=tuple(self.node_ids[i] for i in nodes),
        )


def _from_neighbor_lists(rows: list[list[int]], activation: np.ndarray,
                         node_ids: tuple[str, ...]) -> Graph:
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    for i, r in enumerate(rows):
        indptr[i + 1] = indptr[i] + len(r)
    indices = np.fromiter(
        (v for r in rows for v in r), dtype=np.int64, count=int(indptr[-1]))
    return Graph(indptr, indices, np.asarray(activation, dtype=np.uint8),
                 node_ids)


def build_graph(node_ids: Sequence[str], edges: Iterable[tuple[int, int]]) -> Graph:
    """Build a Graph from dense-index edge pairs; symmetrizes and dedups."""
    n = len(node_ids)
    if n > MAX_NODES:
        raise GraphFormatError(f"node count {n} exceeds limit {MAX_NODES}")
    seen: set[tuple[int, int]] = set()
    for u, v in edges:
        if u == v:
            continue
        a, b = (u, v) if u < v else (v, u)
        seen.add((a, b))
    rows: list[list[int]] = [[] for _ in range(n)]
    for a, b in seen:
        rows[a].append(b)
        rows[b].append(a)
    return _from_neighbor_lists(
        [sorted(r) for r in rows],
        activation=np.zeros(n, dtype=np.uint8),
        node_ids=tuple(node_ids),
    )


def load_edge_list(path: str | Path, directed_hint: bool = False) -> Graph:
    """Load a tab-separated edge list into a symmetrized Graph.

    Lines are ``src<TAB>dst[<TAB>epoch_seconds]``; ``#`` starts a comment
    line. Duplicate and reverse-duplicate edges collapse to one undirected
    edge (``directed_hint`` only documents the source convention; the
    result is always undirected). Self-loop lines are dropped. Activation
    starts all-inactive.
    """
    path = Path(path)
    if not path.exists():
        raise GraphFormatError(f"edge list not found: {path}")
    ids: list[str] = []
    index: dict[str, int] = {}
    edges: list[tuple[int, int]] = []

    def idx(ext: str) -> int:
        k = index.get(ext)
        if k is None:
            k = len(ids)
            if k >= MAX_NODES:
                raise GraphFormatError(f"node count exceeds limit {MAX_NODES}")
            index[ext] = k
            ids.append(ext)
        return k

    with path.open("r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise GraphFormatError(
                    f"{path}:{ln}: expected 2 or 3 tab-separated fields, "
                    f"got {len(parts)}")
            src, dst = parts[0].strip(), parts[1].strip()
            if not src or not dst:
                raise GraphFormatError(f"{path}:{ln}: empty node id")
            if len(parts) == 3:
                try:
                    int(parts[2])
                except ValueError:
                    raise GraphFormatError(
                        f"{path}:{ln}: timestamp column is not an integer: "
                        f"{parts[2]!r}") from None
            u, v = idx(src), idx(dst)
            if u == v:
                logger.debug("%s:%d: dropping self-loop on %r", path, ln, src)
                continue
            edges.append((u, v))
    if not ids:
        raise GraphFormatError(f"{path}: empty edge list")
    return build_graph(ids, edges)


def write_edge_list(g: Graph, path: str | Path) -> None:
    """Write each undirected edge once (lower dense index first)."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for u in range(g.node_count):
            for v in g.neighbors(u):
                if u < v:
                    fh.write(f"{g.node_ids[u]}\t{g.node_ids[v]}\n")


def load_activation(path: str | Path) -> set[str]:
    """Read an activation file: one external id per line, ``#`` comments."""
    path = Path(path)
    if not path.exists():
        raise GraphFormatError(f"activation file not found: {path}")
    out: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line and not line.startswith("#"):
                out.add(line)
    return out


def set_activation(g: Graph, active_ids: Iterable[str]) -> Graph:
    """Return a copy of ``g`` with exactly the listed nodes active."""
    activation = np.zeros(g.node_count, dtype=np.uint8)
    for ext in active_ids:
        activation[g.dense_index(ext)] = 1
    return Graph(g.indptr, g.indices, activation, g.node_ids, g.timestamps)


def set_activation_dense(g: Graph, active: np.ndarray) -> Graph:
    """Like set_activation but from a dense 0/1 vector (internal fast path)."""
    activation = np.asarray(active, dtype=np.uint8).copy()
    if activation.shape != (g.node_count,):
        raise DimensionError(
            f"activation shape {activation.shape} does not match "
            f"{g.node_count} nodes")
    return Graph(g.indptr, g.indices, activation, g.node_ids, g.timestamps)


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Sparse symmetric operator D̂^{-1/2}(A + I)D̂^{-1/2}.

    Every row contains its diagonal entry, so rows are never empty. The
    dense form and per-alpha resolvents are cached lazily; both caches are
    read-only after first computation and safe to share across readers.
    """

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    source_hash: str
    _cache: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.data):
            _freeze(arr)

    @property
    def node_count(self) -> int:
        return len(self.indptr) - 1

    def dense(self) -> np.ndarray:
        out = self._cache.get("dense")
        if out is None:
            n = self.node_count
            out = np.zeros((n, n))
            for i in range(n):
                lo, hi = self.indptr[i], self.indptr[i + 1]
                out[i, self.indices[lo:hi]] = self.data[lo:hi]
            _freeze(out)
            self._cache["dense"] = out
        return out

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Â @ x for a vector or matrix x, via the CSR arrays."""
        x = np.asarray(x, dtype=np.float64)
        contrib = self.data[:, None] * x[self.indices] if x.ndim == 2 \
            else self.data * x[self.indices]
        # every row holds its diagonal, so indptr[:-1] has no repeats at the end
        return np.add.reduceat(contrib, self.indptr[:-1], axis=0)

    def row_entries(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]


def normalize_adjacency(g: Graph) -> NormalizedAdjacency:
    """Build the self-loop symmetric normalization of ``g``.

    Entry (i, j) is 1/sqrt(d̂_i d̂_j) for j in N(i) ∪ {i}, d̂ = deg + 1.
    Isolated nodes get a unit diagonal entry.
    """
    n = g.node_count
    if n == 0:
        raise GraphFormatError("cannot normalize an empty graph")
    dhat = g.degree().astype(np.float64) + 1.0
    inv_sqrt = 1.0 / np.sqrt(dhat)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices = np.empty(len(g.indices) + n, dtype=np.int64)
    data = np.empty(len(g.indices) + n)
    pos = 0
    for i in range(n):
        row = g.neighbors(i)
        k = np.searchsorted(row, i)
        merged = np.insert(row, k, i)
        m = len(merged)
        indices[pos:pos + m] = merged
        data[pos:pos + m] = inv_sqrt[i] * inv_sqrt[merged]
        pos += m
        indptr[i + 1] = pos
    return NormalizedAdjacency(indptr, indices, data, g.structure_hash())
