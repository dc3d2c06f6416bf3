"""Per-node feature catalog: structural scores, activation context, embeddings.

The standard vertex block has 8 columns in fixed order: pagerank,
eigencentrality, degree_reciprocal, coreness, clustering, hub, authority,
degree. Embedding columns and per-instance activation features are appended
by callers via ``assemble_features``.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import ConvergenceError, DimensionError, GraphFormatError
from .graph import Graph, NormalizedAdjacency, normalize_adjacency

if TYPE_CHECKING:  # pragma: no cover
    from .sampling import EgoInstance

logger = logging.getLogger(__name__)

VERTEX_COLUMNS = ("pagerank", "eigencentrality", "degree_reciprocal",
                  "coreness", "clustering", "hub", "authority", "degree")

_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class FeatureMatrix:
    """n x F feature block with ordered column labels.

    ``standardization`` carries the (mean, std) used when the block was
    standardized, so the same affine map can be replayed on new rows.
    """

    values: np.ndarray
    column_names: tuple[str, ...]
    standardization: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.column_names):
            raise DimensionError(
                f"feature matrix shape {self.values.shape} does not match "
                f"{len(self.column_names)} column names")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature matrix contains NaN or Inf")

    @property
    def width(self) -> int:
        return self.values.shape[1]


def pagerank(adj: NormalizedAdjacency, damping: float = 0.85,
             tol: float = 1e-10, max_iter: int = 1000) -> np.ndarray:
    """Damped power iteration on the normalized operator, L1-normalized.

    Iterates x <- damping * Â x + (1 - damping)/n until the max-abs change
    drops below ``tol``; the fixed point is then scaled to sum to 1 (Â is
    not column-stochastic, so the raw fixed point's mass is only close to 1).
    """
    if not 0.0 < damping < 1.0:
        raise ValueError(f"damping must be in (0,1), got {damping}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = adj.node_count
    x = np.full(n, 1.0 / n)
    teleport = (1.0 - damping) / n
    for _ in range(max_iter):
        x_new = damping * adj.apply(x) + teleport
        delta = float(np.max(np.abs(x_new - x)))
        x = x_new
        if delta < tol:
            return x / x.sum()
    raise ConvergenceError(f"pagerank did not converge in {max_iter} steps", delta)


def connected_components(g: Graph) -> list[np.ndarray]:
    """Connected components as sorted dense-index arrays, by smallest member."""
    seen = np.zeros(g.node_count, dtype=bool)
    comps: list[np.ndarray] = []
    for start in range(g.node_count):
        if seen[start]:
            continue
        queue = deque([start])
        seen[start] = True
        members = [start]
        while queue:
            u = queue.popleft()
            for v in g.neighbors(u):
                if not seen[v]:
                    seen[v] = True
                    members.append(int(v))
                    queue.append(int(v))
        comps.append(np.array(sorted(members), dtype=np.int64))
    return comps


def eigenvector_centrality(g: Graph, tol: float = 1e-10,
                           max_iter: int = 1000) -> np.ndarray:
    """Dominant-eigenvector centrality per connected component, unit max.

    Power iteration runs on A + I within each component (the shift keeps
    bipartite components from oscillating while preserving the Perron
    eigenvector of A). Components without edges score 0.0.
    """
    scores = np.zeros(g.node_count)
    for comp in connected_components(g):
        if len(comp) == 1:  # edgeless component, convention 0.0
            continue
        pos = {int(v): k for k, v in enumerate(comp)}
        nbrs = [np.array([pos[int(w)] for w in g.neighbors(int(v))], dtype=np.int64)
                for v in comp]
        x = np.full(len(comp), 1.0)
        delta = np.inf
        for _ in range(max_iter):
            x_new = x + np.array([x[r].sum() for r in nbrs])
            x_new /= x_new.max()
            delta = float(np.max(np.abs(x_new - x)))
            x = x_new
            if delta < tol:
                break
        else:
            raise ConvergenceError(
                f"eigenvector centrality did not converge in {max_iter} steps",
                delta)
        scores[comp] = x
    return scores


def degree_reciprocal(g: Graph) -> np.ndarray:
    """1/deg per node; isolated nodes map to 1.0 by convention."""
    deg = g.degree().astype(np.float64)
    return 1.0 / np.maximum(deg, 1.0)


def coreness(g: Graph) -> np.ndarray:
    """k-core number per node via minimum-degree peeling."""
    n = g.node_count
    deg = g.degree().astype(np.int64).copy()
    core = np.zeros(n, dtype=np.int64)
    removed = np.zeros(n, dtype=bool)
    order = list(np.argsort(deg, kind="stable"))
    # re-sorting a list-backed bucket queue is O(n^2) worst case but fine at
    # the scales this library targets; peeling order is deterministic
    import heapq
    heap = [(int(deg[i]), i) for i in range(n)]
    heapq.heapify(heap)
    current = 0
    while heap:
        d, u = heapq.heappop(heap)
        if removed[u] or d != deg[u]:
            continue
        current = max(current, d)
        core[u] = current
        removed[u] = True
        for v in g.neighbors(u):
            if not removed[v]:
                deg[v] -= 1
                heapq.heappush(heap, (int(deg[v]), int(v)))
    return core


def clustering_coefficient(g: Graph) -> np.ndarray:
    """Local clustering: 2*triangles / (deg*(deg-1)); degree < 2 maps to 0."""
    out = np.zeros(g.node_count)
    for i in range(g.node_count):
        nbrs = g.neighbors(i)
        k = len(nbrs)
        if k < 2:
            continue
        links = 0
        for u in nbrs:
            links += len(np.intersect1d(nbrs, g.neighbors(int(u)), assume_unique=True))
        out[i] = links / (k * (k - 1))  # each triangle edge counted twice
    return out


def hits(g: Graph, tol: float = 1e-10,
         max_iter: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """HITS hub/authority scores, each normalized to unit Euclidean norm.

    On the symmetrized adjacency the two vectors coincide. Graphs with no
    edges return all-zero scores.
    """
    n = g.node_count
    if g.edge_count == 0:
        return np.zeros(n), np.zeros(n)
    h = np.full(n, 1.0 / np.sqrt(n))
    a = h.copy()
    for _ in range(max_iter):
        a_new = _adj_apply(g, h)
        a_new /= np.linalg.norm(a_new)
        h_new = _adj_apply(g, a_new)
        h_new /= np.linalg.norm(h_new)
        delta = max(float(np.max(np.abs(a_new - a))),
                    float(np.max(np.abs(h_new - h))))
        a, h = a_new, h_new
        if delta < tol:
            return h, a
    raise ConvergenceError(f"hits did not converge in {max_iter} steps", delta)


def _adj_apply(g: Graph, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for i in range(g.node_count):
        nb = g.neighbors(i)
        if len(nb):
            out[i] = x[nb].sum()
    return out


def ego_activation_features(inst: "EgoInstance") -> tuple[int, float, float, int]:
    """Activation context of an instance's sampled neighborhood.

    Returns (active neighbor count, active ratio, edge density of the
    subgraph induced by active neighbors, connected components among active
    neighbors). Density is 0.0 for fewer than 2 active neighbors.
    """
    m = inst.sub_adjacency.node_count
    neighbors = [i for i in range(m) if i != inst.ego_index]
    if not neighbors:
        raise ValueError("instance has no neighbors")
    active = [i for i in neighbors if inst.neighbor_activation[i] == 1]
    count = len(active)
    ratio = count / len(neighbors)
    if count < 2:
        density = 0.0
    else:
        links = 0
        active_set = set(active)
        for i in active:
            cols, _ = inst.sub_adjacency.row_entries(i)
            links += sum(1 for j in cols if j != i and int(j) in active_set)
        density = links / (count * (count - 1))  # undirected: pairs counted twice
    # component count among active neighbors (union-find over induced edges)
    parent = {i: i for i in active}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    active_set = set(active)
    for i in active:
        cols, _ = inst.sub_adjacency.row_entries(i)
        for j in cols:
            j = int(j)
            if j != i and j in active_set:
                parent[find(i)] = find(j)
    components = len({find(i) for i in active})
    return count, ratio, density, components


def deepwalk_embed(g: Graph, dim: int = 64, walks_per_node: int = 10,
                   walk_length: int = 40, window: int = 5, negatives: int = 5,
                   epochs: int = 1, seed: int = 0) -> FeatureMatrix:
    """Skip-gram-with-negative-sampling embedding over truncated random walks.

    Uniform walks of ``walk_length`` start ``walks_per_node`` times per node
    per epoch (node order shuffled per pass). Each walk is trained as one
    mini-batch: positives from the symmetric context window, negatives drawn
    from the visit-frequency^0.75 distribution. Deterministic given ``seed``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if walk_length < 2:
        raise ValueError("walk_length must be >= 2")
    n = g.node_count
    rng = np.random.default_rng([seed, 0x5eed])
    walks: list[np.ndarray] = []
    for _ in range(epochs):
        for _ in range(walks_per_node):
            for start in rng.permutation(n):
                walk = [int(start)]
                while len(walk) < walk_length:
                    nbrs = g.neighbors(walk[-1])
                    if len(nbrs) == 0:
                        break
                    walk.append(int(nbrs[rng.integers(len(nbrs))]))
                walks.append(np.array(walk, dtype=np.int64))

    freq = np.zeros(n)
    for walk in walks:
        np.add.at(freq, walk, 1.0)
    noise = np.maximum(freq, 1.0) ** 0.75
    noise /= noise.sum()

    w_in = rng.uniform(-0.5 / dim, 0.5 / dim, size=(n, dim))
    w_out = np.zeros((n, dim))
    total_pairs = max(1, sum(max(0, len(w) - 1) for w in walks) * 2 * window)
    lr0, lr_min = 0.025, 1e-4
    done = 0
    for walk in walks:
        centers, contexts = [], []
        for i, c in enumerate(walk):
            lo, hi = max(0, i - window), min(len(walk), i + window + 1)
            for j in range(lo, hi):
                if j != i:
                    centers.append(c)
                    contexts.append(walk[j])
        if not centers:
            continue
        centers = np.array(centers)
        contexts = np.array(contexts)
        neg = rng.choice(n, size=(len(centers), negatives), p=noise)
        lr = max(lr_min, lr0 * (1.0 - done / total_pairs))
        done += len(centers)

        v = w_in[centers]                               # (P, dim)
        targets = np.concatenate([contexts[:, None], neg], axis=1)  # (P, 1+neg)
        u = w_out[targets]                              # (P, 1+neg, dim)
        logits = np.einsum("pd,pkd->pk", v, u)
        sig = 1.0 / (1.0 + np.exp(-np.clip(logits, -30, 30)))
        label = np.zeros_like(sig)
        label[:, 0] = 1.0
        err = sig - label                               # d(loss)/d(logit)
        grad_v = np.einsum("pk,pkd->pd", err, u)
        grad_u = err[:, :, None] * v[:, None, :]
        np.add.at(w_in, centers, -lr * grad_v)
        np.add.at(w_out, targets.ravel(),
                  -lr * grad_u.reshape(-1, dim))
    names = tuple(f"emb_{k}" for k in range(dim))
    return FeatureMatrix(w_in, names)


def load_embeddings(path: str | Path, g: Graph) -> FeatureMatrix:
    """Load ``id<TAB>v1<TAB>...<TAB>vd`` rows aligned to dense node order.

    Nodes absent from the file get zero rows (reported); ids absent from the
    graph are skipped with a warning. Inconsistent dimensions are an error.
    """
    path = Path(path)
    if not path.exists():
        raise GraphFormatError(f"embedding file not found: {path}")
    rows: dict[int, np.ndarray] = {}
    dim: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise GraphFormatError(f"{path}:{ln}: expected id and values")
            try:
                vec = np.array([float(v) for v in parts[1:]])
            except ValueError:
                raise GraphFormatError(
                    f"{path}:{ln}: non-numeric embedding value") from None
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise GraphFormatError(
                    f"{path}:{ln}: dimension {len(vec)} != {dim} of first row")
            try:
                rows[g.dense_index(parts[0])] = vec
            except Exception:
                logger.warning("%s:%d: id %r not in graph, skipped",
                               path, ln, parts[0])
    if dim is None:
        raise GraphFormatError(f"{path}: no embedding rows")
    values = np.zeros((g.node_count, dim))
    missing = []
    for i in range(g.node_count):
        if i in rows:
            values[i] = rows[i]
        else:
            missing.append(g.node_ids[i])
    if missing:
        logger.warning("%d nodes missing from %s, zero-filled (first: %s)",
                       len(missing), path, missing[:5])
    return FeatureMatrix(values, tuple(f"emb_{k}" for k in range(dim)))


def assemble_features(parts: Sequence[FeatureMatrix], standardize: bool = False,
                      fit_rows: np.ndarray | None = None) -> FeatureMatrix:
    """Concatenate feature blocks horizontally, optionally standardizing.

    Standardization statistics (per-column mean and std, std clamped to 1.0
    below 1e-12) are computed on ``fit_rows`` only — pass the training rows
    to avoid leaking evaluation data — and carried in the result.
    """
    if not parts:
        raise ValueError("no feature blocks given")
    n = parts[0].values.shape[0]
    for p in parts:
        if p.values.shape[0] != n:
            raise DimensionError(
                f"feature block row counts differ: {p.values.shape[0]} != {n}")
    values = np.concatenate([p.values for p in parts], axis=1)
    names = tuple(name for p in parts for name in p.column_names)
    if not standardize:
        return FeatureMatrix(values, names)
    fit = values if fit_rows is None else values[fit_rows]
    mean = fit.mean(axis=0)
    std = fit.std(axis=0)
    std = np.where(std < _STD_FLOOR, 1.0, std)
    return FeatureMatrix((values - mean) / std, names, (mean, std))


def vertex_features(g: Graph, adj: NormalizedAdjacency | None = None,
                    damping: float = 0.85, tol: float = 1e-10) -> FeatureMatrix:
    """The 8-column standard structural block (see VERTEX_COLUMNS)."""
    if adj is None:
        adj = normalize_adjacency(g)
    hub, authority = hits(g, tol=tol)
    cols = np.column_stack([
        pagerank(adj, damping=damping, tol=tol),
        eigenvector_centrality(g, tol=tol),
        degree_reciprocal(g),
        coreness(g).astype(np.float64),
        clustering_coefficient(g),
        hub,
        authority,
        g.degree().astype(np.float64),
    ])
    return FeatureMatrix(cols, VERTEX_COLUMNS)


def write_feature_csv(fm: FeatureMatrix, g: Graph, path: str | Path) -> None:
    """One row per node keyed by external id; header row = column names."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(("node_id",) + fm.column_names) + "\n")
        for i in range(g.node_count):
            row = ",".join(repr(float(v)) for v in fm.values[i])
            fh.write(f"{g.node_ids[i]},{row}\n")
