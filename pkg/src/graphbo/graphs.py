"""Attributed-graph data model, shortest paths, enumeration, and sampling.

Graphs are connected simple graphs (strongly connected when directed) with a
binary node-feature matrix whose first ``num_labels`` columns one-hot encode a
node label. All objects are immutable after construction.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    AsymmetricUndirectedError,
    BadOneHotError,
    DisconnectedError,
    DomainTooLargeError,
    InvalidSizeBoundsError,
    NonSquareError,
    SamplingExhaustedError,
    SelfLoopError,
)

ENUMERATION_BIT_CAP = 24
SAMPLING_ATTEMPTS = 1000
EXTRA_EDGE_PROB = 0.5


def _as_binary_matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise NonSquareError(f"{name} must be a 2-d matrix, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise NonSquareError(f"{name} must contain only 0/1 entries")
    return arr.astype(np.int8)


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """A connected graph plus a binary node-feature matrix.

    ``adjacency`` is n x n with zero diagonal (no self-loops; the diagonal is
    reserved for the node-existence device inside the optimization model).
    ``features`` is n x M with the first ``num_labels`` columns one-hot.
    """

    adjacency: np.ndarray
    features: np.ndarray
    directed: bool
    num_labels: int

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @cached_property
    def labels(self) -> np.ndarray:
        """Per-node label index, from the one-hot block."""
        return np.argmax(self.features[:, : self.num_labels], axis=1)

    @cached_property
    def summary(self) -> "ShortestPathSummary":
        return summarize(self)

    def edges(self) -> list[tuple[int, int]]:
        """Edge list; unordered pairs (u < v) for undirected graphs."""
        if self.directed:
            us, vs = np.nonzero(self.adjacency)
            return list(zip(us.tolist(), vs.tolist()))
        us, vs = np.nonzero(np.triu(self.adjacency))
        return list(zip(us.tolist(), vs.tolist()))

    def key(self) -> tuple:
        """Hashable identity: structure plus features plus scheme."""
        return (
            self.n,
            self.directed,
            self.num_labels,
            self.adjacency.tobytes(),
            self.features.tobytes(),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, AttributedGraph):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def to_dict(self) -> dict:
        return {
            "directed": self.directed,
            "n": self.n,
            "edges": [[int(u), int(v)] for u, v in self.edges()],
            "features": self.features.astype(int).tolist(),
            "num_labels": self.num_labels,
        }

    @staticmethod
    def from_dict(obj: dict) -> "AttributedGraph":
        n = int(obj["n"])
        directed = bool(obj["directed"])
        adjacency = np.zeros((n, n), dtype=np.int8)
        for u, v in obj["edges"]:
            adjacency[u, v] = 1
            if not directed:
                adjacency[v, u] = 1
        return build_graph(
            adjacency,
            np.asarray(obj["features"]),
            directed=directed,
            num_labels=int(obj["num_labels"]),
        )


@dataclass(frozen=True, eq=False)
class ShortestPathSummary:
    """Shortest-path statistics of a connected graph.

    ``dist[u, v]`` is the shortest distance, ``on_path[u, v, w]`` flags
    whether w lies on some shortest u-v path, ``length_counts[s]`` counts
    ordered pairs at distance s, ``labeled_counts[s, l1, l2]`` splits them by
    endpoint labels, and ``feature_sums[m]`` is the m-th feature column sum.
    """

    dist: np.ndarray
    on_path: np.ndarray
    length_counts: np.ndarray
    labeled_counts: np.ndarray
    feature_sums: np.ndarray

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def num_labels(self) -> int:
        return self.labeled_counts.shape[1]


def build_graph(adjacency, features, directed: bool = False,
                num_labels: int | None = None) -> AttributedGraph:
    """Validate raw matrices and return an immutable attributed graph.

    Raises NonSquareError, SelfLoopError, AsymmetricUndirectedError,
    BadOneHotError, or DisconnectedError on invalid input.
    """
    adjacency = _as_binary_matrix(adjacency, "adjacency")
    n = adjacency.shape[0]
    if adjacency.shape != (n, n) or n == 0:
        raise NonSquareError(f"adjacency must be square and nonempty, got {adjacency.shape}")
    if np.any(np.diag(adjacency)):
        raise SelfLoopError("adjacency has a nonzero diagonal entry")
    if not directed and not np.array_equal(adjacency, adjacency.T):
        raise AsymmetricUndirectedError("undirected adjacency must be symmetric")

    features = _as_binary_matrix(features, "features")
    if features.shape[0] != n:
        raise BadOneHotError(
            f"features must have one row per node: {features.shape[0]} != {n}")
    num_labels = features.shape[1] if num_labels is None else int(num_labels)
    if not 1 <= num_labels <= features.shape[1]:
        raise BadOneHotError(
            f"num_labels must lie in [1, {features.shape[1]}], got {num_labels}")
    if np.any(features[:, :num_labels].sum(axis=1) != 1):
        raise BadOneHotError("each node's first num_labels columns must sum to 1")

    if not is_connected(adjacency, directed):
        raise DisconnectedError("graph must be connected (strongly, if directed)")

    adjacency = adjacency.copy()
    features = features.copy()
    adjacency.setflags(write=False)
    features.setflags(write=False)
    return AttributedGraph(adjacency, features, bool(directed), num_labels)


def _all_pairs_distances(adjacency: np.ndarray) -> np.ndarray:
    """Floyd-Warshall distances; unreachable pairs are +inf."""
    n = adjacency.shape[0]
    dist = np.where(adjacency > 0, 1.0, np.inf)
    np.fill_diagonal(dist, 0.0)
    for w in range(n):
        np.minimum(dist, dist[:, w : w + 1] + dist[w : w + 1, :], out=dist)
    return dist


def is_connected(adjacency, directed: bool) -> bool:
    """True iff every ordered node pair is joined by a path.

    Accepts a raw 0/1 adjacency matrix, so it can vet candidate structures
    before graph construction.
    """
    adjacency = np.asarray(adjacency)
    n = adjacency.shape[0]
    if n == 1:
        return True
    reach_fwd = _reachable_from(adjacency, 0)
    if not reach_fwd.all():
        return False
    if not directed:
        return True
    return _reachable_from(adjacency.T, 0).all()


def _reachable_from(adjacency: np.ndarray, source: int) -> np.ndarray:
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[source] = True
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.nonzero(adjacency[u])[0]:
                if not seen[v]:
                    seen[v] = True
                    nxt.append(int(v))
        frontier = nxt
    return seen


def floyd_warshall(graph: AttributedGraph) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs shortest distances and the on-path indicator tensor.

    ``on_path[u, v, w] = 1`` iff d(u, w) + d(w, v) = d(u, v); on the diagonal
    this leaves exactly ``on_path[v, v, v] = 1``.
    """
    dist = _all_pairs_distances(graph.adjacency)
    if not np.isfinite(dist).all():
        raise DisconnectedError("graph must be connected")
    dist = dist.astype(np.int64)
    # on_path[u, v, w] <- dist[u, w] + dist[w, v] == dist[u, v]
    on_path = (dist[:, None, :] + dist.T[None, :, :] == dist[:, :, None])
    return dist, on_path.astype(np.int8)


def summarize(graph: AttributedGraph) -> ShortestPathSummary:
    """Shortest-path statistics used by every kernel."""
    dist, on_path = floyd_warshall(graph)
    n = graph.n
    length_counts = np.bincount(dist.ravel(), minlength=n)[:n]
    labels = graph.labels
    L = graph.num_labels
    labeled_counts = np.zeros((n, L, L), dtype=np.int64)
    lab_u = np.repeat(labels, n)
    lab_v = np.tile(labels, n)
    np.add.at(labeled_counts, (dist.ravel(), lab_u, lab_v), 1)
    feature_sums = graph.features.sum(axis=0).astype(np.int64)
    return ShortestPathSummary(dist, on_path, length_counts.astype(np.int64),
                               labeled_counts, feature_sums)


# ---------------------------------------------------------------------------
# search domains


@dataclass(frozen=True)
class LinearRow:
    """A user-supplied linear constraint over adjacency/feature bits.

    Coefficient triples are (u, v, coef) over adjacency entries and
    (v, m, coef) over feature entries; indices refer to the size-n grid of
    the domain and contribute zero for nodes absent from a smaller graph.
    """

    adjacency: tuple[tuple[int, int, float], ...] = ()
    features: tuple[tuple[int, int, float], ...] = ()
    sense: str = "<="
    rhs: float = 0.0

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "=="):
            raise ValueError(f"unknown sense {self.sense!r}")
        object.__setattr__(self, "adjacency",
                           tuple((int(u), int(v), float(c)) for u, v, c in self.adjacency))
        object.__setattr__(self, "features",
                           tuple((int(v), int(m), float(c)) for v, m, c in self.features))

    def holds(self, value: float, tol: float = 1e-9) -> bool:
        if self.sense == "<=":
            return value <= self.rhs + tol
        if self.sense == ">=":
            return value >= self.rhs - tol
        return abs(value - self.rhs) <= tol


@dataclass(frozen=True)
class DomainSpec:
    """Search domain: graph size (fixed or bounded), label/feature scheme,
    and optional structural constraints.

    ``degree_caps[l]`` caps the (in-)degree of nodes with label l.
    ``label_count_bounds[l]`` bounds how many nodes carry label l.
    """

    n: int
    n_min: int | None = None
    directed: bool = False
    num_labels: int = 1
    num_features: int | None = None
    degree_caps: tuple[int, ...] | None = None
    label_count_bounds: tuple[tuple[int, int], ...] | None = None
    extra_rows: tuple[LinearRow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.n))
        n_min = self.n if self.n_min is None else int(self.n_min)
        object.__setattr__(self, "n_min", n_min)
        if not 1 <= n_min <= self.n:
            raise InvalidSizeBoundsError(f"need 1 <= n_min <= n, got [{n_min}, {self.n}]")
        m = self.num_labels if self.num_features is None else int(self.num_features)
        object.__setattr__(self, "num_features", m)
        if not 1 <= self.num_labels <= m:
            raise InvalidSizeBoundsError(
                f"need 1 <= num_labels <= num_features, got {self.num_labels} > {m}")
        if self.degree_caps is not None:
            caps = tuple(int(c) for c in self.degree_caps)
            if len(caps) != self.num_labels or any(c < 0 for c in caps):
                raise InvalidSizeBoundsError("degree_caps must be one nonnegative cap per label")
            object.__setattr__(self, "degree_caps", caps)
        if self.label_count_bounds is not None:
            bounds = tuple((int(lo), int(hi)) for lo, hi in self.label_count_bounds)
            if len(bounds) != self.num_labels:
                raise InvalidSizeBoundsError("label_count_bounds must cover every label")
            object.__setattr__(self, "label_count_bounds", bounds)
        object.__setattr__(self, "extra_rows", tuple(self.extra_rows))

    @property
    def fixed_size(self) -> bool:
        return self.n_min == self.n

    @property
    def sizes(self) -> range:
        return range(self.n_min, self.n + 1)

    def to_dict(self) -> dict:
        out: dict = {
            "n": self.n,
            "directed": self.directed,
            "num_labels": self.num_labels,
            "num_features": self.num_features,
        }
        if not self.fixed_size:
            out["n_min"] = self.n_min
        if self.degree_caps is not None:
            out["degree_caps"] = list(self.degree_caps)
        if self.label_count_bounds is not None:
            out["label_count_bounds"] = [list(b) for b in self.label_count_bounds]
        if self.extra_rows:
            out["extra_rows"] = [
                {
                    "adjacency": [list(t) for t in row.adjacency],
                    "features": [list(t) for t in row.features],
                    "sense": row.sense,
                    "rhs": row.rhs,
                }
                for row in self.extra_rows
            ]
        return out

    @staticmethod
    def from_dict(obj: dict) -> "DomainSpec":
        known = {"n", "n_min", "directed", "num_labels", "num_features",
                 "degree_caps", "label_count_bounds", "extra_rows"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown domain keys: {sorted(unknown)}")
        n = obj["n"]
        n_min = obj.get("n_min")
        if isinstance(n, (list, tuple)):
            n_min, n = n
        rows = tuple(
            LinearRow(
                adjacency=tuple(tuple(t) for t in r.get("adjacency", ())),
                features=tuple(tuple(t) for t in r.get("features", ())),
                sense=r.get("sense", "<="),
                rhs=float(r.get("rhs", 0.0)),
            )
            for r in obj.get("extra_rows", ())
        )
        caps = obj.get("degree_caps")
        bounds = obj.get("label_count_bounds")
        return DomainSpec(
            n=n,
            n_min=n_min,
            directed=bool(obj.get("directed", False)),
            num_labels=int(obj.get("num_labels", 1)),
            num_features=obj.get("num_features"),
            degree_caps=None if caps is None else tuple(caps),
            label_count_bounds=None if bounds is None else tuple(tuple(b) for b in bounds),
            extra_rows=rows,
        )


def row_value(row: LinearRow, adjacency: np.ndarray, features: np.ndarray) -> float:
    """Evaluate a user row on (possibly smaller-than-grid) realized matrices."""
    n, m = features.shape
    total = 0.0
    for u, v, c in row.adjacency:
        if u < n and v < n:
            total += c * float(adjacency[u, v])
    for v, f, c in row.features:
        if v < n and f < m:
            total += c * float(features[v, f])
    return total


def domain_feasible(domain: DomainSpec, graph: AttributedGraph) -> bool:
    """True iff the graph satisfies every domain constraint."""
    if graph.directed != domain.directed:
        return False
    if not domain.n_min <= graph.n <= domain.n:
        return False
    if graph.num_labels != domain.num_labels or graph.num_features != domain.num_features:
        return False
    if domain.degree_caps is not None:
        in_degree = graph.adjacency.sum(axis=0)
        caps = np.asarray(domain.degree_caps)[graph.labels]
        if np.any(in_degree > caps):
            return False
    if domain.label_count_bounds is not None:
        counts = graph.features[:, : domain.num_labels].sum(axis=0)
        for label, (lo, hi) in enumerate(domain.label_count_bounds):
            if not lo <= counts[label] <= hi:
                return False
    for row in domain.extra_rows:
        if not row.holds(row_value(row, graph.adjacency, graph.features)):
            return False
    return True


# ---------------------------------------------------------------------------
# exhaustive enumeration (the brute-force oracle)


def _free_adjacency_pairs(n: int, directed: bool) -> list[tuple[int, int]]:
    if directed:
        return [(u, v) for u in range(n) for v in range(n) if u != v]
    return [(u, v) for u in range(n) for v in range(u + 1, n)]

def domain_bit_count(domain: DomainSpec) -> int:
    """Structural bits of the largest size: adjacency + label + extra features."""
    n = domain.n
    adj_bits = len(_free_adjacency_pairs(n, domain.directed))
    label_bits = n * math.ceil(math.log2(domain.num_labels)) if domain.num_labels > 1 else 0
    extra_bits = n * (domain.num_features - domain.num_labels)
    return adj_bits + label_bits + extra_bits


def _feature_rows(domain: DomainSpec) -> list[tuple[int, ...]]:
    """All admissible per-node feature rows, sorted as bit tuples."""
    L, M = domain.num_labels, domain.num_features
    rows = []
    for label in range(L):
        onehot = [0] * L
        onehot[label] = 1
        for extra in itertools.product((0, 1), repeat=M - L):
            rows.append(tuple(onehot) + extra)
    return sorted(rows)


def enumerate_domain(domain: DomainSpec,
                     bit_cap: int = ENUMERATION_BIT_CAP) -> Iterator[AttributedGraph]:
    """Yield every connected graph in the domain exactly once.

    Sizes ascend; within a size the order is lexicographic over the flattened
    adjacency bits and then the flattened feature bits.
    """
    bits = domain_bit_count(domain)
    if bits > bit_cap:
        raise DomainTooLargeError(
            f"domain needs {bits} structural bits, cap is {bit_cap}")
    feature_rows = _feature_rows(domain)
    for n in domain.sizes:
        pairs = _free_adjacency_pairs(n, domain.directed)
        for adj_bits in itertools.product((0, 1), repeat=len(pairs)):
            adjacency = np.zeros((n, n), dtype=np.int8)
            for (u, v), bit in zip(pairs, adj_bits):
                adjacency[u, v] = bit
                if not domain.directed:
                    adjacency[v, u] = bit
            if not is_connected(adjacency, domain.directed):
                continue
            for rows in itertools.product(feature_rows, repeat=n):
                features = np.array(rows, dtype=np.int8)
                graph = build_graph(adjacency, features, domain.directed,
                                    domain.num_labels)
                if domain_feasible(domain, graph):
                    yield graph


# ---------------------------------------------------------------------------
# feasible-graph sampling


def _prufer_tree_edges(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform random labeled tree on n nodes (Prufer decoding)."""
    if n <= 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = rng.integers(0, n, size=n - 2)
    degree = np.ones(n, dtype=np.int64)
    for x in seq:
        degree[x] += 1
    edges = []
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, int(x)))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, int(x))
    u = heapq.heappop(leaves)
    v = heapq.heappop(leaves)
    edges.append((u, v))
    return edges


def _sample_structure(n: int, directed: bool, rng: np.random.Generator) -> np.ndarray:
    """Random connected structure: random spanning tree (undirected) or a
    random Hamiltonian cycle (directed), plus independent extra edges."""
    adjacency = np.zeros((n, n), dtype=np.int8)
    if directed:
        if n >= 2:
            order = rng.permutation(n)
            for i in range(n):
                adjacency[order[i], order[(i + 1) % n]] = 1
        for u in range(n):
            for v in range(n):
                if u != v and adjacency[u, v] == 0 and rng.random() < EXTRA_EDGE_PROB:
                    adjacency[u, v] = 1
    else:
        for u, v in _prufer_tree_edges(n, rng):
            adjacency[u, v] = adjacency[v, u] = 1
        for u in range(n):
            for v in range(u + 1, n):
                if adjacency[u, v] == 0 and rng.random() < EXTRA_EDGE_PROB:
                    adjacency[u, v] = adjacency[v, u] = 1
    return adjacency


def _sample_one(domain: DomainSpec, rng: np.random.Generator) -> AttributedGraph:
    n = int(rng.integers(domain.n_min, domain.n + 1))
    adjacency = _sample_structure(n, domain.directed, rng)
    L, M = domain.num_labels, domain.num_features
    features = np.zeros((n, M), dtype=np.int8)
    labels = rng.integers(0, L, size=n)
    features[np.arange(n), labels] = 1
    if M > L:
        features[:, L:] = rng.integers(0, 2, size=(n, M - L))
    return build_graph(adjacency, features, domain.directed, L)


def sample_feasible(domain: DomainSpec, seed, attempts: int = SAMPLING_ATTEMPTS) -> AttributedGraph:
    """One random connected graph satisfying every domain constraint.

    Deterministic for a given seed (an int or a numpy Generator). Structures
    come from a spanning tree / Hamiltonian-cycle backbone with independent
    extra edges, so connectivity holds by construction; remaining domain
    constraints are enforced by rejection within the attempt budget.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for _ in range(attempts):
        graph = _sample_one(domain, rng)
        if domain_feasible(domain, graph):
            return graph
    raise SamplingExhaustedError(
        f"no feasible sample found in {attempts} attempts")


# ---------------------------------------------------------------------------
# file formats


def write_graphs(path, graphs: Iterable[AttributedGraph],
                 ids: Sequence[str] | None = None) -> None:
    """One JSON object per line; optional ``id`` field per graph."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, graph in enumerate(graphs):
            obj = graph.to_dict()
            if ids is not None:
                obj["id"] = ids[i]
            fh.write(json.dumps(obj) + "\n")


def read_graphs(path) -> list[AttributedGraph]:
    graphs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                graphs.append(AttributedGraph.from_dict(json.loads(line)))
    return graphs


def write_dataset(path, data: Iterable[tuple[AttributedGraph, float]]) -> None:
    """JSON array of {graph, y} records."""
    payload = [{"graph": g.to_dict(), "y": float(y)} for g, y in data]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def read_dataset(path) -> tuple[list[AttributedGraph], np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    graphs = [AttributedGraph.from_dict(rec["graph"]) for rec in payload]
    y = np.array([float(rec["y"]) for rec in payload])
    return graphs, y
