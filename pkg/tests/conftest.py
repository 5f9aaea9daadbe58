"""Shared graph builders and oracles for the test suite."""

import collections

import numpy as np
import pytest

from graphbo import build_graph


def path_graph(n, num_labels=1, labels=None):
    adjacency = np.zeros((n, n), dtype=int)
    for i in range(n - 1):
        adjacency[i, i + 1] = adjacency[i + 1, i] = 1
    return _with_labels(adjacency, num_labels, labels)


def complete_graph(n, num_labels=1, labels=None):
    adjacency = np.ones((n, n), dtype=int) - np.eye(n, dtype=int)
    return _with_labels(adjacency, num_labels, labels)


def _with_labels(adjacency, num_labels, labels):
    n = adjacency.shape[0]
    if labels is None:
        labels = [0] * n
    features = np.zeros((n, num_labels), dtype=int)
    features[np.arange(n), labels] = 1
    return build_graph(adjacency, features, directed=False, num_labels=num_labels)


def bfs_distances(adjacency, directed):
    """Independent per-source BFS oracle; unreachable pairs are -1."""
    adjacency = np.asarray(adjacency)
    n = adjacency.shape[0]
    dist = np.full((n, n), -1, dtype=int)
    for s in range(n):
        dist[s, s] = 0
        queue = collections.deque([s])
        while queue:
            u = queue.popleft()
            for v in range(n):
                if adjacency[u, v] and dist[s, v] == -1:
                    dist[s, v] = dist[s, u] + 1
                    queue.append(v)
    return dist


def random_connected_adjacency(rng, n, directed):
    """Rejection-sampled uniform connected 0/1 matrix (test-side oracle)."""
    from graphbo import is_connected

    while True:
        if directed:
            adjacency = rng.integers(0, 2, size=(n, n))
            np.fill_diagonal(adjacency, 0)
        else:
            upper = np.triu(rng.integers(0, 2, size=(n, n)), 1)
            adjacency = upper + upper.T
        if is_connected(adjacency, directed):
            return adjacency.astype(int)


def random_graph(rng, n, num_labels=1, num_features=None, directed=False):
    num_features = num_labels if num_features is None else num_features
    adjacency = random_connected_adjacency(rng, n, directed)
    features = np.zeros((n, num_features), dtype=int)
    features[np.arange(n), rng.integers(0, num_labels, size=n)] = 1
    if num_features > num_labels:
        features[:, num_labels:] = rng.integers(0, 2, size=(n, num_features - num_labels))
    return build_graph(adjacency, features, directed=directed, num_labels=num_labels)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
