"""Minimum spanning tree with deterministic tie-breaking.

Kruskal over the complete graph: edges are sorted by (weight, i, j), so
ties always resolve toward the lexicographically smaller index pair and
the result is reproducible across platforms.
"""

from __future__ import annotations

import numpy as np

from trajvis.errors import ValidationError


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def mst(points_or_weights) -> list[tuple[int, int]]:
    """Edge list (i < j, sorted) of the minimum spanning tree.

    Accepts either an M x 2 coordinate matrix (Euclidean weights) or an
    explicit square symmetric weight matrix.
    """
    arr = np.asarray(points_or_weights, dtype=float)
    if arr.ndim != 2:
        raise ValidationError("mst expects a 2-D array")
    if not np.isfinite(arr).all():
        raise ValidationError("mst input contains non-finite values")
    if arr.shape[0] == arr.shape[1] and arr.shape[1] != 2:
        weights = arr
    elif arr.shape[1] == 2 and arr.shape[0] != 2:
        weights = pairwise_distances(arr)
    elif arr.shape == (2, 2):
        # ambiguous 2x2: treat as two 2-D points
        weights = pairwise_distances(arr)
    else:
        raise ValidationError(f"mst expects M x 2 points or an M x M weight matrix, got {arr.shape}")

    m = weights.shape[0]
    if m == 0:
        raise ValidationError("mst needs at least one node")
    if m == 1:
        return []
    iu, ju = np.triu_indices(m, k=1)
    w = weights[iu, ju]
    order = np.lexsort((ju, iu, w))
    uf = UnionFind(m)
    edges: list[tuple[int, int]] = []
    for k in order:
        i, j = int(iu[k]), int(ju[k])
        if uf.union(i, j):
            edges.append((i, j))
            if len(edges) == m - 1:
                break
    edges.sort()
    return edges


def is_spanning_tree(n_nodes: int, edges) -> bool:
    """Union-find check: exactly n-1 edges, no cycle, all connected."""
    if len(edges) != n_nodes - 1:
        return False
    uf = UnionFind(n_nodes)
    for i, j in edges:
        if not uf.union(int(i), int(j)):
            return False
    return True


def node_degrees(n_nodes: int, edges) -> list[int]:
    deg = [0] * n_nodes
    for i, j in edges:
        deg[int(i)] += 1
        deg[int(j)] += 1
    return deg


def adjacency(n_nodes: int, edges) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n_nodes)]
    for i, j in edges:
        adj[int(i)].append(int(j))
        adj[int(j)].append(int(i))
    for neighbors in adj:
        neighbors.sort()
    return adj
