"""Dependency-tree graphs, tree distances and distance-threshold masks.

Distances are path lengths in the undirected tree.  Node 0 is the [CLS]
virtual node whenever one is attached; sentence-pair graphs join the two
trees only through it.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .conllu_io import DependencyTree

__all__ = ["GraphError", "SyntaxGraph", "tree_graph", "attach_cls", "tree_distances",
           "build_mask", "dump_matrix_csv", "DEFAULT_DELTA"]

DEFAULT_DELTA = 4
CLS_ROLE = "cls"
TOKEN_ROLE = "token"


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class SyntaxGraph:
    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    roles: tuple[str, ...]

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj

    def degree(self, node: int) -> int:
        return sum((a == node) + (b == node) for a, b in self.edges)

    def is_tree(self) -> bool:
        if len(self.edges) != self.n_nodes - 1:
            return False
        seen = {0}
        todo = [0]
        adj = self.adjacency()
        while todo:
            for j in adj[todo.pop()]:
                if j not in seen:
                    seen.add(j)
                    todo.append(j)
        return len(seen) == self.n_nodes


def tree_graph(tree: DependencyTree) -> SyntaxGraph:
    """Graph on the tokens alone; token i becomes node i-1."""
    edges = tuple((h - 1, d - 1) for h, d in tree.edges())
    return SyntaxGraph(tree.n, edges, (TOKEN_ROLE,) * tree.n)


def attach_cls(trees, pair: bool = False) -> SyntaxGraph:
    """Prepend a [CLS] node linked to the root of each tree.

    ``trees`` is one tree, or a sequence of two when ``pair`` is set.
    Tokens of the first tree take nodes 1..n1, those of the second tree
    n1+1..n1+n2.
    """
    if isinstance(trees, DependencyTree):
        trees = [trees]
    trees = list(trees)
    if pair and len(trees) != 2:
        raise GraphError(f"pair=True needs two trees, got {len(trees)}")
    if not pair and len(trees) != 1:
        raise GraphError(f"pair=False needs one tree, got {len(trees)}")

    edges = []
    offset = 1
    for t in trees:
        edges.append((0, offset + t.root - 1))
        edges.extend((offset + h - 1, offset + d - 1) for h, d in t.edges())
        offset += t.n
    roles = (CLS_ROLE,) + (TOKEN_ROLE,) * (offset - 1)
    return SyntaxGraph(offset, tuple(edges), roles)


def tree_distances(g: SyntaxGraph) -> np.ndarray:
    """All-pairs path lengths (n x n int array) by BFS from every node."""
    n = g.n_nodes
    adj = g.adjacency()
    d = np.full((n, n), -1, dtype=np.int64)
    for src in range(n):
        row = d[src]
        row[src] = 0
        q = deque([src])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if row[v] < 0:
                    row[v] = row[u] + 1
                    q.append(v)
        if (row < 0).any():
            raise GraphError(f"graph is disconnected: node {int(np.argmin(row))} unreachable from {src}")
    return d


def build_mask(d: np.ndarray, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Boolean mask, True where the tree distance is at most ``delta``.

    ``delta`` may be ``math.inf`` for unrestricted attention.
    """
    if delta is None or delta == math.inf:
        return np.ones(d.shape, dtype=bool)
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    return d <= delta


def dump_matrix_csv(path, m: np.ndarray) -> None:
    np.savetxt(path, np.asarray(m, dtype=np.int64), fmt="%d", delimiter=",")
