"""Best slack and order bits for a fixed edge configuration."""

from __future__ import annotations

import itertools

import numpy as np

from ..encoder import QuboMatrix, VariableIndexMap
from ..network import topological_order


def _index_map(target) -> VariableIndexMap:
    return target.index_map if isinstance(target, QuboMatrix) else target


def d_to_adjacency(d, imap: VariableIndexMap) -> np.ndarray:
    adj = np.zeros((imap.n, imap.n), dtype=np.uint8)
    for k, (i, j) in enumerate(imap.d_pairs()):
        adj[i, j] = d[k]
    return adj


def slack_value(in_degree: int, m: int) -> int:
    """Slack zeroing the max-parent term, or 0 when the node has too many parents."""
    return max(0, m - in_degree)


def completed_order(adjacency) -> list[int]:
    """Total order of the nodes used to set the ``r`` bits.

    For a DAG, the graph is completed one unordered pair at a time (i < j,
    lexicographic): i -> j is added unless j already reaches i, in which case
    j -> i is added. The topological order of the resulting tournament is
    returned. For a cyclic graph, nodes are ordered by decreasing DFS finish
    time, with roots and neighbours visited by increasing index.
    """
    adj = np.asarray(adjacency) != 0
    n = adj.shape[0]
    if not topological_order(adj).is_dag:
        return _reverse_finish_order(adj)
    reach = _transitive_closure(adj)
    full = adj.copy()
    for i, j in itertools.combinations(range(n), 2):
        if full[i, j] or full[j, i]:
            continue
        a, b = (j, i) if reach[j, i] else (i, j)
        full[a, b] = True
        reach |= np.outer(reach[:, a], reach[b, :])
    return topological_order(full).order


def _transitive_closure(adj: np.ndarray) -> np.ndarray:
    n = adj.shape[0]
    reach = adj | np.eye(n, dtype=bool)
    for k in range(n):
        reach |= np.outer(reach[:, k], reach[k, :])
    return reach


def _reverse_finish_order(adj: np.ndarray) -> list[int]:
    n = adj.shape[0]
    visited = np.zeros(n, dtype=bool)
    finished: list[int] = []
    for root in range(n):
        if visited[root]:
            continue
        visited[root] = True
        stack = [(root, iter(np.flatnonzero(adj[root]).tolist()))]
        while stack:
            node, children = stack[-1]
            for child in children:
                if not visited[child]:
                    visited[child] = True
                    stack.append((child, iter(np.flatnonzero(adj[child]).tolist())))
                    break
            else:
                stack.pop()
                finished.append(node)
    return finished[::-1]


def complete_assignment(d, target) -> np.ndarray:
    """Full QUBO assignment from the edge bits ``d``.

    ``target`` is a :class:`QuboMatrix` or a :class:`VariableIndexMap`.
    """
    imap = _index_map(target)
    d = np.asarray(d).astype(np.uint8)
    if d.shape != (imap.num_d,):
        raise ValueError(f"expected {imap.num_d} edge bits, got {d.shape}")
    adj = d_to_adjacency(d, imap)
    x = np.zeros(imap.total, dtype=np.uint8)
    x[: imap.num_d] = d
    for i, deg in enumerate(adj.sum(axis=0)):
        y = slack_value(int(deg), imap.m)
        for l in range(imap.mu):
            x[imap.y(i, l)] = (y >> l) & 1
    position = {node: p for p, node in enumerate(completed_order(adj))}
    for i, j in imap.r_pairs():
        x[imap.r(i, j)] = position[i] < position[j]
    return x


def structure_to_assignment(adjacency, target) -> np.ndarray:
    imap = _index_map(target)
    adj = np.asarray(adjacency)
    d = np.array([adj[i, j] for i, j in imap.d_pairs()], dtype=np.uint8)
    return complete_assignment(d, imap)
