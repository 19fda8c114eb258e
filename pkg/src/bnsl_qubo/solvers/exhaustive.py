"""Exhaustive search over the edge bits with optimal slack/order completion.

Every ``d`` vector is scored as if completed by :func:`complete_assignment`.
For acyclic ``d`` any topological order yields the same energy as the
completion (both have zero cycle energy), so energies are computed in bulk
with a depth-based order. A cyclic ``d`` always pays at least ``delta_trans``
of cycle energy, which gives a lower bound; only cyclic candidates whose
bound does not exceed the incumbent are completed explicitly.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..encoder import QuboMatrix, VariableIndexMap
from .base import Sampler, SolveResult, SolverCapExceeded, SolverParams, energies, energy, register_sampler
from .completion import complete_assignment

DEFAULT_CAP_BITS = 24
CHUNK_BITS = 16


class _Layout:
    def __init__(self, imap: VariableIndexMap):
        n = imap.n
        self.imap = imap
        pairs = imap.d_pairs()
        self.src = np.array([i for i, _ in pairs])
        self.dst = np.array([j for _, j in pairs])
        self.y_cols = np.array([[imap.y(i, l) for l in range(imap.mu)] for i in range(n)])
        rp = imap.r_pairs()
        self.r_i = np.array([i for i, _ in rp])
        self.r_j = np.array([j for _, j in rp])
        self.r_cols = np.array([imap.r(i, j) for i, j in rp])
        triples = list(itertools.combinations(range(n), 3))
        self.t_ij = np.array([imap.r(i, j) for i, j, _ in triples], dtype=int)
        self.t_jk = np.array([imap.r(j, k) for _, j, k in triples], dtype=int)
        self.t_ik = np.array([imap.r(i, k) for i, _, k in triples], dtype=int)
        self.d_ij = np.array([imap.d(i, j) for i, j in rp])
        self.d_ji = np.array([imap.d(j, i) for i, j in rp])


def _assignments(codes: np.ndarray, lay: _Layout) -> tuple[np.ndarray, np.ndarray]:
    """Bulk assignments for edge codes plus a cyclicity flag per code."""
    imap = lay.imap
    n, nd = imap.n, imap.num_d
    B = codes.shape[0]
    d = ((codes[:, None] >> np.arange(nd, dtype=np.int64)) & 1).astype(np.uint8)
    adj = np.zeros((B, n, n), dtype=np.int64)
    adj[:, lay.src, lay.dst] = d
    X = np.zeros((B, imap.total), dtype=np.uint8)
    X[:, :nd] = d
    slack = np.maximum(0, imap.m - adj.sum(axis=1))
    for l in range(imap.mu):
        X[:, lay.y_cols[:, l]] = (slack >> l) & 1
    depth = np.zeros((B, n), dtype=np.int64)
    for _ in range(n):
        depth = np.max(adj * (depth[:, :, None] + 1), axis=1)
    cyclic = depth.max(axis=1) >= n
    key = depth * n + np.arange(n)
    X[:, lay.r_cols] = key[:, lay.r_i] < key[:, lay.r_j]
    return X, cyclic


def _cycle_energy(X: np.ndarray, lay: _Layout, Q: QuboMatrix) -> np.ndarray:
    X = X.astype(float)
    a, b, c = X[:, lay.t_ij], X[:, lay.t_jk], X[:, lay.t_ik]
    trans = (c + a * b - a * c - b * c).sum(axis=1)
    r = X[:, lay.r_cols]
    dij, dji = X[:, lay.d_ij], X[:, lay.d_ji]
    consist = (dji * r + dij - dij * r).sum(axis=1)
    return Q.delta_trans * trans + Q.delta_consist * consist


def _scan(start: int, stop: int, Q: QuboMatrix, lay: _Layout):
    codes = np.arange(start, stop, dtype=np.int64)
    X, cyclic = _assignments(codes, lay)
    E = energies(Q, X)
    acyclic_E = np.where(cyclic, np.inf, E)
    k = int(np.argmin(acyclic_E))
    best = (float(acyclic_E[k]), int(codes[k]))
    bound = E - _cycle_energy(X, lay, Q) + Q.delta_trans
    return best, codes[cyclic], bound[cyclic]


def exhaustive_search(Q: QuboMatrix, cap_bits: int = DEFAULT_CAP_BITS, threads: int | None = None):
    """Global minimum over completed assignments; returns ``(x, energy, evaluated)``."""
    imap = Q.index_map
    nd = imap.num_d
    if nd > cap_bits:
        raise SolverCapExceeded(f"ES cap exceeded: {nd} edge bits > {cap_bits}")
    lay = _Layout(imap)
    total = 1 << nd
    step = 1 << min(CHUNK_BITS, nd)
    spans = [(s, min(s + step, total)) for s in range(0, total, step)]
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda sp: _scan(sp[0], sp[1], Q, lay), spans))
    else:
        parts = [_scan(a, b, Q, lay) for a, b in spans]

    # merge in span order so ties resolve to the smallest code
    best_E, best_code = np.inf, -1
    for (E, code), _, _ in parts:
        if E < best_E:
            best_E, best_code = E, code
    best_x = None
    if best_code >= 0:
        best_x = complete_assignment(_bits(best_code, nd), imap)
        best_E = energy(Q, best_x)
    tol = 1e-7 * max(1.0, abs(best_E)) if np.isfinite(best_E) else np.inf
    for _, codes, bounds in parts:
        for code in codes[bounds <= best_E + tol]:
            x = complete_assignment(_bits(int(code), nd), imap)
            e = energy(Q, x)
            if e < best_E or (e == best_E and int(code) < best_code):
                best_E, best_code, best_x = e, int(code), x
    return best_x, best_E, total


def _bits(code: int, width: int) -> np.ndarray:
    return np.array([(code >> k) & 1 for k in range(width)], dtype=np.uint8)


@register_sampler("es")
class ExhaustiveSampler(Sampler):
    def __init__(self, cap_bits: int = DEFAULT_CAP_BITS):
        self.cap_bits = cap_bits

    def solve(self, Q: QuboMatrix, params: SolverParams | None = None) -> SolveResult:
        threads = params.threads if params else None
        x, e, evaluated = exhaustive_search(Q, self.cap_bits, threads)
        return SolveResult.from_reads(x[None, :], [e], sampler=self.name, evaluated=evaluated)
