"""QUBO encoding of Bayesian network structure learning with at most two parents.

Variable layout of the QUBO vector (all 0-based):

* ``d(i, j)`` for ``i != j``, lexicographic: edge i -> j present.
* ``y(i, l)`` for ``l`` in ``0..mu-1``: slack bits of node i, ``y_i = sum 2**l y(i, l)``.
* ``r(i, j)`` for ``i < j``, lexicographic: node i precedes node j.

Energies of ``x^T Q x`` omit two constants that the full Hamiltonian carries:
the empty-parent-set weights ``sum_i w_i({})`` and the max-parent constant
``m**2 * sum_i delta_max[i]``. Both are kept in :attr:`QuboMatrix.offset`.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .network import Dataset, joint_state_index

MAX_PARENTS = 2
SLACK_BITS = math.ceil(math.log2(MAX_PARENTS + 1))

ParentSet = tuple[int, ...]


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class VariableIndexMap:
    n: int
    m: int = MAX_PARENTS
    mu: int = SLACK_BITS

    @property
    def num_d(self) -> int:
        return self.n * (self.n - 1)

    @property
    def num_y(self) -> int:
        return self.n * self.mu

    @property
    def num_r(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def total(self) -> int:
        return self.num_d + self.num_y + self.num_r

    def d(self, i: int, j: int) -> int:
        if i == j:
            raise IndexError("no d variable for a self-loop")
        return i * (self.n - 1) + (j if j < i else j - 1)

    def y(self, i: int, l: int) -> int:
        return self.num_d + i * self.mu + l

    def r(self, i: int, j: int) -> int:
        if not i < j:
            raise IndexError("r variables exist only for i < j")
        n = self.n
        return self.num_d + self.num_y + i * n - i * (i + 1) // 2 + (j - i - 1)

    def d_slice(self) -> slice:
        return slice(0, self.num_d)

    def d_pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in range(self.n) if i != j]

    def r_pairs(self) -> list[tuple[int, int]]:
        return list(itertools.combinations(range(self.n), 2))

    def roles(self) -> list[tuple[str, int, int]]:
        """Role of every QUBO index, in index order."""
        out = [("d", i, j) for i, j in self.d_pairs()]
        out += [("y", i, l) for i in range(self.n) for l in range(self.mu)]
        out += [("r", i, j) for i, j in self.r_pairs()]
        return out


def enumerate_parent_sets(n: int, i: int) -> list[ParentSet]:
    """Empty set, singletons and pairs drawn from the other ``n - 1`` variables."""
    if n < 3:
        raise EncodingError(f"at least three variables are required, got n={n}")
    others = [j for j in range(n) if j != i]
    sets: list[ParentSet] = [()]
    sets += [(j,) for j in others]
    sets += list(itertools.combinations(others, 2))
    return sets


ALPHA_RULES: dict[str, Callable[[int, int, int], float]] = {
    "inv_riqi": lambda r, q, N: 1.0 / (r * q),
    "inv_ri": lambda r, q, N: 1.0 / r,
    "one": lambda r, q, N: 1.0,
    "n_over_riqi": lambda r, q, N: N / (r * q),
}


def default_alpha(r_i: int, q: int, rule: str = "inv_riqi", N: int = 0) -> float:
    """Dirichlet hyperparameter shared by every (j, k) cell of one family."""
    try:
        return ALPHA_RULES[rule](r_i, q, N)
    except KeyError:
        raise EncodingError(f"unknown alpha rule {rule!r}; choose from {sorted(ALPHA_RULES)}") from None


def count_table(dataset: Dataset, i: int, parents: ParentSet) -> np.ndarray:
    """N_ijk as a ``(q, r_i)`` array: rows are joint parent states, columns states of ``i``."""
    r = dataset.num_states
    q = int(np.prod([r[p] for p in parents], dtype=np.int64))
    j = joint_state_index(dataset.rows, parents, r)
    flat = j * r[i] + dataset.rows[:, i]
    return np.bincount(flat, minlength=q * r[i]).reshape(q, r[i])


def count_occurrences(dataset: Dataset, i: int, parents: ParentSet, j: int, k: int) -> int:
    return int(count_table(dataset, i, parents)[j, k])


def local_score(i: int, parents: ParentSet, dataset: Dataset, alpha_rule: str = "inv_riqi") -> float:
    """Negative log marginal likelihood of family (i, parents) via log-gamma."""
    counts = count_table(dataset, i, parents)
    q, r_i = counts.shape
    a_ijk = default_alpha(r_i, q, alpha_rule, dataset.N)
    a_ij = a_ijk * r_i
    n_ij = counts.sum(axis=1)
    # differences per cell so that unobserved cells cancel exactly
    total = (gammaln(a_ij) - gammaln(n_ij + a_ij)).sum()
    total += (gammaln(counts + a_ijk) - gammaln(a_ijk)).sum()
    return float(-total)


@dataclass
class ScoreTable:
    """Local scores ``s_i(pi)`` and inclusion-exclusion weights ``w_i(pi)``."""

    scores: list[dict[ParentSet, float]]
    weights: list[dict[ParentSet, float]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.scores)

    def structure_score(self, adjacency) -> float:
        """Sum of ``s_i`` over the parent sets in ``adjacency`` (in-degree <= 2)."""
        adj = np.asarray(adjacency)
        total = 0.0
        for i in range(self.n):
            parents = tuple(int(p) for p in np.flatnonzero(adj[:, i]))
            total += self.scores[i][parents]
        return total


def compute_scores(dataset: Dataset, alpha_rule: str = "inv_riqi", threads: int | None = None) -> ScoreTable:
    n = dataset.n

    def one(i):
        return {pi: local_score(i, pi, dataset, alpha_rule) for pi in enumerate_parent_sets(n, i)}

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            scores = list(pool.map(one, range(n)))
    else:
        scores = [one(i) for i in range(n)]
    return ScoreTable(scores)


def compute_weights(scores: list[dict[ParentSet, float]]) -> list[dict[ParentSet, float]]:
    weights = []
    for s in scores:
        try:
            w = {}
            for pi in s:
                if len(pi) == 0:
                    w[pi] = s[()]
                elif len(pi) == 1:
                    w[pi] = s[pi] - s[()]
                elif len(pi) == 2:
                    a, b = pi
                    w[pi] = s[pi] - s[(a,)] - s[(b,)] + s[()]
                else:
                    raise EncodingError(f"parent set {pi} larger than {MAX_PARENTS}")
        except KeyError as exc:
            raise EncodingError(f"missing score entry {exc}") from None
        weights.append(w)
    return weights


def compute_deltas(weights: list[dict[ParentSet, float]]) -> np.ndarray:
    """``delta[j, i]``: bound on the score gain of adding arc j -> i."""
    n = len(weights)
    delta = np.zeros((n, n))
    for i, w in enumerate(weights):
        for j in range(n):
            if j == i:
                continue
            pairs = sum(min(0.0, w[tuple(sorted((j, k)))]) for k in range(n) if k not in (i, j))
            delta[j, i] = max(0.0, -w[(j,)] - pairs)
    return delta


def compute_penalties(delta: np.ndarray, n: int, multiplier: float = 1.0) -> tuple[np.ndarray, float, float]:
    """Penalty weights set to their lower bounds plus one, times ``multiplier``."""
    if multiplier < 1.0:
        raise EncodingError("penalty multiplier must be >= 1")
    off = ~np.eye(n, dtype=bool)
    delta_max = np.array([delta[off[:, i], i].max() + 1.0 for i in range(n)])
    delta_trans = delta[off].max() + 1.0
    delta_consist = (n - 2) * delta_trans + 1.0
    return delta_max * multiplier, float(delta_trans * multiplier), float(delta_consist * multiplier)


@dataclass
class QuboMatrix:
    matrix: np.ndarray
    index_map: VariableIndexMap
    delta_max: np.ndarray
    delta_trans: float
    delta_consist: float
    score_table: ScoreTable | None = None
    alpha_rule: str = "inv_riqi"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.index_map.n

    @property
    def max_parent_constant(self) -> float:
        return float(self.index_map.m**2 * self.delta_max.sum())

    @property
    def offset(self) -> float:
        """Constant dropped from ``Q``: ``H(x) = x^T Q x + offset``."""
        empty = sum(w[()] for w in self.score_table.weights) if self.score_table else 0.0
        return self.max_parent_constant + empty

    def nonzero(self) -> list[tuple[int, int, float]]:
        rows, cols = np.nonzero(self.matrix)
        return [(int(a), int(b), float(self.matrix[a, b])) for a, b in zip(rows, cols)]

    def save(self, path: str | Path) -> Path:
        """Write the text export and its ``.json`` role sidecar; returns the sidecar path."""
        path = Path(path)
        lines = [f"dim {self.dim} n {self.n} m {self.index_map.m}"]
        lines += [f"{a} {b} {v!r}" for a, b, v in self.nonzero()]
        lines += [f"delta_max {i} {float(v)!r}" for i, v in enumerate(self.delta_max)]
        lines.append(f"delta_trans {self.delta_trans!r}")
        lines.append(f"delta_consist {self.delta_consist!r}")
        path.write_text("\n".join(lines) + "\n")
        sidecar = path.with_suffix(path.suffix + ".json")
        roles = [{"index": k, "role": role, "i": i, "j": j} for k, (role, i, j) in enumerate(self.index_map.roles())]
        sidecar.write_text(json.dumps({"n": self.n, "m": self.index_map.m, "mu": self.index_map.mu, "roles": roles}, indent=1))
        return sidecar

    @classmethod
    def load(cls, path: str | Path) -> "QuboMatrix":
        lines = Path(path).read_text().split("\n")
        head = lines[0].split()
        try:
            dim, n, m = int(head[1]), int(head[3]), int(head[5])
        except (IndexError, ValueError):
            raise EncodingError(f"{path}: malformed header {lines[0]!r}") from None
        if m != MAX_PARENTS:
            raise EncodingError("only m = 2 encodings are supported")
        imap = VariableIndexMap(n)
        if imap.total != dim:
            raise EncodingError(f"{path}: dim {dim} inconsistent with n {n}")
        matrix = np.zeros((dim, dim))
        delta_max = np.zeros(n)
        delta_trans = delta_consist = 0.0
        for line in lines[1:]:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "delta_max":
                delta_max[int(parts[1])] = float(parts[2])
            elif parts[0] == "delta_trans":
                delta_trans = float(parts[1])
            elif parts[0] == "delta_consist":
                delta_consist = float(parts[1])
            else:
                a, b = int(parts[0]), int(parts[1])
                if a > b:
                    raise EncodingError(f"{path}: entry below the diagonal at ({a}, {b})")
                matrix[a, b] = float(parts[2])
        return cls(matrix, imap, delta_max, delta_trans, delta_consist)


def fill_qubo(
    imap: VariableIndexMap,
    weights: list[dict[ParentSet, float]],
    delta_max: np.ndarray,
    delta_trans: float,
    delta_consist: float,
) -> np.ndarray:
    n, m = imap.n, imap.m
    Q = np.zeros((imap.total, imap.total))

    def add(a: int, b: int, value: float) -> None:
        if a > b:
            a, b = b, a
        Q[a, b] += value

    for i in range(n):
        for pi, w in weights[i].items():
            if len(pi) == 1:
                add(imap.d(pi[0], i), imap.d(pi[0], i), w)
            elif len(pi) == 2:
                add(imap.d(pi[0], i), imap.d(pi[1], i), w)

        # (m - d_i - y_i)^2 with the constant m^2 dropped
        terms = [(imap.d(j, i), -1.0) for j in range(n) if j != i]
        terms += [(imap.y(i, l), -float(2**l)) for l in range(imap.mu)]
        for a, (va, ca) in enumerate(terms):
            add(va, va, delta_max[i] * (ca * ca + 2 * m * ca))
            for vb, cb in terms[a + 1:]:
                add(va, vb, delta_max[i] * 2 * ca * cb)

        for j in range(i + 1, n):
            for k in range(j + 1, n):
                add(imap.r(i, k), imap.r(i, k), delta_trans)
                add(imap.r(i, j), imap.r(j, k), delta_trans)
                add(imap.r(i, j), imap.r(i, k), -delta_trans)
                add(imap.r(i, k), imap.r(j, k), -delta_trans)
            add(imap.d(j, i), imap.r(i, j), delta_consist)
            add(imap.d(i, j), imap.d(i, j), delta_consist)
            add(imap.d(i, j), imap.r(i, j), -delta_consist)
    return Q


def build_qubo(
    dataset: Dataset,
    alpha_rule: str = "inv_riqi",
    penalty_multiplier: float = 1.0,
    m: int = MAX_PARENTS,
    threads: int | None = None,
) -> QuboMatrix:
    """Encode the structure-learning problem of ``dataset`` as an upper-triangular QUBO."""
    if m != MAX_PARENTS:
        raise EncodingError(f"only m = {MAX_PARENTS} is supported, got m = {m}")
    n = dataset.n
    if n < 3:
        raise EncodingError(f"at least three variables are required, got n={n}")
    table = compute_scores(dataset, alpha_rule, threads)
    table.weights = compute_weights(table.scores)
    delta = compute_deltas(table.weights)
    delta_max, delta_trans, delta_consist = compute_penalties(delta, n, penalty_multiplier)
    imap = VariableIndexMap(n)
    Q = fill_qubo(imap, table.weights, delta_max, delta_trans, delta_consist)
    return QuboMatrix(Q, imap, delta_max, delta_trans, delta_consist, table, alpha_rule)
