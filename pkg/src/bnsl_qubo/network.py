"""Discrete Bayesian networks, datasets and dataset generation.

CPT rows are indexed by the joint parent state written as a mixed-radix
number over the parents sorted by variable index, least-significant parent
first. The same convention is used for counting in :mod:`bnsl_qubo.encoder`
and for the enumeration order of :func:`expected_dataset`.
"""

from __future__ import annotations

import csv
import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CPT_TOLERANCE = 1e-9
DEFAULT_ENUMERATION_CAP = 2**24


class NetworkError(ValueError):
    """Raised when a network document or dataset is invalid."""


@dataclass(frozen=True)
class Variable:
    name: str
    states: tuple[str, ...]
    parents: tuple[int, ...]
    cpt: np.ndarray

    @property
    def r(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class TopologicalOrder:
    """Either a topological order or a witness cycle, never both."""

    order: list[int] | None
    cycle: list[int] | None = None

    @property
    def is_dag(self) -> bool:
        return self.order is not None


def topological_order(adjacency) -> TopologicalOrder:
    """Kahn's algorithm with smallest-index-first tie breaking.

    ``adjacency[i][j]`` nonzero means an edge i -> j. When the graph is
    cyclic, the returned ``cycle`` lists the nodes of one directed cycle in
    path order.
    """
    adj = np.asarray(adjacency) != 0
    n = adj.shape[0]
    indeg = adj.sum(axis=0).astype(int)
    heap = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        u = heapq.heappop(heap)
        order.append(u)
        for v in np.flatnonzero(adj[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, int(v))
    if len(order) == n:
        return TopologicalOrder(order=order)
    return TopologicalOrder(order=None, cycle=_find_cycle(adj, set(range(n)) - set(order)))


def _find_cycle(adj: np.ndarray, remaining: set[int]) -> list[int]:
    # Every node left over by Kahn's algorithm has a predecessor that is also
    # left over, so walking predecessors must eventually revisit a node.
    node = min(remaining)
    seen: dict[int, int] = {}
    path = []
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        preds = [int(p) for p in np.flatnonzero(adj[:, node]) if int(p) in remaining]
        node = min(preds)
    cycle = path[seen[node]:]
    cycle.reverse()
    return cycle


@dataclass(frozen=True)
class BayesNet:
    name: str
    variables: tuple[Variable, ...]

    def __post_init__(self):
        _validate(self)

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def num_states(self) -> list[int]:
        return [v.r for v in self.variables]

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=np.uint8)
        for i, var in enumerate(self.variables):
            for p in var.parents:
                adj[p, i] = 1
        return adj

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(p, i) for i, var in enumerate(self.variables) for p in var.parents]

    def order(self) -> list[int]:
        return topological_order(self.adjacency).order

    def parent_state_index(self, i: int, rows: np.ndarray) -> np.ndarray:
        """Joint parent state of variable ``i`` for every row of ``rows``."""
        return joint_state_index(rows, self.variables[i].parents, self.num_states)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "variables": [
                {
                    "name": v.name,
                    "states": list(v.states),
                    "parents": [self.variables[p].name for p in v.parents],
                    "cpt": v.cpt.tolist(),
                }
                for v in self.variables
            ],
        }


def joint_state_index(rows: np.ndarray, columns: Sequence[int], num_states: Sequence[int]) -> np.ndarray:
    """Mixed-radix index of ``rows[:, columns]``, first column least significant."""
    rows = np.asarray(rows)
    index = np.zeros(rows.shape[0], dtype=np.int64)
    radix = 1
    for c in columns:
        index += rows[:, c].astype(np.int64) * radix
        radix *= num_states[c]
    return index


def _validate(net: BayesNet) -> None:
    n = net.n
    for i, var in enumerate(net.variables):
        if var.r < 2:
            raise NetworkError(f"variable {var.name!r} needs at least two states")
        if list(var.parents) != sorted(set(var.parents)):
            raise NetworkError(f"parents of {var.name!r} must be unique and sorted by index")
        for p in var.parents:
            if not 0 <= p < n:
                raise NetworkError(f"variable {var.name!r} has invalid parent index {p}")
            if p == i:
                raise NetworkError(f"variable {var.name!r} cannot be its own parent")
        q = int(np.prod([net.variables[p].r for p in var.parents], dtype=np.int64))
        if var.cpt.shape != (q, var.r):
            raise NetworkError(
                f"state-count mismatch for {var.name!r}: cpt shape {var.cpt.shape}, expected {(q, var.r)}"
            )
        if np.any(var.cpt < 0):
            raise NetworkError(f"negative probability in cpt of {var.name!r}")
        sums = var.cpt.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > CPT_TOLERANCE)
        if bad.size:
            raise NetworkError(f"CPT row not normalized: {var.name!r} row {int(bad[0])} sums to {sums[bad[0]]:.12g}")
    topo = topological_order(net.adjacency)
    if not topo.is_dag:
        names = [net.variables[c].name for c in topo.cycle]
        raise NetworkError(f"cyclic edge set: {' -> '.join(names)}")


def network_from_dict(doc: dict) -> BayesNet:
    try:
        name = str(doc["name"])
        raw = doc["variables"]
        index = {v["name"]: i for i, v in enumerate(raw)}
        if len(index) != len(raw):
            raise NetworkError("duplicate variable names")
        variables = []
        for v in raw:
            parents = sorted(index[p] for p in v.get("parents", []))
            cpt = np.asarray(v["cpt"], dtype=float)
            if cpt.ndim == 1:
                cpt = cpt[None, :]
            variables.append(Variable(str(v["name"]), tuple(str(s) for s in v["states"]), tuple(parents), cpt))
    except NetworkError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise NetworkError(f"parse failure: {exc}") from exc
    return BayesNet(name, tuple(variables))


def load_network(document: str | Path) -> BayesNet:
    """Load a network from a JSON document string or a path to one."""
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith("{")):
        document = Path(document).read_text()
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"parse failure: {exc}") from exc
    return network_from_dict(doc)


def joint_probability(net: BayesNet, assignment: Sequence[int]) -> float:
    rows = np.asarray(assignment, dtype=np.int64)[None, :]
    return float(_joint_probabilities(net, rows)[0])


def _joint_probabilities(net: BayesNet, rows: np.ndarray) -> np.ndarray:
    if rows.shape[1] != net.n:
        raise NetworkError(f"assignment length {rows.shape[1]} != {net.n}")
    r = np.asarray(net.num_states)
    if np.any(rows < 0) or np.any(rows >= r):
        raise NetworkError("state index out of range")
    p = np.ones(rows.shape[0])
    for i, var in enumerate(net.variables):
        p *= var.cpt[net.parent_state_index(i, rows), rows[:, i]]
    return p


@dataclass(frozen=True)
class Dataset:
    variable_names: tuple[str, ...]
    num_states: tuple[int, ...]
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        rows = np.asarray(self.rows)
        if rows.ndim != 2 or rows.shape[1] != len(self.num_states):
            raise NetworkError(f"dataset has shape {rows.shape}, expected {len(self.num_states)} columns")
        if rows.size and (rows.min() < 0 or np.any(rows >= np.asarray(self.num_states))):
            raise NetworkError("dataset cell outside its variable's state range")
        if len(self.variable_names) != len(self.num_states):
            raise NetworkError("variable names and state counts differ in length")

    @property
    def n(self) -> int:
        return len(self.num_states)

    @property
    def N(self) -> int:
        return int(self.rows.shape[0])

    def project(self, indices: Sequence[int]) -> "Dataset":
        """Column slice keeping row order and count."""
        idx = list(indices)
        if any(not 0 <= i < self.n for i in idx):
            raise NetworkError(f"invalid column index in {idx}")
        return Dataset(
            tuple(self.variable_names[i] for i in idx),
            tuple(self.num_states[i] for i in idx),
            self.rows[:, idx],
        )


def empty_dataset(net: BayesNet) -> Dataset:
    return Dataset(tuple(net.names), tuple(net.num_states), np.zeros((0, net.n), dtype=np.int64))


def ancestral_sample(net: BayesNet, N: int, seed: int | None = None) -> Dataset:
    """Draw ``N`` rows in topological order, each variable given its sampled parents."""
    if N < 0:
        raise ValueError("N must be non-negative")
    rng = np.random.default_rng(seed)
    rows = np.zeros((N, net.n), dtype=np.int64)
    for i in net.order():
        var = net.variables[i]
        cumulative = np.cumsum(var.cpt, axis=1)
        cumulative[:, -1] = 1.0
        u = rng.random(N)
        j = net.parent_state_index(i, rows)
        rows[:, i] = (u[:, None] >= cumulative[j]).sum(axis=1)
    return Dataset(tuple(net.names), tuple(net.num_states), rows)


def enumerate_states(num_states: Sequence[int]) -> np.ndarray:
    """All state combinations in mixed-radix order, first variable fastest."""
    total = int(np.prod(num_states, dtype=np.int64))
    codes = np.arange(total, dtype=np.int64)
    out = np.empty((total, len(num_states)), dtype=np.int64)
    for i, r in enumerate(num_states):
        out[:, i] = codes % r
        codes //= r
    return out


def expected_dataset(net: BayesNet, N: int, cap: int = DEFAULT_ENUMERATION_CAP) -> Dataset:
    """Zero-variance dataset with floor(N * p) copies of every state combination."""
    if N < 0:
        raise ValueError("N must be non-negative")
    total = int(np.prod(net.num_states, dtype=np.int64))
    if total > cap:
        raise NetworkError(f"enumeration cap exceeded: {total} state combinations > {cap}")
    combos = enumerate_states(net.num_states)
    expected = N * _joint_probabilities(net, combos)
    # absorb representation error so that exact integers are not floored down
    copies = np.floor(expected + 1e-9 * np.maximum(1.0, expected)).astype(np.int64)
    rows = np.repeat(combos, copies, axis=0)
    return Dataset(tuple(net.names), tuple(net.num_states), rows)


def write_dataset(dataset: Dataset, path: str | Path, net: BayesNet | None = None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.variable_names)
        if net is None:
            writer.writerows(dataset.rows.tolist())
        else:
            states = [v.states for v in net.variables]
            for row in dataset.rows:
                writer.writerow([states[i][s] for i, s in enumerate(row)])


def read_dataset(path: str | Path, net: BayesNet | None = None) -> Dataset:
    """Read a CSV dataset whose cells are state names or 0-based indices.

    Without ``net`` every cell must be an integer and state counts are
    inferred as ``max + 1`` per column (at least 2).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise NetworkError(f"{path}: empty dataset file") from None
        raw = [row for row in reader if row]
    header = [h.strip() for h in header]
    if net is None:
        try:
            rows = np.array([[int(c) for c in row] for row in raw], dtype=np.int64).reshape(len(raw), len(header))
        except ValueError as exc:
            raise NetworkError(f"{path}: non-integer cell without a network: {exc}") from exc
        r = tuple(int(max(2, rows[:, i].max() + 1)) if len(raw) else 2 for i in range(len(header)))
        return Dataset(tuple(header), r, rows)

    index = {name: i for i, name in enumerate(net.names)}
    try:
        columns = [index[h] for h in header]
    except KeyError as exc:
        raise NetworkError(f"{path}: column {exc} not in network {net.name!r}") from None
    if sorted(columns) != list(range(net.n)):
        raise NetworkError(f"{path}: columns do not match network variables")
    lookup = [{s: k for k, s in enumerate(net.variables[c].states)} for c in columns]
    rows = np.empty((len(raw), net.n), dtype=np.int64)
    for t, row in enumerate(raw):
        if len(row) != len(header):
            raise NetworkError(f"{path}: row {t + 2} has {len(row)} cells")
        for pos, cell in enumerate(row):
            cell = cell.strip()
            state = lookup[pos].get(cell)
            if state is None:
                try:
                    state = int(cell)
                except ValueError:
                    raise NetworkError(f"{path}: unknown state {cell!r} in column {header[pos]!r}") from None
            rows[t, columns[pos]] = state
    return Dataset(tuple(net.names), tuple(net.num_states), rows)
