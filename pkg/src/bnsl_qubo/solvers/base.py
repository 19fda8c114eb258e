from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..encoder import QuboMatrix, VariableIndexMap
from ..network import topological_order

MatrixLike = Union[QuboMatrix, np.ndarray]


class SolverError(RuntimeError):
    pass


class SolverCapExceeded(SolverError):
    pass


def _as_matrix(Q: MatrixLike) -> np.ndarray:
    return Q.matrix if isinstance(Q, QuboMatrix) else np.asarray(Q, dtype=float)


def energy(Q: MatrixLike, x) -> float:
    """``x^T Q x`` for a binary vector; only the upper triangle of ``Q`` is read."""
    M = _as_matrix(Q)
    x = np.asarray(x, dtype=float)
    if x.shape != (M.shape[0],):
        raise ValueError(f"assignment length {x.shape} does not match dimension {M.shape[0]}")
    return float(x @ np.triu(M) @ x)


def energies(Q: MatrixLike, X) -> np.ndarray:
    """Row-wise ``x^T Q x`` for a batch of assignments."""
    M = np.triu(_as_matrix(Q))
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != M.shape[0]:
        raise ValueError(f"batch shape {X.shape} does not match dimension {M.shape[0]}")
    return np.einsum("ij,ij->i", X @ M, X)


def qubo_to_ising(Q: MatrixLike) -> tuple[np.ndarray, np.ndarray, float]:
    """Ising ``(h, J, offset)`` with ``x = (1 + z) / 2``.

    ``J`` is strictly upper triangular and the Ising energy is
    ``sum h_i z_i + sum_{i<j} J_ij z_i z_j``; adding ``offset`` gives back
    the QUBO energy.
    """
    M = np.triu(_as_matrix(Q))
    diag = np.diag(M).copy()
    upper = np.triu(M, 1)
    J = upper / 4.0
    h = diag / 2.0 + (upper.sum(axis=1) + upper.sum(axis=0)) / 4.0
    offset = diag.sum() / 2.0 + upper.sum() / 4.0
    return h, J, float(offset)


def ising_energy(h: np.ndarray, J: np.ndarray, z) -> float:
    z = np.asarray(z, dtype=float)
    return float(h @ z + z @ np.triu(J, 1) @ z)


@dataclass(eq=False)
class Structure:
    """Directed graph candidate; cycles are allowed, self-loops are not."""

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.isin(adj, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        if np.any(np.diag(adj)):
            raise ValueError("self-loops are not allowed")
        self.adjacency = adj.astype(np.uint8)

    @classmethod
    def empty(cls, n: int) -> "Structure":
        return cls(np.zeros((n, n), dtype=np.uint8))

    @classmethod
    def from_edges(cls, n: int, edges) -> "Structure":
        adj = np.zeros((n, n), dtype=np.uint8)
        for a, b in edges:
            adj[a, b] = 1
        return cls(adj)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in zip(*np.nonzero(self.adjacency))}

    def is_dag(self) -> bool:
        return topological_order(self.adjacency).is_dag

    def __eq__(self, other):
        if not isinstance(other, Structure):
            return NotImplemented
        return np.array_equal(self.adjacency, other.adjacency)

    def __repr__(self):
        return f"Structure(n={self.n}, edges={sorted(self.edges())})"


def decode_solution(x, index_map: VariableIndexMap) -> Structure:
    x = np.asarray(x)
    if x.shape != (index_map.total,):
        raise ValueError(f"assignment length {x.shape} does not match {index_map.total}")
    adj = np.zeros((index_map.n, index_map.n), dtype=np.uint8)
    for k, (i, j) in enumerate(index_map.d_pairs()):
        adj[i, j] = x[k]
    return Structure(adj)


@dataclass
class SolverParams:
    reads: int = 1000
    sweeps: int = 1000
    seed: int = 0
    schedule: str | tuple[float, float] = "auto"
    threads: int | None = None

    def __post_init__(self):
        if self.reads < 1:
            raise ValueError("reads must be >= 1")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")

    def to_dict(self) -> dict:
        return {
            "reads": self.reads,
            "sweeps": self.sweeps,
            "seed": self.seed,
            "schedule": self.schedule if isinstance(self.schedule, str) else list(self.schedule),
            "threads": self.threads,
        }


def _best_tolerance(best: float) -> float:
    return 1e-9 * max(1.0, abs(best))


@dataclass
class SolveResult:
    """Reads sorted by energy; reads tied with the best keep their read order.

    Score-equivalent structures have bit-identical energies, so breaking the
    leading tie by assignment bits would always favour the same edge
    orientation. Read order is seeded per read and therefore deterministic.
    """

    states: np.ndarray
    energies: np.ndarray
    info: dict = field(default_factory=dict)

    @classmethod
    def from_reads(cls, states, energies, **info) -> "SolveResult":
        states = np.asarray(states, dtype=np.uint8)
        energies = np.asarray(energies, dtype=float)
        if states.ndim != 2 or states.shape[0] < 1 or energies.shape != (states.shape[0],):
            raise SolverError("a solve result needs at least one read with an energy")
        lowest = energies.min()
        tied = energies <= lowest + _best_tolerance(lowest)
        rest = np.flatnonzero(~tied)
        order = np.concatenate([np.flatnonzero(tied), rest[np.argsort(energies[rest], kind="stable")]])
        return cls(states[order], energies[order], dict(info))

    @property
    def best(self) -> int:
        return 0

    @property
    def best_state(self) -> np.ndarray:
        return self.states[0]

    @property
    def best_energy(self) -> float:
        return float(self.energies[0])

    @property
    def num_reads(self) -> int:
        return int(self.states.shape[0])

    @property
    def occurrences_of_best(self) -> int:
        return int(np.sum(np.abs(self.energies - self.best_energy) <= _best_tolerance(self.best_energy)))

    def to_dict(self, include_reads: bool = False) -> dict:
        out = {
            "best_energy": self.best_energy,
            "best_assignment": "".join(str(int(b)) for b in self.best_state),
            "occurrences_of_best": self.occurrences_of_best,
        }
        if include_reads:
            out["reads"] = [
                {"assignment": "".join(str(int(b)) for b in s), "energy": float(e)}
                for s, e in zip(self.states, self.energies)
            ]
        return out


class Sampler(ABC):
    """Minimizer of a QUBO instance returning one or more reads."""

    name: str = ""

    @abstractmethod
    def solve(self, Q: QuboMatrix, params: SolverParams) -> SolveResult:
        ...


SAMPLERS: dict[str, type[Sampler]] = {}


def register_sampler(name: str):
    def deco(cls):
        cls.name = name
        SAMPLERS[name] = cls
        return cls

    return deco


def get_sampler(name: str, **kwargs) -> Sampler:
    try:
        return SAMPLERS[name](**kwargs)
    except KeyError:
        raise SolverError(f"unknown sampler {name!r}; available: {sorted(SAMPLERS)}") from None
