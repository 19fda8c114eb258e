"""Structure learning by solving every k-variable subproblem and merging edge counts."""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .encoder import build_qubo
from .network import Dataset
from .solvers import Sampler, SolverError, SolverParams, Structure, decode_solution

log = logging.getLogger(__name__)


class DecompositionError(ValueError):
    pass


def generate_subproblems(n: int, k: int) -> list[tuple[int, ...]]:
    """All k-subsets of ``range(n)`` in lexicographic order."""
    if not 3 <= k <= n:
        raise DecompositionError(f"subproblem size k={k} must satisfy 3 <= k <= n={n}")
    return list(itertools.combinations(range(n), k))


def project_dataset(dataset: Dataset, indices: Sequence[int]) -> Dataset:
    return dataset.project(indices)


@dataclass
class ReconstructionTally:
    """``C[i, j]``: subproblem solutions containing edge i -> j.
    ``P[i, j]``: solutions containing both i and j but not that edge."""

    C: np.ndarray
    P: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "ReconstructionTally":
        return cls(np.zeros((n, n), dtype=np.int64), np.zeros((n, n), dtype=np.int64))

    @property
    def n(self) -> int:
        return self.C.shape[0]

    def add(self, indices: Sequence[int], solution: Structure) -> None:
        idx = np.asarray(indices)
        if solution.n != idx.size:
            raise DecompositionError(f"solution has {solution.n} nodes but subproblem has {idx.size}")
        adj = solution.adjacency.astype(np.int64)
        off = 1 - np.eye(idx.size, dtype=np.int64)
        block = np.ix_(idx, idx)
        self.C[block] += adj * off
        self.P[block] += (1 - adj) * off

    def merge(self, other: "ReconstructionTally") -> "ReconstructionTally":
        return ReconstructionTally(self.C + other.C, self.P + other.P)

    def to_dict(self) -> dict:
        return {"C": self.C.tolist(), "P": self.P.tolist()}


def accumulate_tally(n: int, solutions) -> ReconstructionTally:
    tally = ReconstructionTally.zeros(n)
    for indices, structure in solutions:
        tally.add(indices, structure)
    return tally


def reconstruct_strategy1(tally: ReconstructionTally) -> Structure:
    """Keep i -> j when it was seen and seen more often than j -> i; ties keep neither."""
    C = tally.C
    return Structure(((C > 0) & (C > C.T)).astype(np.uint8))


def reconstruct_strategy2(tally: ReconstructionTally) -> Structure:
    """Keep i -> j when it appears in more subproblems than it is absent from."""
    return Structure((tally.C - tally.P > 0).astype(np.uint8))


RECONSTRUCTORS = {1: reconstruct_strategy1, 2: reconstruct_strategy2}


@dataclass
class DivideResult:
    structure: Structure
    tally: ReconstructionTally
    k: int
    strategy: int
    subproblem_count: int
    solved: int
    formulation_time: float
    solve_time: float
    failures: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def is_dag(self) -> bool:
        return self.structure.is_dag()

    def manifest(self, solver: str, params: SolverParams) -> dict:
        return {
            "n": self.tally.n,
            "k": self.k,
            "strategy": self.strategy,
            "solver": solver,
            "params": params.to_dict(),
            "subproblem_count": self.subproblem_count,
            "tally": self.tally.to_dict(),
            "adjacency": self.structure.adjacency.tolist(),
            "is_dag": self.is_dag,
        }


def subproblem_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def divide_et_impera(
    dataset: Dataset,
    k: int,
    sampler: Sampler,
    params: SolverParams,
    strategy: int = 2,
    alpha_rule: str = "inv_riqi",
    subset: Sequence[int] | None = None,
    threads: int | None = None,
) -> DivideResult:
    """Encode and solve each k-variable subproblem, then rebuild the full structure.

    ``subset`` restricts solving to the given subproblem positions; by default
    every subproblem is solved. A subproblem whose sampler fails contributes
    nothing to the tally.
    """
    if strategy not in RECONSTRUCTORS:
        raise DecompositionError(f"unknown reconstruction strategy {strategy}")
    subproblems = generate_subproblems(dataset.n, k)
    chosen = range(len(subproblems)) if subset is None else sorted(set(subset))

    timings = {"formulation": 0.0, "solve": 0.0}

    def run(pos: int):
        indices = subproblems[pos]
        t0 = time.perf_counter()
        Q = build_qubo(dataset.project(indices), alpha_rule)
        t1 = time.perf_counter()
        try:
            result = sampler.solve(Q, replace(params, seed=subproblem_seed(params.seed, pos)))
        except SolverError as exc:
            log.warning("subproblem %s failed: %s", indices, exc)
            return indices, None, t1 - t0, time.perf_counter() - t1
        return indices, decode_solution(result.best_state, Q.index_map), t1 - t0, time.perf_counter() - t1

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            outcomes = list(pool.map(run, chosen))
    else:
        outcomes = [run(pos) for pos in chosen]

    tally = ReconstructionTally.zeros(dataset.n)
    failures = []
    for indices, structure, t_form, t_solve in outcomes:
        timings["formulation"] += t_form
        timings["solve"] += t_solve
        if structure is None:
            failures.append(indices)
        else:
            tally.add(indices, structure)
    return DivideResult(
        structure=RECONSTRUCTORS[strategy](tally),
        tally=tally,
        k=k,
        strategy=strategy,
        subproblem_count=len(subproblems),
        solved=len(outcomes) - len(failures),
        formulation_time=timings["formulation"],
        solve_time=timings["solve"],
        failures=failures,
    )


def pairs_per_subproblem_count(n: int, k: int) -> int:
    """Number of k-subsets containing a fixed pair: C(n-2, k-2)."""
    return math.comb(n - 2, k - 2)
