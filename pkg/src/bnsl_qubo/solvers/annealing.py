"""Single-flip Metropolis simulated annealing over QUBO assignments."""

from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange

from ..encoder import QuboMatrix
from .base import Sampler, SolveResult, SolverParams, energies, register_sampler

# workqueue is not safe under concurrent callers (divide-et-impera threads),
# and the bundled TBB is often too old, so prefer OpenMP.
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _splitmix(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _read_stream(seed, read):
    _, a = _splitmix(seed)
    _, b = _splitmix(a ^ np.uint64(read))
    return b


@njit(cache=True)
def _uniform(state):
    state, z = _splitmix(state)
    return state, np.float64(z >> np.uint64(11)) * _INV_2_53


@njit(parallel=True, cache=True)
def _anneal(coupling, linear, betas, seed, states):
    reads, dim = states.shape
    for read in prange(reads):
        rng = _read_stream(seed, np.uint64(read))
        x = states[read]
        field = np.zeros(dim)
        for i in range(dim):
            rng, u = _uniform(rng)
            x[i] = 1 if u < 0.5 else 0
        for i in range(dim):
            if x[i]:
                for j in range(dim):
                    field[j] += coupling[i, j]
        for beta in betas:
            for i in range(dim):
                delta = linear[i] + field[i]
                if x[i]:
                    delta = -delta
                flip = delta <= 0.0
                if not flip:
                    arg = beta * delta
                    if arg < 50.0:
                        rng, u = _uniform(rng)
                        flip = u < np.exp(-arg)
                if flip:
                    step = 1.0 - 2.0 * x[i]
                    x[i] = 1 - x[i]
                    for j in range(dim):
                        field[j] += step * coupling[i, j]


def auto_schedule(Q: np.ndarray) -> tuple[float, float]:
    """Hot start at the largest |Q| entry, freeze at 1e-3 of the smallest nonzero one."""
    mags = np.abs(Q[Q != 0])
    if mags.size == 0:
        return 1.0, 1e-3
    return float(mags.max()), float(1e-3 * mags.min())


def temperatures(Q: np.ndarray, params: SolverParams) -> np.ndarray:
    t_start, t_end = auto_schedule(Q) if params.schedule == "auto" else params.schedule
    if not (t_start > 0 and t_end > 0):
        raise ValueError("temperatures must be positive")
    return np.geomspace(t_start, t_end, params.sweeps)


@register_sampler("sa")
class SimulatedAnnealingSampler(Sampler):
    """Independent restarts from uniform random states, one full variable pass per temperature.

    Read ``r`` draws from a counter-based stream keyed on ``(seed, r)``, so
    results do not depend on how reads are scheduled across threads.
    """

    def solve(self, Q: QuboMatrix, params: SolverParams) -> SolveResult:
        M = np.triu(Q.matrix if isinstance(Q, QuboMatrix) else np.asarray(Q, dtype=float))
        coupling = M + M.T
        np.fill_diagonal(coupling, 0.0)
        linear = np.ascontiguousarray(np.diag(M))
        betas = 1.0 / temperatures(M, params)
        states = np.zeros((params.reads, M.shape[0]), dtype=np.uint8)
        if params.threads:
            numba.set_num_threads(max(1, min(params.threads, numba.config.NUMBA_NUM_THREADS)))
        _anneal(coupling, linear, betas, np.uint64(params.seed % 2**64), states)
        return SolveResult.from_reads(states, energies(M, states), sampler=self.name)
