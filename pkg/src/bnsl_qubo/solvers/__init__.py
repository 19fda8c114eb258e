"""QUBO samplers: simulated annealing and exhaustive search over edge bits."""

from .base import (
    SAMPLERS,
    Sampler,
    SolveResult,
    SolverCapExceeded,
    SolverError,
    SolverParams,
    Structure,
    decode_solution,
    energies,
    energy,
    get_sampler,
    ising_energy,
    qubo_to_ising,
    register_sampler,
)
from .completion import complete_assignment, completed_order, structure_to_assignment
from .annealing import SimulatedAnnealingSampler
from .exhaustive import ExhaustiveSampler, exhaustive_search

__all__ = [
    "SAMPLERS",
    "Sampler",
    "SolveResult",
    "SolverCapExceeded",
    "SolverError",
    "SolverParams",
    "Structure",
    "decode_solution",
    "energies",
    "energy",
    "get_sampler",
    "ising_energy",
    "qubo_to_ising",
    "register_sampler",
    "complete_assignment",
    "completed_order",
    "structure_to_assignment",
    "SimulatedAnnealingSampler",
    "ExhaustiveSampler",
    "exhaustive_search",
]
