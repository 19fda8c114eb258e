"""Bayesian network structure learning encoded as a QUBO with at most two parents per node."""

from .decomposition import (
    DivideResult,
    ReconstructionTally,
    divide_et_impera,
    generate_subproblems,
    reconstruct_strategy1,
    reconstruct_strategy2,
)
from .encoder import QuboMatrix, VariableIndexMap, build_qubo, local_score
from .evaluation import EvalReport, aggregate, edge_confusion, encode_expected
from .network import BayesNet, Dataset, ancestral_sample, expected_dataset, load_network, read_dataset, write_dataset
from .solvers import SolveResult, SolverParams, Structure, decode_solution, energy, get_sampler

__version__ = "0.1.0"

__all__ = [
    "BayesNet",
    "Dataset",
    "DivideResult",
    "EvalReport",
    "QuboMatrix",
    "ReconstructionTally",
    "SolveResult",
    "SolverParams",
    "Structure",
    "VariableIndexMap",
    "aggregate",
    "ancestral_sample",
    "build_qubo",
    "decode_solution",
    "divide_et_impera",
    "edge_confusion",
    "encode_expected",
    "energy",
    "expected_dataset",
    "generate_subproblems",
    "get_sampler",
    "load_network",
    "local_score",
    "read_dataset",
    "reconstruct_strategy1",
    "reconstruct_strategy2",
    "write_dataset",
]
