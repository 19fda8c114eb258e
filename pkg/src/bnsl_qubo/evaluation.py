"""Comparison of learned structures against the generating network."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .encoder import QuboMatrix
from .solvers import Structure, structure_to_assignment


def encode_expected(truth: Structure, Q: QuboMatrix) -> np.ndarray:
    """QUBO assignment of the true structure with the best slack and order bits."""
    if truth.n != Q.n:
        raise ValueError(f"truth has {truth.n} nodes, QUBO encodes {Q.n}")
    return structure_to_assignment(truth.adjacency, Q)


def edge_confusion(found: Structure, truth: Structure) -> tuple[int, int]:
    """(correct, wrong) directed edges of ``found`` with respect to ``truth``."""
    if found.n != truth.n:
        raise ValueError("structures differ in size")
    f = found.adjacency.astype(bool)
    t = truth.adjacency.astype(bool)
    return int((f & t).sum()), int((f & ~t).sum())


@dataclass
class EvalReport:
    runs: int
    n: int
    true_edges: int
    success_rate: float
    average_result: float | None
    correct_edges_per_run: list[int]
    wrong_edges_per_run: list[int]
    unique_correct: int
    unique_wrong: int
    mean_correct: float
    mean_wrong: float
    sensitivity: float
    specificity: float

    def to_dict(self) -> dict:
        return asdict(self)

    CSV_FIELDS = (
        "runs", "success_rate", "average_result", "unique_correct", "unique_wrong",
        "mean_correct", "mean_wrong", "sensitivity", "specificity",
    )

    def csv_row(self, **labels) -> str:
        """One CSV line (no header) prefixed by label columns such as problem, k, solver."""
        buf = io.StringIO()
        values = list(labels.values()) + [getattr(self, f) for f in self.CSV_FIELDS]
        csv.writer(buf).writerow(["" if v is None else v for v in values])
        return buf.getvalue()

    @classmethod
    def csv_header(cls, *labels: str) -> str:
        buf = io.StringIO()
        csv.writer(buf).writerow(list(labels) + list(cls.CSV_FIELDS))
        return buf.getvalue()


def sensitivity_specificity(mean_correct: float, mean_wrong: float, n: int, true_edges: int) -> tuple[float, float]:
    negatives = n * (n - 1) - true_edges
    sens = mean_correct / true_edges if true_edges else 1.0
    spec = (negatives - mean_wrong) / negatives if negatives else 1.0
    return sens, spec


def aggregate(
    truth: Structure,
    found: Sequence[Structure],
    energies: Sequence[float] | None = None,
    expected_energy: float | None = None,
) -> EvalReport:
    """Table-style summary over runs.

    ``average_result`` is the mean of ``energy / expected_energy`` exactly as
    printed in the reference tables; with negative expected energies values
    above 1 mean the run found something lower than the expected solution.
    """
    if not found:
        raise ValueError("at least one run is required")
    correct, wrong = [], []
    union_correct: set = set()
    union_wrong: set = set()
    true_set = truth.edges()
    for s in found:
        c, w = edge_confusion(s, truth)
        correct.append(c)
        wrong.append(w)
        edges = s.edges()
        union_correct |= edges & true_set
        union_wrong |= edges - true_set
    runs = len(found)
    success = sum(s == truth for s in found) / runs
    average_result = None
    if energies is not None and expected_energy is not None:
        average_result = float(np.mean([e / expected_energy for e in energies]))
    mean_c, mean_w = float(np.mean(correct)), float(np.mean(wrong))
    sens, spec = sensitivity_specificity(mean_c, mean_w, truth.n, len(true_set))
    return EvalReport(
        runs=runs,
        n=truth.n,
        true_edges=len(true_set),
        success_rate=success,
        average_result=average_result,
        correct_edges_per_run=correct,
        wrong_edges_per_run=wrong,
        unique_correct=len(union_correct),
        unique_wrong=len(union_wrong),
        mean_correct=mean_c,
        mean_wrong=mean_w,
        sensitivity=sens,
        specificity=spec,
    )
