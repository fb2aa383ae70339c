"""Scoring declared links against ground truth.

The confusion matrix has one row per true class and one column per declared
class plus a final "undeclared" column.  Two error summaries are derived:

* OME: share of scored tuples whose declared class differs from the truth;
* MWGE: unweighted mean over classes of the within-class error rate.

``mode`` decides how undeclared tuples count: ``"declared-only"`` scores only
declared tuples, ``"undeclared-as-error"`` counts every undeclared tuple as a
mistake.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .decision import UNDECLARED, Assignments
from .errors import ConfigError, ScoringError, UndefinedMetricError
from .lattice import PatternSpace
from .synthetic import GroundTruth

MODES = ("declared-only", "undeclared-as-error")
DEFAULT_MODE = "declared-only"


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ConfigError(f"unknown evaluation mode {mode!r}; expected one of {MODES}")


@dataclass
class ConfusionMatrix:
    space: PatternSpace
    counts: np.ndarray  # (B, B + 1) int64

    @property
    def undeclared(self) -> np.ndarray:
        return self.counts[:, -1]

    @property
    def declared(self) -> np.ndarray:
        return self.counts[:, :-1]

    def total(self) -> int:
        return int(self.counts.sum())

    def _scope(self, mode: str) -> tuple[np.ndarray, np.ndarray]:
        """Per true class: (number scored, number wrong)."""
        _check_mode(mode)
        correct = np.diag(self.declared)
        declared = self.declared.sum(axis=1)
        if mode == "declared-only":
            return declared, declared - correct
        scored = self.counts.sum(axis=1)
        return scored, scored - correct

    def class_error_rates(self, mode: str = DEFAULT_MODE) -> np.ndarray:
        """Within-class error rate; nan where the class has nothing scored."""
        scored, wrong = self._scope(mode)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(scored > 0, wrong / np.maximum(scored, 1), np.nan)

    def false_declaration_rates(self) -> np.ndarray:
        """Per class p: share of tuples outside S_p that were declared to p."""
        declared = self.declared
        out = np.full(self.space.size, np.nan)
        rows = self.counts.sum(axis=1)
        for p in range(self.space.size):
            outside = rows.sum() - rows[p]
            if outside > 0:
                out[p] = (declared[:, p].sum() - declared[p, p]) / outside
        return out

    def to_dict(self) -> dict:
        labels = self.space.labels()
        cols = labels + ["undeclared"]
        return {labels[i]: {cols[j]: int(self.counts[i, j]) for j in range(len(cols))}
                for i in range(len(labels))}


def confusion_from_indices(space: PatternSpace, truth: np.ndarray, decided: np.ndarray,
                           weights: np.ndarray | None = None) -> ConfusionMatrix:
    """Confusion matrix from true and decided class indices (``UNDECLARED`` = -1)."""
    b = space.size
    truth = np.asarray(truth, dtype=np.int64)
    decided = np.asarray(decided, dtype=np.int64)
    col = np.where(decided == UNDECLARED, b, decided)
    flat = truth * (b + 1) + col
    counts = np.bincount(flat, weights=weights, minlength=b * (b + 1))
    return ConfusionMatrix(space, counts.astype(np.int64).reshape(b, b + 1))


def confusion(truth: GroundTruth, assignments: Assignments) -> ConfusionMatrix:
    """Score every tuple of the product, fully blocked ones included."""
    table = assignments.table
    space = table.space
    if truth.k != space.k:
        raise ScoringError(f"ground truth covers {truth.k} files, linkage covers {space.k}")
    if table.file_sizes is not None and tuple(truth.file_sizes) != tuple(table.file_sizes):
        raise ScoringError(f"ground truth file sizes {truth.file_sizes} differ from {table.file_sizes}")
    if table.tuple_index is None:
        raise ScoringError("pattern table was built without per-tuple bookkeeping")
    true_kept = truth.tuple_classes(table.tuple_index)
    cm = confusion_from_indices(space, true_kept, assignments.tuple_decisions())
    if table.fully_blocked_count:
        # every tuple that is not kept was resolved to the bottom class
        blocked = truth.class_counts() - np.bincount(true_kept, minlength=space.size)
        cm.counts[:, space.bottom] += blocked
    return cm


def ome(matrix: ConfusionMatrix, mode: str = DEFAULT_MODE) -> float:
    scored, wrong = matrix._scope(mode)
    total = scored.sum()
    if total == 0:
        raise UndefinedMetricError("no tuples in scope for the overall error")
    return float(wrong.sum() / total)


def mwge(matrix: ConfusionMatrix, mode: str = DEFAULT_MODE) -> float:
    rates = matrix.class_error_rates(mode)
    present = ~np.isnan(rates)
    if not present.any():
        raise UndefinedMetricError("no class has tuples in scope for the within-class error")
    return float(rates[present].mean())


def metric_rows(scenario_id: str, matrix: ConfusionMatrix, mode: str = DEFAULT_MODE) -> list[dict]:
    """Long-format metrics: per-class error rates, then OME and MWGE."""
    rows = []
    labels = matrix.space.labels()
    for lab, rate in zip(labels, matrix.class_error_rates(mode)):
        rows.append({"scenario_id": scenario_id, "class": lab, "metric": "error_rate", "value": float(rate)})
    for lab, rate in zip(labels, matrix.false_declaration_rates()):
        rows.append({"scenario_id": scenario_id, "class": lab, "metric": "false_declaration_rate",
                     "value": float(rate)})
    for name, fn in (("OME", ome), ("MWGE", mwge)):
        try:
            value = fn(matrix, mode)
        except UndefinedMetricError:
            value = float("nan")
        rows.append({"scenario_id": scenario_id, "class": "all", "metric": name, "value": value})
    return rows


METRIC_FIELDS = ("scenario_id", "class", "metric", "value")


def write_metrics(path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
