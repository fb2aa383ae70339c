"""Generalised Fellegi-Sunter decision rule for K-tuples.

Each tuple is a candidate for the class with the largest posterior.  Within a
candidate group the distinct comparison patterns are ranked by that
posterior and declared in order while the accumulated complement likelihood
P(gamma | not S_p) stays within the class's admissible error level; the rest
stay undeclared.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .comparison import PatternTable, tuple_records
from .errors import ConfigError, DegeneratePrevalenceError, UndefinedWeightError
from .lattice import Partition, PatternSpace
from .model import FitResult, ModelParams, e_step, log_class_conditional

UNDECLARED = -1
_BUDGET_SLACK = 1e-12


@dataclass(frozen=True)
class ErrorLevels:
    """Admissible error level per class, indexed in canonical order."""

    mu: tuple[float, ...]

    def __post_init__(self):
        for m in self.mu:
            if m is None or not (0.0 <= float(m) <= 1.0):
                raise ConfigError(f"error levels must lie in [0, 1], got {m!r}")

    @classmethod
    def uniform(cls, space: PatternSpace, mu: float) -> "ErrorLevels":
        return cls((float(mu),) * space.size)

    @classmethod
    def from_mapping(cls, space: PatternSpace, levels: Mapping) -> "ErrorLevels":
        """Build from ``{class: mu}`` keyed by Partition, label or index."""
        out: list[float | None] = [None] * space.size
        for key, value in levels.items():
            if isinstance(key, (int, np.integer)):
                idx = int(key)
            else:
                idx = space.position(key)
            out[idx] = float(value)
        missing = [space.labels()[i] for i, v in enumerate(out) if v is None]
        if missing:
            raise ConfigError(f"no error level given for classes {missing}")
        return cls(tuple(out))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.mu, dtype=np.float64)


def _class_index(space: PatternSpace, p) -> int:
    if isinstance(p, (Partition, str)):
        return space.position(p)
    return int(p)


def _log_complement(params: ModelParams, logcc: np.ndarray, p: int) -> float:
    s = params.s
    if s[p] >= 1.0:
        raise DegeneratePrevalenceError(f"class {params.space[p]} has prevalence 1; its complement is empty")
    others = np.delete(np.arange(s.size), p)
    with np.errstate(divide="ignore"):
        terms = logcc[others] + np.log(s[others])
    mx = terms.max()
    if mx == -math.inf:
        return -math.inf
    return float(mx + math.log(np.exp(terms - mx).sum()) - math.log1p(-s[p]))


def complement_likelihood(params: ModelParams, gamma, p) -> float:
    """P(gamma | not S_p): the other classes mixed by their prevalences."""
    idx = _class_index(params.space, p)
    return math.exp(_log_complement(params, log_class_conditional(params, gamma), idx))


def weight(params: ModelParams, gamma, p) -> float:
    """log P(gamma | S_p) - log P(gamma | not S_p)."""
    idx = _class_index(params.space, p)
    logcc = log_class_conditional(params, gamma)
    num = float(logcc[idx])
    den = _log_complement(params, logcc, idx)
    if num == -math.inf and den == -math.inf:
        raise UndefinedWeightError(f"pattern has zero likelihood both in and outside {params.space[idx]}")
    return num - den


def _row_log_terms(params: ModelParams, table: PatternTable) -> np.ndarray:
    log_pi = params.log_pi()
    out = np.zeros((table.n_rows, params.space.size))
    for f in range(table.n_fields):
        out += log_pi[f][table.gamma[:, f]]
    return out


@dataclass(frozen=True)
class Assignment:
    records: tuple[str, ...]
    candidate: Partition
    posterior: np.ndarray
    weight: float
    declared: bool


@dataclass(eq=False)
class Assignments:
    """Row-level decisions over a pattern table.

    ``decision[r]`` is the declared class index of table row r or
    ``UNDECLARED``.  Fully blocked tuples are implicitly declared to the
    all-singletons class.
    """

    table: PatternTable
    levels: ErrorLevels
    posterior: np.ndarray
    candidate: np.ndarray
    weight: np.ndarray
    complement: np.ndarray
    contribution: np.ndarray
    decision: np.ndarray

    @property
    def space(self) -> PatternSpace:
        return self.table.space

    def tuple_decisions(self) -> np.ndarray:
        """Decision per kept tuple, aligned with ``table.tuple_index``."""
        if self.table.tuple_row is None:
            raise ValueError("table was built without per-tuple bookkeeping")
        return self.decision[self.table.tuple_row]

    def declared_counts(self) -> dict[str, int]:
        """Tuples declared to each class, blocking-resolved ones included."""
        labels = self.space.labels()
        out = {lab: 0 for lab in labels}
        for r in np.flatnonzero(self.decision != UNDECLARED):
            out[labels[self.decision[r]]] += int(self.table.counts[r])
        out[labels[self.space.bottom]] += self.table.fully_blocked_count
        return out

    def undeclared_count(self) -> int:
        return int(self.table.counts[self.decision == UNDECLARED].sum())

    def spent_budget(self) -> np.ndarray:
        """Accumulated complement likelihood of declared patterns per class."""
        spent = np.zeros(self.space.size)
        np.add.at(spent, self.candidate[self.decision != UNDECLARED],
                  self.contribution[self.decision != UNDECLARED])
        return spent

    def iter_tuples(self, record_ids: list[list[str]] | None = None) -> Iterator[Assignment]:
        """Every tuple of the product in row-major order, blocked ones included."""
        table = self.table
        if table.tuple_index is None:
            raise ValueError("table was built without per-tuple bookkeeping")
        sizes = table.file_sizes
        b = self.space.size
        labels = record_ids or [[str(i) for i in range(m)] for m in sizes]
        bottom_post = np.zeros(b)
        bottom_post[self.space.bottom] = 1.0
        bottom = self.space[self.space.bottom]
        kept = dict(zip(table.tuple_index.tolist(), table.tuple_row.tolist()))
        for lin in range(table.total_tuples):
            rec = tuple_records(sizes, np.array([lin]))[0]
            ids = tuple(labels[k][rec[k]] for k in range(len(sizes)))
            row = kept.get(lin)
            if row is None:
                yield Assignment(ids, bottom, bottom_post, math.nan, True)
            else:
                yield Assignment(ids, self.space[int(self.candidate[row])], self.posterior[row],
                                 float(self.weight[row]), bool(self.decision[row] != UNDECLARED))


def classify(fit: FitResult | ModelParams, table: PatternTable, levels: ErrorLevels,
             clamp: bool | None = None) -> Assignments:
    """Apply the decision rule to every row of ``table``.

    1. candidate class = argmax posterior, ties to the finest partition;
    2. rank rows of each candidate group by that posterior (non-increasing);
    3. accumulate P(gamma | not S_p) over distinct gamma in rank order and
       keep the longest prefix whose total stays <= mu_p;
    4. declare that prefix, leave the rest undeclared.
    """
    params = fit.params if isinstance(fit, FitResult) else fit
    if clamp is None:
        clamp = fit.clamped if isinstance(fit, FitResult) else False
    space = table.space
    mu = levels.as_array()
    if mu.shape[0] != space.size:
        raise ConfigError(f"need {space.size} error levels, got {mu.shape[0]}")
    r_count = table.n_rows
    if r_count == 0:
        empty = np.zeros(0)
        return Assignments(table, levels, np.zeros((0, space.size)), np.zeros(0, dtype=np.int64),
                           empty, empty, empty, np.zeros(0, dtype=np.int64))

    post = e_step(params, table, clamp=clamp)
    # np.argmax takes the first maximum, i.e. the finest partition
    candidate = np.argmax(post, axis=1)

    logcc = _row_log_terms(params, table)
    with np.errstate(divide="ignore"):
        log_s = np.log(params.s)
    joint = logcc + log_s[None, :]
    rows = np.arange(r_count)
    # a class with prevalence 1 has an empty complement: nothing to spend
    rest = np.maximum(1.0 - params.s[candidate], 1e-300)
    masked = joint.copy()
    masked[rows, candidate] = -np.inf
    mx = masked.max(axis=1)
    safe = np.where(mx == -np.inf, 0.0, mx)
    with np.errstate(divide="ignore"):
        log_comp = np.where(mx == -np.inf, -np.inf,
                            safe + np.log(np.exp(masked - safe[:, None]).sum(axis=1))) - np.log(rest)
    log_own = logcc[rows, candidate]
    with np.errstate(invalid="ignore"):
        w = log_own - log_comp
    complement = np.maximum(np.exp(log_comp), 1e-300)

    _, gid = np.unique(table.gamma, axis=0, return_inverse=True)
    gid = gid.ravel()
    contribution = np.zeros(r_count)
    decision = np.full(r_count, UNDECLARED, dtype=np.int64)
    for p in np.unique(candidate):
        members = np.flatnonzero(candidate == p)
        order = members[np.argsort(-post[members, p], kind="stable")]
        _, first = np.unique(gid[order], return_index=True)
        contrib = np.zeros(order.size)
        contrib[first] = complement[order[first]]
        contribution[order] = contrib
        cum = np.cumsum(contrib)
        take = cum <= mu[p] * (1.0 + _BUDGET_SLACK)
        decision[order[take]] = p

    return Assignments(table, levels, post, candidate, w, complement, contribution, decision)
