"""Latent-class mixture over matching patterns, fitted by EM.

Parameters are ``s`` (prevalence of each class S_p) and, for every
comparison column f, a B x B matrix ``pi[f]`` whose column p is the
distribution of the observed agreement pattern given membership in S_p:
``pi[f, observed, p]``.  Fields are conditionally independent given the
class, so the class-conditional likelihood is a product over columns.

Posteriors are restricted to classes that refine the tuple's blocking
pattern; every other entry is exactly zero.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .comparison import PatternTable
from .errors import (ConfigError, DegeneratePatternError, DimensionError, InitializationError,
                     InputError)
from .lattice import Partition, PatternSpace, hasse_index_edges

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-300
LOG_FLOOR = math.log(PROB_FLOOR)


@dataclass(eq=False)
class ModelParams:
    space: PatternSpace
    s: np.ndarray
    pi: np.ndarray
    field_names: tuple[str, ...] = ()

    def __post_init__(self):
        b = self.space.size
        self.s = np.asarray(self.s, dtype=np.float64)
        self.pi = np.asarray(self.pi, dtype=np.float64).reshape(-1, b, b)
        if self.s.shape != (b,):
            raise ValueError(f"s must have length {b}")
        if not self.field_names:
            self.field_names = tuple(f"f{i}" for i in range(self.pi.shape[0]))
        self.field_names = tuple(self.field_names)
        if len(self.field_names) != self.pi.shape[0]:
            raise ValueError("field_names must match the number of pi matrices")

    @property
    def n_fields(self) -> int:
        return self.pi.shape[0]

    def vector(self) -> np.ndarray:
        """All parameters concatenated: ``s`` then each ``pi[f]`` row-major."""
        return np.concatenate([self.s, self.pi.ravel()])

    def check(self, atol: float = 1e-12) -> None:
        """Raise ValueError if a simplex constraint is violated."""
        if np.any(self.s < 0) or abs(self.s.sum() - 1.0) > atol:
            raise ValueError("s is not a probability vector")
        if np.any(self.pi < 0) or np.any(np.abs(self.pi.sum(axis=1) - 1.0) > atol):
            raise ValueError("a pi column is not a probability vector")

    def log_s(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.s)

    def log_pi(self) -> np.ndarray:
        return np.log(np.maximum(self.pi, PROB_FLOOR))

    def copy(self) -> "ModelParams":
        return ModelParams(self.space, self.s.copy(), self.pi.copy(), self.field_names)

    def to_dict(self) -> dict:
        labels = self.space.labels()
        return {
            "format": "multilink-params/1",
            "k": self.space.k,
            "classes": labels,
            "fields": list(self.field_names),
            "s": [float(x) for x in self.s],
            "pi": {
                name: [[float(x) for x in row] for row in self.pi[f]]
                for f, name in enumerate(self.field_names)
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelParams":
        from .lattice import enumerate_patterns

        space = enumerate_patterns(int(doc["k"]))
        if list(doc["classes"]) != space.labels():
            raise InputError("class order in params document does not match the canonical order")
        fields = tuple(doc["fields"])
        pi = np.array([doc["pi"][name] for name in fields], dtype=np.float64).reshape(-1, space.size, space.size)
        return cls(space, np.array(doc["s"], dtype=np.float64), pi, fields)


@dataclass
class FitResult:
    params: ModelParams
    loglik: float
    restarts_run: int
    iterations: int
    converged: bool
    clamped: bool
    trace: list[float] = field(default_factory=list)
    chain_logliks: list[float] = field(default_factory=list)
    empty_classes: list[str] = field(default_factory=list)
    ascent_violations: int = 0


# ---------------------------------------------------------------------------
# starting values


def size_bounds(space: PatternSpace, file_sizes: Sequence[int], n: float) -> np.ndarray:
    """Upper bound on each prevalence: prod over blocks of the smallest file, over n."""
    bounds = np.empty(space.size)
    for i, p in enumerate(space.patterns):
        bounds[i] = math.prod(min(file_sizes[k] for k in block) for block in p.blocks()) / n
    return bounds


def initial_params(space: PatternSpace, n_fields: int, file_sizes: Sequence[int], n: float,
                   seed=None, field_names: Sequence[str] = ()) -> ModelParams:
    """Random starting values that respect the refinement-order constraints.

    For every column p of every pi[f], values on the down-set of p decrease
    along chains away from p.  Prevalences decrease with coarseness, stay
    strictly under their size bounds, and the all-singletons class takes the
    remaining mass.
    """
    if len(file_sizes) != space.k:
        raise InitializationError(f"expected {space.k} file sizes, got {len(file_sizes)}")
    if n <= 0 or any(m < 1 for m in file_sizes):
        raise InitializationError(f"size bounds are infeasible for n={n}, file sizes={tuple(file_sizes)}")
    rng = np.random.default_rng(seed)
    b = space.size
    block_counts = np.array([p.block_count for p in space.patterns])

    pi = np.empty((n_fields, b, b))
    for f in range(n_fields):
        for p in range(b):
            draw = rng.dirichlet(np.ones(b))
            below = np.flatnonzero(space.down_set(p))
            others = np.setdiff1d(np.arange(b), below)
            # coarser nodes first; random order among equal block counts
            order = below[np.lexsort((rng.random(below.size), block_counts[below]))]
            col = np.empty(b)
            col[order] = np.sort(draw[:below.size])[::-1]
            col[others] = draw[below.size:]
            pi[f, :, p] = col

    caps = np.minimum(size_bounds(space, file_sizes, n), 1.0 / b)
    covers: dict[int, list[int]] = {j: [] for j in range(b)}
    for fine, coarse in hasse_index_edges(space):
        covers[coarse].append(fine)
    s = np.zeros(b)
    for p in range(1, b):
        upper = caps[p]
        for child in covers[p]:
            if child != space.bottom:
                upper = min(upper, s[child])
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        s[p] = u * upper
    s[space.bottom] = 1.0 - s[1:].sum()
    if s[space.bottom] <= s[1:].max(initial=0.0):
        raise InitializationError("prevalence bounds leave no room for the all-singletons class")
    return ModelParams(space, s, pi, tuple(field_names) or ())


def chain_seeds(seed, restarts: int) -> list[np.random.SeedSequence]:
    """Independent per-chain seeds derived from one master seed."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return root.spawn(restarts)


# ---------------------------------------------------------------------------
# likelihood pieces


def _gamma_indices(space: PatternSpace, gamma) -> np.ndarray:
    return np.array([space.position(g) if isinstance(g, (Partition, str)) else int(g) for g in gamma],
                    dtype=np.int64)


def log_class_conditional(params: ModelParams, gamma) -> np.ndarray:
    """log P(gamma | S_p) for every class p."""
    g = _gamma_indices(params.space, gamma)
    if g.shape[0] != params.n_fields:
        raise ValueError(f"gamma has {g.shape[0]} fields, model has {params.n_fields}")
    log_pi = params.log_pi()
    out = np.zeros(params.space.size)
    for f, obs in enumerate(g):
        out += log_pi[f, obs, :]
    return out


def class_conditional(params: ModelParams, gamma) -> np.ndarray:
    """P(gamma | S_p) = prod_f pi[f, gamma_f, p], evaluated in log space."""
    return np.exp(log_class_conditional(params, gamma))


@dataclass
class _Prepared:
    gamma: np.ndarray
    counts: np.ndarray
    pb_slot: np.ndarray
    adm: np.ndarray
    clamp: np.ndarray


def _prepare(table: PatternTable, clamp: bool) -> _Prepared:
    uniq, slot = np.unique(table.blocking, return_inverse=True)
    adm = np.ascontiguousarray(table.space.admissible(uniq))
    target = np.full(table.n_rows, -1, dtype=np.int64)
    if clamp and table.n_fields > 0:
        g = table.gamma
        same = np.all(g == g[:, :1], axis=1) & (g[:, 0] != table.space.bottom)
        ok = same & adm[slot.ravel(), np.where(same, g[:, 0], 0)]
        target[ok] = g[ok, 0]
    return _Prepared(
        gamma=np.ascontiguousarray(table.gamma, dtype=np.int64),
        counts=table.counts.astype(np.float64),
        pb_slot=slot.ravel().astype(np.int64),
        adm=adm,
        clamp=target,
    )


def _check_compatible(params: ModelParams, table: PatternTable) -> None:
    if params.space.k != table.k:
        raise DimensionError(f"params are for K={params.space.k}, table for K={table.k}")
    if params.n_fields != table.n_fields:
        raise DimensionError(f"params have {params.n_fields} fields, table has {table.n_fields}")


def _sweep(params: ModelParams, prep: _Prepared, table: PatternTable):
    post, logmarg = _kernels.e_step(prep.gamma, prep.pb_slot, prep.adm, params.log_s(),
                                    params.log_pi(), prep.clamp)
    return post, logmarg


def e_step(params: ModelParams, table: PatternTable, clamp: bool = False) -> np.ndarray:
    """Posterior class probabilities for every table row, shape (rows, B).

    Raises DegeneratePatternError if a row has zero probability under every
    admissible class.
    """
    _check_compatible(params, table)
    post, logmarg = _sweep(params, _prepare(table, clamp), table)
    bad = np.flatnonzero(logmarg == -np.inf)
    if bad.size:
        pat = table.pattern(int(bad[0]))
        raise DegeneratePatternError(
            f"pattern gamma={[str(g) for g in pat.gamma]} p_b={pat.blocking} has zero "
            f"likelihood under all admissible classes ({bad.size} rows affected)"
        )
    return post


def _m_step(post: np.ndarray, table: PatternTable, prep: _Prepared, field_names,
            include_blocked: bool) -> tuple[ModelParams, list[int]]:
    num, den = _kernels.m_step_stats(prep.gamma, prep.counts, post)
    b = table.space.size
    empty = np.flatnonzero(den <= 0.0)
    safe = np.where(den > 0.0, den, 1.0)
    pi = num / safe[None, None, :]
    if empty.size:
        pi[:, :, empty] = 1.0 / b
    s_num = den.copy()
    total = prep.counts.sum()
    if include_blocked:
        s_num[table.space.bottom] += table.fully_blocked_count
        total += table.fully_blocked_count
    s = s_num / total
    return ModelParams(table.space, s, pi, field_names), [int(e) for e in empty]


def m_step(posteriors: np.ndarray, table: PatternTable, include_blocked_in_prevalence: bool = False,
           field_names: Sequence[str] = ()) -> ModelParams:
    """Closed-form maximiser given row posteriors.

    A class with no responsibility gets uniform pi columns (and is logged).
    """
    prep = _prepare(table, False)
    params, empty = _m_step(np.ascontiguousarray(posteriors, dtype=np.float64), table, prep,
                            tuple(field_names) or table.column_names, include_blocked_in_prevalence)
    if empty:
        logger.warning("m_step: classes with zero responsibility reset to uniform: %s",
                       [table.space.labels()[e] for e in empty])
    return params


def observed_loglik(params: ModelParams, table: PatternTable) -> float:
    """sum over rows of n * log sum_{p refines p_b} s_p P(gamma | S_p)."""
    _check_compatible(params, table)
    _, logmarg = _sweep(params, _prepare(table, False), table)
    if np.any(logmarg == -np.inf):
        bad = np.flatnonzero(logmarg == -np.inf)
        logger.warning("observed_loglik: %d rows with zero marginal, first %s", bad.size,
                       table.pattern(int(bad[0])))
        return -math.inf
    return float(np.dot(table.counts.astype(np.float64), logmarg))


# ---------------------------------------------------------------------------
# fitting


def _run_chain(init: ModelParams, table: PatternTable, prep: _Prepared, max_iters: int, tol: float,
               include_blocked: bool, clamp: bool):
    params = init
    counts = prep.counts
    trace: list[float] = []
    empties: set[int] = set()
    converged = False
    it = 0
    violations = 0
    # blocked tuples re-included in the prevalence are fixed members of the
    # bottom class, so they add n_blocked * log s_bottom to the objective
    n_fixed = table.fully_blocked_count if include_blocked else 0

    def objective(p: ModelParams, logmarg: np.ndarray) -> float:
        ll = float(np.dot(counts, logmarg))
        if n_fixed:
            ll += n_fixed * math.log(max(p.s[table.space.bottom], PROB_FLOOR))
        return ll

    for it in range(1, max_iters + 1):
        post, logmarg = _sweep(params, prep, table)
        if np.any(logmarg == -np.inf):
            raise DegeneratePatternError("a table row has zero likelihood under all admissible classes")
        ll = objective(params, logmarg)
        if trace and not clamp and ll < trace[-1] - 1e-9 * max(1.0, abs(trace[-1])):
            violations += 1
            logger.warning("EM ascent violated: %.12g -> %.12g", trace[-1], ll)
        trace.append(ll)
        new, empty = _m_step(post, table, prep, params.field_names, include_blocked)
        empties.update(empty)
        dist = float(np.max(np.abs(new.vector() - params.vector())))
        params = new
        if dist < tol:
            converged = True
            break
    _, logmarg = _sweep(params, prep, table)
    final = objective(params, logmarg)
    if not clamp and trace and final < trace[-1] - 1e-9 * max(1.0, abs(trace[-1])):
        violations += 1
    trace.append(final)
    return params, final, it, converged, trace, sorted(empties), violations


def fit(table: PatternTable, restarts: int = 20, max_iters: int = 1000, tol: float = 1e-6, seed=0,
        clamp_full_agreement: bool = False, include_blocked_in_prevalence: bool = False) -> FitResult:
    """Run ``restarts`` EM chains from constrained random starts; keep the best.

    With ``clamp_full_agreement`` a row whose every field shows the same
    non-trivial admissible pattern p has its posterior fixed to S_p.  With
    ``include_blocked_in_prevalence`` the fully blocked tuples count as fixed
    members of the all-singletons class, and the reported log-likelihood
    includes their ``n_blocked * log s_bottom`` term.
    """
    if restarts < 1:
        raise ConfigError("restarts must be at least 1")
    if max_iters < 1:
        raise ConfigError("max_iters must be at least 1")
    if table.n_rows == 0:
        raise InputError("pattern table has no rows to train on")
    prep = _prepare(table, clamp_full_agreement)
    n0 = table.n_train + (table.fully_blocked_count if include_blocked_in_prevalence else 0)
    # without file sizes the bounds are vacuous: treat every file as size n
    sizes = table.file_sizes or (n0,) * table.k
    best = None
    chain_ll = []
    for ss in chain_seeds(seed, restarts):
        init = initial_params(table.space, table.n_fields, sizes, n0, seed=ss,
                              field_names=table.column_names)
        out = _run_chain(init, table, prep, max_iters, tol, include_blocked_in_prevalence,
                         clamp_full_agreement)
        chain_ll.append(out[1])
        if best is None or out[1] > best[1]:
            best = out
    params, ll, iters, converged, trace, empties, violations = best
    if not converged:
        logger.warning("no EM chain reached tol=%g within %d iterations", tol, max_iters)
    return FitResult(
        params=params,
        loglik=ll,
        restarts_run=restarts,
        iterations=iters,
        converged=converged,
        clamped=clamp_full_agreement,
        trace=trace,
        chain_logliks=chain_ll,
        empty_classes=[table.space.labels()[e] for e in empties],
        ascent_violations=violations,
    )
