"""Ground-truthed overlapping datafiles and hit-miss measurement error.

A population is described by *footprints*: how many latent entities appear
in exactly a given subset of the files.  Each entity draws its true field
values once; every file holding the entity gets one record of it.
Observed files are produced by corrupting true records independently per
record and field:

* categorical (C categories): keep with prob 1 - beta, otherwise redraw
  uniformly from all C categories;
* integer: keep with prob 1 - beta, otherwise add an offset d in -2..2 with
  weight 2^-|d| (0.4, 0.2, 0.2, 0.1, 0.1), restricted to the support.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .comparison import DataFile, Record
from .errors import ConfigError, ScoringError, SpecError
from .lattice import PatternSpace, enumerate_patterns

OFFSETS = np.array([-2, -1, 0, 1, 2])
OFFSET_PROBS = 0.4 * 2.0 ** -np.abs(OFFSETS)
_CHUNK = 1 << 20


@dataclass(frozen=True)
class FieldSpec:
    name: str
    kind: str = "categorical"
    categories: int = 0
    low: int = 0
    high: int = 0
    role: str = "compared"

    def __post_init__(self):
        if self.kind == "categorical":
            if self.categories < 1:
                raise SpecError(f"field {self.name!r}: categorical fields need categories >= 1")
        elif self.kind == "integer":
            if self.high < self.low:
                raise SpecError(f"field {self.name!r}: empty integer support [{self.low}, {self.high}]")
        else:
            raise SpecError(f"field {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ("compared", "blocking"):
            raise SpecError(f"field {self.name!r}: unknown role {self.role!r}")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "categorical":
            return rng.integers(0, self.categories, size=size)
        return rng.integers(self.low, self.high + 1, size=size)


def parse_footprint(key, k: int) -> tuple[int, ...]:
    """``"13"``, ``"1,3"``, ``(1, 3)`` -> ``(1, 3)`` (1-based file ids)."""
    if isinstance(key, str):
        parts = key.split(",") if "," in key else list(key)
        files = tuple(sorted(int(x) for x in parts))
    else:
        files = tuple(sorted(int(x) for x in key))
    if not files or len(set(files)) != len(files) or files[0] < 1 or files[-1] > k:
        raise SpecError(f"bad footprint {key!r} for K={k}")
    return files


@dataclass
class PopulationSpec:
    k: int
    footprints: dict
    fields: list[FieldSpec]
    file_sizes: tuple[int, ...] | None = None

    def __post_init__(self):
        self.footprints = {parse_footprint(key, self.k): int(v) for key, v in self.footprints.items()}
        if any(v < 0 for v in self.footprints.values()):
            raise SpecError("footprint counts must be non-negative")
        self.fields = [f if isinstance(f, FieldSpec) else FieldSpec(**f) for f in self.fields]
        derived = self.derived_sizes()
        if self.file_sizes is not None:
            self.file_sizes = tuple(int(m) for m in self.file_sizes)
            bad = [
                f"file {i + 1}: declared {m}, footprints give {d}"
                for i, (m, d) in enumerate(zip(self.file_sizes, derived)) if m != d
            ]
            if len(self.file_sizes) != self.k or bad:
                raise SpecError("file sizes inconsistent with footprints: " + "; ".join(bad))
        if any(m < 1 for m in derived):
            raise SpecError(f"every file needs at least one record, footprints give sizes {derived}")

    def derived_sizes(self) -> tuple[int, ...]:
        return tuple(
            sum(c for fp, c in self.footprints.items() if k in fp) for k in range(1, self.k + 1)
        )

    def field(self, name: str) -> FieldSpec:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)


@dataclass
class GroundTruth:
    """Entity id of every record in every file."""

    entity_ids: list[np.ndarray]
    record_ids: list[list[str]] = field(default_factory=list)

    def __post_init__(self):
        self.entity_ids = [np.asarray(e, dtype=np.int64) for e in self.entity_ids]
        if not self.record_ids:
            self.record_ids = [[str(i) for i in range(len(e))] for e in self.entity_ids]

    @property
    def k(self) -> int:
        return len(self.entity_ids)

    @property
    def file_sizes(self) -> tuple[int, ...]:
        return tuple(len(e) for e in self.entity_ids)

    @property
    def space(self) -> PatternSpace:
        return enumerate_patterns(self.k)

    def _codes(self):
        shape = np.asarray(self.file_sizes, dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(shape)]).astype(np.int64)
        return np.concatenate(self.entity_ids), offsets, shape

    def tuple_classes(self, lin: np.ndarray) -> np.ndarray:
        """True class index of the tuples at the given linear indices."""
        codes, offsets, shape = self._codes()
        space = self.space
        lin = np.asarray(lin, dtype=np.int64)
        if lin.size and (lin.min() < 0 or lin.max() >= prod(self.file_sizes)):
            raise ScoringError("tuple index outside the product of the truth files")
        return _kernels.partition_indices(codes, offsets, shape, lin, space.rank_table, space.lex_to_canon)

    def class_counts(self) -> np.ndarray:
        """Number of tuples of the full product in each true class."""
        codes, offsets, shape = self._codes()
        space = self.space
        n = prod(self.file_sizes)
        out = np.zeros(space.size, dtype=np.int64)
        for start in range(0, n, _CHUNK):
            lin = np.arange(start, min(n, start + _CHUNK), dtype=np.int64)
            cls = _kernels.partition_indices(codes, offsets, shape, lin, space.rank_table, space.lex_to_canon)
            out += np.bincount(cls, minlength=space.size)
        return out

    def lookup(self) -> dict[tuple[int, str], int]:
        """``{(file_id, record_id): entity_id}`` with 1-based file ids."""
        return {
            (k + 1, rid): int(e)
            for k in range(self.k)
            for rid, e in zip(self.record_ids[k], self.entity_ids[k])
        }

    def rows(self):
        for k in range(self.k):
            for rid, e in zip(self.record_ids[k], self.entity_ids[k]):
                yield k + 1, rid, int(e)


def generate_population(spec: PopulationSpec, seed=None) -> tuple[list[DataFile], GroundTruth]:
    """True datafiles and their ground truth, deterministic per seed."""
    rng = np.random.default_rng(seed)
    footprints = sorted(spec.footprints.items())
    members = np.concatenate([[i] * c for i, (_, c) in enumerate(footprints)] or [[]]).astype(np.int64)
    n_entities = members.size
    values = {f.name: f.sample(rng, n_entities) for f in spec.fields}
    names = [f.name for f in spec.fields]
    files, entity_ids, record_ids = [], [], []
    for k in range(1, spec.k + 1):
        holds = np.array([k in fp for fp, _ in footprints], dtype=bool)
        ents = np.flatnonzero(holds[members]) if n_entities else np.zeros(0, dtype=np.int64)
        ents = ents[rng.permutation(ents.size)]
        rids = [f"{k}-{j}" for j in range(ents.size)]
        records = [Record(rid, {n: int(values[n][e]) for n in names}) for rid, e in zip(rids, ents)]
        files.append(DataFile(k, tuple(names), records))
        entity_ids.append(ents)
        record_ids.append(rids)
    return files, GroundTruth(entity_ids, record_ids)


def hit_miss_categorical(value, beta: float, categories: int, rng: np.random.Generator):
    """Keep ``value`` with prob 1 - beta, else draw uniformly from 0..C-1.

    Accepts a scalar or an integer array.
    """
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"beta must be in [0, 1], got {beta}")
    arr = np.asarray(value)
    hit = rng.random(arr.shape) < beta
    redraw = rng.integers(0, categories, size=arr.shape)
    out = np.where(hit, redraw, arr)
    return out.item() if out.ndim == 0 else out


def hit_miss_numeric(value, beta: float, support: tuple[int, int], rng: np.random.Generator):
    """Keep ``value`` with prob 1 - beta, else shift it by d in -2..2.

    Offsets carry weight 0.4 * 2^-|d|; offsets that would leave the support
    are dropped and the rest renormalised.  Accepts a scalar or an array.
    """
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"beta must be in [0, 1], got {beta}")
    lo, hi = support
    arr = np.asarray(value, dtype=np.int64)
    flat = arr.reshape(-1)
    if np.any((flat < lo) | (flat > hi)):
        raise ConfigError(f"value outside support [{lo}, {hi}]")
    hit = rng.random(flat.shape) < beta
    u = rng.random(flat.shape)
    cand = flat[:, None] + OFFSETS[None, :]
    w = np.where((cand >= lo) & (cand <= hi), OFFSET_PROBS[None, :], 0.0)
    cdf = np.cumsum(w, axis=1)
    cdf /= cdf[:, -1:]
    pick = (u[:, None] >= cdf).sum(axis=1)
    pick = np.minimum(pick, OFFSETS.size - 1)
    out = np.where(hit, cand[np.arange(flat.size), pick], flat).reshape(arr.shape)
    return out.item() if out.ndim == 0 else out


def corrupt_files(files: Sequence[DataFile], betas: Mapping[str, float], seed,
                  fields: Sequence[FieldSpec]) -> list[DataFile]:
    """Observed copies of ``files``; blocking fields pass through untouched."""
    specs = {f.name: f for f in fields}
    for name in betas:
        if name not in specs:
            raise ConfigError(f"beta given for unknown field {name!r}")
        if specs[name].role == "blocking":
            raise ConfigError(f"field {name!r} is a blocking field and is never corrupted")
    missing = [f.name for f in fields if f.role != "blocking" and f.name not in betas]
    if missing:
        raise ConfigError(f"no beta given for fields {missing}")
    rng = np.random.default_rng(seed)
    out = []
    for df in files:
        cols = {name: np.asarray(df.column(name), dtype=np.int64) for name in df.field_names}
        for f in fields:
            if f.role == "blocking":
                continue
            beta = float(betas[f.name])
            if f.kind == "categorical":
                cols[f.name] = hit_miss_categorical(cols[f.name], beta, f.categories, rng)
            else:
                cols[f.name] = hit_miss_numeric(cols[f.name], beta, (f.low, f.high), rng)
        records = [
            Record(rec.record_id, {name: int(cols[name][i]) for name in df.field_names})
            for i, rec in enumerate(df.records)
        ]
        out.append(DataFile(df.file_id, df.field_names, records))
    return out


def categorical_pattern_probabilities(space: PatternSpace, categories: int, beta: float) -> np.ndarray:
    """Exact pi[observed, class] for a uniform categorical field under hit-miss error.

    Within a block of the true class the records share one uniformly drawn
    value; blocks are independent.  The probability of a particular observed
    vector depends only on its equality pattern, so it is the number of value
    vectors with that pattern times a product of per-block factors.
    """
    c = categories
    keep = 1.0 - beta
    noise = beta / c
    b = space.size
    out = np.zeros((b, b))
    for j, p in enumerate(space.patterns):
        for i, obs in enumerate(space.patterns):
            d = obs.block_count
            if d > c:
                continue
            count = prod(range(c - d + 1, c + 1))
            prob = 1.0
            for q in p.blocks():
                sizes: dict[int, int] = {}
                for x in q:
                    sizes[obs.rgs[x]] = sizes.get(obs.rgs[x], 0) + 1
                inner = (c - len(sizes)) * noise ** len(q)
                inner += sum((keep + noise) ** m * noise ** (len(q) - m) for m in sizes.values())
                prob *= inner / c
            out[i, j] = count * prob
    return out
