"""Comparison data for record K-tuples.

For every tuple (one record per file) each compared field yields the
partition of {1..K} induced by value agreement, and the blocking fields
yield a maximal agreement pattern ``p_b``.  Tuples whose blocking pattern is
all-singletons are only counted; the rest are aggregated into a
:class:`PatternTable` of distinct ``(gamma, p_b)`` keys with frequencies.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import floor, prod
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, InputError, SizeLimitError
from .lattice import Partition, PatternSpace, enumerate_patterns, meet, partition_from_labels

logger = logging.getLogger(__name__)

MISSING = None
DEFAULT_MAX_TUPLES = 50_000_000
_CHUNK = 1 << 20


def is_missing(value: Any) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == "")


@dataclass(frozen=True)
class Record:
    record_id: str
    values: Mapping[str, Any]

    def __getitem__(self, name: str) -> Any:
        return self.values[name]


@dataclass
class DataFile:
    file_id: int
    field_names: tuple[str, ...]
    records: list[Record]

    def __post_init__(self):
        self.field_names = tuple(self.field_names)
        for rec in self.records:
            if set(rec.values) != set(self.field_names):
                raise InputError(
                    f"file {self.file_id}: record {rec.record_id!r} has fields "
                    f"{sorted(rec.values)}, expected {sorted(self.field_names)}"
                )

    @property
    def size(self) -> int:
        return len(self.records)

    def column(self, name: str) -> list:
        return [r.values[name] for r in self.records]

    def record_ids(self) -> list[str]:
        return [r.record_id for r in self.records]

    @classmethod
    def from_columns(cls, file_id: int, record_ids: Sequence, columns: Mapping[str, Sequence]) -> "DataFile":
        names = tuple(columns)
        cols = [list(columns[n]) for n in names]
        records = [
            Record(str(rid), dict(zip(names, row)))
            for rid, row in zip(record_ids, zip(*cols) if cols else [()] * len(record_ids))
        ]
        return cls(file_id, names, records)


@dataclass(frozen=True)
class FieldComparator:
    """How one field is compared.

    ``banded`` maps an integer value v to ``floor((v + o) / width)`` for each
    offset o.  As a compared field each offset becomes its own comparison
    column; as a blocking field the tokens are combined conjunctively.
    """

    name: str
    kind: str = "exact"
    width: int = 1
    offsets: tuple[int, ...] = ()
    role: str = "compared"

    def __post_init__(self):
        if self.kind not in ("exact", "banded"):
            raise ConfigError(f"field {self.name!r}: unknown comparator kind {self.kind!r}")
        if self.role not in ("compared", "blocking"):
            raise ConfigError(f"field {self.name!r}: unknown role {self.role!r}")
        if self.kind == "banded":
            if int(self.width) < 1:
                raise ConfigError(f"field {self.name!r}: band width must be positive")
            offsets = tuple(int(o) for o in self.offsets) or tuple(range(int(self.width)))
            if len(set(offsets)) != len(offsets) or any(o < 0 or o >= self.width for o in offsets):
                raise ConfigError(
                    f"field {self.name!r}: offsets must be distinct and in [0, {self.width})"
                )
            object.__setattr__(self, "offsets", offsets)
            object.__setattr__(self, "width", int(self.width))

    def column_names(self) -> list[str]:
        """Names of the comparison columns this field contributes."""
        if self.kind == "banded" and self.role == "compared":
            return [f"{self.name}@{o}" for o in self.offsets]
        return [self.name]

    def tokens(self, value: Any) -> list:
        """One token per comparison column (None when missing)."""
        if self.kind == "exact":
            return [None if is_missing(value) else value]
        bands = derive_banded_fields(value, self)
        if self.role == "blocking":
            return [None if bands[0] is None else tuple(bands)]
        return bands


def derive_banded_fields(value: Any, comparator: FieldComparator) -> list:
    """Band tokens ``floor((value + o) / width)`` for each configured offset."""
    if comparator.kind != "banded":
        raise ConfigError(f"field {comparator.name!r} is not banded")
    if is_missing(value):
        return [MISSING] * len(comparator.offsets)
    v = int(value)
    return [floor((v + o) / comparator.width) for o in comparator.offsets]


def _agreement(values: Sequence) -> Partition:
    # missing agrees with nothing, not even another missing
    labels = [("missing", i) if v is None else ("value", v) for i, v in enumerate(values)]
    return partition_from_labels(labels)


def compare_field(records: Sequence[Record], comparator: FieldComparator) -> Partition:
    """Agreement partition of one field over a K-tuple.

    Banded fields agree only if every band token agrees.
    """
    values = []
    for rec in records:
        raw = rec.values[comparator.name]
        if comparator.kind == "banded":
            toks = derive_banded_fields(raw, comparator)
            values.append(None if toks[0] is None else tuple(toks))
        else:
            values.append(None if is_missing(raw) else raw)
    return _agreement(values)


def compare_columns(records: Sequence[Record], comparator: FieldComparator) -> list[Partition]:
    """Agreement partitions for each comparison column of ``comparator``."""
    per_record = [comparator.tokens(rec.values[comparator.name]) for rec in records]
    return [_agreement([toks[c] for toks in per_record]) for c in range(len(per_record[0]))]


def blocking_pattern(records: Sequence[Record], blocking: Sequence[FieldComparator]) -> Partition:
    """Meet of the agreement partitions of all blocking fields (top if none)."""
    k = len(records)
    result = Partition((0,) * k)
    for comp in blocking:
        result = meet(result, compare_field(records, comp))
    return result


@dataclass(frozen=True)
class ComparisonPattern:
    gamma: tuple[Partition, ...]
    blocking: Partition


@dataclass(eq=False)
class PatternTable:
    """Distinct (gamma, p_b) keys with their tuple counts.

    ``gamma`` and ``blocking`` hold canonical pattern indices.  When built
    from data, ``tuple_index`` lists the row-major linear index of every
    non-fully-blocked tuple and ``tuple_row`` the table row it falls in.
    """

    space: PatternSpace
    column_names: tuple[str, ...]
    gamma: np.ndarray
    blocking: np.ndarray
    counts: np.ndarray
    file_sizes: tuple[int, ...]
    total_tuples: int
    fully_blocked_count: int
    tuple_index: np.ndarray | None = field(default=None, repr=False)
    tuple_row: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.blocking = np.ascontiguousarray(self.blocking, dtype=np.int32)
        self.gamma = np.ascontiguousarray(self.gamma, dtype=np.int32).reshape(self.blocking.size,
                                                                              len(self.column_names))
        self.counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if np.any(self.blocking == self.space.bottom):
            raise ValueError("fully blocked tuples must not appear as table rows")
        if int(self.counts.sum()) + self.fully_blocked_count != self.total_tuples:
            raise ValueError("row counts plus fully blocked tuples must equal the tuple total")

    @property
    def k(self) -> int:
        return self.space.k

    @property
    def n_fields(self) -> int:
        return len(self.column_names)

    @property
    def n_rows(self) -> int:
        return int(self.counts.shape[0])

    @property
    def n_train(self) -> int:
        return int(self.counts.sum())

    def pattern(self, row: int) -> ComparisonPattern:
        return ComparisonPattern(
            tuple(self.space[int(g)] for g in self.gamma[row]),
            self.space[int(self.blocking[row])],
        )

    def rows(self) -> Iterator[tuple[ComparisonPattern, int]]:
        for r in range(self.n_rows):
            yield self.pattern(r), int(self.counts[r])

    def as_dict(self) -> dict:
        """``{(gamma labels..., p_b label): count}``, handy for comparisons."""
        labels = self.space.labels()
        return {
            tuple(labels[g] for g in self.gamma[r]) + (labels[self.blocking[r]],): int(self.counts[r])
            for r in range(self.n_rows)
        }

    @classmethod
    def from_rows(cls, space: PatternSpace, column_names: Sequence[str], gamma, blocking, counts,
                  file_sizes: Sequence[int] | None = None, fully_blocked_count: int = 0) -> "PatternTable":
        """Table from explicit rows (duplicate keys are merged)."""
        gamma = np.asarray(gamma, dtype=np.int64).reshape(-1, len(column_names))
        blocking = np.asarray(blocking, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        keys = np.column_stack([blocking, gamma])
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        merged = np.bincount(inverse.ravel(), weights=counts, minlength=len(uniq)).astype(np.int64)
        keep = merged > 0
        uniq, merged = uniq[keep], merged[keep]
        total = int(merged.sum()) + int(fully_blocked_count)
        return cls(
            space=space,
            column_names=tuple(column_names),
            gamma=uniq[:, 1:],
            blocking=uniq[:, 0],
            counts=merged,
            file_sizes=tuple(file_sizes) if file_sizes is not None else (),
            total_tuples=total,
            fully_blocked_count=int(fully_blocked_count),
        )


def _factorize(token_lists: Sequence[Sequence]) -> np.ndarray:
    """Integer codes shared across files; missing -> -1."""
    codes: dict = {}
    out = []
    for toks in token_lists:
        for t in toks:
            if t is None:
                out.append(-1)
            else:
                out.append(codes.setdefault(t, len(codes)))
    return np.asarray(out, dtype=np.int64)


def encode_files(files: Sequence[DataFile], comparators: Sequence[FieldComparator]):
    """Integer codes for each comparison column and the combined blocking key.

    Returns ``(column_names, column_codes, block_codes)``; each code array is
    the concatenation of all files in order.  ``block_codes`` is None when no
    blocking field is configured.
    """
    compared = [c for c in comparators if c.role == "compared"]
    blocking = [c for c in comparators if c.role == "blocking"]
    names: list[str] = []
    columns: list[np.ndarray] = []
    for comp in compared:
        per_file = [[comp.tokens(v) for v in f.column(comp.name)] for f in files]
        for c, cname in enumerate(comp.column_names()):
            names.append(cname)
            columns.append(_factorize([[toks[c] for toks in pf] for pf in per_file]))
    block_codes = None
    if blocking:
        keys = []
        for f in files:
            fkeys = []
            for rec in f.records:
                parts = [comp.tokens(rec.values[comp.name])[0] for comp in blocking]
                fkeys.append(None if any(p is None for p in parts) else tuple(parts))
            keys.append(fkeys)
        block_codes = _factorize(keys)
    return names, columns, block_codes


def _check_files(files: Sequence[DataFile], comparators: Sequence[FieldComparator]) -> None:
    if len(files) < 1:
        raise InputError("no datafiles given")
    for f in files:
        if f.size < 1:
            raise InputError(f"datafile {f.file_id} is empty")
        for comp in comparators:
            if comp.name not in f.field_names:
                raise InputError(f"datafile {f.file_id} has no field {comp.name!r}")


def build_pattern_table(files: Sequence[DataFile], comparators: Sequence[FieldComparator],
                        max_tuples: int = DEFAULT_MAX_TUPLES, keep_tuples: bool = True) -> PatternTable:
    """Aggregate comparison patterns over the full K-ary product.

    Tuples are visited in row-major order chunk by chunk; fully blocked ones
    are counted and dropped before any compared field is evaluated.
    """
    _check_files(files, comparators)
    k = len(files)
    space = enumerate_patterns(k)
    sizes = tuple(f.size for f in files)
    n = prod(sizes)
    if n > max_tuples:
        raise SizeLimitError(
            f"{n:,} record tuples exceeds the limit of {max_tuples:,}; add blocking fields "
            "or raise max_tuples"
        )
    names, columns, block_codes = encode_files(files, comparators)
    shape = np.asarray(sizes, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(shape)]).astype(np.int64)
    table, lex = space.rank_table, space.lex_to_canon

    kept_lin, kept_pb, kept_gamma = [], [], []
    for start in range(0, n, _CHUNK):
        lin = np.arange(start, min(n, start + _CHUNK), dtype=np.int64)
        if block_codes is not None:
            pb = _kernels.partition_indices(block_codes, offsets, shape, lin, table, lex)
            keep = pb != space.bottom
            lin, pb = lin[keep], pb[keep]
        else:
            pb = np.full(lin.shape[0], space.top, dtype=np.int32)
        if lin.shape[0] == 0:
            continue
        g = np.empty((lin.shape[0], len(columns)), dtype=np.int32)
        for c, codes in enumerate(columns):
            g[:, c] = _kernels.partition_indices(codes, offsets, shape, lin, table, lex)
        kept_lin.append(lin)
        kept_pb.append(pb)
        kept_gamma.append(g)

    if kept_lin:
        lin = np.concatenate(kept_lin)
        pb = np.concatenate(kept_pb)
        gamma = np.concatenate(kept_gamma)
    else:
        lin = np.zeros(0, dtype=np.int64)
        pb = np.zeros(0, dtype=np.int32)
        gamma = np.zeros((0, len(columns)), dtype=np.int32)

    uniq_pb, uniq_gamma, counts, inverse = _aggregate(space.size, pb, gamma)
    logger.debug("pattern table: %d tuples, %d kept, %d rows", n, lin.shape[0], counts.shape[0])
    return PatternTable(
        space=space,
        column_names=tuple(names),
        gamma=uniq_gamma,
        blocking=uniq_pb,
        counts=counts,
        file_sizes=sizes,
        total_tuples=n,
        fully_blocked_count=n - int(lin.shape[0]),
        tuple_index=lin if keep_tuples else None,
        tuple_row=inverse.astype(np.int32) if keep_tuples else None,
    )


def _aggregate(b: int, pb: np.ndarray, gamma: np.ndarray):
    f = gamma.shape[1]
    if b ** (f + 1) < 2 ** 62:
        key = pb.astype(np.int64)
        for c in range(f):
            key = key * b + gamma[:, c]
        uniq, first, inverse, counts = np.unique(key, return_index=True, return_inverse=True,
                                                 return_counts=True)
        return pb[first], gamma[first], counts.astype(np.int64), inverse.ravel()
    stacked = np.column_stack([pb, gamma])
    uniq, inverse, counts = np.unique(stacked, axis=0, return_inverse=True, return_counts=True)
    return uniq[:, 0], uniq[:, 1:], counts.astype(np.int64), inverse.ravel()


def tuple_records(table_or_sizes, lin: np.ndarray) -> np.ndarray:
    """Per-file record positions of linear tuple indices, shape (len(lin), K)."""
    sizes = table_or_sizes.file_sizes if isinstance(table_or_sizes, PatternTable) else table_or_sizes
    return np.stack(np.unravel_index(np.asarray(lin, dtype=np.int64), tuple(sizes)), axis=1)
