"""CSV and JSON persistence: datafiles, ground truth, assignments, fits.

All CSV files are comma separated, UTF-8, with a header row and LF line
endings.  Floats are written with ``repr`` so values round-trip exactly and
repeated runs produce identical bytes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .comparison import DataFile, PatternTable, Record, is_missing
from .decision import UNDECLARED, Assignments
from .errors import InputError
from .model import ModelParams
from .synthetic import GroundTruth

UNDECLARED_LABEL = "undeclared"
_WRITE_CHUNK = 1 << 16


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _fmt(x: float) -> str:
    return "" if x != x else repr(float(x))


def read_datafile(path, file_id: int, fields: Sequence[str] | None = None,
                  integer_fields: Iterable[str] = (), id_column: str | None = None) -> DataFile:
    """Load one datafile; empty cells become missing.

    ``fields`` restricts (and requires) the columns kept.  Record ids come
    from ``id_column`` when given, else from the 1-based row number.
    """
    integer_fields = set(integer_fields)
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read datafile {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        names = list(fields) if fields is not None else [h for h in header if h != id_column]
        absent = [n for n in names if n not in header]
        if id_column is not None and id_column not in header:
            absent.append(id_column)
        if absent:
            raise InputError(f"{path}: missing columns {absent}")
        records = []
        seen = set()
        for i, row in enumerate(reader, start=1):
            rid = row[id_column] if id_column is not None else str(i)
            if rid in seen:
                raise InputError(f"{path}: duplicate record id {rid!r}")
            seen.add(rid)
            values = {}
            for n in names:
                cell = row[n]
                if cell is None or is_missing(cell):
                    values[n] = None
                elif n in integer_fields:
                    try:
                        values[n] = int(cell)
                    except ValueError:
                        raise InputError(f"{path}, row {i}: field {n!r} expects an integer, got {cell!r}") from None
                else:
                    values[n] = cell
            records.append(Record(rid, values))
    if not records:
        raise InputError(f"{path}: datafile is empty")
    return DataFile(file_id, tuple(names), records)


def write_datafile(path, datafile: DataFile, id_column: str = "record_id") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow([id_column, *datafile.field_names])
        for rec in datafile.records:
            w.writerow([rec.record_id, *("" if is_missing(rec.values[n]) else rec.values[n]
                                         for n in datafile.field_names)])


def write_truth(path, truth: GroundTruth) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["file_id", "record_id", "entity_id"])
        w.writerows(truth.rows())


def read_truth(path) -> dict[tuple[int, str], str]:
    """``{(file_id, record_id): entity_id}``."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"file_id", "record_id", "entity_id"}
        if not need <= set(reader.fieldnames or []):
            raise InputError(f"{path}: ground truth needs columns {sorted(need)}")
        for row in reader:
            out[(int(row["file_id"]), row["record_id"])] = row["entity_id"]
    return out


def assignment_header(space_labels: Sequence[str], k: int) -> list[str]:
    return ([f"record_{i + 1}" for i in range(k)] + ["candidate", "posterior"]
            + [f"post_{lab}" for lab in space_labels] + ["weight", "decision"])


def write_assignments(path, assignments: Assignments, record_ids: Sequence[Sequence[str]]) -> None:
    """One row per tuple of the full product, in row-major order.

    Fully blocked tuples carry the all-singletons class with posterior 1 and
    an empty weight.
    """
    table: PatternTable = assignments.table
    space = table.space
    labels = space.labels()
    b = space.size
    k = space.k
    sizes = np.asarray(table.file_sizes, dtype=np.int64)
    n = table.total_tuples
    ids = [np.asarray(r, dtype=object) for r in record_ids]
    kept = table.tuple_index
    if kept is None:
        raise InputError("pattern table was built without per-tuple bookkeeping")
    bottom_post = np.zeros(b)
    bottom_post[space.bottom] = 1.0
    lab_arr = np.asarray(labels + [UNDECLARED_LABEL], dtype=object)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(assignment_header(labels, k))
        for start in range(0, n, _WRITE_CHUNK):
            lin = np.arange(start, min(n, start + _WRITE_CHUNK), dtype=np.int64)
            pos = np.unravel_index(lin, tuple(int(m) for m in sizes))
            if kept.size:
                where = np.minimum(np.searchsorted(kept, lin), kept.size - 1)
                is_kept = kept[where] == lin
                row = table.tuple_row[where]
            else:
                is_kept = np.zeros(lin.size, dtype=bool)
                row = np.zeros(lin.size, dtype=np.int64)
            cand = np.full(lin.size, space.bottom, dtype=np.int64)
            dec = np.full(lin.size, space.bottom, dtype=np.int64)
            post = np.tile(bottom_post, (lin.size, 1))
            wgt = np.full(lin.size, np.nan)
            if is_kept.any():
                r = row[is_kept]
                cand[is_kept] = assignments.candidate[r]
                d = assignments.decision[r]
                dec[is_kept] = np.where(d == UNDECLARED, b, d)
                post[is_kept] = assignments.posterior[r]
                wgt[is_kept] = assignments.weight[r]
            cand_post = post[np.arange(lin.size), cand]
            for t in range(lin.size):
                w.writerow([*(ids[f][pos[f][t]] for f in range(k)), lab_arr[cand[t]],
                            _fmt(cand_post[t]), *map(_fmt, post[t]), _fmt(wgt[t]), lab_arr[dec[t]]])


def read_assignments(path) -> tuple[list[str], list[list[str]], list[str]]:
    """``(class labels, record id rows, decision labels)`` from an assignments CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty assignments file") from None
        k = sum(1 for h in header if h.startswith("record_"))
        if k < 1 or "decision" not in header:
            raise InputError(f"{path}: not an assignments file (header {header})")
        labels = [h[len("post_"):] for h in header if h.startswith("post_")]
        d = header.index("decision")
        ids, decisions = [], []
        for row in reader:
            ids.append(row[:k])
            decisions.append(row[d])
    return labels, ids, decisions


def write_json(path, doc: Mapping) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def save_params(path, params: ModelParams) -> None:
    write_json(path, params.to_dict())


def load_params(path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        return ModelParams.from_dict(json.load(fh))
