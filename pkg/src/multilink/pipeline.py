"""End-to-end runs: link real files, sweep synthetic scenarios, score results.

Configuration lives in one YAML document per run.  A linkage config::

    files: [census.csv, forensics.csv, police.csv]   # relative to the config
    id_column: id                                     # optional
    fields:
      - {name: sex, role: blocking}
      - {name: age, type: integer, comparator: banded, width: 3}
      - {name: town}
    em: {restarts: 20, max_iters: 1000, tol: 1.0e-6, seed: 0,
         clamp_full_agreement: false, include_blocked_in_prevalence: false}
    mu: 0.01                 # or {"1/2/3": 0.01, "12/3": 0.02, ...}
    max_tuples: 50000000
    out: results/

A sweep config replaces ``files`` with a synthetic ``population`` and the
scenario grid; see :class:`SweepConfig`.
"""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from . import _kernels, io
from .comparison import DEFAULT_MAX_TUPLES, DataFile, FieldComparator, build_pattern_table
from .decision import UNDECLARED, ErrorLevels, classify
from .errors import ConfigError, FitError, InputError, LinkageError, ScoringError
from .evaluation import (DEFAULT_MODE, MODES, ConfusionMatrix, confusion, confusion_from_indices,
                         metric_rows, write_metrics)
from .lattice import PatternSpace, enumerate_patterns
from .model import fit as fit_model
from .synthetic import FieldSpec, PopulationSpec, corrupt_files, generate_population

logger = logging.getLogger(__name__)

DEFAULT_MU = 0.01


# ---------------------------------------------------------------------------
# configuration


def _strict(doc: Mapping, allowed: set[str], where: str) -> None:
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{where}: expected a mapping, got {type(doc).__name__}")
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")


@dataclass(frozen=True)
class FieldConfig:
    name: str
    type: str = "categorical"
    comparator: str = "exact"
    width: int = 1
    offsets: tuple[int, ...] = ()
    role: str = "compared"

    KEYS = frozenset({"name", "type", "comparator", "width", "offsets", "role"})

    def __post_init__(self):
        if self.type not in ("categorical", "integer"):
            raise ConfigError(f"field {self.name!r}: type must be categorical or integer")
        if self.comparator == "banded" and self.type != "integer":
            raise ConfigError(f"field {self.name!r}: banded comparison needs an integer field")
        object.__setattr__(self, "offsets", tuple(self.offsets or ()))
        self.comparator_obj()  # validates kind, width and offsets

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FieldConfig":
        _strict(doc, set(cls.KEYS), f"field {doc.get('name', '?')!r}" if isinstance(doc, Mapping) else "field")
        if "name" not in doc:
            raise ConfigError("every field needs a name")
        return cls(**doc)

    def comparator_obj(self) -> FieldComparator:
        return FieldComparator(self.name, self.comparator, self.width, self.offsets, self.role)


@dataclass(frozen=True)
class EMOptions:
    restarts: int = 20
    max_iters: int = 1000
    tol: float = 1e-6
    seed: int = 0
    clamp_full_agreement: bool = False
    include_blocked_in_prevalence: bool = False

    def __post_init__(self):
        if int(self.restarts) < 1:
            raise ConfigError("em.restarts must be at least 1")
        if int(self.max_iters) < 1:
            raise ConfigError("em.max_iters must be at least 1")
        if not float(self.tol) > 0:
            raise ConfigError("em.tol must be positive")

    @classmethod
    def from_dict(cls, doc: Mapping | None) -> "EMOptions":
        doc = doc or {}
        _strict(doc, {f for f in cls.__dataclass_fields__}, "em")
        return cls(**doc)


def error_levels(space: PatternSpace, mu) -> ErrorLevels:
    """A scalar broadcasts to every class; a mapping must name every class."""
    if isinstance(mu, Mapping):
        return ErrorLevels.from_mapping(space, mu)
    try:
        return ErrorLevels.uniform(space, float(mu))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"mu must be a number or a mapping, got {mu!r}") from None


def _load_yaml(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return doc


@dataclass
class LinkageConfig:
    files: list[Path]
    fields: list[FieldConfig]
    em: EMOptions = field(default_factory=EMOptions)
    mu: Any = DEFAULT_MU
    id_column: str | None = None
    max_tuples: int = DEFAULT_MAX_TUPLES
    out: Path | None = None

    KEYS = frozenset({"files", "fields", "em", "mu", "id_column", "max_tuples", "out"})

    def __post_init__(self):
        if len(self.files) < 2:
            raise ConfigError(f"linkage needs at least 2 files, got {len(self.files)}")
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate field names in {names}")
        if not self.fields:
            raise ConfigError("no fields configured")
        error_levels(enumerate_patterns(len(self.files)), self.mu)

    @classmethod
    def from_dict(cls, doc: Mapping, base_dir: Path | str = ".") -> "LinkageConfig":
        _strict(doc, set(cls.KEYS), "linkage config")
        base = Path(base_dir)
        if "files" not in doc or "fields" not in doc:
            raise ConfigError("linkage config needs 'files' and 'fields'")
        files = [base / Path(p) for p in doc["files"]]
        out = doc.get("out")
        return cls(
            files=files,
            fields=[FieldConfig.from_dict(f) for f in doc["fields"]],
            em=EMOptions.from_dict(doc.get("em")),
            mu=doc.get("mu", DEFAULT_MU),
            id_column=doc.get("id_column"),
            max_tuples=int(doc.get("max_tuples", DEFAULT_MAX_TUPLES)),
            out=None if out is None else base / Path(out),
        )

    @classmethod
    def from_yaml(cls, path) -> "LinkageConfig":
        return cls.from_dict(_load_yaml(path), Path(path).parent)

    @property
    def k(self) -> int:
        return len(self.files)

    def comparators(self) -> list[FieldComparator]:
        return [f.comparator_obj() for f in self.fields]


@dataclass(frozen=True)
class LowQualityField:
    """A compared field with a fixed error rate that scenarios include or drop."""

    field: str
    beta: float
    include: tuple[bool, ...] = (False, True)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "LowQualityField":
        _strict(doc, {"field", "beta", "include"}, "low_quality")
        return cls(doc["field"], float(doc["beta"]), tuple(bool(x) for x in doc.get("include", (False, True))))


@dataclass
class SweepConfig:
    population: PopulationSpec
    betas: tuple[float, ...]
    blocking: tuple[tuple[str, ...], ...] = ((),)
    low_quality: LowQualityField | None = None
    replications: int = 30
    seed: int = 0
    em: EMOptions = field(default_factory=lambda: EMOptions(restarts=5))
    mu: Any = DEFAULT_MU
    mode: str = DEFAULT_MODE
    comparators: dict = field(default_factory=dict)
    out: Path | None = None

    KEYS = frozenset({"population", "betas", "blocking", "low_quality", "replications", "seed", "em",
                      "mu", "mode", "comparators", "out"})

    def __post_init__(self):
        if int(self.replications) < 1:
            raise ConfigError("replications must be at least 1")
        if not self.betas:
            raise ConfigError("the beta grid is empty")
        if not self.blocking:
            raise ConfigError("the blocking grid is empty")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        names = {f.name: f for f in self.population.fields}
        for opt in self.blocking:
            for b in opt:
                if b not in names or names[b].role != "blocking":
                    raise ConfigError(f"blocking option {b!r} is not a blocking field of the population")
        if self.low_quality is not None:
            lq = names.get(self.low_quality.field)
            if lq is None or lq.role == "blocking":
                raise ConfigError(f"low-quality field {self.low_quality.field!r} must be a compared field")
            if not self.low_quality.include:
                raise ConfigError("low_quality.include is empty")
        for name in self.comparators:
            if name not in names:
                raise ConfigError(f"comparator given for unknown field {name!r}")
        for f in self.compared_fields(True):
            self.field_config(f)
        error_levels(enumerate_patterns(self.population.k), self.mu)

    @classmethod
    def from_dict(cls, doc: Mapping, base_dir: Path | str = ".") -> "SweepConfig":
        _strict(doc, set(cls.KEYS), "sweep config")
        if "population" not in doc or "betas" not in doc:
            raise ConfigError("sweep config needs 'population' and 'betas'")
        pop = dict(doc["population"])
        _strict(pop, {"k", "footprints", "fields", "file_sizes"}, "population")
        population = PopulationSpec(
            k=int(pop["k"]),
            footprints={str(k): v for k, v in pop["footprints"].items()},
            fields=[FieldSpec(**f) for f in pop["fields"]],
            file_sizes=pop.get("file_sizes"),
        )
        blocking = tuple(
            tuple([b] if isinstance(b, str) else (b or ())) for b in doc.get("blocking", [None])
        )
        lq = doc.get("low_quality")
        out = doc.get("out")
        return cls(
            population=population,
            betas=tuple(float(b) for b in doc["betas"]),
            blocking=blocking,
            low_quality=None if lq is None else LowQualityField.from_dict(lq),
            replications=int(doc.get("replications", 30)),
            seed=int(doc.get("seed", 0)),
            em=EMOptions.from_dict(doc.get("em", {"restarts": 5})),
            mu=doc.get("mu", DEFAULT_MU),
            mode=doc.get("mode", DEFAULT_MODE),
            comparators=dict(doc.get("comparators") or {}),
            out=None if out is None else Path(base_dir) / Path(out),
        )

    @classmethod
    def from_yaml(cls, path) -> "SweepConfig":
        return cls.from_dict(_load_yaml(path), Path(path).parent)

    def compared_fields(self, include_low_quality: bool) -> list[str]:
        lq = self.low_quality.field if self.low_quality else None
        return [f.name for f in self.population.fields
                if f.role != "blocking" and (include_low_quality or f.name != lq)]

    def field_config(self, name: str) -> FieldConfig:
        spec = self.population.field(name)
        opts = dict(self.comparators.get(name) or {})
        _strict(opts, {"comparator", "width", "offsets"}, f"comparators.{name}")
        return FieldConfig(name=name, type=spec.kind, role=spec.role, **opts)

    def betas_for(self, beta: float) -> dict[str, float]:
        out = {name: beta for name in self.compared_fields(True)}
        if self.low_quality is not None:
            out[self.low_quality.field] = self.low_quality.beta
        return out

    def scenarios(self) -> list["Scenario"]:
        lq_opts = self.low_quality.include if self.low_quality else (None,)
        out = []
        for (bi, beta), (ki, blk), (li, lq) in itertools.product(
                enumerate(self.betas), enumerate(self.blocking), enumerate(lq_opts)):
            out.append(Scenario(bi, beta, ki, blk, li, lq))
        return out


@dataclass(frozen=True)
class Scenario:
    beta_index: int
    beta: float
    blocking_index: int
    blocking: tuple[str, ...]
    low_quality_index: int
    low_quality: bool | None

    @property
    def scenario_id(self) -> str:
        parts = [f"beta={self.beta:g}", f"block={'+'.join(self.blocking) or 'none'}"]
        if self.low_quality is not None:
            parts.append(f"lowq={'in' if self.low_quality else 'out'}")
        return "|".join(parts)


# ---------------------------------------------------------------------------
# linking


def _stage(name: str, fn, *args, **kwargs):
    """Run one pipeline stage, prefixing package errors with the stage name."""
    try:
        return fn(*args, **kwargs)
    except LinkageError as exc:
        msg = exc.args[0] if exc.args else ""
        exc.args = (f"[{name}] {msg}",) + exc.args[1:]
        raise


def link_files(files: Sequence[DataFile], comparators: Sequence[FieldComparator], em: EMOptions,
               mu, max_tuples: int = DEFAULT_MAX_TUPLES):
    """block -> compare -> fit -> argmax class -> cutoff declare, in memory.

    Returns ``(table, fit_result or None, assignments)``; no EM runs when
    blocking resolves every tuple.
    """
    table = _stage("compare", build_pattern_table, files, comparators, max_tuples)
    levels = _stage("config", error_levels, table.space, mu)
    if table.n_rows == 0:
        return table, None, classify_empty(table, levels)
    if table.n_fields == 0:
        raise ConfigError(f"[config] {table.n_train} tuples remain after blocking but no field is compared")
    result = _stage("fit", fit_model, table, restarts=em.restarts, max_iters=em.max_iters, tol=em.tol,
                    seed=em.seed, clamp_full_agreement=em.clamp_full_agreement,
                    include_blocked_in_prevalence=em.include_blocked_in_prevalence)
    if not math.isfinite(result.loglik):
        raise FitError(f"[fit] no chain produced a finite log-likelihood ({result.loglik})")
    assignments = _stage("classify", classify, result, table, levels)
    return table, result, assignments


def classify_empty(table, levels):
    # with no training rows the parameters never enter the rule
    from .decision import Assignments

    b = table.space.size
    z = np.zeros(0)
    zi = np.zeros(0, dtype=np.int64)
    return Assignments(table, levels, np.zeros((0, b)), zi, z, z, z, zi)


def _report(table, result, assignments, levels: ErrorLevels) -> dict:
    space = table.space
    declared = assignments.declared_counts()
    return {
        "n": int(table.total_tuples),
        "file_sizes": list(table.file_sizes),
        "fully_blocked_count": int(table.fully_blocked_count),
        "training_rows": int(table.n_rows),
        "training_tuples": int(table.n_train),
        "comparison_columns": list(table.column_names),
        "declared": declared,
        "undeclared": assignments.undeclared_count(),
        "mu": dict(zip(space.labels(), levels.mu)),
        "loglik": None if result is None else result.loglik,
        "converged": None if result is None else bool(result.converged),
        "iterations": None if result is None else int(result.iterations),
        "restarts": None if result is None else int(result.restarts_run),
        "clamped": None if result is None else bool(result.clamped),
        "empty_classes": [] if result is None else list(result.empty_classes),
        "backend": _kernels.BACKEND,
    }


def run_link(config: LinkageConfig, out: Path | str | None = None, seed: int | None = None) -> dict:
    """Run the full linkage and write assignments.csv, params.json, report.json."""
    out = Path(out) if out is not None else config.out
    if out is None:
        raise ConfigError("no output directory given")
    em = config.em if seed is None else replace(config.em, seed=int(seed))
    integer = {f.name for f in config.fields if f.type == "integer"}
    names = [f.name for f in config.fields]
    files = [
        _stage("read", io.read_datafile, p, k + 1, names, integer, config.id_column)
        for k, p in enumerate(config.files)
    ]
    table, result, assignments = link_files(files, config.comparators(), em, config.mu, config.max_tuples)
    levels = error_levels(table.space, config.mu)
    report = _report(table, result, assignments, levels)
    out.mkdir(parents=True, exist_ok=True)
    _stage("write", io.write_assignments, out / "assignments.csv", assignments,
           [f.record_ids() for f in files])
    if result is not None:
        io.save_params(out / "params.json", result.params)
    io.write_json(out / "report.json", report)
    logger.info("linked %d tuples: %d blocked, %d undeclared", report["n"],
                report["fully_blocked_count"], report["undeclared"])
    return report


# ---------------------------------------------------------------------------
# simulation sweeps


def _population_seed(seed: int) -> list[int]:
    return [int(seed), 0]


def observed_instance(sweep: SweepConfig, beta_index: int, rep: int):
    """True population, its ground truth and one corrupted copy."""
    files, truth = generate_population(sweep.population, _population_seed(sweep.seed))
    betas = sweep.betas_for(sweep.betas[beta_index])
    observed = corrupt_files(files, betas, [int(sweep.seed), 1, beta_index, rep], sweep.population.fields)
    return observed, truth


def _scenario_comparators(sweep: SweepConfig, sc: Scenario) -> list[FieldComparator]:
    comps = [sweep.field_config(name).comparator_obj()
             for name in sweep.compared_fields(bool(sc.low_quality))]
    comps += [FieldComparator(b, role="blocking") for b in sc.blocking]
    return comps


@dataclass
class ReplicationOutcome:
    scenario_id: str
    rep: int
    matrix: ConfusionMatrix | None
    error: str | None = None


def _run_replication(sweep: SweepConfig, beta_index: int, rep: int) -> list[ReplicationOutcome]:
    observed, truth = observed_instance(sweep, beta_index, rep)
    out = []
    for sc in sweep.scenarios():
        if sc.beta_index != beta_index:
            continue
        em = replace(sweep.em, seed=[int(sweep.seed), 2, beta_index, rep, sc.blocking_index,
                                     sc.low_quality_index])
        try:
            _, _, assignments = link_files(observed, _scenario_comparators(sweep, sc), em, sweep.mu)
            out.append(ReplicationOutcome(sc.scenario_id, rep, confusion(truth, assignments)))
        except (LinkageError, FloatingPointError, ValueError) as exc:
            logger.warning("scenario %s rep %d failed: %s", sc.scenario_id, rep, exc)
            out.append(ReplicationOutcome(sc.scenario_id, rep, None, f"{type(exc).__name__}: {exc}"))
    return out


def _run_replication_args(args):
    return _run_replication(*args)


@dataclass
class SimulationResult:
    sweep: SweepConfig
    outcomes: list[ReplicationOutcome]

    def metric_rows(self) -> list[dict]:
        rows = []
        for o in self.outcomes:
            if o.matrix is not None:
                rows += metric_rows(f"{o.scenario_id}|rep={o.rep}", o.matrix, self.sweep.mode)
        return rows

    def values(self, scenario_id: str, metric: str, cls: str = "all") -> np.ndarray:
        """Per-replication values of one metric, ordered by replication."""
        from .evaluation import mwge, ome

        vals = []
        for o in sorted(self.outcomes, key=lambda o: o.rep):
            if o.scenario_id != scenario_id or o.matrix is None:
                continue
            if metric == "MWGE":
                vals.append(_safe(mwge, o.matrix, self.sweep.mode))
            elif metric == "OME":
                vals.append(_safe(ome, o.matrix, self.sweep.mode))
            elif metric == "error_rate":
                vals.append(o.matrix.class_error_rates(self.sweep.mode)[o.matrix.space.position(cls)])
            elif metric == "false_declaration_rate":
                vals.append(o.matrix.false_declaration_rates()[o.matrix.space.position(cls)])
            else:
                raise ConfigError(f"unknown metric {metric!r}")
        return np.asarray(vals, dtype=float)

    def failures(self) -> list[ReplicationOutcome]:
        return [o for o in self.outcomes if o.error is not None]

    def summary_rows(self) -> list[dict]:
        rows = []
        labels = enumerate_patterns(self.sweep.population.k).labels()
        for sc in self.sweep.scenarios():
            sid = sc.scenario_id
            n_fail = sum(1 for o in self.outcomes if o.scenario_id == sid and o.error is not None)
            base = {
                "scenario_id": sid,
                "beta": sc.beta,
                "blocking": "+".join(sc.blocking) or "none",
                "low_quality": "" if sc.low_quality is None else ("in" if sc.low_quality else "out"),
                "failures": n_fail,
            }
            metrics = [("MWGE", "all"), ("OME", "all")]
            metrics += [("error_rate", lab) for lab in labels]
            metrics += [("false_declaration_rate", lab) for lab in labels]
            for metric, cls in metrics:
                v = self.values(sid, metric, cls)
                v = v[~np.isnan(v)]
                mean = float(v.mean()) if v.size else math.nan
                se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
                rows.append({**base, "metric": metric, "class": cls, "n": int(v.size),
                             "mean": mean, "se": se})
        return rows


def _safe(fn, matrix, mode) -> float:
    try:
        return fn(matrix, mode)
    except ZeroDivisionError:
        return math.nan


SUMMARY_FIELDS = ("scenario_id", "beta", "blocking", "low_quality", "metric", "class", "n", "mean",
                  "se", "failures")


def run_simulation(sweep: SweepConfig, out: Path | str | None = None, threads: int = 1,
                   seed: int | None = None, emit_data: bool = False) -> SimulationResult:
    """Every scenario x replication: generate, corrupt, link, score.

    Corruption is shared across scenarios with the same beta and replication
    (a paired design), so scenario differences are not swamped by data noise.
    """
    if seed is not None:
        sweep = replace(sweep, seed=int(seed))
    tasks = [(sweep, bi, rep) for bi in range(len(sweep.betas)) for rep in range(sweep.replications)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_run_replication_args, tasks))
    else:
        chunks = [_run_replication(*t) for t in tasks]
    outcomes = [o for chunk in chunks for o in chunk]
    order = {sc.scenario_id: i for i, sc in enumerate(sweep.scenarios())}
    outcomes.sort(key=lambda o: (order[o.scenario_id], o.rep))
    result = SimulationResult(sweep, outcomes)
    out = Path(out) if out is not None else sweep.out
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_metrics(out / "metrics.csv", result.metric_rows())
        _write_rows(out / "summary.csv", SUMMARY_FIELDS, result.summary_rows())
        _write_rows(out / "failures.csv", ("scenario_id", "rep", "error"),
                    [{"scenario_id": o.scenario_id, "rep": o.rep, "error": o.error}
                     for o in result.failures()])
        if emit_data:
            write_instance(out / "data", sweep, 0, 0)
    n_fail = len(result.failures())
    if n_fail:
        logger.warning("%d of %d scenario replications failed", n_fail, len(outcomes))
    return result


def write_instance(out: Path, sweep: SweepConfig, beta_index: int, rep: int) -> None:
    """Write one observed instance as CSV datafiles plus its ground truth."""
    out.mkdir(parents=True, exist_ok=True)
    observed, truth = observed_instance(sweep, beta_index, rep)
    for f in observed:
        io.write_datafile(out / f"file_{f.file_id}.csv", f)
    io.write_truth(out / "truth.csv", truth)


def _write_rows(path, fields, rows) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


# ---------------------------------------------------------------------------
# scoring saved assignments


def evaluate_files(assignments_path, truth_path, mode: str = DEFAULT_MODE) -> ConfusionMatrix:
    labels, ids, decisions = io.read_assignments(assignments_path)
    truth = io.read_truth(truth_path)
    if not ids:
        raise InputError(f"{assignments_path}: no assignment rows")
    k = len(ids[0])
    space = enumerate_patterns(k)
    if labels and labels != space.labels():
        raise InputError(f"{assignments_path}: class columns {labels} do not match K={k}")
    entity_codes: dict[str, int] = {}
    vals = np.empty((len(ids), k), dtype=np.int64)
    for r, row in enumerate(ids):
        for f, rid in enumerate(row):
            try:
                ent = truth[(f + 1, rid)]
            except KeyError:
                raise ScoringError(f"record {rid!r} of file {f + 1} is not in the ground truth") from None
            vals[r, f] = entity_codes.setdefault(ent, len(entity_codes))
    true_idx = _kernels.label_indices_np(vals, space.rank_table, space.lex_to_canon)
    lookup = {lab: i for i, lab in enumerate(space.labels())}
    lookup[io.UNDECLARED_LABEL] = UNDECLARED
    try:
        decided = np.array([lookup[d] for d in decisions], dtype=np.int64)
    except KeyError as exc:
        raise InputError(f"{assignments_path}: unknown decision label {exc.args[0]!r}") from None
    return confusion_from_indices(space, true_idx, decided)


def run_evaluate(assignments_path, truth_path, mode: str = DEFAULT_MODE, out: Path | str | None = None,
                 scenario_id: str = "evaluation") -> list[dict]:
    """Score an assignments CSV against a ground-truth CSV; write metrics.csv."""
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    matrix = evaluate_files(assignments_path, truth_path, mode)
    rows = metric_rows(scenario_id, matrix, mode)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics(out / "metrics.csv", rows)
        io.write_json(out / "confusion.json", matrix.to_dict())
    return rows
