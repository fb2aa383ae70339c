import numpy as np
import pytest

from multilink.comparison import PatternTable
from multilink.model import ModelParams
from multilink.synthetic import categorical_pattern_probabilities


def sample_table(params: ModelParams, n: int, rng, file_sizes=None, blocking=None) -> PatternTable:
    """Draw n tuples from the mixture and aggregate them into a table.

    ``blocking`` (a class index) sets p_b for every row; the true class is
    then drawn only among its refinements.
    """
    space = params.space
    s = params.s.copy()
    pb = space.top if blocking is None else blocking
    if blocking is not None:
        s = np.where(space.down_set(pb), s, 0.0)
        s /= s.sum()
    cls = rng.choice(space.size, size=n, p=s)
    gamma = np.empty((n, params.n_fields), dtype=np.int64)
    for f in range(params.n_fields):
        for p in range(space.size):
            idx = np.flatnonzero(cls == p)
            gamma[idx, f] = rng.choice(space.size, size=idx.size, p=params.pi[f, :, p])
    return PatternTable.from_rows(space, params.field_names, gamma, np.full(n, pb), np.ones(n),
                                  file_sizes=file_sizes)


def hit_miss_params(space, s, categories, beta) -> ModelParams:
    pi = np.stack([categorical_pattern_probabilities(space, c, beta) for c in categories])
    return ModelParams(space, np.asarray(s, dtype=float), pi, tuple(f"c{i}" for i in range(len(categories))))


def random_params(space, n_fields, rng) -> ModelParams:
    s = rng.dirichlet(np.ones(space.size))
    pi = np.stack([rng.dirichlet(np.ones(space.size), size=space.size).T for _ in range(n_fields)])
    return ModelParams(space, s, pi)


def random_table(space, n_fields, rng, rows=30, max_count=50) -> PatternTable:
    gamma = rng.integers(0, space.size, size=(rows, n_fields))
    blocking = rng.integers(1, space.size, size=rows)  # never the bottom class
    counts = rng.integers(1, max_count, size=rows)
    return PatternTable.from_rows(space, [f"f{i}" for i in range(n_fields)], gamma, blocking, counts)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def accept(capsys):
    """Record one acceptance criterion: print a PASS/FAIL line and return the verdict."""

    def record(name: str, ok: bool, detail: str = "") -> bool:
        line = f"ACCEPTANCE {'PASS' if ok else 'FAIL'} | {name} | {detail}"
        _ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line, flush=True)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
