import itertools
import math

import numpy as np
import pytest

from multilink.comparison import FieldComparator, build_pattern_table
from multilink.errors import ConfigError, ScoringError, SpecError
from multilink.lattice import enumerate_patterns, partition_from_labels
from multilink.synthetic import (OFFSET_PROBS, OFFSETS, FieldSpec, GroundTruth, PopulationSpec,
                                 categorical_pattern_probabilities, corrupt_files, generate_population,
                                 hit_miss_categorical, hit_miss_numeric, parse_footprint)

FIELDS = [FieldSpec("c", categories=6), FieldSpec("n", "integer", low=0, high=20),
          FieldSpec("b", categories=3, role="blocking")]


def small_spec(**kw):
    return PopulationSpec(3, {"123": 4, "12": 3, "13": 2, "23": 2, "1": 3, "2": 1, "3": 2}, FIELDS, **kw)


def test_offset_weights():
    assert OFFSETS.tolist() == [-2, -1, 0, 1, 2]
    assert OFFSET_PROBS.tolist() == pytest.approx([0.1, 0.2, 0.4, 0.2, 0.1])


@pytest.mark.parametrize("beta,c", [(0.05, 3), (0.3, 5), (0.7, 10), (1.0, 4)])
def test_categorical_keep_rate(beta, c):
    rng = np.random.default_rng(1)
    n = 200_000
    truth = rng.integers(0, c, size=n)
    obs = hit_miss_categorical(truth, beta, c, rng)
    p = 1 - beta + beta / c
    se = math.sqrt(p * (1 - p) / n)
    assert abs(np.mean(obs == truth) - p) <= 4 * se + 1e-12
    # the redraw is uniform, so changed values spread evenly
    changed = obs[obs != truth]
    if changed.size:
        freq = np.bincount(changed, minlength=c) / changed.size
        assert np.allclose(freq, 1 / c, atol=0.02)


def test_beta_zero_is_identity():
    rng = np.random.default_rng(2)
    x = rng.integers(0, 10, size=1000)
    assert np.array_equal(hit_miss_categorical(x, 0.0, 10, rng), x)
    assert np.array_equal(hit_miss_numeric(x, 0.0, (0, 9), rng), x)
    assert hit_miss_categorical(3, 0.0, 5, rng) == 3


def test_numeric_offset_histogram_interior():
    rng = np.random.default_rng(3)
    n = 200_000
    obs = hit_miss_numeric(np.full(n, 10), 1.0, (0, 20), rng)
    freq = np.array([np.mean(obs - 10 == d) for d in OFFSETS])
    se = np.sqrt(OFFSET_PROBS * (1 - OFFSET_PROBS) / n)
    assert np.all(np.abs(freq - OFFSET_PROBS) <= 4 * se)


def test_numeric_edge_renormalisation():
    rng = np.random.default_rng(4)
    n = 200_000
    obs = hit_miss_numeric(np.zeros(n, dtype=int), 1.0, (0, 20), rng)
    assert obs.min() >= 0
    expected = np.array([0.4, 0.2, 0.1]) / 0.7
    freq = np.array([np.mean(obs == d) for d in (0, 1, 2)])
    assert np.all(np.abs(freq - expected) <= 4 * np.sqrt(expected * (1 - expected) / n))
    # a single-point support can only keep its value
    assert np.all(hit_miss_numeric(np.full(10, 5), 1.0, (5, 5), rng) == 5)


def test_numeric_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigError):
        hit_miss_numeric(30, 0.1, (0, 20), rng)
    with pytest.raises(ConfigError):
        hit_miss_numeric(3, 1.5, (0, 20), rng)
    with pytest.raises(ConfigError):
        hit_miss_categorical(3, -0.1, 5, rng)


def test_parse_footprint():
    assert parse_footprint("13", 3) == (1, 3)
    assert parse_footprint("3,1", 3) == (1, 3)
    assert parse_footprint((2,), 3) == (2,)
    for bad in ("14", "11", "", "0"):
        with pytest.raises(SpecError):
            parse_footprint(bad, 3)


def test_spec_sizes_and_errors():
    spec = small_spec()
    assert spec.derived_sizes() == (12, 10, 10)
    small_spec(file_sizes=(12, 10, 10))
    with pytest.raises(SpecError, match="file 2: declared 11"):
        small_spec(file_sizes=(12, 11, 10))
    with pytest.raises(SpecError):
        PopulationSpec(2, {"1": 3}, FIELDS)  # file 2 is empty
    with pytest.raises(SpecError):
        PopulationSpec(2, {"12": -1, "1": 2, "2": 2}, FIELDS)
    with pytest.raises(SpecError):
        FieldSpec("x", "float")
    with pytest.raises(SpecError):
        FieldSpec("x", categories=0)
    with pytest.raises(SpecError):
        FieldSpec("x", "integer", low=3, high=2)


def test_population_matches_footprints():
    spec = small_spec()
    files, truth = generate_population(spec, seed=7)
    assert [f.size for f in files] == [12, 10, 10]
    assert truth.file_sizes == (12, 10, 10)
    ents = [set(e.tolist()) for e in truth.entity_ids]
    assert len(ents[0] & ents[1] & ents[2]) == 4
    assert len((ents[0] & ents[1]) - ents[2]) == 3
    assert len(ents[0] - ents[1] - ents[2]) == 3
    # records of one entity carry identical true values
    seen = {}
    for f, e in zip(files, truth.entity_ids):
        for rec, ent in zip(f.records, e):
            assert seen.setdefault(int(ent), dict(rec.values)) == dict(rec.values)
    assert files[0].records[0].record_id.startswith("1-")


def test_population_is_deterministic():
    a_files, a_truth = generate_population(small_spec(), seed=11)
    b_files, b_truth = generate_population(small_spec(), seed=11)
    assert [f.records for f in a_files] == [f.records for f in b_files]
    assert all(np.array_equal(x, y) for x, y in zip(a_truth.entity_ids, b_truth.entity_ids))
    c_files, _ = generate_population(small_spec(), seed=12)
    assert [f.records for f in a_files] != [f.records for f in c_files]


def test_ground_truth_classes_exhaustive():
    _, truth = generate_population(small_spec(), seed=3)
    space = truth.space
    sizes = truth.file_sizes
    lin = np.arange(math.prod(sizes))
    got = truth.tuple_classes(lin)
    counts = np.zeros(space.size, dtype=int)
    for n, idx in enumerate(itertools.product(*(range(m) for m in sizes))):
        labels = [int(truth.entity_ids[k][idx[k]]) for k in range(3)]
        want = space.position(partition_from_labels(labels))
        assert got[n] == want
        counts[want] += 1
    assert np.array_equal(truth.class_counts(), counts)
    with pytest.raises(ScoringError):
        truth.tuple_classes([lin.size])


def test_all_overlap_and_no_overlap():
    spec = PopulationSpec(3, {"123": 5}, FIELDS)
    _, truth = generate_population(spec, seed=0)
    counts = truth.class_counts()
    space = truth.space
    assert counts[space.top] == 5
    assert counts.sum() == 125
    spec = PopulationSpec(3, {"1": 4, "2": 3, "3": 2}, FIELDS)
    _, truth = generate_population(spec, seed=0)
    assert truth.class_counts()[space.bottom] == 24
    assert truth.class_counts().sum() == 24


def test_ground_truth_helpers():
    gt = GroundTruth([[0, 1], [1, 2]])
    assert gt.record_ids == [["0", "1"], ["0", "1"]]
    assert gt.lookup() == {(1, "0"): 0, (1, "1"): 1, (2, "0"): 1, (2, "1"): 2}
    assert list(gt.rows())[-1] == (2, "1", 2)
    assert gt.class_counts().tolist() == [3, 1]


def test_corrupt_files_leaves_blocking_and_ids():
    files, _ = generate_population(small_spec(), seed=1)
    noisy = corrupt_files(files, {"c": 1.0, "n": 1.0}, seed=5, fields=FIELDS)
    for f, g in zip(files, noisy):
        assert f.record_ids() == g.record_ids()
        assert f.column("b") == g.column("b")
    again = corrupt_files(files, {"c": 1.0, "n": 1.0}, seed=5, fields=FIELDS)
    assert [f.records for f in noisy] == [f.records for f in again]
    clean = corrupt_files(files, {"c": 0.0, "n": 0.0}, seed=5, fields=FIELDS)
    assert [f.records for f in clean] == [f.records for f in files]


def test_corrupt_files_errors():
    files, _ = generate_population(small_spec(), seed=1)
    with pytest.raises(ConfigError, match="blocking"):
        corrupt_files(files, {"c": 0.1, "n": 0.1, "b": 0.1}, 0, FIELDS)
    with pytest.raises(ConfigError, match="unknown"):
        corrupt_files(files, {"c": 0.1, "n": 0.1, "z": 0.1}, 0, FIELDS)
    with pytest.raises(ConfigError, match="no beta"):
        corrupt_files(files, {"c": 0.1}, 0, FIELDS)


@pytest.mark.parametrize("k", [2, 3, 4])
@pytest.mark.parametrize("c,beta", [(2, 0.3), (5, 0.1), (10, 0.7)])
def test_analytic_pi_columns_are_distributions(k, c, beta):
    pi = categorical_pattern_probabilities(enumerate_patterns(k), c, beta)
    assert np.allclose(pi.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(pi >= 0)


def test_analytic_pi_closed_forms():
    space = enumerate_patterns(2)
    c, beta = 5, 0.2
    pi = categorical_pattern_probabilities(space, c, beta)
    keep = 1 - beta + beta / c
    # a matched pair agrees if both keep or both land on the same value
    agree_match = keep**2 + (1 - keep) ** 2 / (c - 1)
    assert pi[space.top, space.top] == pytest.approx(agree_match, rel=1e-12)
    assert pi[space.top, space.bottom] == pytest.approx(1 / c, rel=1e-12)
    assert np.allclose(categorical_pattern_probabilities(space, c, 0.0)[:, space.top], [0, 1])


def test_analytic_pi_matches_simulation():
    space = enumerate_patterns(3)
    c, beta, n = 4, 0.3, 60_000
    pi = categorical_pattern_probabilities(space, c, beta)
    rng = np.random.default_rng(9)
    for j, p in enumerate(space.patterns):
        true = rng.integers(0, c, size=(n, p.block_count))[:, list(p.rgs)]
        obs = hit_miss_categorical(true, beta, c, rng)
        idx = [space.position(partition_from_labels(row)) for row in obs]
        freq = np.bincount(idx, minlength=space.size) / n
        se = np.sqrt(pi[:, j] * (1 - pi[:, j]) / n)
        assert np.all(np.abs(freq - pi[:, j]) <= 4 * se + 1e-9)


def test_generated_files_feed_the_pattern_table():
    files, truth = generate_population(small_spec(), seed=2)
    comps = [FieldComparator("c"), FieldComparator("n"), FieldComparator("b", role="blocking")]
    table = build_pattern_table(files, comps)
    assert table.total_tuples == math.prod(truth.file_sizes)
    # noiseless data: a true match always agrees on every field
    classes = truth.tuple_classes(table.tuple_index)
    rows = table.tuple_row[classes == truth.space.top]
    assert np.all(table.gamma[rows] == truth.space.top)
