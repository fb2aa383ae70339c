import itertools
import math

import numpy as np
import pytest

from conftest import hit_miss_params, random_params, sample_table
from multilink.comparison import PatternTable
from multilink.decision import (UNDECLARED, ErrorLevels, classify, complement_likelihood, weight)
from multilink.errors import ConfigError, DegeneratePrevalenceError
from multilink.lattice import enumerate_patterns
from multilink.model import ModelParams, class_conditional

S3 = enumerate_patterns(3)
S2 = enumerate_patterns(2)


def direct_complement(params, gamma, p):
    s = params.s
    total = 0.0
    for q in range(params.space.size):
        if q == p:
            continue
        term = s[q]
        for f, g in enumerate(gamma):
            term *= params.pi[f, g, q]
        total += term
    return total / (1.0 - s[p])


def test_complement_matches_direct_sum(rng):
    for _ in range(200):
        params = random_params(S3, 3, rng)
        gamma = rng.integers(0, S3.size, size=3)
        p = int(rng.integers(0, S3.size))
        assert complement_likelihood(params, gamma, p) == pytest.approx(direct_complement(params, gamma, p),
                                                                        rel=1e-12)


def test_complement_two_classes_is_other_conditional(rng):
    params = random_params(S2, 2, rng)
    for gamma in itertools.product(range(2), repeat=2):
        cc = class_conditional(params, gamma)
        assert complement_likelihood(params, gamma, "12") == pytest.approx(cc[0], rel=1e-12)
        assert complement_likelihood(params, gamma, "1/2") == pytest.approx(cc[1], rel=1e-12)


def test_complement_uniform_pi_is_uniform():
    b = S3.size
    params = ModelParams(S3, np.full(b, 1 / b), np.full((2, b, b), 1 / b))
    for p in range(b):
        assert complement_likelihood(params, [0, 4], p) == pytest.approx(1 / b**2, rel=1e-12)


def test_complement_prevalence_one_raises():
    s = np.zeros(S3.size)
    s[S3.top] = 1.0
    params = ModelParams(S3, s, np.full((1, 5, 5), 0.2))
    with pytest.raises(DegeneratePrevalenceError):
        complement_likelihood(params, [0], S3.top)
    with pytest.raises(DegeneratePrevalenceError):
        weight(params, [0], S3.top)


def test_weight_sign_and_zero():
    params = hit_miss_params(S3, [0.6, 0.1, 0.1, 0.1, 0.1], [10, 10], 0.05)
    assert weight(params, ["123", "123"], "123") > 0
    assert weight(params, ["1/2/3", "1/2/3"], "123") < 0
    flat = ModelParams(S3, np.full(5, 0.2), np.full((2, 5, 5), 0.2))
    assert weight(flat, [1, 2], 3) == pytest.approx(0.0, abs=1e-12)


def test_weight_infinite_when_complement_has_no_mass():
    # prevalence concentrated outside the complement of p, not summing to one
    params = ModelParams(S2, np.array([0.0, 0.5]), np.full((1, 2, 2), 0.5))
    assert weight(params, [1], 1) == math.inf


def test_posterior_and_weight_rank_equivalently(rng):
    """Within a class, ordering by posterior and by weight agree."""
    for _ in range(1000):
        params = random_params(S3, 2, rng)
        p = int(rng.integers(0, S3.size))
        g1, g2 = rng.integers(0, S3.size, size=(2, 2))
        post = []
        for g in (g1, g2):
            joint = params.s * class_conditional(params, g)
            post.append(joint[p] / joint.sum())
        w1, w2 = weight(params, g1, p), weight(params, g2, p)
        if abs(post[0] - post[1]) > 1e-12:
            assert np.sign(post[0] - post[1]) == np.sign(w1 - w2)


def one_row_per_pattern(space, n_fields, blocking=None):
    gamma = np.array(list(itertools.product(range(space.size), repeat=n_fields)))
    pb = np.full(len(gamma), space.top if blocking is None else blocking)
    return PatternTable.from_rows(space, [f"f{i}" for i in range(n_fields)], gamma, pb, np.ones(len(gamma)))


def worked_params():
    # every class other than 123 shares the column c, so P(gamma | not 123) = c[gamma]
    c = np.array([0.977, 0.009, 0.005, 0.005, 0.004])
    top = np.array([1e-6, 0.3, 1e-6, 1e-6, 0.7 - 3e-6])
    pi = np.column_stack([c, c, c, c, top])[None]
    return ModelParams(S3, np.full(5, 0.2), pi)


def test_budget_example():
    params = worked_params()
    table = one_row_per_pattern(S3, 1)
    a = classify(params, table, ErrorLevels.uniform(S3, 0.01))
    labels = S3.labels()
    by_gamma = {labels[table.gamma[r, 0]]: r for r in range(table.n_rows)}
    r123, r12 = by_gamma["123"], by_gamma["12/3"]
    assert a.candidate[r123] == S3.top and a.candidate[r12] == S3.top
    assert a.complement[r123] == pytest.approx(0.004, rel=1e-9)
    assert a.complement[r12] == pytest.approx(0.009, rel=1e-9)
    assert a.posterior[r123, S3.top] > a.posterior[r12, S3.top]
    # 0.004 fits in 0.01; adding 0.009 would overshoot
    assert a.decision[r123] == S3.top
    assert a.decision[r12] == UNDECLARED
    assert a.spent_budget()[S3.top] == pytest.approx(0.004)


def test_mu_extremes(rng):
    params = hit_miss_params(S3, [0.5, 0.1, 0.1, 0.1, 0.2], [5, 5, 5], 0.1)
    table = sample_table(params, 3000, rng)
    none = classify(params, table, ErrorLevels.uniform(S3, 0.0))
    assert np.all(none.decision == UNDECLARED)
    assert none.undeclared_count() == table.n_train
    every = classify(params, table, ErrorLevels.uniform(S3, 1.0))
    assert np.all(every.decision == every.candidate)


def prefix_ok(a):
    for p in np.unique(a.candidate):
        rows = np.flatnonzero(a.candidate == p)
        dec = rows[a.decision[rows] != UNDECLARED]
        und = rows[a.decision[rows] == UNDECLARED]
        if dec.size and und.size:
            assert a.posterior[dec, p].min() >= a.posterior[und, p].max()


@pytest.mark.parametrize("mu", [0.001, 0.01, 0.05, 0.2])
def test_prefix_and_budget_invariants(rng, mu):
    params = hit_miss_params(S3, [0.5, 0.1, 0.1, 0.1, 0.2], [4, 6, 8], 0.15)
    table = sample_table(params, 5000, rng)
    a = classify(params, table, ErrorLevels.uniform(S3, mu))
    prefix_ok(a)
    assert np.all(a.spent_budget() <= mu * (1 + 1e-12))
    declared = a.decision != UNDECLARED
    assert np.all(a.decision[declared] == a.candidate[declared])
    # every distinct gamma contributes once to its class budget
    for p in range(S3.size):
        rows = np.flatnonzero(declared & (a.candidate == p))
        distinct = np.unique(table.gamma[rows], axis=0)
        assert a.spent_budget()[p] == pytest.approx(
            sum(complement_likelihood(params, g, p) for g in distinct), rel=1e-9, abs=1e-300)


def test_monotone_in_mu(rng):
    params = hit_miss_params(S3, [0.5, 0.1, 0.1, 0.1, 0.2], [4, 6, 8], 0.15)
    table = sample_table(params, 4000, rng)
    prev = None
    for mu in [0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0]:
        now = classify(params, table, ErrorLevels.uniform(S3, mu)).decision != UNDECLARED
        if prev is not None:
            assert np.all(now[prev])
        prev = now


def test_candidate_ties_go_to_finest():
    flat = ModelParams(S3, np.full(5, 0.2), np.full((1, 5, 5), 0.2))
    a = classify(flat, one_row_per_pattern(S3, 1), ErrorLevels.uniform(S3, 1.0))
    assert np.all(a.candidate == S3.bottom)


def test_blocking_restricts_candidates(rng):
    params = hit_miss_params(S3, [0.2, 0.2, 0.2, 0.2, 0.2], [5, 5], 0.1)
    pb = S3.position("12/3")
    table = one_row_per_pattern(S3, 2, blocking=pb)
    a = classify(params, table, ErrorLevels.uniform(S3, 1.0))
    assert set(a.candidate.tolist()) <= {S3.bottom, pb}


def test_prevalence_one_is_tolerated_in_classify():
    s = np.array([0.0, 0.0, 0.0, 0.0, 1.0])
    params = ModelParams(S3, s, np.full((1, 5, 5), 0.2))
    a = classify(params, one_row_per_pattern(S3, 1), ErrorLevels.uniform(S3, 0.01))
    assert np.all(a.candidate == S3.top)
    assert np.all(np.isfinite(a.complement))


def test_error_levels_validation():
    with pytest.raises(ConfigError):
        ErrorLevels((0.1, -0.1))
    with pytest.raises(ConfigError):
        ErrorLevels((1.5,))
    with pytest.raises(ConfigError):
        ErrorLevels.from_mapping(S3, {"123": 0.1})
    lv = ErrorLevels.from_mapping(S3, {lab: i / 10 for i, lab in enumerate(S3.labels())})
    assert lv.mu == (0.0, 0.1, 0.2, 0.3, 0.4)
    params = hit_miss_params(S3, [0.2] * 5, [5], 0.1)
    with pytest.raises(ConfigError):
        classify(params, one_row_per_pattern(S3, 1), ErrorLevels((0.1, 0.1)))


def test_declared_counts_and_blocked(rng):
    params = hit_miss_params(S2, [0.9, 0.1], [5, 5], 0.1)
    base = sample_table(params, 200, rng)
    table = PatternTable.from_rows(S2, base.column_names, base.gamma, base.blocking, base.counts,
                                   fully_blocked_count=17)
    a = classify(params, table, ErrorLevels.uniform(S2, 0.05))
    counts = a.declared_counts()
    assert sum(counts.values()) + a.undeclared_count() == table.total_tuples
    assert counts["1/2"] >= 17
