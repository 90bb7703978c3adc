"""Tests for dnf_gen.py module."""

import numpy as np
import pytest

from fpe_toolkit.dnf_gen import (
    FLIP_NEGATIVE,
    POSITIVE,
    RANDOM_NEGATIVE,
    DnfSpec,
    evaluate_dnf,
    generate,
    generate_train_test,
    jitter,
)
from fpe_toolkit.errors import InputError

# pylint: disable=invalid-name


@pytest.mark.parametrize("m, k", [(12, 4), (32, 4), (128, 4)])
def test_generate__labels_match_formula(m, k):
    """Test generate function labels every row by the formula."""

    spec = DnfSpec(m, k)

    data = generate(3334, spec, seed=3)

    assert data.x.shape == (3334, m)
    for row, label in zip(data.x, data.y):
        assert evaluate_dnf(row, spec) == bool(label)


@pytest.mark.parametrize("m, k", [(12, 4), (32, 4), (128, 4)])
def test_generate__balance_and_popcount(m, k):
    """Test generate function balance and active-bit range."""

    spec = DnfSpec(m, k)

    data = generate(200, spec, seed=0)

    assert int(data.y.sum()) == 100
    ones = data.x.sum(axis=1)
    positives = ones[data.y == 1]
    assert positives.min() >= spec.min_ones
    assert positives.max() <= spec.max_ones


def test_generate__negative_constructions():
    """Test generate function splits negatives between both constructions."""

    data = generate(102, DnfSpec(32, 4), seed=1)

    assert np.count_nonzero(data.construction == POSITIVE) == 51
    flips = np.count_nonzero(data.construction == FLIP_NEGATIVE)
    randoms = np.count_nonzero(data.construction == RANDOM_NEGATIVE)
    assert flips + randoms == 51
    assert abs(flips - randoms) <= 1


def test_generate__flip_negatives_miss_one_literal():
    """Test generate function flip negatives leave one clause one bit short."""

    spec = DnfSpec(32, 4)
    data = generate(100, spec, seed=2)

    for row in data.x[data.construction == FLIP_NEGATIVE]:
        per_clause = row.reshape(spec.num_clauses, spec.k).sum(axis=1)
        assert per_clause.max() == spec.k - 1


def test_generate__deterministic():
    """Test generate function is a function of its seed."""

    spec = DnfSpec(32, 4)

    a = generate(100, spec, seed=7)
    b = generate(100, spec, seed=7)
    c = generate(100, spec, seed=8)

    assert np.array_equal(a.x, b.x)
    assert not np.array_equal(a.x, c.x)


@pytest.mark.parametrize("n", [3, -2])
def test_generate__invalid_count(n):
    """Test generate function with odd or negative sample counts."""

    with pytest.raises(InputError):
        generate(n, DnfSpec(32, 4), seed=0)


def test_generate__clause_too_large():
    """Test generate function when a clause cannot fit the active-bit range."""

    with pytest.raises(InputError):
        generate(10, DnfSpec(8, 8), seed=0)


def test_DnfSpec__indivisible():
    """Test DnfSpec validation when k does not divide m."""

    with pytest.raises(InputError):
        DnfSpec(10, 4)


def test_evaluate_dnf():
    """Test evaluate_dnf function on hand-made rows."""

    spec = DnfSpec(6, 3)

    assert evaluate_dnf([0, 0, 0, 1, 1, 1], spec)
    assert not evaluate_dnf([1, 1, 0, 0, 1, 1], spec)


def test_evaluate_dnf__wrong_length():
    """Test evaluate_dnf function with a row of the wrong length."""

    with pytest.raises(InputError):
        evaluate_dnf([1, 1, 1], DnfSpec(6, 3))


def test_generate_train_test__independent_seeds():
    """Test generate_train_test function draws the test set from seed + 1."""

    spec = DnfSpec(32, 4)

    train, test = generate_train_test(20, 20, spec, seed=4)

    assert np.array_equal(test.x, generate(20, spec, seed=5).x)
    assert not np.array_equal(train.x, test.x)


def test_jitter__ranges():
    """Test jitter function maps bits into disjoint ranges."""

    x = generate(100, DnfSpec(32, 4), seed=0).x

    out = jitter(x, seed=1)

    assert np.all((out[x == 1] >= 3.0) & (out[x == 1] <= 3.5))
    assert np.all((out[x == 0] >= 0.0) & (out[x == 0] <= 0.5))


def test_jitter__non_binary():
    """Test jitter function with a non-binary matrix."""

    with pytest.raises(InputError):
        jitter(np.array([[0.0, 0.5]]), seed=0)


def test_BooleanDataset_to_labeled():
    """Test BooleanDataset.to_labeled method with and without jitter."""

    data = generate(10, DnfSpec(12, 3), seed=0)

    plain = data.to_labeled()
    noisy = data.to_labeled(jitter_seed=9)

    assert plain.class_count == 2
    assert np.array_equal(plain.x, data.x)
    assert np.array_equal(noisy.y, data.y)
    assert noisy.x.min() >= 0.0 and noisy.x.max() > 3.0
    assert "jitter=True" in noisy.source
