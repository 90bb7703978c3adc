"""Tests for interference_metrics.py module."""

import math

import numpy as np
import pytest
from scipy import stats

from fpe_toolkit.errors import InputError
from fpe_toolkit.interference_metrics import (
    accuracy_per_parameter,
    clause_capacity,
    feature_capacity,
    gram_matrix,
    mean_pairwise_cosine,
    mean_stderr,
    metrics_report,
    relative_improvement,
    total_capacity,
    welch_t_test,
)
from fpe_toolkit.masked_net import init_model

# pylint: disable=invalid-name


def test_feature_capacity__orthogonal_columns():
    """Test feature_capacity function on orthonormal columns."""

    capacity = feature_capacity(np.eye(4))

    assert np.allclose(capacity, 1.0)
    assert total_capacity(np.eye(4)) == pytest.approx(4.0)


def test_feature_capacity__duplicated_columns():
    """Test feature_capacity function on two identical columns."""
    assert np.allclose(feature_capacity(np.array([[1.0, 1.0]])), 0.5)


def test_feature_capacity__zero_column():
    """Test feature_capacity function gives 0 for an unused input."""

    w = np.array([[1.0, 0.0, 2.0], [0.5, 0.0, -1.0]])

    capacity = feature_capacity(w)

    assert capacity[1] == 0.0
    assert np.all(np.isfinite(capacity))


@pytest.mark.parametrize("seed", range(50))
def test_feature_capacity__explicit_sums(seed):
    """Test feature_capacity function against explicit dot-product sums."""

    w = np.random.default_rng(seed).normal(size=(5, 7))
    expected = []
    for i in range(7):
        own = np.dot(w[:, i], w[:, i]) ** 2
        overlap = sum(np.dot(w[:, i], w[:, j]) ** 2 for j in range(7))
        expected.append(own / overlap)

    assert np.max(np.abs(feature_capacity(w) - expected)) < 1e-10


def test_total_capacity__scale_invariant():
    """Test total_capacity function ignores a global scale."""

    w = np.random.default_rng(0).normal(size=(4, 8))

    assert abs(total_capacity(7.3 * w) - total_capacity(w)) < 1e-9


def test_total_capacity__bounded_by_rank():
    """Test total_capacity function stays within (0, h] for h neurons."""

    w = np.random.default_rng(1).normal(size=(3, 12))

    assert 0.0 < total_capacity(w) <= 3.0 + 1e-9


def test_clause_capacity():
    """Test clause_capacity function averages blocks of columns."""

    w = np.array([[1.0, 1.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])

    assert np.allclose(clause_capacity(w, 2), [1.0 / 3.0, 2.0 / 3.0])


def test_clause_capacity__indivisible():
    """Test clause_capacity function when the clause size does not divide d."""

    with pytest.raises(InputError):
        clause_capacity(np.ones((2, 5)), 2)


def test_gram_matrix__symmetric():
    """Test gram_matrix function."""

    w = np.random.default_rng(0).normal(size=(3, 4))

    gram = gram_matrix(w)

    assert np.array_equal(gram, gram.T)
    assert np.allclose(gram, w.T @ w)


@pytest.mark.parametrize(
    "w, expected",
    [
        (np.eye(3), 0.0),
        (np.array([[1.0, 2.0], [2.0, 4.0]]), 1.0),
        (np.array([[1.0, 0.0], [-1.0, 0.0]]), -1.0),
        (np.array([[1.0, 0.0], [0.0, 0.0]]), 0.0),
        (np.array([[1.0, 0.0]]), 0.0),
    ],
)
def test_mean_pairwise_cosine(w, expected):
    """Test mean_pairwise_cosine function on hand-made weights."""
    assert mean_pairwise_cosine(w) == pytest.approx(expected)


def test_relative_improvement():
    """Test relative_improvement function on reported accuracies."""
    assert relative_improvement(0.994, 0.787) == pytest.approx(0.263, abs=1e-3)


def test_relative_improvement__zero_dense():
    """Test relative_improvement function with a zero baseline."""

    with pytest.raises(InputError):
        relative_improvement(0.5, 0.0)


def test_accuracy_per_parameter():
    """Test accuracy_per_parameter function."""

    assert accuracy_per_parameter(0.9, 300) == pytest.approx(0.003)
    with pytest.raises(InputError):
        accuracy_per_parameter(0.9, 0)


def test_mean_stderr():
    """Test mean_stderr function."""

    mean, stderr = mean_stderr([1.0, 2.0, 3.0])

    assert mean == 2.0
    assert stderr == pytest.approx(1.0 / math.sqrt(3.0))
    assert mean_stderr([0.7]) == (0.7, 0.0)


def test_welch_t_test__identical_samples():
    """Test welch_t_test function with equal samples."""

    t, p = welch_t_test([0.1, 0.2, 0.3], [0.1, 0.2, 0.3])

    assert t == pytest.approx(0.0)
    assert p == pytest.approx(1.0)


def test_welch_t_test__hand_formula():
    """Test welch_t_test function against the Welch formula."""

    t, p = welch_t_test([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])

    # Both variances are 1, so the standard error is sqrt(2/3) on 4 degrees of freedom.
    expected_t = -3.0 / math.sqrt(2.0 / 3.0)
    assert t == pytest.approx(expected_t)
    assert p == pytest.approx(2.0 * stats.t.sf(abs(expected_t), df=4.0))


def test_welch_t_test__swap():
    """Test welch_t_test function is antisymmetric in its samples."""

    a, b = [0.91, 0.93, 0.95, 0.9], [0.8, 0.84, 0.79]

    t_ab, p_ab = welch_t_test(a, b)
    t_ba, p_ba = welch_t_test(b, a)

    assert t_ab == pytest.approx(-t_ba)
    assert p_ab == pytest.approx(p_ba)


@pytest.mark.parametrize("a, b", [([1.0], [1.0, 2.0]), ([1.0, 1.0], [2.0, 2.0])])
def test_welch_t_test__undefined(a, b):
    """Test welch_t_test function with too few or constant values."""

    with pytest.raises(InputError):
        welch_t_test(a, b)


def test_metrics_report():
    """Test metrics_report function and its JSON form."""

    model = init_model([8, 4, 1], seed=0)
    model.layers[0].mask[:, :2] = False

    report = metrics_report(model, accuracy=0.8, clause_size=4)
    data = report.to_json()

    assert report.per_feature_capacity[0] == 0.0
    assert report.clause_capacity.shape == (2,)
    assert report.nnz == 8 * 4 - 8 + 4
    assert report.accuracy_per_parameter == pytest.approx(0.8 / report.nnz)
    assert "gram" not in data
    assert data["totalCapacity"] == report.total_capacity
    assert data["mask"][0][:2] == [0, 0]
    assert "schemaVersion" in data
