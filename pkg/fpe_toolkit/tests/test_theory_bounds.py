"""Tests for theory_bounds.py module."""

import math
from fractions import Fraction

import pytest

from fpe_toolkit.errors import InputError
from fpe_toolkit.theory_bounds import (
    TheoryParams,
    approx_interference_ratio,
    coverage_lower_bound,
    coverage_prob_exact,
    expected_collisions,
    interference_ratio,
    min_neurons_for_coverage,
    monte_carlo,
    pair_collision_prob_exact,
    sparse_degree,
    theory_table,
)

# pylint: disable=invalid-name


def test_coverage_prob_exact__binomial_ratio():
    """Test coverage_prob_exact function returns the exact binomial ratio."""

    p = coverage_prob_exact(32, 4, 16)

    assert p.exact == Fraction(math.comb(28, 12), math.comb(32, 16))
    assert p.value == float(p.exact)
    assert abs(p.value - 0.0625) / 0.0625 < 0.25


def test_coverage_prob_exact__support_too_small():
    """Test coverage_prob_exact function when a support cannot hold a clause."""
    assert coverage_prob_exact(32, 4, 3).exact == 0


def test_coverage_prob_exact__full_support():
    """Test coverage_prob_exact function when a neuron sees every literal."""
    assert coverage_prob_exact(32, 4, 32).exact == 1


def test_pair_collision_prob_exact():
    """Test pair_collision_prob_exact function."""

    p = pair_collision_prob_exact(32, 4, 16)

    assert p.exact == Fraction(math.comb(24, 8), math.comb(32, 16))
    assert pair_collision_prob_exact(32, 4, 7).exact == 0


def test_pair_collision_prob_exact__clauses_do_not_fit():
    """Test pair_collision_prob_exact function with 2k > m."""

    with pytest.raises(InputError):
        pair_collision_prob_exact(6, 4, 3)


def test_sparse_degree():
    """Test sparse_degree function."""

    assert sparse_degree(32, 2) == 16
    with pytest.raises(InputError):
        sparse_degree(30, 4)


def test_TheoryParams__alpha_does_not_divide_m():
    """Test TheoryParams validation without an explicit support size."""

    with pytest.raises(InputError):
        TheoryParams(m=30, k=3, num_clauses=10, r=8, alpha=4)


def test_TheoryParams__explicit_degree():
    """Test TheoryParams with a support size that overrides m / alpha."""

    params = TheoryParams(m=30, k=3, num_clauses=10, r=8, alpha=4, d=7)

    assert params.degree == 7
    assert params.neurons == 32


def test_approx_interference_ratio():
    """Test approx_interference_ratio function on the case-study values."""
    assert approx_interference_ratio(2, 4) == 1.0 / 128.0


def test_interference_ratio():
    """Test interference_ratio function."""
    assert interference_ratio(2, Fraction(1, 256)) == 1.0 / 128.0


def test_expected_collisions__dense():
    """Test expected_collisions function for r = 8 and 8 clauses."""

    dense, fpe = expected_collisions(8, 8, 2, Fraction(1, 256))

    assert dense == 224.0
    assert fpe == pytest.approx(2 * 224 / 256)


def test_coverage_lower_bound__clamped():
    """Test coverage_lower_bound function stays within [0, 1]."""

    assert coverage_lower_bound(0.01, 2, 1, 100) == 0.0
    assert coverage_lower_bound(1.0, 2, 4, 8) == 1.0
    assert coverage_lower_bound(0.5, 2, 4, 8) == pytest.approx(1.0 - 8 * 0.5**8)


def test_coverage_lower_bound__invalid_probability():
    """Test coverage_lower_bound function with p above 1."""

    with pytest.raises(InputError):
        coverage_lower_bound(1.5, 2, 4, 8)


def test_min_neurons_for_coverage():
    """Test min_neurons_for_coverage function."""

    assert min_neurons_for_coverage(2, 4, 8, 0.01) == pytest.approx(8 * math.log(800))
    with pytest.raises(InputError):
        min_neurons_for_coverage(2, 4, 8, 1.0)


def test_monte_carlo__deterministic():
    """Test monte_carlo function with the same seed twice."""

    params = TheoryParams(m=16, k=2, num_clauses=8, r=2, alpha=2)

    assert monte_carlo(params, 1500, seed=3) == monte_carlo(params, 1500, seed=3)


def test_monte_carlo__invalid():
    """Test monte_carlo function with no trials or too many clauses."""

    with pytest.raises(InputError):
        monte_carlo(TheoryParams(m=16, k=2, num_clauses=8, r=2, alpha=2), 0, seed=0)
    with pytest.raises(InputError):
        monte_carlo(TheoryParams(m=16, k=4, num_clauses=5, r=2, alpha=2), 10, seed=0)


@pytest.mark.parametrize("trials", [2000, pytest.param(20000, marks=pytest.mark.slow)])
def test_monte_carlo__matches_exact(trials):
    """Test monte_carlo function agrees with the exact expectations."""

    params = TheoryParams(m=40, k=4, num_clauses=10, r=8, alpha=2)
    p = coverage_prob_exact(40, 4, 20)
    p_prime = pair_collision_prob_exact(40, 4, 20)
    _, e_fpe = expected_collisions(8, 10, 2, p_prime.exact)

    result = monte_carlo(params, trials, seed=0)

    assert result.trials == trials
    assert abs(result.mean_collisions - e_fpe) <= 3 * result.collisions_stderr + 1e-9
    miss = float((1 - p.exact) ** params.neurons)
    assert abs(result.miss_rate - miss) <= 3 * result.miss_stderr + 1e-9
    bound = coverage_lower_bound(p.exact, 2, 8, 10)
    assert result.coverage_rate >= bound - 3 * result.coverage_stderr


def test_monte_carlo__stderr_shrinks_with_trials():
    """Test monte_carlo function standard errors fall as one over the
    square root of the number of trials."""

    params = TheoryParams(m=40, k=4, num_clauses=10, r=8, alpha=2)
    counts = [500, 2000, 4000, 8000]

    scaled = [monte_carlo(params, t, seed=0).collisions_stderr * math.sqrt(t) for t in counts]

    assert all(s > 0 for s in scaled)
    assert max(scaled) / min(scaled) < 1.15


def test_theory_table():
    """Test theory_table function rows with and without sampling."""

    params = TheoryParams(m=32, k=4, num_clauses=8, r=8, alpha=2, epsilon=0.05)

    rows = theory_table(params)
    sampled = theory_table(params, mc_trials=200, seed=1)

    assert len(rows) == 8
    assert all(row.empirical is None for row in rows)
    assert rows[0].exact == coverage_prob_exact(32, 4, 16).value
    assert rows[0].approx == 0.0625
    assert rows[4].approx == 1.0 / 128.0
    assert rows[5].exact == 224.0
    assert rows[-1].exact == pytest.approx(8 * math.log(8 / 0.05))
    assert sampled[6].empirical is not None
    assert len(theory_table(TheoryParams(m=32, k=4, num_clauses=8, r=8, alpha=2))) == 7
