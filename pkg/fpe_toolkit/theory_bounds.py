"""Coverage and collision probabilities of sparse neurons.

Every sparse neuron connects to a support of ``d`` of the ``m`` literals,
sampled without replacement within the neuron and independently across
neurons. A neuron covers a clause when its support holds all ``k`` of the
clause's literals, and collides when it covers two distinct clauses.

Exact probabilities are ratios of integer binomials kept as
:class:`fractions.Fraction`; floats appear only in the returned
``value`` fields.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InputError

__all__ = (
    "TheoryParams",
    "ExactProbability",
    "MonteCarloResult",
    "TheoryRow",
    "sparse_degree",
    "coverage_prob_exact",
    "coverage_lower_bound",
    "min_neurons_for_coverage",
    "pair_collision_prob_exact",
    "interference_ratio",
    "approx_interference_ratio",
    "expected_collisions",
    "monte_carlo",
    "theory_table",
)

_log = logging.getLogger(__name__)

MC_CHUNK = 1000


@dataclass(slots=True, frozen=True)
class TheoryParams:
    """Parameters of a coverage query.

    Attributes
    ----------
    m: :class:`int`
        The number of literals.
    k: :class:`int`
        Literals per clause.
    num_clauses: :class:`int`
        The number of disjoint clauses.
    r: :class:`int`
        The dense neuron count; the expanded network has ``alpha * r``.
    alpha: :class:`int`
        The expansion factor.
    d: :class:`int` | :class:`None`
        The support size; ``m / alpha`` when omitted.
    epsilon: :class:`float` | :class:`None`
        Tolerance of the minimum neuron count.
    """

    m: int
    k: int
    num_clauses: int
    r: int
    alpha: int
    d: int | None = None
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.k <= self.m:
            raise InputError(f"clause size {self.k} outside [0, {self.m}]")
        if self.num_clauses < 0 or self.r < 0 or self.alpha < 1:
            raise InputError("clause count and r must be non-negative and alpha positive")
        if self.d is None:
            sparse_degree(self.m, self.alpha)
        elif not 1 <= self.d <= self.m:
            raise InputError(f"support size {self.d} outside [1, {self.m}]")
        if self.epsilon is not None and not 0.0 < self.epsilon < 1.0:
            raise InputError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @property
    def degree(self) -> int:
        """The support size of a sparse neuron."""
        return self.d if self.d is not None else sparse_degree(self.m, self.alpha)

    @property
    def neurons(self) -> int:
        """The number of sparse neurons ``alpha * r``."""
        return self.alpha * self.r


@dataclass(slots=True, frozen=True)
class ExactProbability:
    """An exact rational probability and its float value.

    Attributes
    ----------
    exact: :class:`fractions.Fraction`
        The exact value.
    value: :class:`float`
        ``float(exact)``.
    """

    exact: Fraction
    value: float

    @classmethod
    def of(cls, exact: Fraction) -> ExactProbability:
        """Wraps `exact`."""
        return cls(exact, float(exact))


@dataclass(slots=True, frozen=True)
class MonteCarloResult:
    """Empirical coverage and collision statistics.

    Attributes
    ----------
    trials: :class:`int`
        Sampled networks.
    coverage_rate: :class:`float`
        Fraction of networks covering every clause.
    coverage_stderr: :class:`float`
        Its standard error.
    mean_collisions: :class:`float`
        Mean number of (neuron, clause pair) collisions per network.
    collisions_stderr: :class:`float`
        Its standard error.
    miss_rate: :class:`float`
        Fraction of (network, clause) pairs where the clause is uncovered.
    miss_stderr: :class:`float`
        Its standard error over networks.
    """

    trials: int
    coverage_rate: float
    coverage_stderr: float
    mean_collisions: float
    collisions_stderr: float
    miss_rate: float
    miss_stderr: float


@dataclass(slots=True, frozen=True)
class TheoryRow:
    """One row of :func:`theory_table`.

    Attributes
    ----------
    quantity: :class:`str`
        What the row reports.
    exact: :class:`float`
        The exact value.
    approx: :class:`float` | :class:`None`
        The closed-form approximation, when there is one.
    empirical: :class:`float` | :class:`None`
        The Monte-Carlo estimate, when sampled.
    stderr: :class:`float` | :class:`None`
        Its standard error.
    """

    quantity: str
    exact: float
    approx: float | None = None
    empirical: float | None = None
    stderr: float | None = None


def sparse_degree(m: int, alpha: int) -> int:
    """Returns ``m / alpha``.

    Raises
    ------
    InputError
        If `alpha` does not divide `m`.
    """

    if alpha < 1 or m % alpha:
        raise InputError(f"expansion factor {alpha} does not divide {m} literals")
    return m // alpha


def _check_range(m: int, k: int, d: int) -> None:
    if not 0 <= k <= m or not 0 <= d <= m:
        raise InputError(f"need 0 <= k <= m and 0 <= d <= m, got m={m} k={k} d={d}")


def coverage_prob_exact(m: int, k: int, d: int) -> ExactProbability:
    """Returns ``C(m-k, d-k) / C(m, d)``, the probability that a random
    ``d``-support holds a fixed ``k``-clause."""

    _check_range(m, k, d)
    if d < k:
        return ExactProbability.of(Fraction(0))
    return ExactProbability.of(Fraction(math.comb(m - k, d - k), math.comb(m, d)))


def pair_collision_prob_exact(m: int, k: int, d: int) -> ExactProbability:
    """Returns ``C(m-2k, d-2k) / C(m, d)``, the probability that a random
    ``d``-support holds two fixed disjoint ``k``-clauses.

    Raises
    ------
    InputError
        If two disjoint clauses do not fit, ``2k > m``.
    """

    _check_range(m, k, d)
    if 2 * k > m:
        raise InputError(f"two disjoint clauses of size {k} need at least {2 * k} literals")
    if d < 2 * k:
        return ExactProbability.of(Fraction(0))
    return ExactProbability.of(Fraction(math.comb(m - 2 * k, d - 2 * k), math.comb(m, d)))


def coverage_lower_bound(p: float | Fraction, alpha: int, r: int, num_clauses: int) -> float:
    """Returns the union bound ``1 - C (1 - p)^(alpha r)`` clamped to [0, 1]."""

    if not 0 <= p <= 1:
        raise InputError(f"probability must lie in [0, 1], got {p}")
    bound = 1.0 - num_clauses * (1.0 - float(p)) ** (alpha * r)
    return min(1.0, max(0.0, bound))


def min_neurons_for_coverage(alpha: int, k: int, num_clauses: int, epsilon: float) -> float:
    """Returns ``alpha^(k-1) ln(C / epsilon)``, the dense neuron count above
    which every clause is covered with probability at least ``1 - epsilon``."""

    if not 0.0 < epsilon < 1.0:
        raise InputError(f"epsilon must lie in (0, 1), got {epsilon}")
    if num_clauses < 1:
        raise InputError("at least one clause is needed")
    return alpha ** (k - 1) * math.log(num_clauses / epsilon)


def interference_ratio(alpha: int, p_prime: float | Fraction) -> float:
    """Returns ``alpha * p'``, the expected collisions of the expanded
    network relative to the dense one."""
    return float(alpha * p_prime)


def approx_interference_ratio(alpha: int, k: int) -> float:
    """Returns ``alpha^-(2k-1)``."""
    return float(Fraction(1, alpha ** (2 * k - 1)))


def expected_collisions(
    r: int, num_clauses: int, alpha: int, p_prime: float | Fraction
) -> tuple[float, float]:
    """Returns the expected collisions ``(E_dense, E_fpe)``.

    A dense neuron sees every literal, so it collides on every clause pair.
    """

    pairs = math.comb(num_clauses, 2)
    return float(r * pairs), float(alpha * r * pairs * p_prime)


def monte_carlo(params: TheoryParams, trials: int, seed: int) -> MonteCarloResult:
    """Samples `trials` expanded networks and measures coverage and collisions.

    Clause ``j`` occupies literals ``[j*k, (j+1)*k)``. Trials are drawn in
    chunks, each from its own generator spawned from `seed`.

    Raises
    ------
    InputError
        If `trials` is not positive or the clauses do not fit in ``m``.
    """

    if trials < 1:
        raise InputError(f"trials must be positive, got {trials}")
    if params.num_clauses * params.k > params.m:
        raise InputError(f"{params.num_clauses} clauses of size {params.k} exceed {params.m} literals")

    chunks = [MC_CHUNK] * (trials // MC_CHUNK)
    if trials % MC_CHUNK:
        chunks.append(trials % MC_CHUNK)
    streams = np.random.SeedSequence(seed).spawn(len(chunks))

    covered_all, collisions, misses = [], [], []
    for size, stream in zip(chunks, streams):
        a, b, c = _sample_chunk(params, size, np.random.default_rng(stream))
        covered_all.append(a)
        collisions.append(b)
        misses.append(c)

    covered_all = np.concatenate(covered_all).astype(np.float64)
    collisions = np.concatenate(collisions).astype(np.float64)
    misses = np.concatenate(misses)
    root = math.sqrt(trials)

    def stderr(values: np.ndarray) -> float:
        return float(values.std(ddof=1) / root) if trials > 1 else 0.0

    result = MonteCarloResult(
        trials=trials,
        coverage_rate=float(covered_all.mean()),
        coverage_stderr=stderr(covered_all),
        mean_collisions=float(collisions.mean()),
        collisions_stderr=stderr(collisions),
        miss_rate=float(misses.mean()),
        miss_stderr=stderr(misses),
    )
    _log.debug("monte carlo over %d networks: %s", trials, result)
    return result


def _sample_chunk(
    params: TheoryParams, size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m, k, clauses = params.m, params.k, params.num_clauses
    # Ranks of i.i.d. uniforms give a uniform d-subset per neuron.
    ranks = rng.random((size, params.neurons, m)).argsort(axis=2).argsort(axis=2)
    support = ranks < params.degree
    covers = support[:, :, : clauses * k].reshape(size, params.neurons, clauses, k).all(axis=3)

    per_neuron = covers.sum(axis=2)
    collisions = (per_neuron * (per_neuron - 1) // 2).sum(axis=1)
    covered = covers.any(axis=1)
    misses = (~covered).mean(axis=1) if clauses else np.zeros(size)
    return covered.all(axis=1), collisions, misses


def theory_table(params: TheoryParams, mc_trials: int = 0, seed: int = 0) -> list[TheoryRow]:
    """Returns the exact, approximate and sampled quantities of `params`.

    Sampling is skipped when `mc_trials` is 0.
    """

    m, k, alpha, clauses = params.m, params.k, params.alpha, params.num_clauses
    d = params.degree
    p = coverage_prob_exact(m, k, d)
    p_prime = pair_collision_prob_exact(m, k, d)
    e_dense, e_fpe = expected_collisions(params.r, clauses, alpha, p_prime.exact)
    mc = monte_carlo(params, mc_trials, seed) if mc_trials else None

    def sampled(value: str, error: str) -> dict:
        if mc is None:
            return {}
        return {"empirical": getattr(mc, value), "stderr": getattr(mc, error)}

    rows = [
        TheoryRow("coverage probability p", p.value, approx=float(Fraction(d, m) ** k)),
        TheoryRow(
            "per-clause miss (1-p)^(alpha r)",
            float((1 - p.exact) ** params.neurons),
            **sampled("miss_rate", "miss_stderr"),
        ),
        TheoryRow(
            "all-clause coverage lower bound",
            coverage_lower_bound(p.exact, alpha, params.r, clauses),
            **sampled("coverage_rate", "coverage_stderr"),
        ),
        TheoryRow("pair collision probability p'", p_prime.value, approx=float(Fraction(d, m) ** (2 * k))),
        TheoryRow(
            "interference ratio alpha p'",
            interference_ratio(alpha, p_prime.exact),
            approx=approx_interference_ratio(alpha, k),
        ),
        TheoryRow("expected dense collisions", e_dense),
        TheoryRow("expected FPE collisions", e_fpe, **sampled("mean_collisions", "collisions_stderr")),
    ]
    if params.epsilon is not None:
        rows.append(
            TheoryRow(
                "minimum dense neurons r",
                min_neurons_for_coverage(alpha, k, max(1, clauses), params.epsilon),
            )
        )
    return rows
