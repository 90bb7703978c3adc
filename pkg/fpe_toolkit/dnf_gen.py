"""Monotone read-once DNF datasets.

A formula over ``m`` literals has ``m / k`` clauses; clause ``j`` is the
conjunction of literals ``[j*k, (j+1)*k)``. A row is positive when some
clause has all of its literals set.

Positive rows saturate one random clause and pad with random extra ones
until the number of active bits lies in ``[m//4, m//4 + m//8]``. Negative
rows are built half by breaking one literal of a saturated clause and
half by sampling random assignments; candidates that satisfy a clause
are rejected and retried with the same number of active bits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .core_math import Matrix
from .data_io import LabeledMatrixDataset
from .errors import InputError, NumericError

__all__ = (
    "DnfSpec",
    "BooleanDataset",
    "POSITIVE",
    "FLIP_NEGATIVE",
    "RANDOM_NEGATIVE",
    "MAX_REJECTIONS",
    "evaluate_dnf",
    "generate",
    "generate_train_test",
    "jitter",
)

_log = logging.getLogger(__name__)

POSITIVE = 0
FLIP_NEGATIVE = 1
RANDOM_NEGATIVE = 2
MAX_REJECTIONS = 10_000


@dataclass(slots=True, frozen=True)
class DnfSpec:
    """A monotone read-once DNF formula.

    Attributes
    ----------
    m: :class:`int`
        The number of literals.
    k: :class:`int`
        The number of literals per clause; must divide `m`.
    """

    m: int
    k: int

    def __post_init__(self) -> None:
        if self.k < 1 or self.m < 1 or self.m % self.k:
            raise InputError(f"clause size {self.k} must divide literal count {self.m}")

    @property
    def num_clauses(self) -> int:
        """The number of clauses ``m / k``."""
        return self.m // self.k

    @property
    def min_ones(self) -> int:
        """The fewest active bits of a positive row."""
        return self.m // 4

    @property
    def max_ones(self) -> int:
        """The most active bits of a positive row."""
        return self.m // 4 + self.m // 8

    def clause(self, j: int) -> range:
        """The literal indices of clause `j`."""
        return range(j * self.k, (j + 1) * self.k)


@dataclass(slots=True, frozen=True)
class BooleanDataset:
    """A generated DNF dataset.

    Attributes
    ----------
    x: :class:`numpy.ndarray`
        The ``n x m`` 0/1 assignments, positives first.
    y: :class:`numpy.ndarray`
        The 0/1 labels.
    spec: :class:`DnfSpec`
        The formula.
    seed: :class:`int`
        The generation seed.
    construction: :class:`numpy.ndarray`
        How each row was built: ``POSITIVE``, ``FLIP_NEGATIVE`` or
        ``RANDOM_NEGATIVE``.
    """

    x: Matrix
    y: npt.NDArray[np.int64]
    spec: DnfSpec
    seed: int
    construction: npt.NDArray[np.int8]

    def to_labeled(self, jitter_seed: int | None = None) -> LabeledMatrixDataset:
        """Returns the dataset as a two-class labeled matrix, jittered
        when `jitter_seed` is given."""

        x = self.x if jitter_seed is None else jitter(self.x, jitter_seed)
        return LabeledMatrixDataset(
            x=x,
            y=self.y,
            class_count=2,
            source=(
                f"dnf:m={self.spec.m},k={self.spec.k},seed={self.seed},"
                f"jitter={jitter_seed is not None}"
            ),
        )


def evaluate_dnf(row: npt.ArrayLike, spec: DnfSpec) -> bool:
    """Returns whether `row` satisfies some clause of `spec`.

    Raises
    ------
    InputError
        If `row` does not have `spec.m` entries.
    """

    row = np.asarray(row).ravel()
    if row.size != spec.m:
        raise InputError(f"row of length {row.size} for {spec.m} literals")
    return bool(np.any(np.all(row.reshape(spec.num_clauses, spec.k) == 1, axis=1)))


def _saturated_row(
    spec: DnfSpec, ones: int, rng: np.random.Generator
) -> tuple[npt.NDArray[np.int8], range]:
    clause = spec.clause(int(rng.integers(spec.num_clauses)))
    row = np.zeros(spec.m, dtype=np.int8)
    row[list(clause)] = 1
    extra = max(0, ones - spec.k)
    if extra:
        others = np.setdiff1d(np.arange(spec.m), np.asarray(clause))
        row[rng.choice(others, size=extra, replace=False)] = 1
    return row, clause


def _negative_row(
    spec: DnfSpec, kind: int, rng: np.random.Generator
) -> npt.NDArray[np.int8]:
    ones = int(rng.integers(spec.min_ones, spec.max_ones + 1))
    for _ in range(MAX_REJECTIONS):
        if kind == FLIP_NEGATIVE:
            row, clause = _saturated_row(spec, ones, rng)
            row[int(rng.choice(np.asarray(clause)))] = 0
        else:
            row = np.zeros(spec.m, dtype=np.int8)
            row[rng.choice(spec.m, size=ones, replace=False)] = 1
        if not evaluate_dnf(row, spec):
            return row
    raise NumericError(f"no negative row found after {MAX_REJECTIONS} attempts for {spec}")


def generate(n: int, spec: DnfSpec, seed: int) -> BooleanDataset:
    """Generates `n` rows, exactly half of them positive.

    Raises
    ------
    InputError
        If `n` is odd or a clause does not fit the active-bit range.
    """

    if n < 0 or n % 2:
        raise InputError(f"sample count must be even and non-negative, got {n}")
    if spec.k > spec.max_ones:
        raise InputError(
            f"clause size {spec.k} exceeds the active-bit maximum {spec.max_ones}"
        )

    rng = np.random.default_rng(seed)
    n_pos = n // 2
    n_neg = n - n_pos
    x = np.zeros((n, spec.m), dtype=np.int8)

    for i in range(n_pos):
        ones = int(rng.integers(spec.min_ones, spec.max_ones + 1))
        x[i], _ = _saturated_row(spec, ones, rng)

    # Alternate the two negative constructions so their counts differ by at most one.
    kinds = np.where(np.arange(n_neg) % 2 == 0, FLIP_NEGATIVE, RANDOM_NEGATIVE)
    for i, kind in enumerate(kinds):
        x[n_pos + i] = _negative_row(spec, int(kind), rng)

    y = np.concatenate([np.ones(n_pos, dtype=np.int64), np.zeros(n_neg, dtype=np.int64)])
    construction = np.concatenate([np.full(n_pos, POSITIVE), kinds]).astype(np.int8)
    _log.debug("generated %d DNF rows for m=%d k=%d seed=%d", n, spec.m, spec.k, seed)
    return BooleanDataset(x.astype(np.float64), y, spec, seed, construction)


def generate_train_test(
    n_train: int, n_test: int, spec: DnfSpec, seed: int
) -> tuple[BooleanDataset, BooleanDataset]:
    """Generates independent train and test sets; the test set uses
    ``seed + 1``."""
    return generate(n_train, spec, seed), generate(n_test, spec, seed + 1)


def jitter(x: npt.ArrayLike, seed: int) -> Matrix:
    """Maps ones to ``uniform[3, 3.5]`` and zeros to ``uniform[0, 0.5]``.

    Raises
    ------
    InputError
        If `x` has entries other than 0 and 1.
    """

    x = np.asarray(x, dtype=np.float64)
    if not np.all((x == 0.0) | (x == 1.0)):
        raise InputError("jitter expects a binary matrix")
    noise = np.random.default_rng(seed).uniform(0.0, 0.5, size=x.shape)
    return np.where(x == 1.0, 3.0 + noise, noise)
