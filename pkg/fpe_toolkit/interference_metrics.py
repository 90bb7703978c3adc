"""Superposition diagnostics of a first-layer weight matrix.

Capacities are measured per input-feature column ``i`` of ``W1``::

    C_i = (W[:, i] . W[:, i])^2 / sum_j (W[:, i] . W[:, j])^2

which is scale-free. A zero column has capacity 0 and a zero row has
cosine similarity 0 with every other row.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import humps
import numpy as np
import numpy.typing as npt
from scipy import stats

from .core_math import Matrix
from .errors import InputError, ShapeError
from .masked_net import MlpModel, weight_nonzero_count

__all__ = (
    "MetricsReport",
    "gram_matrix",
    "feature_capacity",
    "total_capacity",
    "clause_capacity",
    "mean_pairwise_cosine",
    "relative_improvement",
    "accuracy_per_parameter",
    "mean_stderr",
    "welch_t_test",
    "metrics_report",
)

METRICS_SCHEMA_VERSION = 1


@dataclass(slots=True, frozen=True)
class MetricsReport:  # pylint: disable=too-many-instance-attributes
    """Interference metrics of a model's first layer.

    Attributes
    ----------
    total_capacity: :class:`float`
        Sum of the per-feature capacities.
    per_feature_capacity: :class:`numpy.ndarray`
        Capacity of every input column.
    clause_capacity: :class:`numpy.ndarray` | :class:`None`
        Mean column capacity per clause, when a clause size is known.
    mean_cosine: :class:`float`
        Mean cosine similarity over distinct neuron pairs.
    gram: :class:`numpy.ndarray`
        ``W1^T W1``.
    mask: :class:`numpy.ndarray`
        The first layer's mask; ``False`` marks masked parameters.
    nnz: :class:`int`
        Non-zero weights of the whole model.
    accuracy: :class:`float` | :class:`None`
        Test accuracy, when known.
    accuracy_per_parameter: :class:`float` | :class:`None`
        ``accuracy / nnz``, when the accuracy is known.
    """

    total_capacity: float
    per_feature_capacity: npt.NDArray[np.float64]
    clause_capacity: npt.NDArray[np.float64] | None
    mean_cosine: float
    gram: Matrix
    mask: npt.NDArray[np.bool_]
    nnz: int
    accuracy: float | None = None
    accuracy_per_parameter: float | None = None

    def to_json(self) -> dict:
        """Returns the report as a camelCase JSON-ready dictionary.

        The Gram matrix is left out; it is written as its own CSV.
        """

        data = asdict(self)
        del data["gram"]
        data["per_feature_capacity"] = self.per_feature_capacity.tolist()
        data["clause_capacity"] = (
            None if self.clause_capacity is None else self.clause_capacity.tolist()
        )
        data["mask"] = self.mask.astype(int).tolist()
        data["schema_version"] = METRICS_SCHEMA_VERSION
        return humps.camelize(data)


def gram_matrix(w1: Matrix) -> Matrix:
    """Returns ``W1^T W1``, exactly symmetric."""
    w1 = np.asarray(w1, dtype=np.float64)
    gram = w1.T @ w1
    return (gram + gram.T) / 2.0


def feature_capacity(w: Matrix) -> npt.NDArray[np.float64]:
    """Returns the capacity of every column of `w`."""

    gram = gram_matrix(w)
    numerator = np.diag(gram) ** 2
    denominator = (gram**2).sum(axis=1)
    capacity = np.zeros_like(numerator)
    np.divide(numerator, denominator, out=capacity, where=denominator > 0)
    return capacity


def total_capacity(w: Matrix) -> float:
    """Returns the sum of the column capacities of `w`."""
    return float(feature_capacity(w).sum())


def clause_capacity(w: Matrix, clause_size: int) -> npt.NDArray[np.float64]:
    """Returns the mean column capacity of each block of `clause_size`
    consecutive columns.

    Raises
    ------
    InputError
        If `clause_size` does not divide the column count.
    """

    capacity = feature_capacity(w)
    if clause_size < 1 or capacity.size % clause_size:
        raise InputError(f"clause size {clause_size} does not divide {capacity.size} columns")
    return capacity.reshape(-1, clause_size).mean(axis=1)


def mean_pairwise_cosine(w1: Matrix) -> float:
    """Returns the mean cosine similarity over unordered pairs of distinct
    rows; 0 with fewer than two rows."""

    w1 = np.asarray(w1, dtype=np.float64)
    h = w1.shape[0]
    if h < 2:
        return 0.0
    norms = np.linalg.norm(w1, axis=1)
    unit = np.zeros_like(w1)
    np.divide(w1, norms[:, None], out=unit, where=norms[:, None] > 0)
    cosine = np.clip(unit @ unit.T, -1.0, 1.0)
    upper = np.triu_indices(h, k=1)
    return float(cosine[upper].mean())


def relative_improvement(fpe_accuracy: float, dense_accuracy: float) -> float:
    """Returns ``(fpe - dense) / dense``.

    Raises
    ------
    InputError
        If `dense_accuracy` is 0.
    """

    if dense_accuracy == 0:
        raise InputError("relative improvement over a zero dense accuracy")
    return (fpe_accuracy - dense_accuracy) / dense_accuracy


def accuracy_per_parameter(accuracy: float, nnz: int) -> float:
    """Returns ``accuracy / nnz``."""
    if nnz <= 0:
        raise InputError(f"non-zero parameter count must be positive, got {nnz}")
    return accuracy / nnz


def mean_stderr(values: npt.ArrayLike) -> tuple[float, float]:
    """Returns the mean and the standard error of the mean; the error is
    0 for fewer than two values."""

    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise InputError("mean of an empty sample")
    if values.size < 2:
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def welch_t_test(sample_a: npt.ArrayLike, sample_b: npt.ArrayLike) -> tuple[float, float]:
    """Returns Welch's t statistic and its two-sided p-value.

    Raises
    ------
    InputError
        If a sample has fewer than two values or both have zero variance.
    """

    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise InputError("Welch's test needs at least two values per sample")
    if a.var(ddof=1) == 0 and b.var(ddof=1) == 0:
        raise InputError("Welch's test is undefined when both samples are constant")
    result = stats.ttest_ind(a, b, equal_var=False)
    return float(result.statistic), float(result.pvalue)


def metrics_report(
    model: MlpModel, accuracy: float | None = None, clause_size: int | None = None
) -> MetricsReport:
    """Computes the interference metrics of `model`'s first layer."""

    first = model.layers[0]
    if first.mask.shape != first.weights.shape:
        raise ShapeError("first layer mask does not match its weights")
    w1 = first.effective_weights
    capacity = feature_capacity(w1)
    nnz = weight_nonzero_count(model)
    return MetricsReport(
        total_capacity=float(capacity.sum()),
        per_feature_capacity=capacity,
        clause_capacity=None if clause_size is None else clause_capacity(w1, clause_size),
        mean_cosine=mean_pairwise_cosine(w1),
        gram=gram_matrix(w1),
        mask=first.mask.copy(),
        nnz=nnz,
        accuracy=accuracy,
        accuracy_per_parameter=(
            None if accuracy is None else accuracy_per_parameter(accuracy, nnz)
        ),
    )
