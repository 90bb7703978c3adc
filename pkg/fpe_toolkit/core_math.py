"""Dense matrix arithmetic, activations, losses and gradient checking.

All values are 64-bit floats laid out batch-first: a batch is a
``rows x features`` matrix.

Functions
---------
matmul
    Matrix product with shape checking.
relu
    Elementwise rectifier.
sigmoid
    Numerically stable logistic function.
stable_softmax
    Row-wise softmax after subtracting the row maximum.
bce_loss
    Mean binary cross-entropy of clamped probabilities.
ce_loss
    Mean softmax cross-entropy computed from logits.
layer_norm
    Row-wise normalization followed by an affine map.
grad_check
    Compares an analytic gradient with central finite differences.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import numpy.typing as npt

from .errors import InputError, NumericError, ShapeError

__all__ = (
    "Matrix",
    "EPS_CLAMP",
    "EPS_LN",
    "GRAD_CHECK_DELTA",
    "matmul",
    "relu",
    "sigmoid",
    "stable_softmax",
    "bce_loss",
    "ce_loss",
    "layer_norm",
    "grad_check",
)

Matrix = npt.NDArray[np.float64]

EPS_CLAMP = 1e-7
EPS_LN = 1e-5
GRAD_CHECK_DELTA = 1e-4


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Returns the matrix product ``a @ b``.

    Raises
    ------
    ShapeError
        If the inner dimensions do not agree.
    """

    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def relu(x: Matrix) -> Matrix:
    """Returns ``max(0, x)`` elementwise."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def sigmoid(x: Matrix) -> Matrix:
    """Returns ``1 / (1 + exp(-x))`` elementwise without overflow."""

    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def stable_softmax(z: Matrix) -> Matrix:
    """Returns the row-wise softmax of `z`."""

    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=1, keepdims=True)


def bce_loss(p: npt.ArrayLike, y: npt.ArrayLike) -> float:
    """Returns the mean binary cross-entropy.

    Probabilities are clamped to ``[EPS_CLAMP, 1 - EPS_CLAMP]`` first.
    """

    p = np.clip(np.asarray(p, dtype=np.float64).ravel(), EPS_CLAMP, 1.0 - EPS_CLAMP)
    y = np.asarray(y, dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise ShapeError(f"{p.size} probabilities for {y.size} labels")
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def ce_loss(logits: Matrix, y: npt.ArrayLike) -> float:
    """Returns the mean softmax cross-entropy of integer labels `y`.

    Raises
    ------
    InputError
        If a label lies outside ``[0, classes)``.
    """

    logits = np.asarray(logits, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).ravel()
    if logits.ndim != 2 or logits.shape[0] != y.size:
        raise ShapeError(f"logits {logits.shape} for {y.size} labels")
    if y.size and (y.min() < 0 or y.max() >= logits.shape[1]):
        raise InputError(f"labels must lie in [0, {logits.shape[1]})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(log_norm - shifted[np.arange(y.size), y]))


def layer_norm(
    x: Matrix, gain: npt.ArrayLike, shift: npt.ArrayLike, eps: float = EPS_LN
) -> Matrix:
    """Normalizes each row to zero mean and unit variance, then applies
    ``gain * x_hat + shift``."""

    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    x_hat = (x - mean) / np.sqrt(var + eps)
    return x_hat * np.asarray(gain, dtype=np.float64) + np.asarray(
        shift, dtype=np.float64
    )


def grad_check(
    f: Callable[[npt.NDArray[np.float64]], float],
    theta: npt.ArrayLike,
    analytic_grad: npt.ArrayLike,
    delta: float = GRAD_CHECK_DELTA,
) -> float:
    """Compares `analytic_grad` with central differences of `f` at `theta`.

    Parameters
    ----------
    f: :class:`Callable`
        A scalar function of a parameter vector.
    theta: :class:`numpy.ndarray`
        The point at which the gradient is checked.
    analytic_grad: :class:`numpy.ndarray`
        The gradient to verify, same length as `theta`.
    delta: :class:`float`
        The finite-difference step.

    Returns
    -------
    float
        ``max |g_fd - g_an| / max(1e-8, |g_fd| + |g_an|)`` over coordinates.

    Raises
    ------
    NumericError
        If `f` evaluates to a non-finite value.
    """

    theta = np.array(theta, dtype=np.float64).ravel()
    analytic = np.asarray(analytic_grad, dtype=np.float64).ravel()
    if analytic.shape != theta.shape:
        raise ShapeError(f"gradient of length {analytic.size} for {theta.size} parameters")

    worst = 0.0
    for j in range(theta.size):
        original = theta[j]
        theta[j] = original + delta
        f_plus = f(theta)
        theta[j] = original - delta
        f_minus = f(theta)
        theta[j] = original
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"non-finite evaluation at coordinate {j}")

        g_fd = (f_plus - f_minus) / (2.0 * delta)
        g_an = analytic[j]
        err = abs(g_fd - g_an) / max(1e-8, abs(g_fd) + abs(g_an))
        worst = max(worst, err)

    return float(worst)
