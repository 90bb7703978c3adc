"""Masked sparse MLP models.

A model is an ordered stack of :class:`MaskedLayer` objects. Every hidden
layer is followed by an optional LayerNorm and a ReLU; the last layer is
the classification head, read either as a sigmoid probability (binary)
or as raw logits (multiclass).

Masks are binary and the contract ``mask == 0 => weight == 0`` holds
after every public mutation.

Classes
-------
MaskedLayer
    A weight matrix with an optional bias and a binary mask.
MlpModel
    A stack of masked layers.
ForwardCache
    Intermediate values of a forward pass needed by backward.
LayerGradients
    Gradients of one layer's parameters.
ModelOptions
    Options of :func:`init_model`.

Functions
---------
init_model
    Creates a dense model with all-ones masks.
forward
    Runs a batch through the model.
backward
    Backpropagates the task loss.
nonzero_param_count
    Counts mask ones plus biases.
weight_nonzero_count
    Counts mask ones only.
apply_masks
    Re-zeros weights at masked positions.
save_model
    Writes a model checkpoint.
load_model
    Reads a model checkpoint.
"""

from __future__ import annotations

import copy
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
import numpy.typing as npt

from .core_math import EPS_LN, Matrix, relu, sigmoid, stable_softmax
from .enums import OutputKind
from .errors import FormatError, InputError, ShapeError, StateError

__all__ = (
    "MaskedLayer",
    "MlpModel",
    "ForwardCache",
    "LayerGradients",
    "ModelOptions",
    "init_model",
    "forward",
    "backward",
    "nonzero_param_count",
    "weight_nonzero_count",
    "apply_masks",
    "parameter_arrays",
    "gradient_arrays",
    "save_model",
    "load_model",
)

CHECKPOINT_MAGIC = b"FPEM"
CHECKPOINT_SCHEMA_VERSION = 1


@dataclass(slots=True)
class MaskedLayer:
    """A weight matrix with an optional bias and a binary mask.

    Attributes
    ----------
    weights: :class:`numpy.ndarray`
        The ``out x in`` weight matrix.
    mask: :class:`numpy.ndarray`
        The ``out x in`` boolean mask; ``False`` marks a pruned weight.
    bias: :class:`numpy.ndarray` | :class:`None`
        The bias vector of length ``out``.
    ln_gain: :class:`numpy.ndarray` | :class:`None`
        The LayerNorm gain applied to this layer's output, hidden layers only.
    ln_shift: :class:`numpy.ndarray` | :class:`None`
        The LayerNorm shift applied to this layer's output, hidden layers only.
    """

    weights: Matrix
    mask: npt.NDArray[np.bool_]
    bias: npt.NDArray[np.float64] | None = None
    ln_gain: npt.NDArray[np.float64] | None = None
    ln_shift: npt.NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.mask = np.asarray(self.mask).astype(bool)
        if self.weights.ndim != 2 or self.mask.shape != self.weights.shape:
            raise ShapeError(
                f"mask {self.mask.shape} does not match weights {self.weights.shape}"
            )
        for name in ("bias", "ln_gain", "ln_shift"):
            value = getattr(self, name)
            if value is None:
                continue
            value = np.asarray(value, dtype=np.float64)
            if value.shape != (self.out_features,):
                raise ShapeError(f"{name} {value.shape} for {self.out_features} outputs")
            setattr(self, name, value)

    @property
    def out_features(self) -> int:
        """The number of output features."""
        return self.weights.shape[0]

    @property
    def in_features(self) -> int:
        """The number of input features."""
        return self.weights.shape[1]

    @property
    def has_layer_norm(self) -> bool:
        """Whether a LayerNorm follows this layer."""
        return self.ln_gain is not None

    @property
    def effective_weights(self) -> Matrix:
        """The weights with masked entries zeroed on the fly."""
        return self.weights * self.mask


@dataclass(slots=True)
class MlpModel:
    """A stack of masked layers.

    Attributes
    ----------
    layers: :class:`list` [:class:`MaskedLayer`]
        The layers, input side first; the last one is the head.
    output_kind: :class:`OutputKind`
        How the head output is read.
    seed: :class:`int` | :class:`None`
        The initialization seed, kept for checkpoints.
    """

    layers: list[MaskedLayer]
    output_kind: OutputKind
    seed: int | None = None

    def __post_init__(self) -> None:
        if len(self.layers) < 2:
            raise InputError("a model needs at least one hidden layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_features != nxt.in_features:
                raise ShapeError(
                    f"layer widths do not chain: {prev.out_features} -> {nxt.in_features}"
                )
        if self.layers[-1].has_layer_norm:
            raise InputError("the classification head cannot carry a LayerNorm")
        if self.output_kind is OutputKind.BINARY and self.layers[-1].out_features != 1:
            raise InputError("a binary head has exactly one output")

    @property
    def dims(self) -> list[int]:
        """The layer widths, input first."""
        return [self.layers[0].in_features] + [l.out_features for l in self.layers]

    @property
    def use_layer_norm(self) -> tuple[bool, ...]:
        """Whether each hidden layer carries a LayerNorm."""
        return tuple(l.has_layer_norm for l in self.layers[:-1])

    @property
    def has_bias(self) -> bool:
        """Whether the layers carry biases."""
        return self.layers[0].bias is not None

    def copy(self) -> MlpModel:
        """Returns a deep copy of the model."""
        return copy.deepcopy(self)


@dataclass(slots=True)
class ForwardCache:
    """Intermediate values of a forward pass.

    Attributes
    ----------
    inputs: :class:`list`
        The input of every layer.
    pre_activations: :class:`list`
        ``a @ W.T + b`` of every layer.
    normalized: :class:`list`
        ``x_hat`` of each hidden LayerNorm, or ``None``.
    inv_std: :class:`list`
        ``1 / sqrt(var + eps)`` of each hidden LayerNorm, or ``None``.
    activation_inputs: :class:`list`
        The ReLU input of every hidden layer.
    output: :class:`numpy.ndarray`
        Sigmoid probabilities or logits.
    dims: :class:`list` [:class:`int`]
        The widths of the model that produced the cache.
    """

    inputs: list[Matrix] = field(default_factory=list)
    pre_activations: list[Matrix] = field(default_factory=list)
    normalized: list[Matrix | None] = field(default_factory=list)
    inv_std: list[Matrix | None] = field(default_factory=list)
    activation_inputs: list[Matrix] = field(default_factory=list)
    output: Matrix | None = None
    dims: list[int] = field(default_factory=list)


@dataclass(slots=True)
class LayerGradients:
    """Gradients of one layer's parameters; ``None`` where the layer
    has no such parameter."""

    weights: Matrix
    bias: npt.NDArray[np.float64] | None = None
    ln_gain: npt.NDArray[np.float64] | None = None
    ln_shift: npt.NDArray[np.float64] | None = None


@dataclass(slots=True, frozen=True)
class ModelOptions:
    """Options of :func:`init_model`.

    Attributes
    ----------
    bias: :class:`bool`
        Whether layers carry biases.
    layer_norm: :class:`bool`
        Whether every hidden layer is followed by a LayerNorm.
    output_kind: :class:`OutputKind` | :class:`None`
        The head kind; by default binary for one output, else multiclass.
    """

    bias: bool = True
    layer_norm: bool = False
    output_kind: OutputKind | None = None


def init_model(
    layer_dims: list[int], seed: int, options: ModelOptions | None = None
) -> MlpModel:
    """Creates a dense model with all-ones masks.

    Weights are drawn from ``uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))``,
    biases and LayerNorm shifts are zero and LayerNorm gains are one.

    Raises
    ------
    InputError
        If fewer than three widths are given or a width is not positive.
    """

    options = options or ModelOptions()
    dims = [int(d) for d in layer_dims]
    if len(dims) < 3:
        raise InputError("layer_dims needs an input, at least one hidden and an output width")
    if any(d <= 0 for d in dims):
        raise InputError(f"all widths must be positive, got {dims}")

    output_kind = options.output_kind
    if output_kind is None:
        output_kind = OutputKind.BINARY if dims[-1] == 1 else OutputKind.MULTICLASS

    rng = np.random.default_rng(seed)
    layers = []
    for index, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        hidden = index < len(dims) - 2
        layers.append(
            MaskedLayer(
                weights=rng.uniform(-bound, bound, size=(fan_out, fan_in)),
                mask=np.ones((fan_out, fan_in), dtype=bool),
                bias=np.zeros(fan_out) if options.bias else None,
                ln_gain=np.ones(fan_out) if hidden and options.layer_norm else None,
                ln_shift=np.zeros(fan_out) if hidden and options.layer_norm else None,
            )
        )
    return MlpModel(layers, output_kind, seed)


def forward(model: MlpModel, x: Matrix) -> tuple[Matrix, ForwardCache]:
    """Runs a batch through the model.

    Returns
    -------
    tuple[numpy.ndarray, ForwardCache]
        The ``batch x outputs`` output (probabilities for a binary head,
        logits otherwise) and the cache needed by :func:`backward`.

    Raises
    ------
    ShapeError
        If `x` does not have the model's input width.
    """

    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != model.layers[0].in_features:
        raise ShapeError(
            f"input of shape {a.shape} for input width {model.layers[0].in_features}"
        )

    cache = ForwardCache(dims=model.dims)
    last = len(model.layers) - 1
    for index, layer in enumerate(model.layers):
        cache.inputs.append(a)
        z = a @ layer.effective_weights.T
        if layer.bias is not None:
            z = z + layer.bias
        cache.pre_activations.append(z)
        if index == last:
            break

        if layer.has_layer_norm:
            mean = z.mean(axis=1, keepdims=True)
            inv_std = 1.0 / np.sqrt(z.var(axis=1, keepdims=True) + EPS_LN)
            z_hat = (z - mean) * inv_std
            u = z_hat * layer.ln_gain + layer.ln_shift
            cache.normalized.append(z_hat)
            cache.inv_std.append(inv_std)
        else:
            u = z
            cache.normalized.append(None)
            cache.inv_std.append(None)
        cache.activation_inputs.append(u)
        a = relu(u)

    logits = cache.pre_activations[-1]
    cache.output = sigmoid(logits) if model.output_kind is OutputKind.BINARY else logits
    return cache.output, cache


def _output_delta(model: MlpModel, cache: ForwardCache, y: npt.ArrayLike) -> Matrix:
    """Returns the gradient of the mean task loss with respect to the
    head's pre-activation."""

    n = cache.output.shape[0]
    if model.output_kind is OutputKind.BINARY:
        y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
        if y.shape[0] != n:
            raise ShapeError(f"{y.shape[0]} labels for a batch of {n}")
        return (cache.output - y) / n

    y = np.asarray(y).astype(np.int64).ravel()
    if y.size != n:
        raise ShapeError(f"{y.size} labels for a batch of {n}")
    delta = stable_softmax(cache.output)
    delta[np.arange(n), y] -= 1.0
    return delta / n


def backward(
    model: MlpModel, cache: ForwardCache, y: npt.ArrayLike
) -> list[LayerGradients]:
    """Backpropagates the mean task loss through the model.

    The binary head uses sigmoid with binary cross-entropy, the multiclass
    head softmax cross-entropy. Gradients at masked positions are exactly 0.

    Raises
    ------
    StateError
        If the cache was not produced by a forward pass of this model.
    """

    if cache.output is None or cache.dims != model.dims:
        raise StateError("the forward cache does not belong to this model")

    delta = _output_delta(model, cache, y)
    grads: list[LayerGradients] = [None] * len(model.layers)
    norm_grads = (None, None)
    for index in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[index]
        grads[index] = LayerGradients(
            weights=(delta.T @ cache.inputs[index]) * layer.mask,
            bias=delta.sum(axis=0) if layer.bias is not None else None,
            ln_gain=norm_grads[0],
            ln_shift=norm_grads[1],
        )
        if index == 0:
            break

        prev = model.layers[index - 1]
        d_u = (delta @ layer.effective_weights) * (cache.activation_inputs[index - 1] > 0)
        if not prev.has_layer_norm:
            norm_grads = (None, None)
            delta = d_u
            continue

        z_hat = cache.normalized[index - 1]
        norm_grads = ((d_u * z_hat).sum(axis=0), d_u.sum(axis=0))
        d_hat = d_u * prev.ln_gain
        width = d_hat.shape[1]
        delta = (cache.inv_std[index - 1] / width) * (
            width * d_hat
            - d_hat.sum(axis=1, keepdims=True)
            - z_hat * (d_hat * z_hat).sum(axis=1, keepdims=True)
        )

    return grads


def nonzero_param_count(model: MlpModel) -> int:
    """Returns the number of mask ones plus the number of biases.

    LayerNorm gains and shifts are not part of the budget.
    """

    count = weight_nonzero_count(model)
    for layer in model.layers:
        if layer.bias is not None:
            count += layer.bias.size
    return count


def weight_nonzero_count(model: MlpModel) -> int:
    """Returns the number of mask ones over all weight matrices."""
    return int(sum(int(layer.mask.sum()) for layer in model.layers))


def apply_masks(model: MlpModel) -> MlpModel:
    """Zeros weights at masked positions, in place; returns the model."""

    for layer in model.layers:
        layer.weights[~layer.mask] = 0.0
    return model


def parameter_arrays(model: MlpModel) -> list[npt.NDArray[np.float64]]:
    """Returns references to every trainable array in a fixed order:
    per layer weights, bias, LayerNorm gain, LayerNorm shift."""
    return list(_iter_layer_arrays(model.layers))


def gradient_arrays(grads: list[LayerGradients]) -> list[npt.NDArray[np.float64]]:
    """Returns the gradient arrays in the order of :func:`parameter_arrays`."""
    return list(_iter_layer_arrays(grads))


def _iter_layer_arrays(items) -> Iterator[npt.NDArray[np.float64]]:
    for item in items:
        yield item.weights
        for name in ("bias", "ln_gain", "ln_shift"):
            value = getattr(item, name)
            if value is not None:
                yield value


def save_model(model: MlpModel, path: str | Path) -> None:
    """Writes a model checkpoint.

    The file holds the magic ``FPEM``, a u32 length and a UTF-8 JSON
    header (dims, flags, seed, nnz), then per layer a u64 length followed
    by little-endian float64 weights, bias, mask (0/1) and LayerNorm
    gain/shift, each present only if the layer has it.
    """

    header = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "dims": model.dims,
        "bias": model.has_bias,
        "layer_norm": list(model.use_layer_norm),
        "output_kind": model.output_kind.value,
        "seed": model.seed,
        "nnz": nonzero_param_count(model),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", len(header_bytes)), header_bytes]
    for layer in model.layers:
        parts = [layer.weights]
        if layer.bias is not None:
            parts.append(layer.bias)
        parts.append(layer.mask.astype(np.float64))
        if layer.has_layer_norm:
            parts.extend([layer.ln_gain, layer.ln_shift])
        payload = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in parts)
        chunks.append(struct.pack("<Q", len(payload)))
        chunks.append(payload)

    Path(path).write_bytes(b"".join(chunks))


def load_model(path: str | Path) -> MlpModel:
    """Reads a model checkpoint written by :func:`save_model`.

    Raises
    ------
    FormatError
        If the file is truncated, has a bad magic or an inconsistent header.
    """

    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise FormatError("not a model checkpoint (bad magic)", 0)
    if len(data) < 8:
        raise FormatError("truncated checkpoint header", len(data))

    (header_len,) = struct.unpack_from("<I", data, 4)
    offset = 8
    try:
        header = json.loads(data[offset : offset + header_len].decode("utf-8"))
        dims = [int(d) for d in header["dims"]]
        has_bias = bool(header["bias"])
        layer_norm = [bool(f) for f in header["layer_norm"]]
        output_kind = OutputKind(header["output_kind"])
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as e:
        raise FormatError(f"invalid checkpoint header: {e}", offset) from e
    if header.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise FormatError(f"unsupported schema version {header.get('schema_version')}", offset)
    if len(layer_norm) != len(dims) - 2:
        raise FormatError("layer_norm flags do not match dims", offset)
    offset += header_len

    layers = []
    for index, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        ln = index < len(layer_norm) and layer_norm[index]
        expected = 8 * (2 * fan_out * fan_in + fan_out * (int(has_bias) + 2 * int(ln)))
        if offset + 8 > len(data):
            raise FormatError(f"truncated before layer {index}", offset)
        (length,) = struct.unpack_from("<Q", data, offset)
        offset += 8
        if length != expected or offset + length > len(data):
            raise FormatError(f"layer {index} payload has {length} bytes, expected {expected}", offset)
        values = np.frombuffer(data, dtype="<f8", count=length // 8, offset=offset).astype(np.float64)
        offset += length

        size = fan_out * fan_in
        cursor = 0

        def take(count: int) -> npt.NDArray[np.float64]:
            nonlocal cursor
            chunk = values[cursor : cursor + count]
            cursor += count
            return chunk

        weights = take(size).reshape(fan_out, fan_in).copy()
        bias = take(fan_out).copy() if has_bias else None
        mask_values = take(size)
        if not np.all((mask_values == 0.0) | (mask_values == 1.0)):
            raise FormatError(f"layer {index} mask is not binary", offset - length)
        gain = take(fan_out).copy() if ln else None
        shift = take(fan_out).copy() if ln else None
        layers.append(
            MaskedLayer(weights, mask_values.reshape(fan_out, fan_in) == 1.0, bias, gain, shift)
        )

    if offset != len(data):
        raise FormatError("trailing bytes after the last layer", offset)

    model = MlpModel(layers, output_kind, header.get("seed"))
    if not all(np.all(l.weights[~l.mask] == 0.0) for l in model.layers):
        raise FormatError("weights are non-zero at masked positions")
    return model
