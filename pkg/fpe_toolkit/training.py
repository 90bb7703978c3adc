"""Training of masked models with Adam and the trial selection loop.

The training loss is the task loss plus ``l1 * |W1|_1``,
``l2 * sum(|p|^2)`` over every trainable array and
``orth * |W1 W1^T - I|_F^2``, where ``W1`` is the first layer's masked
weight matrix. Masks are re-applied after every optimizer step.

Classes
-------
RewireConfig
    Period and fraction of dynamic mask rewiring.
TrainConfig
    Hyperparameters of a training run.
AdamState
    Moment estimates of the Adam optimizer.
TrainHistory
    What happened during a run.
TrialRecord
    The outcome of one trial.
TrialsOutcome
    The outcome of :func:`run_trials`.

Functions
---------
loss_and_gradients
    Regularized loss and its gradients on a batch.
adam_step
    One bias-corrected Adam update.
train
    Mini-batch training.
train_with_rewiring
    Mini-batch training with periodic mask rewiring.
evaluate
    Classification accuracy.
run_trials
    Independent trials with best-model selection.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Protocol, TextIO

import humps
import numpy as np
import numpy.typing as npt

from .core_math import Matrix, bce_loss, ce_loss
from .data_io import LabeledMatrixDataset
from .enums import OutputKind, RampMode
from .errors import InputError, NumericError, ShapeError
from .fpe_expand import rewire_masks
from .masked_net import (
    LayerGradients,
    MlpModel,
    apply_masks,
    backward,
    forward,
    gradient_arrays,
    parameter_arrays,
    weight_nonzero_count,
)

__all__ = (
    "RewireConfig",
    "TrainConfig",
    "AdamState",
    "TrainHistory",
    "TrialRecord",
    "TrialsOutcome",
    "EventSink",
    "JsonLinesEvents",
    "loss_and_gradients",
    "adam_step",
    "train",
    "train_with_rewiring",
    "evaluate",
    "run_trials",
    "history_to_json",
)

_log = logging.getLogger(__name__)

# Offset of the rewiring generator's seed from the shuffling generator's.
_REWIRE_STREAM = 0x5EED


@dataclass(slots=True, frozen=True)
class RewireConfig:
    """Period and fraction of dynamic mask rewiring.

    Attributes
    ----------
    period: :class:`int`
        Rewire after every `period` epochs.
    fraction: :class:`float`
        Fraction of the non-zero weights swapped per rewiring.
    """

    period: int
    fraction: float

    def __post_init__(self) -> None:
        if self.period < 1:
            raise InputError(f"rewire period must be positive, got {self.period}")
        if not 0.0 <= self.fraction < 1.0:
            raise InputError(f"rewire fraction must lie in [0, 1), got {self.fraction}")


@dataclass(slots=True, frozen=True)
class TrainConfig:  # pylint: disable=too-many-instance-attributes
    """Hyperparameters of a training run.

    Attributes
    ----------
    learning_rate: :class:`float`
        Adam step size.
    batch_size: :class:`int`
        Mini-batch size; the last partial batch is trained.
    epochs: :class:`int`
        Number of passes over the data.
    warmup: :class:`int`
        Epochs of the linear ramp ``min(1, epoch / warmup)``.
    l1: :class:`float`
        L1 penalty on the first layer's weights.
    l2: :class:`float`
        L2 penalty on all trainable arrays.
    orth: :class:`float`
        Penalty on ``|W1 W1^T - I|_F^2``.
    trials: :class:`int`
        Number of independent trials in :func:`run_trials`.
    seed: :class:`int`
        Seed of batch shuffling and rewiring.
    ramp: :class:`RampMode`
        What the warmup ramp multiplies.
    eval_every: :class:`int`
        Test-accuracy cadence in epochs; 0 disables it.
    rewire: :class:`RewireConfig` | :class:`None`
        Dynamic rewiring, used by :func:`train_with_rewiring`.
    beta1: :class:`float`
        Adam first-moment decay.
    beta2: :class:`float`
        Adam second-moment decay.
    adam_eps: :class:`float`
        Adam denominator offset.
    """

    learning_rate: float = 1e-3
    batch_size: int = 500
    epochs: int = 1000
    warmup: int = 1000
    l1: float = 1e-7
    l2: float = 1e-5
    orth: float = 0.0
    trials: int = 5
    seed: int = 0
    ramp: RampMode = RampMode.NONE
    eval_every: int = 0
    rewire: RewireConfig | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        for name in ("learning_rate", "epochs", "warmup", "l1", "l2", "orth", "eval_every"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.batch_size < 1:
            raise InputError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.trials < 1:
            raise InputError(f"trials must be at least 1, got {self.trials}")

    def ramp_factor(self, epoch: int) -> float:
        """Returns ``min(1, epoch / warmup)``, or 1 without warmup."""
        return 1.0 if self.warmup == 0 else min(1.0, epoch / self.warmup)


@dataclass(slots=True)
class AdamState:
    """Moment estimates of the Adam optimizer.

    Attributes
    ----------
    step: :class:`int`
        Number of updates taken.
    first: :class:`list`
        First-moment estimate per parameter array.
    second: :class:`list`
        Second-moment estimate per parameter array.
    """

    step: int
    first: list[npt.NDArray[np.float64]]
    second: list[npt.NDArray[np.float64]]

    @classmethod
    def zeros_like(cls, params: list[npt.NDArray[np.float64]]) -> AdamState:
        """Creates a fresh state for `params`."""
        return cls(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


@dataclass(slots=True)
class TrainHistory:
    """What happened during a run.

    Attributes
    ----------
    loss: :class:`list` [:class:`float`]
        Mean training loss per epoch.
    test_accuracy: :class:`list` [:class:`tuple`]
        ``(epoch, accuracy)`` at the evaluation cadence.
    rewiring: :class:`list` [:class:`tuple`]
        ``(epoch, positions changed)`` per rewiring.
    nnz: :class:`list` [:class:`int`]
        Non-zero weight count at the end of every epoch.
    """

    loss: list[float] = field(default_factory=list)
    test_accuracy: list[tuple[int, float]] = field(default_factory=list)
    rewiring: list[tuple[int, int]] = field(default_factory=list)
    nnz: list[int] = field(default_factory=list)


@dataclass(slots=True, frozen=True)
class TrialRecord:
    """The outcome of one trial.

    Attributes
    ----------
    trial: :class:`int`
        Trial index from 0.
    seed: :class:`int`
        The trial seed.
    accuracy: :class:`float`
        Test accuracy of the trained model.
    """

    trial: int
    seed: int
    accuracy: float


@dataclass(slots=True)
class TrialsOutcome:
    """The outcome of :func:`run_trials`.

    Attributes
    ----------
    best_model: :class:`MlpModel`
        The first model reaching the best accuracy.
    best_accuracy: :class:`float`
        Its accuracy.
    trials: :class:`list` [:class:`TrialRecord`]
        Every trial in order.
    models: :class:`list` [:class:`MlpModel`]
        The trained model of every trial, in order.
    """

    best_model: MlpModel
    best_accuracy: float
    trials: list[TrialRecord]
    models: list[MlpModel] = field(default_factory=list)

    @property
    def best_trial(self) -> int:
        """The index of the selected trial."""
        return next(t.trial for t in self.trials if t.accuracy == self.best_accuracy)


class EventSink(Protocol):
    """Receives training events."""

    def emit(self, event: str, **fields) -> None:
        """Records one event."""


class JsonLinesEvents:
    """Writes training events as camelCase JSON lines.

    Parameters
    ----------
    stream: :class:`typing.TextIO`
        Where lines are written.
    context: :class:`dict`
        Fields added to every event, such as variant and trial.
    """

    def __init__(self, stream: TextIO, **context) -> None:
        self._stream = stream
        self._context = context

    def bind(self, **context) -> JsonLinesEvents:
        """Returns a sink writing to the same stream with extra context."""
        return JsonLinesEvents(self._stream, **{**self._context, **context})

    def emit(self, event: str, **fields) -> None:
        record = {"event": event, **self._context, **fields}
        self._stream.write(json.dumps(humps.camelize(record), sort_keys=True) + "\n")


def loss_and_gradients(
    model: MlpModel,
    x: Matrix,
    y: npt.ArrayLike,
    cfg: TrainConfig,
    reg_scale: float = 1.0,
) -> tuple[float, list[LayerGradients]]:
    """Returns the regularized loss on a batch and its gradients.

    Regularization terms are multiplied by `reg_scale`. Gradients at
    masked positions are 0; the L1 subgradient at 0 is 0.
    """

    output, cache = forward(model, x)
    if model.output_kind is OutputKind.BINARY:
        loss = bce_loss(output, y)
    else:
        loss = ce_loss(output, y)
    grads = backward(model, cache, y)

    first = model.layers[0]
    w1 = first.effective_weights
    if cfg.l1 > 0:
        loss += reg_scale * cfg.l1 * float(np.abs(w1).sum())
        grads[0].weights += reg_scale * cfg.l1 * np.sign(w1)
    if cfg.orth > 0:
        residual = w1 @ w1.T - np.eye(w1.shape[0])
        loss += reg_scale * cfg.orth * float((residual**2).sum())
        grads[0].weights += reg_scale * cfg.orth * 4.0 * (residual @ w1)
    if cfg.l2 > 0:
        layers_and_grads = zip(model.layers, grads)
        for layer, grad in layers_and_grads:
            w = layer.effective_weights
            loss += reg_scale * cfg.l2 * float((w**2).sum())
            grad.weights += reg_scale * cfg.l2 * 2.0 * w
            for name in ("bias", "ln_gain", "ln_shift"):
                value = getattr(layer, name)
                if value is not None:
                    loss += reg_scale * cfg.l2 * float((value**2).sum())
                    setattr(grad, name, getattr(grad, name) + reg_scale * cfg.l2 * 2.0 * value)

    for layer, grad in zip(model.layers, grads):
        grad.weights *= layer.mask
    return loss, grads


def adam_step(
    params: list[npt.NDArray[np.float64]],
    grads: list[npt.NDArray[np.float64]],
    state: AdamState,
    learning_rate: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """Applies one bias-corrected Adam update to `params` in place.

    Returns
    -------
    AdamState
        The state after the step; `state` itself is updated too.
    """

    if len(params) != len(grads) or len(params) != len(state.first):
        raise ShapeError("parameters, gradients and optimizer state do not align")

    state.step += 1
    t = state.step
    correction1 = 1.0 - beta1**t
    correction2 = 1.0 - beta2**t
    for param, grad, m, v in zip(params, grads, state.first, state.second):
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        param -= learning_rate * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return state


def train(
    model: MlpModel,
    dataset: LabeledMatrixDataset,
    cfg: TrainConfig,
    test_set: LabeledMatrixDataset | None = None,
    events: EventSink | None = None,
) -> tuple[MlpModel, TrainHistory]:
    """Trains a copy of `model` for ``cfg.epochs`` epochs of mini-batch Adam.

    Batches come from a per-epoch shuffle drawn from a generator seeded
    with ``cfg.seed``. The optimizer state starts from zero.

    Raises
    ------
    NumericError
        If the loss becomes non-finite.
    """
    return _fit(model, dataset, cfg, test_set, events, rewire=False)


def train_with_rewiring(
    model: MlpModel,
    dataset: LabeledMatrixDataset,
    cfg: TrainConfig,
    test_set: LabeledMatrixDataset | None = None,
    events: EventSink | None = None,
) -> tuple[MlpModel, TrainHistory]:
    """Like :func:`train`, and rewires the masks after every
    ``cfg.rewire.period`` epochs (never after the last epoch).

    Raises
    ------
    InputError
        If `cfg` has no rewiring configuration.
    """

    if cfg.rewire is None:
        raise InputError("train_with_rewiring needs cfg.rewire")
    return _fit(model, dataset, cfg, test_set, events, rewire=True)


def _fit(  # pylint: disable=too-many-arguments, too-many-locals
    model: MlpModel,
    dataset: LabeledMatrixDataset,
    cfg: TrainConfig,
    test_set: LabeledMatrixDataset | None,
    events: EventSink | None,
    rewire: bool,
) -> tuple[MlpModel, TrainHistory]:
    if dataset.d != model.layers[0].in_features:
        raise ShapeError(
            f"dataset has {dataset.d} features, model expects {model.layers[0].in_features}"
        )

    model = apply_masks(model.copy())
    history = TrainHistory()
    rng = np.random.default_rng(cfg.seed)
    rewire_rng = np.random.default_rng(cfg.seed + _REWIRE_STREAM)
    params = parameter_arrays(model)
    state = AdamState.zeros_like(params)

    for epoch in range(1, cfg.epochs + 1):
        ramp = cfg.ramp_factor(epoch)
        reg_scale = ramp if cfg.ramp is RampMode.REGULARIZERS else 1.0
        learning_rate = cfg.learning_rate * (ramp if cfg.ramp is RampMode.LEARNING_RATE else 1.0)

        order = rng.permutation(dataset.n)
        total = 0.0
        for batch, start in enumerate(range(0, dataset.n, cfg.batch_size)):
            index = order[start : start + cfg.batch_size]
            loss, grads = loss_and_gradients(
                model, dataset.x[index], dataset.y[index], cfg, reg_scale
            )
            if not np.isfinite(loss):
                raise NumericError("training loss is not finite", epoch, batch)
            adam_step(
                params,
                gradient_arrays(grads),
                state,
                learning_rate,
                cfg.beta1,
                cfg.beta2,
                cfg.adam_eps,
            )
            apply_masks(model)
            total += loss * index.size

        epoch_loss = total / max(1, dataset.n)
        history.loss.append(epoch_loss)
        fields = {"epoch": epoch, "loss": epoch_loss}
        if test_set is not None and cfg.eval_every and epoch % cfg.eval_every == 0:
            accuracy = evaluate(model, test_set)
            history.test_accuracy.append((epoch, accuracy))
            fields["test_accuracy"] = accuracy
        if events is not None:
            events.emit("epoch", **fields)

        if rewire and epoch % cfg.rewire.period == 0 and epoch < cfg.epochs:
            before = [layer.mask.copy() for layer in model.layers]
            model = rewire_masks(model, cfg.rewire.fraction, rewire_rng)
            params = parameter_arrays(model)
            changed = _reset_moments(model, before, state)
            history.rewiring.append((epoch, changed))
            _log.debug("epoch %d: rewired %d positions", epoch, changed)
            if events is not None:
                events.emit("rewire", epoch=epoch, positions_changed=changed)

        history.nnz.append(weight_nonzero_count(model))

    return model, history


def _reset_moments(
    model: MlpModel, before: list[npt.NDArray[np.bool_]], state: AdamState
) -> int:
    """Zeros the moments of weights whose mask changed; returns the number
    of positions that were unmasked."""

    changed = 0
    index = 0
    for layer, old in zip(model.layers, before):
        flipped = layer.mask != old
        state.first[index][flipped] = 0.0
        state.second[index][flipped] = 0.0
        changed += int((layer.mask & ~old).sum())
        index += 1 + sum(
            getattr(layer, name) is not None for name in ("bias", "ln_gain", "ln_shift")
        )
    return changed


def evaluate(model: MlpModel, dataset: LabeledMatrixDataset) -> float:
    """Returns the fraction of correctly classified samples.

    A binary head predicts 1 when its probability is strictly above 0.5;
    a multiclass head predicts the argmax, lowest index on ties.
    """

    if dataset.n == 0:
        return 0.0
    output, _ = forward(model, dataset.x)
    if model.output_kind is OutputKind.BINARY:
        predicted = (output[:, 0] > 0.5).astype(np.int64)
    else:
        predicted = np.argmax(output, axis=1)
    return float(np.mean(predicted == dataset.y))


def run_trials(
    make_model: Callable[[int], MlpModel],
    dataset: LabeledMatrixDataset,
    cfg: TrainConfig,
    test_set: LabeledMatrixDataset | None = None,
    events: JsonLinesEvents | None = None,
) -> TrialsOutcome:
    """Trains ``cfg.trials`` independent models and keeps the best.

    Trial ``t`` uses seed ``cfg.seed + t`` for both ``make_model`` and
    training. Accuracy is measured on `test_set`, or on `dataset` when
    no test set is given; the first trial with the highest accuracy wins.
    """

    evaluation = test_set if test_set is not None else dataset
    best_model, best_accuracy = None, -1.0
    records, models = [], []
    for trial in range(cfg.trials):
        seed = cfg.seed + trial
        trial_cfg = replace(cfg, seed=seed)
        trainer = train_with_rewiring if cfg.rewire is not None else train
        sink = events.bind(trial=trial) if events is not None else None
        model, _ = trainer(make_model(seed), dataset, trial_cfg, test_set, sink)
        accuracy = evaluate(model, evaluation)
        records.append(TrialRecord(trial, seed, accuracy))
        models.append(model)
        _log.info("trial %d (seed %d): accuracy %.4f", trial, seed, accuracy)
        if accuracy > best_accuracy:
            best_model, best_accuracy = model, accuracy

    return TrialsOutcome(best_model, best_accuracy, records, models)


def history_to_json(history: TrainHistory) -> dict:
    """Returns `history` as a camelCase JSON-ready dictionary."""
    return humps.camelize(asdict(history))
