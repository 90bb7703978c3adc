"""Fixed Parameter Expansion: neuron splitting under a fixed weight budget.

Each expanded hidden neuron is replaced by ``alpha`` sub-neurons whose
input masks partition the parent's inputs. The following layer's input
columns are duplicated per sub-neuron, which adds weights; the globally
smallest-magnitude weights of all touched layers are then pruned so that
the number of non-zero weights equals the count before expansion.

Classes
-------
GramClusterParams
    Parameters of Gram-matrix clustering.
PartitionStrategy
    How a neuron's inputs are split among its sub-neurons.
ExpansionPlan
    What to expand and how.

Functions
---------
partition_masks
    Splits ``d`` inputs into ``alpha`` disjoint masks.
expand_hidden_layer
    Splits every neuron of a layer into masked sub-neurons.
expand_output_layer
    Duplicates every input column of the following layer.
resparsify
    Prunes the globally smallest-magnitude weights down to a budget.
fpe_expand_model
    Runs the full expansion on a model.
gram_cluster_partitions
    Builds per-neuron partitions from clusters of the Gram matrix.
rewire_masks
    Swaps a fraction of active weights for inactive positions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from scipy.cluster import hierarchy

from .enums import PartitionKind
from .errors import InputError
from .masked_net import MaskedLayer, MlpModel, weight_nonzero_count

__all__ = (
    "GramClusterParams",
    "PartitionStrategy",
    "ExpansionPlan",
    "partition_masks",
    "expand_hidden_layer",
    "expand_output_layer",
    "resparsify",
    "default_layers_to_expand",
    "fpe_expand_model",
    "cluster_inputs",
    "gram_cluster_partitions",
    "rewire_masks",
)

_log = logging.getLogger(__name__)

Mask = npt.NDArray[np.bool_]


@dataclass(slots=True, frozen=True)
class GramClusterParams:
    """Parameters of Gram-matrix clustering.

    Attributes
    ----------
    num_clusters: :class:`int` | :class:`None`
        The number of clusters; ``alpha * h`` when ``None``.
    linkage: :class:`str`
        The agglomerative linkage method passed to scipy.
    """

    num_clusters: int | None = None
    linkage: str = "average"


@dataclass(slots=True, frozen=True)
class PartitionStrategy:
    """How a neuron's inputs are split among its sub-neurons.

    Attributes
    ----------
    kind: :class:`PartitionKind`
        The splitting rule.
    seed: :class:`int`
        Seed of the generator that draws random and 2:4 masks.
    clause_size: :class:`int` | :class:`None`
        The block size ``k``, required by the clause-aware rule.
    gram: :class:`GramClusterParams`
        Parameters of the Gram-cluster rule.
    """

    kind: PartitionKind
    seed: int = 0
    clause_size: int | None = None
    gram: GramClusterParams = field(default_factory=GramClusterParams)


@dataclass(slots=True, frozen=True)
class ExpansionPlan:
    """What to expand and how.

    Attributes
    ----------
    alpha: :class:`int`
        The expansion factor, at least 2.
    strategy: :class:`PartitionStrategy`
        The partition rule.
    layers_to_expand: :class:`tuple` [:class:`int`] | :class:`None`
        Indices of the hidden layers whose neurons are split; by default
        every other hidden layer starting with the first.
    """

    alpha: int
    strategy: PartitionStrategy
    layers_to_expand: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.alpha < 2:
            raise InputError(f"alpha must be at least 2, got {self.alpha}")


def partition_masks(
    d: int,
    alpha: int,
    strategy: PartitionStrategy,
    rng: np.random.Generator | None = None,
    cluster_labels: npt.NDArray[np.int64] | None = None,
) -> list[Mask]:
    """Splits ``d`` inputs into ``alpha`` disjoint masks that sum to ones.

    Parameters
    ----------
    d: :class:`int`
        The input width.
    alpha: :class:`int`
        The number of masks.
    strategy: :class:`PartitionStrategy`
        The partition rule.
    rng: :class:`numpy.random.Generator` | :class:`None`
        The generator for random rules; seeded from the strategy if omitted.
    cluster_labels: :class:`numpy.ndarray` | :class:`None`
        Cluster id per input, required by the Gram-cluster rule.

    Raises
    ------
    InputError
        If the rule's preconditions do not hold.
    """

    if alpha < 2:
        raise InputError(f"alpha must be at least 2, got {alpha}")
    if d < 1:
        raise InputError(f"input width must be positive, got {d}")
    rng = rng if rng is not None else np.random.default_rng(strategy.seed)
    owner = np.empty(d, dtype=np.int64)

    match strategy.kind:
        case PartitionKind.RANDOM:
            owner[rng.permutation(d)] = np.arange(d) % alpha
        case PartitionKind.CLAUSE_AWARE:
            k = strategy.clause_size
            if not k or d % k:
                raise InputError(f"clause size {k} does not divide input width {d}")
            owner[:] = (np.arange(d) // k) % alpha
        case PartitionKind.STRUCTURED_2_4:
            if alpha != 2 or d % 4:
                raise InputError("2:4 splitting needs alpha = 2 and a width divisible by 4")
            for start in range(0, d, 4):
                owner[start + rng.permutation(4)] = [0, 0, 1, 1]
        case PartitionKind.GRAM_CLUSTER:
            if cluster_labels is None or len(cluster_labels) != d:
                raise InputError("Gram-cluster splitting needs one cluster label per input")
            owner[:] = _assign_clusters(np.asarray(cluster_labels), alpha, rng)

    return [owner == j for j in range(alpha)]


def _assign_clusters(
    labels: npt.NDArray[np.int64], alpha: int, rng: np.random.Generator
) -> npt.NDArray[np.int64]:
    clusters = np.unique(labels)
    sizes = np.array([(labels == c).sum() for c in clusters])
    # Largest clusters first, shuffled among equal sizes.
    order = np.lexsort((rng.permutation(len(clusters)), -sizes))

    counts = np.zeros(alpha, dtype=np.int64)
    loads = np.zeros(alpha, dtype=np.int64)
    owner = np.empty(len(labels), dtype=np.int64)
    for index in order:
        target = int(np.lexsort((np.arange(alpha), loads, counts))[0])
        owner[labels == clusters[index]] = target
        counts[target] += 1
        loads[target] += sizes[index]
    return owner


def expand_hidden_layer(
    layer: MaskedLayer, alpha: int, partitions: list[list[Mask]]
) -> MaskedLayer:
    """Splits every neuron of `layer` into `alpha` masked sub-neurons.

    Row ``i * alpha + j`` of the result holds ``m_ij * w_i``; the bias and
    LayerNorm parameters of neuron ``i`` are copied to all its sub-neurons.

    Raises
    ------
    InputError
        If `partitions` does not hold `alpha` disjoint, covering masks of
        the layer's input width for every neuron.
    """

    if alpha < 2:
        raise InputError(f"alpha must be at least 2, got {alpha}")
    if len(partitions) != layer.out_features:
        raise InputError(f"{len(partitions)} partitions for {layer.out_features} neurons")

    stacked = np.asarray(partitions, dtype=bool)
    if stacked.shape != (layer.out_features, alpha, layer.in_features):
        raise InputError(
            f"partitions of shape {stacked.shape}, expected "
            f"{(layer.out_features, alpha, layer.in_features)}"
        )
    if not np.all(stacked.sum(axis=1) == 1):
        raise InputError("partition masks must be disjoint and cover every input")

    width = layer.out_features * alpha
    mask = (stacked & layer.mask[:, None, :]).reshape(width, layer.in_features)
    weights = np.repeat(layer.weights, alpha, axis=0) * mask

    def repeat(values):
        return None if values is None else np.repeat(values, alpha)

    return MaskedLayer(
        weights, mask, repeat(layer.bias), repeat(layer.ln_gain), repeat(layer.ln_shift)
    )


def expand_output_layer(layer: MaskedLayer, alpha: int) -> MaskedLayer:
    """Duplicates every input column of `layer` `alpha` times.

    Column ``j`` of the original appears at columns ``alpha*j`` to
    ``alpha*(j+1) - 1``; the bias is copied unchanged.
    """

    if alpha < 2:
        raise InputError(f"alpha must be at least 2, got {alpha}")

    return MaskedLayer(
        np.repeat(layer.weights, alpha, axis=1),
        np.repeat(layer.mask, alpha, axis=1),
        _optional_copy(layer.bias),
        _optional_copy(layer.ln_gain),
        _optional_copy(layer.ln_shift),
    )


def resparsify(layers: list[MaskedLayer], budget: int) -> list[MaskedLayer]:
    """Prunes the globally smallest-magnitude weights of `layers` until
    exactly `budget` mask ones remain.

    Ties in magnitude are broken by (layer index, row, column). Biases are
    never pruned. The input layers are not modified.

    Raises
    ------
    InputError
        If `budget` exceeds the current number of mask ones.
    """

    result = [_copy_layer(layer) for layer in layers]
    current = sum(int(layer.mask.sum()) for layer in result)
    if budget > current:
        raise InputError(f"budget {budget} exceeds the current {current} non-zero weights")
    if budget < 0:
        raise InputError(f"budget must be non-negative, got {budget}")

    excess = current - budget
    if excess == 0:
        return result

    for layer_idx, row, col in _smallest_active(result, excess):
        result[layer_idx].mask[row, col] = False
        result[layer_idx].weights[row, col] = 0.0
    return result


def _smallest_active(layers: list[MaskedLayer], count: int) -> list[tuple[int, int, int]]:
    """Returns the positions of the `count` smallest-magnitude active
    weights, ordered by (magnitude, layer, row, column)."""

    layer_ids, rows, cols, mags = [], [], [], []
    for index, layer in enumerate(layers):
        r, c = np.nonzero(layer.mask)
        layer_ids.append(np.full(r.size, index))
        rows.append(r)
        cols.append(c)
        mags.append(np.abs(layer.weights[r, c]))

    layer_ids, rows, cols, mags = (np.concatenate(a) for a in (layer_ids, rows, cols, mags))
    order = np.lexsort((cols, rows, layer_ids, mags))[:count]
    return list(zip(layer_ids[order].tolist(), rows[order].tolist(), cols[order].tolist()))


def _optional_copy(values):
    return None if values is None else values.copy()


def _copy_layer(layer: MaskedLayer) -> MaskedLayer:
    return MaskedLayer(
        layer.weights.copy(),
        layer.mask.copy(),
        _optional_copy(layer.bias),
        _optional_copy(layer.ln_gain),
        _optional_copy(layer.ln_shift),
    )


def default_layers_to_expand(num_layers: int) -> tuple[int, ...]:
    """Returns the alternating expansion: hidden layers 0, 2, 4, ... of a
    model with `num_layers` weight layers, never the head."""
    return tuple(range(0, num_layers - 1, 2))


def fpe_expand_model(model: MlpModel, plan: ExpansionPlan) -> MlpModel:
    """Expands `model` according to `plan`, preserving the weight budget.

    For every expanded hidden layer ``i``, its neurons are split and layer
    ``i + 1`` gets its input columns duplicated. All touched layers form
    one pruning pool that is re-sparsified back to its original number of
    non-zero weights.

    Raises
    ------
    InputError
        If the plan expands the head, two adjacent layers or a layer that
        does not exist.
    """

    num_layers = len(model.layers)
    targets = (
        default_layers_to_expand(num_layers)
        if plan.layers_to_expand is None
        else tuple(sorted(set(plan.layers_to_expand)))
    )
    if not targets:
        raise InputError("the plan expands no layer")
    for index in targets:
        if not 0 <= index < num_layers - 1:
            raise InputError(f"layer {index} is not a hidden layer of a {num_layers}-layer model")
        if index % 2:
            raise InputError(f"layer {index} breaks the alternating expansion rule")

    rng = np.random.default_rng(plan.strategy.seed)
    layers = [_copy_layer(layer) for layer in model.layers]
    pool = sorted(set(targets) | {i + 1 for i in targets})
    budget = sum(int(layers[i].mask.sum()) for i in pool)

    for index in targets:
        layer = layers[index]
        if plan.strategy.kind is PartitionKind.GRAM_CLUSTER:
            partitions = gram_cluster_partitions(
                layer.effective_weights, plan.alpha, plan.strategy.gram, rng
            )
        else:
            partitions = [
                partition_masks(layer.in_features, plan.alpha, plan.strategy, rng)
                for _ in range(layer.out_features)
            ]
        layers[index] = expand_hidden_layer(layer, plan.alpha, partitions)
        layers[index + 1] = expand_output_layer(layers[index + 1], plan.alpha)

    pruned = resparsify([layers[i] for i in pool], budget)
    for index, layer in zip(pool, pruned):
        layers[index] = layer

    expanded = MlpModel(layers, model.output_kind, model.seed)
    _log.debug(
        "expanded layers %s by %d: widths %s -> %s, %d weights",
        targets,
        plan.alpha,
        model.dims,
        expanded.dims,
        weight_nonzero_count(expanded),
    )
    return expanded


def cluster_inputs(
    weights: npt.NDArray[np.float64], num_clusters: int, linkage: str = "average"
) -> npt.NDArray[np.int64]:
    """Clusters the rows of the Gram matrix ``W^T W`` by cosine distance.

    Inputs whose Gram row is zero each form their own cluster. Returns
    one cluster id per input.
    """

    gram = weights.T @ weights
    d = gram.shape[0]
    labels = np.arange(d, dtype=np.int64)
    live = np.flatnonzero(np.linalg.norm(gram, axis=1) > 0)
    if live.size < 2:
        return labels

    target = max(1, min(num_clusters, live.size))
    tree = hierarchy.linkage(gram[live], method=linkage, metric="cosine")
    found = hierarchy.fcluster(tree, t=target, criterion="maxclust")
    labels[live] = d + found
    return labels


def gram_cluster_partitions(
    w1: npt.NDArray[np.float64],
    alpha: int,
    params: GramClusterParams | None = None,
    rng: np.random.Generator | int | None = None,
) -> list[list[Mask]]:
    """Builds per-neuron partitions from clusters of the Gram matrix.

    Whole clusters go to a single sub-neuron and every sub-neuron receives
    the same number of clusters, give or take one. A zero `w1` carries no
    structure; random partitions are returned instead.
    """

    params = params or GramClusterParams()
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    w1 = np.asarray(w1, dtype=np.float64)
    h, d = w1.shape

    if not np.any(w1):
        _log.warning("Gram matrix is zero; falling back to random partitions")
        strategy = PartitionStrategy(PartitionKind.RANDOM)
        return [partition_masks(d, alpha, strategy, rng) for _ in range(h)]

    num_clusters = params.num_clusters or alpha * h
    labels = cluster_inputs(w1, num_clusters, params.linkage)
    strategy = PartitionStrategy(PartitionKind.GRAM_CLUSTER, gram=params)
    return [partition_masks(d, alpha, strategy, rng, labels) for _ in range(h)]


def rewire_masks(
    model: MlpModel, fraction: float, rng: np.random.Generator
) -> MlpModel:
    """Unmasks ``floor(fraction * nnz)`` inactive positions at zero and
    prunes as many of the smallest-magnitude previously active weights.

    The number of non-zero weights is unchanged. Requests for more
    positions than are inactive are clipped with a warning.
    """

    if not 0.0 <= fraction < 1.0:
        raise InputError(f"fraction must lie in [0, 1), got {fraction}")

    layers = [_copy_layer(layer) for layer in model.layers]
    nnz = sum(int(layer.mask.sum()) for layer in layers)
    count = int(np.floor(fraction * nnz))
    inactive = [np.flatnonzero(~layer.mask) for layer in layers]
    available = sum(idx.size for idx in inactive)
    if count > available:
        _log.warning("rewiring %d positions clipped to the %d inactive ones", count, available)
        count = available
    if count == 0:
        return MlpModel(layers, model.output_kind, model.seed)

    offsets = np.cumsum([0] + [idx.size for idx in inactive])
    chosen = np.sort(rng.choice(available, size=count, replace=False))
    grown = [np.zeros_like(layer.mask) for layer in layers]
    for index, layer in enumerate(layers):
        local = chosen[(chosen >= offsets[index]) & (chosen < offsets[index + 1])]
        flat = inactive[index][local - offsets[index]]
        grown[index].flat[flat] = True

    for layer_idx, row, col in _smallest_active(layers, count):
        layers[layer_idx].mask[row, col] = False
        layers[layer_idx].weights[row, col] = 0.0
    for layer, new in zip(layers, grown):
        layer.mask |= new
        layer.weights[new] = 0.0

    return MlpModel(layers, model.output_kind, model.seed)
