"""This module contains the enums used in the library.

Enums
-----
OutputKind
    Represents the kind of the classification head.
PartitionKind
    Represents a strategy for splitting a neuron's inputs.
Variant
    Represents a model variant compared in an experiment.
TaskKind
    Represents the source of an experiment's data.
RampMode
    Represents what the warmup ramp factor multiplies.
ExitCode
    Represents the exit code of the command line interface.
"""

from enum import Enum, IntEnum

__all__ = (
    "OutputKind",
    "PartitionKind",
    "Variant",
    "TaskKind",
    "RampMode",
    "ExitCode",
)


class OutputKind(Enum):
    """Represents the kind of the classification head.

    Attributes
    ----------
    BINARY: :class:`str`
        A single sigmoid output trained with binary cross-entropy.
    MULTICLASS: :class:`str`
        Raw logits trained with softmax cross-entropy.
    """

    BINARY = "binary"
    MULTICLASS = "multiclass"


class PartitionKind(Enum):
    """Represents a strategy for splitting a neuron's inputs.

    Attributes
    ----------
    RANDOM: :class:`str`
        Inputs are assigned to sub-neurons uniformly at random.
    CLAUSE_AWARE: :class:`str`
        Contiguous clause blocks are assigned whole, round-robin.
    GRAM_CLUSTER: :class:`str`
        Clusters of the first-layer Gram matrix are assigned whole.
    STRUCTURED_2_4: :class:`str`
        Two of every four consecutive inputs go to each of two sub-neurons.
    """

    RANDOM = "random"
    CLAUSE_AWARE = "clause_aware"
    GRAM_CLUSTER = "gram_cluster"
    STRUCTURED_2_4 = "structured_2_4"


class Variant(Enum):
    """Represents a model variant compared in an experiment.

    Attributes
    ----------
    DENSE: :class:`str`
        The dense baseline.
    CLAUSE_SPLIT: :class:`str`
        Expanded with clause-aware partitions.
    RANDOM_SPLIT: :class:`str`
        Expanded with random partitions.
    GRAM_SPLIT: :class:`str`
        Expanded with Gram-cluster partitions.
    STRUCTURED_SPLIT: :class:`str`
        Expanded with 2:4 structured partitions.
    """

    DENSE = "dense"
    CLAUSE_SPLIT = "clause_split"
    RANDOM_SPLIT = "random_split"
    GRAM_SPLIT = "gram_split"
    STRUCTURED_SPLIT = "structured_split"

    @classmethod
    def from_partition(cls, kind: PartitionKind) -> "Variant":
        """Returns the variant produced by expanding with `kind`."""
        return {
            PartitionKind.CLAUSE_AWARE: cls.CLAUSE_SPLIT,
            PartitionKind.RANDOM: cls.RANDOM_SPLIT,
            PartitionKind.GRAM_CLUSTER: cls.GRAM_SPLIT,
            PartitionKind.STRUCTURED_2_4: cls.STRUCTURED_SPLIT,
        }[kind]


class TaskKind(Enum):
    """Represents the source of an experiment's data.

    Attributes
    ----------
    DNF: :class:`str`
        Generated Boolean-DNF data.
    IDX: :class:`str`
        IDX image/label file pairs (FashionMNIST).
    FPEE: :class:`str`
        Labeled embedding matrices in the FPEE binary format.
    CSV: :class:`str`
        Labeled embedding matrices in CSV form.
    """

    DNF = "dnf"
    IDX = "idx"
    FPEE = "fpee"
    CSV = "csv"


class RampMode(Enum):
    """Represents what the warmup ramp factor ``min(1, epoch / warmup)`` multiplies.

    Attributes
    ----------
    NONE: :class:`str`
        The ramp is computed but never applied.
    REGULARIZERS: :class:`str`
        The ramp multiplies the regularization terms.
    LEARNING_RATE: :class:`str`
        The ramp multiplies the learning rate.
    """

    NONE = "none"
    REGULARIZERS = "regularizers"
    LEARNING_RATE = "learning_rate"


class ExitCode(IntEnum):
    """Represents the exit code of the command line interface.

    Attributes
    ----------
    SUCCESS: :class:`int`
        The command finished.
    CONFIG_ERROR: :class:`int`
        Invalid arguments or configuration.
    FORMAT_ERROR: :class:`int`
        A data or checkpoint file could not be parsed.
    NUMERIC_ERROR: :class:`int`
        A computation produced non-finite values.
    """

    SUCCESS = 0
    CONFIG_ERROR = 2
    FORMAT_ERROR = 3
    NUMERIC_ERROR = 4
