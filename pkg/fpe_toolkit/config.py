"""Experiment configuration.

A configuration is a JSON document whose keys may be written in
camelCase or snake_case. It is decoded into frozen dataclasses and
validated as a whole before any data is loaded.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any

import humps

from .enums import PartitionKind, RampMode, TaskKind
from .errors import ConfigError, FpeError
from .training import RewireConfig, TrainConfig

__all__ = (
    "TaskConfig",
    "ModelConfig",
    "ExpansionConfig",
    "SweepConfig",
    "ExperimentConfig",
    "load_config",
)

CONFIG_SCHEMA_VERSION = 1


def _build(cls, json_data: dict, **converted):
    """Instantiates `cls`, turning unknown keys and field errors into
    :class:`ConfigError`."""

    try:
        return cls(**{**json_data, **converted})
    except TypeError as e:
        raise ConfigError(f"{cls.__name__}: {e}") from e
    except FpeError as e:
        raise ConfigError(f"{cls.__name__}: {e}") from e


@dataclass(slots=True, frozen=True)
class TaskConfig:  # pylint: disable=too-many-instance-attributes
    """Represents where the data of an experiment comes from.

    Attributes
    ----------
    kind: :class:`TaskKind`
        The data source.
    m: :class:`int` | :class:`None`
        Literals of a DNF task.
    k: :class:`int` | :class:`None`
        Clause size; also the block size of clause-aware splits on
        non-DNF data.
    n_train: :class:`int`
        Generated training rows of a DNF task.
    n_test: :class:`int`
        Generated test rows of a DNF task.
    jitter: :class:`bool`
        Whether DNF inputs are jittered.
    """

    kind: TaskKind
    m: int | None = None
    k: int | None = None
    n_train: int = 10_000
    n_test: int = 10_000
    jitter: bool = False
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    train_path: str | None = None
    test_path: str | None = None
    class_count: int | None = None

    @classmethod
    def from_json(cls, json_data: dict) -> TaskConfig:
        """Creates a TaskConfig from a JSON dictionary."""

        try:
            kind = TaskKind(json_data.pop("kind"))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"task.kind must be one of {[t.value for t in TaskKind]}") from e
        return _build(cls, json_data, kind=kind)

    def paths(self) -> list[str]:
        """Returns the data files the task reads."""

        match self.kind:
            case TaskKind.IDX:
                names = ("train_images", "train_labels", "test_images", "test_labels")
            case TaskKind.FPEE | TaskKind.CSV:
                names = ("train_path", "test_path")
            case _:
                names = ()
        return [getattr(self, name) for name in names]


@dataclass(slots=True, frozen=True)
class ModelConfig:
    """Represents the architecture of the dense model.

    Attributes
    ----------
    hidden: :class:`tuple` [:class:`int`]
        Hidden layer widths.
    bias: :class:`bool`
        Whether layers carry biases.
    layer_norm: :class:`bool`
        Whether hidden layers are layer-normalized.
    """

    hidden: tuple[int, ...]
    bias: bool = True
    layer_norm: bool = False

    @classmethod
    def from_json(cls, json_data: dict) -> ModelConfig:
        """Creates a ModelConfig from a JSON dictionary."""
        return _build(cls, json_data, hidden=tuple(json_data.get("hidden", ())))


@dataclass(slots=True, frozen=True)
class ExpansionConfig:
    """Represents the expansion step of an experiment.

    Attributes
    ----------
    alpha: :class:`int`
        The expansion factor.
    strategies: :class:`tuple` [:class:`PartitionKind`]
        One expanded variant is trained per strategy.
    layers_to_expand: :class:`tuple` [:class:`int`] | :class:`None`
        Hidden layers to expand; every other hidden layer when omitted.
    num_clusters: :class:`int` | :class:`None`
        Cluster count of the Gram strategy.
    linkage: :class:`str`
        Linkage of the Gram strategy.
    """

    alpha: int
    strategies: tuple[PartitionKind, ...]
    layers_to_expand: tuple[int, ...] | None = None
    num_clusters: int | None = None
    linkage: str = "average"

    @classmethod
    def from_json(cls, json_data: dict) -> ExpansionConfig:
        """Creates an ExpansionConfig from a JSON dictionary."""

        try:
            strategies = tuple(PartitionKind(s) for s in json_data.get("strategies", ()))
        except ValueError as e:
            raise ConfigError(f"expansion.strategies: {e}") from e
        layers = json_data.get("layers_to_expand")
        return _build(
            cls,
            json_data,
            strategies=strategies,
            layers_to_expand=None if layers is None else tuple(layers),
        )


@dataclass(slots=True, frozen=True)
class SweepConfig:
    """Represents the axes of a sweep; every combination is one cell.

    Attributes
    ----------
    hidden: :class:`tuple` [:class:`int`]
        First hidden layer widths.
    clauses: :class:`tuple` [:class:`int`]
        Clause counts; a cell has ``clauses * k`` literals.
    alpha: :class:`tuple` [:class:`int`]
        Expansion factors.
    """

    hidden: tuple[int, ...]
    clauses: tuple[int, ...]
    alpha: tuple[int, ...]

    @classmethod
    def from_json(cls, json_data: dict) -> SweepConfig:
        """Creates a SweepConfig from a JSON dictionary."""
        axes = {name: tuple(json_data.get(name, ())) for name in ("hidden", "clauses", "alpha")}
        return _build(cls, json_data, **axes)

    def cells(self) -> list[tuple[int, int, int]]:
        """Returns ``(hidden, clauses, alpha)`` for every cell in order."""
        return [(h, c, a) for h in self.hidden for c in self.clauses for a in self.alpha]


def _train_from_json(json_data: dict) -> TrainConfig:
    converted = {}
    if "ramp" in json_data:
        try:
            converted["ramp"] = RampMode(json_data["ramp"])
        except ValueError as e:
            raise ConfigError(f"train.ramp: {e}") from e
    if json_data.get("rewire") is not None:
        converted["rewire"] = _build(RewireConfig, json_data["rewire"])
    return _build(TrainConfig, json_data, **converted)


@dataclass(slots=True, frozen=True)
class ExperimentConfig:  # pylint: disable=too-many-instance-attributes
    """Represents a whole experiment.

    Attributes
    ----------
    task: :class:`TaskConfig`
        The data.
    model: :class:`ModelConfig`
        The dense architecture.
    train: :class:`TrainConfig`
        Training hyperparameters; ``train.epochs`` are the epochs after
        expansion.
    expansion: :class:`ExpansionConfig` | :class:`None`
        The expansion step; only the dense baseline runs without it.
    pretrain_epochs: :class:`int`
        Dense epochs before expansion.
    share_init_seed: :class:`bool`
        Whether all variants of a trial start from the same dense model.
    sweep: :class:`SweepConfig` | :class:`None`
        The sweep axes.
    output_dir: :class:`str`
        Where results are written.
    seed: :class:`int`
        The global seed.
    schema_version: :class:`int`
        The configuration schema version.
    """

    task: TaskConfig
    model: ModelConfig
    train: TrainConfig = field(default_factory=TrainConfig)
    expansion: ExpansionConfig | None = None
    pretrain_epochs: int = 0
    share_init_seed: bool = True
    sweep: SweepConfig | None = None
    output_dir: str = "results"
    seed: int = 0
    schema_version: int = CONFIG_SCHEMA_VERSION

    @classmethod
    def from_json(cls, json_data: dict) -> ExperimentConfig:
        """Creates an ExperimentConfig from a JSON dictionary with
        camelCase or snake_case keys."""

        json_data = humps.decamelize(json_data)
        for required in ("task", "model"):
            if required not in json_data:
                raise ConfigError(f"configuration is missing '{required}'")

        seed = json_data.get("seed", 0)
        train_data = {"seed": seed, **json_data.get("train", {})}
        converted: dict[str, Any] = {
            "task": TaskConfig.from_json(json_data["task"]),
            "model": ModelConfig.from_json(json_data["model"]),
            "train": _train_from_json(train_data),
        }
        if json_data.get("expansion") is not None:
            converted["expansion"] = ExpansionConfig.from_json(json_data["expansion"])
        if json_data.get("sweep") is not None:
            converted["sweep"] = SweepConfig.from_json(json_data["sweep"])
        return _build(cls, json_data, **converted)

    def to_json(self) -> dict:
        """Returns the configuration as a camelCase JSON-ready dictionary."""
        return humps.camelize(_jsonable(asdict(self)))

    def with_overrides(self, **overrides: Any) -> ExperimentConfig:
        """Returns a copy with command-line overrides applied.

        Accepted keys are ``seed``, ``trials``, ``epochs``,
        ``pretrain_epochs`` and ``output_dir``; ``None`` values are ignored.
        """

        overrides = {k: v for k, v in overrides.items() if v is not None}
        train_fields = {
            name: overrides.pop(name) for name in ("trials", "epochs") if name in overrides
        }
        if "seed" in overrides:
            train_fields["seed"] = overrides["seed"]
        try:
            config = replace(self, train=replace(self.train, **train_fields), **overrides)
        except (TypeError, FpeError) as e:
            raise ConfigError(f"invalid override: {e}") from e
        return config

    def for_cell(self, hidden: int, clauses: int, alpha: int) -> ExperimentConfig:
        """Returns the configuration of one sweep cell."""

        task = replace(self.task, m=clauses * self.task.k)
        model = replace(self.model, hidden=(hidden, *self.model.hidden[1:]))
        expansion = replace(self.expansion, alpha=alpha)
        return replace(
            self,
            task=task,
            model=model,
            expansion=expansion,
            sweep=None,
            output_dir=str(Path(self.output_dir) / "cells" / f"h{hidden}_c{clauses}_a{alpha}"),
        )

    def validate(self) -> ExperimentConfig:  # pylint: disable=too-many-branches
        """Checks the whole configuration; returns it unchanged.

        Raises
        ------
        ConfigError
            On the first inconsistency found.
        """

        if self.schema_version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema version {self.schema_version}")
        if self.pretrain_epochs < 0:
            raise ConfigError("pretrain_epochs must be non-negative")
        if not self.model.hidden or any(h < 1 for h in self.model.hidden):
            raise ConfigError(f"hidden widths must be positive, got {self.model.hidden}")

        task = self.task
        if task.kind is TaskKind.DNF:
            if task.m is None or task.k is None:
                raise ConfigError("a dnf task needs m and k")
            if task.k < 1 or task.m % task.k:
                raise ConfigError(f"clause size {task.k} must divide m={task.m}")
            if task.k > task.m // 4 + task.m // 8:
                raise ConfigError(f"clause size {task.k} exceeds the active-bit range of m={task.m}")
            for name in ("n_train", "n_test"):
                value = getattr(task, name)
                if value < 2 or value % 2:
                    raise ConfigError(f"task.{name} must be even and at least 2, got {value}")
        else:
            for path in task.paths():
                if path is None:
                    raise ConfigError(f"a {task.kind.value} task is missing a data path")
                if not Path(path).exists():
                    raise ConfigError(f"data file {path} does not exist")

        if self.expansion is not None:
            self._validate_expansion()

        if self.sweep is not None:
            if task.kind is not TaskKind.DNF:
                raise ConfigError("sweeps vary the clause count and need a dnf task")
            if self.expansion is None:
                raise ConfigError("sweeps need an expansion step")
            if not (self.sweep.hidden and self.sweep.clauses and self.sweep.alpha):
                raise ConfigError("sweep axes must be non-empty")
            for hidden, clauses, alpha in self.sweep.cells():
                replace(self, sweep=None).for_cell(hidden, clauses, alpha).validate()
        return self

    def _validate_expansion(self) -> None:
        expansion, task = self.expansion, self.task
        if expansion.alpha < 2:
            raise ConfigError(f"expansion.alpha must be at least 2, got {expansion.alpha}")
        if not expansion.strategies:
            raise ConfigError("expansion.strategies must be non-empty")

        hidden_count = len(self.model.hidden)
        for index in expansion.layers_to_expand or ():
            if not 0 <= index < hidden_count or index % 2:
                raise ConfigError(f"layer {index} is not an even hidden layer index")

        width = task.m if task.kind is TaskKind.DNF else None
        if PartitionKind.CLAUSE_AWARE in expansion.strategies:
            if task.k is None:
                raise ConfigError("clause_aware needs task.k")
            if width is not None and width % task.k:
                raise ConfigError(f"clause size {task.k} must divide {width} inputs")
        if PartitionKind.STRUCTURED_2_4 in expansion.strategies:
            if expansion.alpha != 2:
                raise ConfigError("structured_2_4 needs alpha = 2")
            if width is not None and width % 4:
                raise ConfigError("structured_2_4 needs an input width divisible by 4")
        if expansion.num_clusters is not None and expansion.num_clusters < 1:
            raise ConfigError("expansion.num_clusters must be positive")


def _jsonable(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def load_config(path: str | Path) -> ExperimentConfig:
    """Reads an experiment configuration file.

    Raises
    ------
    ConfigError
        If the file is missing or is not valid JSON.
    """

    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}") from e
    try:
        json_data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"configuration {path} is not valid JSON: {e}") from e
    if not isinstance(json_data, dict):
        raise ConfigError("configuration must be a JSON object")
    return ExperimentConfig.from_json(json_data)
