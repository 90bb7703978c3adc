"""Tests for config.py module."""

import json

import pytest

from fpe_toolkit.config import ExperimentConfig, load_config
from fpe_toolkit.enums import PartitionKind, RampMode, TaskKind
from fpe_toolkit.errors import ConfigError

# pylint: disable=invalid-name


def dnf_config(**changes) -> dict:
    """Returns a small camelCase DNF configuration."""

    config = {
        "task": {"kind": "dnf", "m": 32, "k": 4, "nTrain": 200, "nTest": 100},
        "model": {"hidden": [8]},
        "train": {"epochs": 5, "batchSize": 50, "trials": 2, "ramp": "regularizers"},
        "expansion": {"alpha": 2, "strategies": ["clause_aware", "random"]},
        "pretrainEpochs": 3,
        "seed": 7,
    }
    config.update(changes)
    return config


def test_ExperimentConfig_from_json():
    """Test ExperimentConfig.from_json method with camelCase keys."""

    config = ExperimentConfig.from_json(dnf_config())

    assert config.task.kind is TaskKind.DNF
    assert config.task.n_train == 200
    assert config.model.hidden == (8,)
    assert config.train.batch_size == 50
    assert config.train.ramp is RampMode.REGULARIZERS
    assert config.train.seed == 7
    assert config.expansion.strategies == (PartitionKind.CLAUSE_AWARE, PartitionKind.RANDOM)
    assert config.pretrain_epochs == 3
    assert config.validate() is config


def test_ExperimentConfig_from_json__rewire():
    """Test ExperimentConfig.from_json method with a rewiring block."""

    data = dnf_config()
    data["train"]["rewire"] = {"period": 2, "fraction": 0.1}

    config = ExperimentConfig.from_json(data)

    assert config.train.rewire.period == 2
    assert config.train.rewire.fraction == 0.1


def test_ExperimentConfig_to_json__round_trip():
    """Test ExperimentConfig.to_json method reads back to an equal config."""

    data = dnf_config(sweep={"hidden": [4, 8], "clauses": [8], "alpha": [2]})
    config = ExperimentConfig.from_json(data)

    out = config.to_json()

    assert out["pretrainEpochs"] == 3
    assert out["expansion"]["strategies"] == ["clause_aware", "random"]
    assert ExperimentConfig.from_json(json.loads(json.dumps(out))) == config


@pytest.mark.parametrize(
    "changes",
    [
        {"task": {"kind": "bogus"}},
        {"task": {"kind": "dnf", "m": 32, "k": 4, "colour": "red"}},
        {"model": {"hidden": [8], "depth": 3}},
        {"train": {"batchSize": 0}},
        {"train": {"ramp": "sometimes"}},
        {"expansion": {"alpha": 2, "strategies": ["zigzag"]}},
    ],
)
def test_ExperimentConfig_from_json__invalid(changes):
    """Test ExperimentConfig.from_json method with unknown or bad values."""

    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(dnf_config(**changes))


def test_ExperimentConfig_from_json__missing_model():
    """Test ExperimentConfig.from_json method without a model."""

    data = dnf_config()
    del data["model"]

    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(data)


@pytest.mark.parametrize(
    "changes",
    [
        {"task": {"kind": "dnf", "m": 30, "k": 4}},
        {"task": {"kind": "dnf", "m": 32, "k": 4, "nTrain": 201}},
        {"task": {"kind": "fpee", "trainPath": "missing.fpee", "testPath": "missing.fpee"}},
        {"task": {"kind": "idx"}},
        {"model": {"hidden": []}},
        {"expansion": {"alpha": 1, "strategies": ["random"]}},
        {"expansion": {"alpha": 4, "strategies": ["structured_2_4"]}},
        {"expansion": {"alpha": 2, "strategies": []}},
        {"expansion": {"alpha": 2, "strategies": ["random"], "layersToExpand": [1]}},
        {"pretrainEpochs": -1},
        {"schemaVersion": 2},
        {"sweep": {"hidden": [8], "clauses": [], "alpha": [2]}},
    ],
)
def test_ExperimentConfig_validate__invalid(changes):
    """Test ExperimentConfig.validate method rejects inconsistent configs."""

    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(dnf_config(**changes)).validate()


def test_ExperimentConfig_validate__sweep_without_expansion():
    """Test ExperimentConfig.validate method with a sweep but no expansion."""

    config = ExperimentConfig.from_json(
        dnf_config(expansion=None, sweep={"hidden": [8], "clauses": [8], "alpha": [2]})
    )

    with pytest.raises(ConfigError):
        config.validate()


def test_ExperimentConfig_with_overrides():
    """Test ExperimentConfig.with_overrides method."""

    config = ExperimentConfig.from_json(dnf_config())

    out = config.with_overrides(seed=3, trials=1, epochs=None, output_dir="elsewhere")

    assert out.seed == 3
    assert out.train.seed == 3
    assert out.train.trials == 1
    assert out.train.epochs == 5
    assert out.output_dir == "elsewhere"
    assert config.seed == 7


def test_ExperimentConfig_with_overrides__invalid():
    """Test ExperimentConfig.with_overrides method with zero trials."""

    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(dnf_config()).with_overrides(trials=0)


def test_ExperimentConfig_for_cell():
    """Test ExperimentConfig.for_cell method."""

    config = ExperimentConfig.from_json(
        dnf_config(
            model={"hidden": [8, 8]},
            sweep={"hidden": [4, 16], "clauses": [8, 16], "alpha": [2, 4]},
        )
    )

    cell = config.for_cell(16, 8, 4)

    assert cell.task.m == 32
    assert cell.model.hidden == (16, 8)
    assert cell.expansion.alpha == 4
    assert cell.sweep is None
    assert cell.output_dir.endswith("h16_c8_a4")
    assert len(config.sweep.cells()) == 8
    assert config.validate() is config


def test_load_config(tmp_path):
    """Test load_config function."""

    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(dnf_config()), encoding="utf-8")

    assert load_config(path).task.m == 32


@pytest.mark.parametrize("text", ["{not json", "[1, 2]"])
def test_load_config__invalid(tmp_path, text):
    """Test load_config function with malformed files."""

    path = tmp_path / "experiment.json"
    path.write_text(text, encoding="utf-8")

    with pytest.raises(ConfigError):
        load_config(path)


def test_load_config__missing(tmp_path):
    """Test load_config function with a missing file."""

    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")
