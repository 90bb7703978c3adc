"""Tests for cli_harness.py module."""

import json
import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from fpe_toolkit import cli_harness
from fpe_toolkit.argparser import GenDataArguments
from fpe_toolkit.cli_harness import cmd_gen_data, cmd_run, cmd_sweep, load_task, main
from fpe_toolkit.config import ExperimentConfig
from fpe_toolkit.data_io import LabeledMatrixDataset, load_fpee, load_sidecar, save_fpee
from fpe_toolkit.enums import Variant
from fpe_toolkit.masked_net import init_model, load_model, save_model

# pylint: disable=invalid-name

TRIALS_HEADER = (
    "schema_version,variant,trial,seed,init_seed,accuracy,nnz,nonzero_params,"
    "total_capacity,mean_cosine,accuracy_per_parameter,best"
)


def tiny_config(output_dir, **changes) -> ExperimentConfig:
    """Returns a DNF experiment small enough to run in a test."""

    data = {
        "task": {"kind": "dnf", "m": 32, "k": 4, "nTrain": 200, "nTest": 100},
        "model": {"hidden": [8]},
        "train": {"epochs": 2, "batchSize": 50, "trials": 2, "learningRate": 0.01},
        "expansion": {
            "alpha": 2,
            "strategies": ["clause_aware", "random", "gram_cluster", "structured_2_4"],
        },
        "pretrainEpochs": 2,
        "seed": 1,
        "outputDir": str(output_dir),
    }
    data.update(changes)
    return ExperimentConfig.from_json(data)


def test_cmd_gen_data(tmp_path):
    """Test cmd_gen_data function writes the dataset and its sidecar."""

    path = tmp_path / "dnf.fpee"
    args = GenDataArguments(m=32, k=4, n=100, seed=2, jitter=True, output=str(path))

    written = cmd_gen_data(args)

    assert written == [path, tmp_path / "dnf.fpee.json"]
    data = load_fpee(path)
    assert data.n == 100 and data.d == 32 and data.class_count == 2
    assert data.x.max() > 3.0
    sidecar = load_sidecar(path)
    assert sidecar["positives"] == 50
    assert sidecar["flip_negatives"] + sidecar["random_negatives"] == 50
    assert sidecar["jitter_seed"] == 2 + 7919


def test_load_task__dnf_jitter(tmp_path):
    """Test load_task function jitters DNF inputs without touching labels."""

    plain = tiny_config(tmp_path)
    task = {"kind": "dnf", "m": 32, "k": 4, "nTrain": 200, "nTest": 100, "jitter": True}
    noisy = tiny_config(tmp_path, task=task)

    plain_train, plain_test = load_task(plain)
    noisy_train, noisy_test = load_task(noisy)

    assert np.array_equal(plain_train.y, noisy_train.y)
    assert np.array_equal(plain_test.y, noisy_test.y)
    assert set(np.unique(plain_train.x)) <= {0.0, 1.0}
    assert not set(np.unique(noisy_train.x)) <= {0.0, 1.0}


def test_cmd_run__outputs(tmp_path):
    """Test cmd_run function trains every variant at the same budget."""

    result = cmd_run(tiny_config(tmp_path))

    assert len(result.rows) == 5 * 2
    assert {row.nnz for row in result.rows} == {32 * 8 + 8}
    assert sum(row.best for row in result.rows) == 5
    assert result.summary(Variant.DENSE).relative_improvement is None
    assert result.summary(Variant.CLAUSE_SPLIT).relative_improvement is not None

    lines = (tmp_path / "trials.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == TRIALS_HEADER
    assert len(lines) == 11
    assert lines[1].startswith("1,dense,0,1,1,")

    aggregate = json.loads((tmp_path / "aggregate.json").read_text(encoding="utf-8"))
    assert aggregate["schemaVersion"] == 1
    assert [v["variant"] for v in aggregate["variants"]] == [
        "dense",
        "clause_split",
        "random_split",
        "gram_split",
        "structured_split",
    ]

    model = load_model(tmp_path / "models" / "clause_split.fpem")
    assert model.dims == [32, 16, 1]
    events = (tmp_path / "events.jsonl").read_text(encoding="utf-8").splitlines()
    assert json.loads(events[0])["variant"] == "dense"


def test_cmd_run__dense_epochs(tmp_path):
    """Test cmd_run function trains the dense baseline for all epochs."""

    cmd_run(tiny_config(tmp_path, expansion=None))

    events = [
        json.loads(line)
        for line in (tmp_path / "events.jsonl").read_text(encoding="utf-8").splitlines()
    ]
    assert max(e["epoch"] for e in events if e["trial"] == 0) == 4


def test_cmd_run__deterministic(tmp_path):
    """Test cmd_run function writes byte-identical tables on a rerun."""

    cmd_run(tiny_config(tmp_path / "a"))
    cmd_run(tiny_config(tmp_path / "b"))

    for name in ("trials.csv", "events.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cmd_run__decoupled_init_seeds(tmp_path):
    """Test cmd_run function offsets initialization seeds per variant."""

    result = cmd_run(
        tiny_config(
            tmp_path, shareInitSeed=False, expansion={"alpha": 2, "strategies": ["random"]}
        )
    )

    init_seeds = {(row.variant, row.trial): row.init_seed for row in result.rows}
    assert init_seeds[(Variant.DENSE, 1)] == 2
    assert init_seeds[(Variant.RANDOM_SPLIT, 1)] == 1002


def test_cmd_sweep__tables_and_resume(tmp_path, monkeypatch):
    """Test cmd_sweep function writes both tables and skips finished cells."""

    config = tiny_config(
        tmp_path,
        train={"epochs": 1, "batchSize": 100, "trials": 1},
        expansion={"alpha": 2, "strategies": ["clause_aware"]},
        sweep={"hidden": [4], "clauses": [4, 8], "alpha": [2]},
    )

    long_path = cmd_sweep(config)

    long_lines = long_path.read_text(encoding="utf-8").splitlines()
    assert len(long_lines) == 1 + 2 * 2
    pivot = (tmp_path / "sweep_pivot.csv").read_text(encoding="utf-8").splitlines()
    assert pivot[0] == "schema_version,alpha,variant,hidden,clauses_4,clauses_8"
    assert pivot[1].startswith("1,2,clause_split,4,")
    assert (tmp_path / "cells" / "h4_c8_a2" / "aggregate.json").exists()

    def fail(_config):
        raise AssertionError("a finished cell was run again")

    monkeypatch.setattr(cli_harness, "cmd_run", fail)
    assert cmd_sweep(config).read_text(encoding="utf-8").splitlines() == long_lines


def test_main__theory(capsys):
    """Test main function with the theory command."""

    code = main(["theory", "--m", "32", "--k", "4", "--alpha", "2", "--r", "8"])

    assert code == 0
    out = capsys.readouterr().out
    assert "coverage probability p" in out
    assert "224" in out


def test_main__metrics(tmp_path):
    """Test main function with the metrics command."""

    path = tmp_path / "model.fpem"
    save_model(init_model([8, 4, 1], seed=0), path)

    code = main(["metrics", str(path), "--output-dir", str(tmp_path), "--clause-size", "4"])

    assert code == 0
    report = json.loads((tmp_path / "model.metrics.json").read_text(encoding="utf-8"))
    assert len(report["perFeatureCapacity"]) == 8
    assert len(report["clauseCapacity"]) == 2
    gram = np.loadtxt(tmp_path / "model.gram.csv", delimiter=",", skiprows=1)
    assert gram.shape == (8, 8)
    mask = (tmp_path / "model.mask.csv").read_text(encoding="utf-8").splitlines()
    assert len(mask) == 1 + 4


def test_main__gen_data_invalid_spec(tmp_path, capsys):
    """Test main function exits with 2 when k does not divide m."""

    code = main(["gen-data", "--m", "30", "--k", "4", "--n", "10", "-o", str(tmp_path / "x")])

    assert code == 2
    assert "Error:" in capsys.readouterr().err


def test_main__missing_config(tmp_path):
    """Test main function exits with 2 for a missing configuration."""
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_main__bad_checkpoint(tmp_path):
    """Test main function exits with 3 for a file that is not a checkpoint."""

    path = tmp_path / "model.fpem"
    path.write_bytes(b"not a checkpoint at all")

    assert main(["metrics", str(path), "--output-dir", str(tmp_path)]) == 3


def test_main__non_finite_training(tmp_path):
    """Test main function exits with 4 when training diverges."""

    data = tmp_path / "data.csv"
    data.write_text("label,f0,f1\n0,nan,1\n1,0.5,0.25\n", encoding="utf-8")
    config = tmp_path / "experiment.json"
    config.write_text(
        json.dumps(
            {
                "task": {"kind": "csv", "trainPath": str(data), "testPath": str(data)},
                "model": {"hidden": [4]},
                "train": {"epochs": 1, "trials": 1},
                "outputDir": str(tmp_path / "out"),
            }
        ),
        encoding="utf-8",
    )

    assert main(["run", str(config)]) == 4


@pytest.fixture(scope="module")
def case_study(tmp_path_factory):
    """Runs the 32-literal, 8-clause Boolean case study once per module."""

    config = ExperimentConfig.from_json(
        {
            "task": {"kind": "dnf", "m": 32, "k": 4, "jitter": True},
            "model": {"hidden": [8]},
            "train": {"trials": 5},
            "expansion": {"alpha": 2, "strategies": ["clause_aware", "random"]},
            "pretrainEpochs": 1000,
            "outputDir": str(tmp_path_factory.mktemp("case_study")),
        }
    )
    return cmd_run(config)


@pytest.mark.slow
def test_cmd_run__case_study_accuracy(case_study):
    """Test cmd_run function reproduces the case-study accuracy ordering."""

    dense = case_study.summary(Variant.DENSE).mean_accuracy
    clause = case_study.summary(Variant.CLAUSE_SPLIT).mean_accuracy
    random = case_study.summary(Variant.RANDOM_SPLIT).mean_accuracy

    assert 0.65 <= dense <= 0.92
    assert clause >= dense + 0.08
    assert random >= dense - 0.01


@pytest.mark.slow
def test_cmd_run__case_study_interference(case_study):
    """Test cmd_run function shows less interference after clause splitting."""

    dense = case_study.summary(Variant.DENSE)
    clause = case_study.summary(Variant.CLAUSE_SPLIT)

    assert clause.nnz == dense.nnz
    assert clause.mean_capacity >= 1.4 * dense.mean_capacity
    assert clause.mean_cosine < dense.mean_cosine


@pytest.mark.slow
def test_cmd_run__fashion_mnist(tmp_path):
    """Test cmd_run function improves on FashionMNIST after random splitting.

    Needs the four IDX files in the directory named by
    ``FPE_FASHION_MNIST_DIR``.
    """

    folder = os.environ.get("FPE_FASHION_MNIST_DIR")
    if not folder or not Path(folder).is_dir():
        pytest.skip("FPE_FASHION_MNIST_DIR is not set")
    config = ExperimentConfig.from_json(
        {
            "task": {
                "kind": "idx",
                "trainImages": str(Path(folder) / "train-images-idx3-ubyte.gz"),
                "trainLabels": str(Path(folder) / "train-labels-idx1-ubyte.gz"),
                "testImages": str(Path(folder) / "t10k-images-idx3-ubyte.gz"),
                "testLabels": str(Path(folder) / "t10k-labels-idx1-ubyte.gz"),
                "classCount": 10,
            },
            "model": {"hidden": [4]},
            "train": {"epochs": 20, "trials": 5},
            "expansion": {"alpha": 2, "strategies": ["random"]},
            "pretrainEpochs": 20,
            "outputDir": str(tmp_path),
        }
    )

    result = cmd_run(config)

    assert result.summary(Variant.RANDOM_SPLIT).relative_improvement > 0.0


@pytest.mark.slow
def test_cmd_run__embedding_pipeline(tmp_path):
    """Test cmd_run function on a 1000-row FPEE embedding task."""

    rng = np.random.default_rng(0)
    centers = rng.normal(size=(3, 16))
    y = rng.integers(0, 3, size=1000)
    x = centers[y] + 0.3 * rng.normal(size=(1000, 16))
    path = tmp_path / "emb.fpee"
    save_fpee(LabeledMatrixDataset(x, y, class_count=3), path)
    config = tiny_config(
        tmp_path / "out",
        task={"kind": "fpee", "k": 4, "trainPath": str(path), "testPath": str(path)},
        model={"hidden": [8, 8], "layerNorm": True},
        train={"epochs": 10, "batchSize": 100, "trials": 2, "learningRate": 0.01},
        expansion={"alpha": 2, "strategies": ["clause_aware", "gram_cluster", "random"]},
    )

    first = cmd_run(config)
    again = cmd_run(replace(config, output_dir=str(tmp_path / "again")))

    assert {row.nnz for row in first.rows} == {16 * 8 + 8 * 8 + 8 * 3}
    assert first.rows == again.rows
    for variant in (Variant.CLAUSE_SPLIT, Variant.GRAM_SPLIT, Variant.RANDOM_SPLIT):
        model = load_model(tmp_path / "out" / "models" / f"{variant.value}.fpem")
        family = model.layers[0].mask.reshape(8, 2, 16).sum(axis=1)
        assert np.all(family <= 1)
