"""Command line experiment driver.

Commands
--------
gen-data
    Writes a DNF dataset as FPEE with a JSON sidecar.
run
    Trains the dense baseline and every expanded variant of a config.
sweep
    Runs ``run`` for every cell of the config's sweep axes.
theory
    Prints exact, approximate and sampled coverage quantities.
metrics
    Writes the interference report of a checkpoint.

Every file written is schema-versioned, and ``run`` outputs are a pure
function of the configuration.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import humps
import numpy as np

from .argparser import (
    GenDataArguments,
    MetricsArguments,
    RunArguments,
    TheoryArguments,
    get_args,
)
from .config import ExperimentConfig, load_config
from .data_io import (
    LabeledMatrixDataset,
    load_csv,
    load_fpee,
    load_idx,
    save_fpee,
    save_sidecar,
)
from .dnf_gen import DnfSpec, generate, generate_train_test
from .enums import ExitCode, OutputKind, PartitionKind, TaskKind, Variant
from .errors import FpeError, InputError
from .fpe_expand import ExpansionPlan, GramClusterParams, PartitionStrategy, fpe_expand_model
from .interference_metrics import (
    mean_stderr,
    metrics_report,
    relative_improvement,
    welch_t_test,
)
from .masked_net import (
    MlpModel,
    ModelOptions,
    init_model,
    load_model,
    nonzero_param_count,
    save_model,
    weight_nonzero_count,
)
from .theory_bounds import TheoryParams, theory_table
from .training import JsonLinesEvents, run_trials, train

__all__ = (
    "ExperimentRow",
    "VariantSummary",
    "ExperimentResult",
    "main",
    "cmd_gen_data",
    "cmd_run",
    "cmd_sweep",
    "cmd_theory",
    "cmd_metrics",
)

_log = logging.getLogger(__name__)

RESULTS_SCHEMA_VERSION = 1
# Seed offsets of the jitter streams and of decoupled variant initializations.
_JITTER_STREAM = 7919
_VARIANT_SEED_STRIDE = 1000


@dataclass(slots=True, frozen=True)
class ExperimentRow:  # pylint: disable=too-many-instance-attributes
    """One trained model of an experiment.

    Attributes
    ----------
    variant: :class:`Variant`
        The dense baseline or an expansion strategy.
    trial: :class:`int`
        Trial index from 0.
    seed: :class:`int`
        Seed of shuffling, rewiring and the partition masks.
    init_seed: :class:`int`
        Seed of the dense initialization.
    accuracy: :class:`float`
        Test accuracy.
    nnz: :class:`int`
        Non-zero weights.
    nonzero_params: :class:`int`
        Non-zero weights plus biases.
    total_capacity: :class:`float`
        First-layer total capacity.
    mean_cosine: :class:`float`
        First-layer mean pairwise cosine similarity.
    accuracy_per_parameter: :class:`float`
        ``accuracy / nnz``.
    best: :class:`bool`
        Whether this trial is the variant's selected model.
    """

    variant: Variant
    trial: int
    seed: int
    init_seed: int
    accuracy: float
    nnz: int
    nonzero_params: int
    total_capacity: float
    mean_cosine: float
    accuracy_per_parameter: float
    best: bool


@dataclass(slots=True, frozen=True)
class VariantSummary:  # pylint: disable=too-many-instance-attributes
    """Aggregates of one variant over its trials.

    Attributes
    ----------
    variant: :class:`Variant`
        The variant.
    trials: :class:`int`
        Number of trials.
    mean_accuracy: :class:`float`
        Mean test accuracy.
    stderr_accuracy: :class:`float`
        Its standard error.
    best_accuracy: :class:`float`
        Accuracy of the selected trial.
    best_trial: :class:`int`
        Index of the selected trial.
    mean_capacity: :class:`float`
        Mean total capacity.
    stderr_capacity: :class:`float`
        Its standard error.
    mean_cosine: :class:`float`
        Mean pairwise cosine similarity.
    stderr_cosine: :class:`float`
        Its standard error.
    nnz: :class:`int`
        Non-zero weights of the selected model.
    relative_improvement: :class:`float` | :class:`None`
        Relative mean accuracy gain over the dense baseline.
    p_value: :class:`float` | :class:`None`
        Welch's p-value against the dense accuracies.
    """

    variant: Variant
    trials: int
    mean_accuracy: float
    stderr_accuracy: float
    best_accuracy: float
    best_trial: int
    mean_capacity: float
    stderr_capacity: float
    mean_cosine: float
    stderr_cosine: float
    nnz: int
    relative_improvement: float | None
    p_value: float | None


@dataclass(slots=True)
class ExperimentResult:
    """Rows and aggregates of a ``run``.

    Attributes
    ----------
    rows: :class:`list` [:class:`ExperimentRow`]
        One row per variant and trial.
    summaries: :class:`list` [:class:`VariantSummary`]
        One summary per variant, computed from `rows` only.
    """

    rows: list[ExperimentRow]
    summaries: list[VariantSummary]

    def summary(self, variant: Variant) -> VariantSummary:
        """Returns the summary of `variant`."""
        return next(s for s in self.summaries if s.variant is variant)


def _atomic_write(path: Path, text: str) -> None:
    temporary = path.with_name(f".{path.name}.tmp")
    temporary.write_text(text, encoding="utf-8", newline="")
    os.replace(temporary, path)


def _dump_json(data: dict) -> str:
    return json.dumps(humps.camelize(data), indent=2, sort_keys=True) + "\n"


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(value) for value in row))
    return "\n".join(lines) + "\n"


def _csv_cell(value) -> str:
    match value:
        case bool():
            return str(value).lower()
        case float():
            return repr(value)
        case Variant():
            return value.value
        case None:
            return ""
        case _:
            return str(value)


def cmd_gen_data(args: GenDataArguments) -> list[Path]:
    """Generates a DNF dataset and writes it as FPEE with a sidecar.

    Returns
    -------
    list[Path]
        The dataset and sidecar paths.
    """

    spec = DnfSpec(args.m, args.k)
    dataset = generate(args.n, spec, args.seed)
    jitter_seed = args.seed + _JITTER_STREAM if args.jitter else None
    labeled = dataset.to_labeled(jitter_seed)

    path = Path(args.output or f"dnf_m{args.m}_k{args.k}_s{args.seed}.fpee")
    path.parent.mkdir(parents=True, exist_ok=True)
    save_fpee(labeled, path)
    counts = np.bincount(dataset.construction, minlength=3)
    sidecar = save_sidecar(
        path,
        {
            "schema_version": RESULTS_SCHEMA_VERSION,
            "generator": "dnf",
            "m": args.m,
            "k": args.k,
            "num_clauses": spec.num_clauses,
            "n": args.n,
            "seed": args.seed,
            "jitter": args.jitter,
            "jitter_seed": jitter_seed,
            "positives": int(counts[0]),
            "flip_negatives": int(counts[1]),
            "random_negatives": int(counts[2]),
        },
    )
    print(f"Wrote {path} and {sidecar}")
    return [path, sidecar]


def load_task(config: ExperimentConfig) -> tuple[LabeledMatrixDataset, LabeledMatrixDataset]:
    """Loads or generates the training and test sets of `config`."""

    task = config.task
    match task.kind:
        case TaskKind.DNF:
            spec = DnfSpec(task.m, task.k)
            train_set, test_set = generate_train_test(task.n_train, task.n_test, spec, config.seed)
            if task.jitter:
                return (
                    train_set.to_labeled(config.seed + _JITTER_STREAM),
                    test_set.to_labeled(config.seed + 1 + _JITTER_STREAM),
                )
            return train_set.to_labeled(), test_set.to_labeled()
        case TaskKind.IDX:
            return (
                load_idx(task.train_images, task.train_labels, task.class_count),
                load_idx(task.test_images, task.test_labels, task.class_count),
            )
        case TaskKind.FPEE:
            return load_fpee(task.train_path), load_fpee(task.test_path)
        case _:
            return (
                load_csv(task.train_path, task.class_count),
                load_csv(task.test_path, task.class_count),
            )


def _partition_strategy(config: ExperimentConfig, kind: PartitionKind, seed: int) -> PartitionStrategy:
    expansion = config.expansion
    return PartitionStrategy(
        kind=kind,
        seed=seed,
        clause_size=config.task.k,
        gram=GramClusterParams(expansion.num_clusters, expansion.linkage),
    )


def _variants(config: ExperimentConfig) -> list[tuple[Variant, PartitionKind | None]]:
    variants = [(Variant.DENSE, None)]
    if config.expansion is not None:
        variants += [(Variant.from_partition(kind), kind) for kind in config.expansion.strategies]
    return variants


class _ModelFactory:  # pylint: disable=too-few-public-methods
    """Builds the starting model of a variant's trial.

    Pretrained dense models are cached by initialization seed, so
    variants sharing an initialization share the pretraining too.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        train_set: LabeledMatrixDataset,
    ) -> None:
        self._config = config
        self._train_set = train_set
        outputs = 1 if train_set.class_count == 2 else train_set.class_count
        self._dims = [train_set.d, *config.model.hidden, outputs]
        self._options = ModelOptions(
            bias=config.model.bias,
            layer_norm=config.model.layer_norm,
            output_kind=OutputKind.BINARY if outputs == 1 else OutputKind.MULTICLASS,
        )
        self._pretrained: dict[int, MlpModel] = {}

    def init_seed(self, seed: int, variant_index: int) -> int:
        """Returns the initialization seed of a variant's trial."""
        if self._config.share_init_seed:
            return seed
        return seed + _VARIANT_SEED_STRIDE * variant_index

    def dense(self, seed: int) -> MlpModel:
        """Returns a fresh dense model."""
        return init_model(self._dims, seed, self._options)

    def expanded(self, kind: PartitionKind, init_seed: int, seed: int) -> MlpModel:
        """Returns the pretrained dense model expanded by `kind`."""

        config = self._config
        if init_seed not in self._pretrained:
            model = self.dense(init_seed)
            if config.pretrain_epochs:
                pretrain_cfg = replace(
                    config.train, epochs=config.pretrain_epochs, seed=seed, rewire=None
                )
                model, _ = train(model, self._train_set, pretrain_cfg)
            self._pretrained[init_seed] = model
        plan = ExpansionPlan(
            alpha=config.expansion.alpha,
            strategy=_partition_strategy(config, kind, seed),
            layers_to_expand=config.expansion.layers_to_expand,
        )
        return fpe_expand_model(self._pretrained[init_seed], plan)


def _clause_size(config: ExperimentConfig, d: int) -> int | None:
    k = config.task.k
    return k if k and d % k == 0 else None


def cmd_run(config: ExperimentConfig) -> ExperimentResult:  # pylint: disable=too-many-locals
    """Runs every variant of `config` and writes the result files.

    The dense baseline trains for ``pretrain_epochs + train.epochs``
    epochs; expanded variants pretrain, expand and train for
    ``train.epochs`` more. Outputs in ``output_dir``: ``trials.csv``,
    ``aggregate.json``, ``events.jsonl`` and ``models/<variant>.fpem``.
    """

    config.validate()
    out = Path(config.output_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    train_set, test_set = load_task(config)
    factory = _ModelFactory(config, train_set)
    clause_size = _clause_size(config, train_set.d)
    _log.info(
        "running %s on %s: %d train / %d test rows",
        [v.value for v, _ in _variants(config)],
        train_set.source,
        train_set.n,
        test_set.n,
    )

    rows: list[ExperimentRow] = []
    with (out / "events.jsonl").open("w", encoding="utf-8") as stream:
        for index, (variant, kind) in enumerate(_variants(config)):
            events = JsonLinesEvents(stream, variant=variant.value)
            if kind is None:
                cfg = replace(
                    config.train,
                    epochs=config.pretrain_epochs + config.train.epochs,
                    rewire=None,
                )

                def make_model(seed: int, index=index) -> MlpModel:
                    return factory.dense(factory.init_seed(seed, index))

            else:
                cfg = config.train

                def make_model(seed: int, index=index, kind=kind) -> MlpModel:
                    return factory.expanded(kind, factory.init_seed(seed, index), seed)

            outcome = run_trials(make_model, train_set, cfg, test_set, events)
            best = outcome.best_trial
            save_model(outcome.best_model, out / "models" / f"{variant.value}.fpem")
            for record, model in zip(outcome.trials, outcome.models):
                report = metrics_report(model, record.accuracy, clause_size)
                rows.append(
                    ExperimentRow(
                        variant=variant,
                        trial=record.trial,
                        seed=record.seed,
                        init_seed=factory.init_seed(record.seed, index),
                        accuracy=record.accuracy,
                        nnz=weight_nonzero_count(model),
                        nonzero_params=nonzero_param_count(model),
                        total_capacity=report.total_capacity,
                        mean_cosine=report.mean_cosine,
                        accuracy_per_parameter=report.accuracy_per_parameter,
                        best=record.trial == best,
                    )
                )
            print(
                f"{variant.value}: best accuracy {outcome.best_accuracy:.4f} (trial {best})"
            )

    result = ExperimentResult(rows, summarize(rows))
    write_result(result, config, out)
    return result


def summarize(rows: list[ExperimentRow]) -> list[VariantSummary]:
    """Aggregates per-trial rows by variant, in first-seen order."""

    variants = list(dict.fromkeys(row.variant for row in rows))
    dense = [row.accuracy for row in rows if row.variant is Variant.DENSE]
    dense_mean = float(np.mean(dense)) if dense else None
    summaries = []
    for variant in variants:
        group = [row for row in rows if row.variant is variant]
        accuracies = [row.accuracy for row in group]
        best = next(row for row in group if row.best)
        mean_acc, se_acc = mean_stderr(accuracies)
        mean_cap, se_cap = mean_stderr([row.total_capacity for row in group])
        mean_cos, se_cos = mean_stderr([row.mean_cosine for row in group])

        improvement, p_value = None, None
        if variant is not Variant.DENSE and dense_mean:
            improvement = relative_improvement(mean_acc, dense_mean)
            try:
                _, p_value = welch_t_test(accuracies, dense)
            except InputError:
                p_value = None

        summaries.append(
            VariantSummary(
                variant=variant,
                trials=len(group),
                mean_accuracy=mean_acc,
                stderr_accuracy=se_acc,
                best_accuracy=best.accuracy,
                best_trial=best.trial,
                mean_capacity=mean_cap,
                stderr_capacity=se_cap,
                mean_cosine=mean_cos,
                stderr_cosine=se_cos,
                nnz=best.nnz,
                relative_improvement=improvement,
                p_value=p_value,
            )
        )
    return summaries


def write_result(result: ExperimentResult, config: ExperimentConfig, out: Path) -> None:
    """Writes ``trials.csv`` and ``aggregate.json`` atomically."""

    header = ["schema_version", *(f.name for f in fields(ExperimentRow))]
    _atomic_write(
        out / "trials.csv",
        _csv_text(
            header,
            (
                [RESULTS_SCHEMA_VERSION, *(getattr(row, name) for name in header[1:])]
                for row in result.rows
            ),
        ),
    )
    aggregate = {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "config": humps.decamelize(config.to_json()),
        "variants": [
            {f.name: _json_value(getattr(s, f.name)) for f in fields(VariantSummary)}
            for s in result.summaries
        ],
    }
    _atomic_write(out / "aggregate.json", _dump_json(aggregate))


def _json_value(value):
    return value.value if isinstance(value, Variant) else value


def _run_cell(payload: tuple[dict, tuple[int, int, int]]) -> None:
    config_json, cell = payload
    config = ExperimentConfig.from_json(config_json).for_cell(*cell)
    cmd_run(config)


def cmd_sweep(config: ExperimentConfig, workers: int = 1) -> Path:
    """Runs every sweep cell not yet completed and writes the sweep tables.

    A cell counts as completed when its ``aggregate.json`` exists.
    Returns the path of the long-format CSV.
    """

    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = config.sweep.cells()
    pending = [
        cell
        for cell in cells
        if not (Path(config.for_cell(*cell).output_dir) / "aggregate.json").exists()
    ]
    _log.info("sweep: %d cells, %d already complete", len(cells), len(cells) - len(pending))

    base = replace(config, sweep=None).to_json()
    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_run_cell, [(base, cell) for cell in pending]))
    else:
        for cell in pending:
            _run_cell((base, cell))

    long_rows = []
    for hidden, clauses, alpha in cells:
        path = Path(config.for_cell(hidden, clauses, alpha).output_dir) / "aggregate.json"
        aggregate = humps.decamelize(json.loads(path.read_text(encoding="utf-8")))
        for summary in aggregate["variants"]:
            long_rows.append(
                [
                    RESULTS_SCHEMA_VERSION,
                    hidden,
                    clauses,
                    alpha,
                    summary["variant"],
                    summary["mean_accuracy"],
                    summary["stderr_accuracy"],
                    summary["relative_improvement"],
                    summary["p_value"],
                    summary["mean_capacity"],
                    summary["mean_cosine"],
                    summary["nnz"],
                ]
            )

    long_path = out / "sweep_long.csv"
    _atomic_write(
        long_path,
        _csv_text(
            [
                "schema_version",
                "hidden",
                "clauses",
                "alpha",
                "variant",
                "mean_accuracy",
                "stderr_accuracy",
                "relative_improvement",
                "p_value",
                "mean_capacity",
                "mean_cosine",
                "nnz",
            ],
            long_rows,
        ),
    )
    _atomic_write(out / "sweep_pivot.csv", _pivot(long_rows, config))
    print(f"Wrote {long_path} and {out / 'sweep_pivot.csv'}")
    return long_path


def _pivot(long_rows: list[list], config: ExperimentConfig) -> str:
    """Relative improvement with one row per (alpha, variant, hidden) and
    one column per clause count."""

    clauses = list(config.sweep.clauses)
    table: dict[tuple, dict[int, float | None]] = {}
    for _, hidden, clause_count, alpha, variant, _, _, improvement, *_ in long_rows:
        if variant != Variant.DENSE.value:
            table.setdefault((alpha, variant, hidden), {})[clause_count] = improvement
    header = ["schema_version", "alpha", "variant", "hidden", *(f"clauses_{c}" for c in clauses)]
    rows = [
        [RESULTS_SCHEMA_VERSION, alpha, variant, hidden, *(values.get(c) for c in clauses)]
        for (alpha, variant, hidden), values in table.items()
    ]
    return _csv_text(header, rows)


def cmd_theory(args: TheoryArguments) -> list:
    """Prints the theory table of `args`; returns its rows."""

    clauses = args.clauses if args.clauses is not None else args.m // max(1, args.k)
    params = TheoryParams(
        m=args.m,
        k=args.k,
        num_clauses=clauses,
        r=args.r,
        alpha=args.alpha,
        d=args.d,
        epsilon=args.epsilon,
    )
    rows = theory_table(params, args.mc_trials, args.seed)

    def show(value: float | None) -> str:
        return "-" if value is None else f"{value:.6g}"

    print(
        f"m={args.m} k={args.k} clauses={clauses} r={args.r} "
        f"alpha={args.alpha} d={params.degree}"
    )
    print(f"{'quantity':<36}{'exact':>14}{'approx':>14}{'monte carlo':>14}{'stderr':>14}")
    for row in rows:
        print(
            f"{row.quantity:<36}{show(row.exact):>14}{show(row.approx):>14}"
            f"{show(row.empirical):>14}{show(row.stderr):>14}"
        )
    return rows


def cmd_metrics(args: MetricsArguments) -> Path:
    """Writes ``<name>.metrics.json``, ``<name>.gram.csv`` and
    ``<name>.mask.csv`` for a checkpoint; returns the report path."""

    model = load_model(args.model)
    report = metrics_report(model, args.accuracy, args.clause_size)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.model).stem

    report_path = out / f"{stem}.metrics.json"
    _atomic_write(report_path, json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    _atomic_write(
        out / f"{stem}.gram.csv",
        _csv_text(
            [f"f{i}" for i in range(report.gram.shape[1])],
            (row.tolist() for row in report.gram),
        ),
    )
    _atomic_write(
        out / f"{stem}.mask.csv",
        _csv_text(
            [f"f{i}" for i in range(report.mask.shape[1])],
            (row.astype(int).tolist() for row in report.mask),
        ),
    )
    print(f"total capacity {report.total_capacity:.4f}, mean cosine {report.mean_cosine:.4f}")
    print(f"Wrote {report_path}")
    return report_path


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Runs the command line interface; returns the exit code."""

    args = get_args(argv)
    _configure_logging(args.verbose)

    try:
        match args:
            case GenDataArguments():
                cmd_gen_data(args)
            case RunArguments(command="run"):
                config = load_config(args.config).with_overrides(**_overrides(args))
                cmd_run(config)
            case RunArguments():
                config = load_config(args.config).with_overrides(**_overrides(args))
                cmd_sweep(config, args.workers)
            case TheoryArguments():
                cmd_theory(args)
            case MetricsArguments():
                cmd_metrics(args)
    except FpeError as e:
        print(f"Error: {e}", file=sys.stderr)
        return int(e.exit_code)
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return int(ExitCode.CONFIG_ERROR)

    return int(ExitCode.SUCCESS)


def _overrides(args: RunArguments) -> dict:
    return {
        "seed": args.seed,
        "trials": args.trials,
        "epochs": args.epochs,
        "pretrain_epochs": args.pretrain_epochs,
        "output_dir": args.output_dir,
    }
