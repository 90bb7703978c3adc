"""This module provides the command line argument parser.

Functions
---------
get_args
    Parses the command line arguments.

Classes
-------
GenDataArguments
    Arguments of the ``gen-data`` command.
RunArguments
    Arguments of the ``run`` and ``sweep`` commands.
TheoryArguments
    Arguments of the ``theory`` command.
MetricsArguments
    Arguments of the ``metrics`` command.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Sequence, TypeAlias

from .enums import ExitCode

__all__ = (
    "GenDataArguments",
    "RunArguments",
    "TheoryArguments",
    "MetricsArguments",
    "Arguments",
    "get_args",
)


@dataclass(slots=True, frozen=True)
class GenDataArguments:
    """Represents the arguments of ``gen-data``.

    Attributes
    ----------
    m: :class:`int`
        The number of literals.
    k: :class:`int`
        The clause size.
    n: :class:`int`
        The number of rows.
    seed: :class:`int`
        The generation seed.
    jitter: :class:`bool`
        Whether to jitter the inputs.
    output: :class:`str` | :class:`None`
        The FPEE file to write.
    verbose: :class:`bool`
        Whether to log at debug level.
    """

    m: int
    k: int
    n: int
    seed: int
    jitter: bool
    output: str | None
    verbose: bool = False


@dataclass(slots=True, frozen=True)
class RunArguments:  # pylint: disable=too-many-instance-attributes
    """Represents the arguments of ``run`` and ``sweep``.

    Attributes
    ----------
    command: :class:`str`
        ``run`` or ``sweep``.
    config: :class:`str`
        The experiment configuration file.
    seed: :class:`int` | :class:`None`
        Overrides the configured seed.
    trials: :class:`int` | :class:`None`
        Overrides the configured trial count.
    epochs: :class:`int` | :class:`None`
        Overrides the configured epochs after expansion.
    pretrain_epochs: :class:`int` | :class:`None`
        Overrides the configured pretraining epochs.
    output_dir: :class:`str` | :class:`None`
        Overrides the configured output directory.
    workers: :class:`int`
        Worker processes for sweep cells.
    verbose: :class:`bool`
        Whether to log at debug level.
    """

    command: str
    config: str
    seed: int | None = None
    trials: int | None = None
    epochs: int | None = None
    pretrain_epochs: int | None = None
    output_dir: str | None = None
    workers: int = 1
    verbose: bool = False


@dataclass(slots=True, frozen=True)
class TheoryArguments:  # pylint: disable=too-many-instance-attributes
    """Represents the arguments of ``theory``.

    Attributes
    ----------
    m: :class:`int`
        The number of literals.
    k: :class:`int`
        The clause size.
    alpha: :class:`int`
        The expansion factor.
    r: :class:`int`
        The dense neuron count.
    clauses: :class:`int` | :class:`None`
        The number of clauses; ``m / k`` when omitted.
    d: :class:`int` | :class:`None`
        The support size; ``m / alpha`` when omitted.
    epsilon: :class:`float` | :class:`None`
        Adds the minimum neuron count for this tolerance.
    mc_trials: :class:`int`
        Monte-Carlo networks; 0 skips sampling.
    seed: :class:`int`
        The Monte-Carlo seed.
    verbose: :class:`bool`
        Whether to log at debug level.
    """

    m: int
    k: int
    alpha: int
    r: int
    clauses: int | None = None
    d: int | None = None
    epsilon: float | None = None
    mc_trials: int = 0
    seed: int = 0
    verbose: bool = False


@dataclass(slots=True, frozen=True)
class MetricsArguments:
    """Represents the arguments of ``metrics``.

    Attributes
    ----------
    model: :class:`str`
        The checkpoint to analyse.
    output_dir: :class:`str`
        Where the report files are written.
    clause_size: :class:`int` | :class:`None`
        Adds per-clause capacities.
    accuracy: :class:`float` | :class:`None`
        Adds accuracy per parameter.
    verbose: :class:`bool`
        Whether to log at debug level.
    """

    model: str
    output_dir: str
    clause_size: int | None = None
    accuracy: float | None = None
    verbose: bool = False


Arguments: TypeAlias = GenDataArguments | RunArguments | TheoryArguments | MetricsArguments


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpe", description="Fixed parameter expansion experiments"
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="Log at debug level"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-data", help="Generate a DNF dataset as FPEE")
    gen.add_argument("--m", type=int, required=True, help="Number of literals (required)")
    gen.add_argument("--k", type=int, required=True, help="Clause size (required)")
    gen.add_argument("--n", type=int, required=True, help="Number of rows (required)")
    gen.add_argument("--seed", type=int, default=0, help="Generation seed (default: 0)")
    gen.add_argument("--jitter", action="store_true", help="Jitter the inputs")
    gen.add_argument(
        "-o",
        "--output",
        type=str,
        default=None,
        help="Output file (default: dnf_m<M>_k<K>_s<SEED>.fpee)",
    )

    for name, help_text in (
        ("run", "Train the dense baseline and the expanded variants"),
        ("sweep", "Run every cell of the configured sweep"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("config", type=str, help="Experiment configuration (JSON)")
        sub.add_argument("--seed", type=int, default=None, help="Override the seed")
        sub.add_argument("--trials", type=int, default=None, help="Override the trials")
        sub.add_argument("--epochs", type=int, default=None, help="Override the epochs")
        sub.add_argument(
            "--pretrain-epochs", type=int, default=None, help="Override the pretraining epochs"
        )
        sub.add_argument(
            "--output-dir", type=str, default=None, help="Override the output directory"
        )
        if name == "sweep":
            sub.add_argument(
                "--workers", type=int, default=1, help="Worker processes (default: 1)"
            )

    theory = commands.add_parser("theory", help="Print coverage and collision bounds")
    theory.add_argument("--m", type=int, required=True, help="Number of literals (required)")
    theory.add_argument("--k", type=int, required=True, help="Clause size (required)")
    theory.add_argument("--alpha", type=int, required=True, help="Expansion factor (required)")
    theory.add_argument("--r", type=int, required=True, help="Dense neurons (required)")
    theory.add_argument("--clauses", type=int, default=None, help="Clauses (default: m / k)")
    theory.add_argument("--d", type=int, default=None, help="Support size (default: m / alpha)")
    theory.add_argument("--epsilon", type=float, default=None, help="Coverage tolerance")
    theory.add_argument(
        "--mc-trials", type=int, default=0, help="Monte-Carlo networks (default: 0)"
    )
    theory.add_argument("--seed", type=int, default=0, help="Monte-Carlo seed (default: 0)")

    metrics = commands.add_parser("metrics", help="Report interference metrics of a checkpoint")
    metrics.add_argument("model", type=str, help="Model checkpoint")
    metrics.add_argument(
        "--output-dir", type=str, default=".", help="Report directory (default: .)"
    )
    metrics.add_argument("--clause-size", type=int, default=None, help="Clause size")
    metrics.add_argument("--accuracy", type=float, default=None, help="Known test accuracy")

    return parser


def get_args(argv: Sequence[str] | None = None) -> Arguments:
    """Parses the command line arguments.

    Parameters
    ----------
    argv: :class:`typing.Sequence` [:class:`str`] | :class:`None`
        The arguments; ``sys.argv[1:]`` when omitted.

    Returns
    -------
    Arguments
        The parsed arguments of the chosen command.
    """

    parser = _build_parser()

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        if e.code == 0:
            raise
        parser.print_help()
        sys.exit(ExitCode.CONFIG_ERROR)

    match args.command:
        case "gen-data":
            return GenDataArguments(
                m=args.m,
                k=args.k,
                n=args.n,
                seed=args.seed,
                jitter=args.jitter,
                output=args.output,
                verbose=args.verbose,
            )
        case "run" | "sweep":
            return RunArguments(
                command=args.command,
                config=args.config,
                seed=args.seed,
                trials=args.trials,
                epochs=args.epochs,
                pretrain_epochs=args.pretrain_epochs,
                output_dir=args.output_dir,
                workers=getattr(args, "workers", 1),
                verbose=args.verbose,
            )
        case "theory":
            return TheoryArguments(
                m=args.m,
                k=args.k,
                alpha=args.alpha,
                r=args.r,
                clauses=args.clauses,
                d=args.d,
                epsilon=args.epsilon,
                mc_trials=args.mc_trials,
                seed=args.seed,
                verbose=args.verbose,
            )
        case _:
            return MetricsArguments(
                model=args.model,
                output_dir=args.output_dir,
                clause_size=args.clause_size,
                accuracy=args.accuracy,
                verbose=args.verbose,
            )
