# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""
Command-line entry point: ``checkpoint-boost {train,eval,diagnose,compare}``.

Exit status is 0 on success, 1 for usage and configuration errors, 2 for data and storage errors
and 3 when training diverges. Results go to stdout and log messages to stderr.
"""

import argparse
import logging
import sys
import typing

import fsspec
import pandas as pd
import yaml

from . import __version__
from ._config import RunConfigDocument, merge_mappings, read_yaml_mapping
from ._data import Dataset
from ._display import display_options as _display_opts
from ._errors import (
    CheckpointBoostingError,
    ConfigError,
    DataFormatError,
    DegenerateBasisError,
    StorageError,
    TrainingDivergedError,
    UndefinedCorrelationError,
)
from ._metrics import (
    class_priors,
    correlation_matrix,
    error_rate,
    off_diagonal_mean,
    per_class_avg_weights,
    per_class_error,
    surface_grid,
    threshold_with_priors,
)
from ._persistence import load_run, save_run
from .core import METHODS, compare_methods, select_checkpoints, summarize_comparison

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s - %(message)s"

# flag destination -> (section, key); None as section means a top-level key
_OVERRIDES = {
    "method": (None, "method"),
    "seed": (None, "seed"),
    "output_dir": (None, "output_dir"),
    "dataset": ("data", "source"),
    "data_path": ("data", "path"),
    "labels_path": ("data", "labels_path"),
    "label_column": ("data", "label_column"),
    "n_per_class": ("data", "n_per_class"),
    "classes": ("data", "k"),
    "features": ("data", "d"),
    "spread": ("data", "spread"),
    "data_seed": ("data", "data_seed"),
    "test_fraction": ("data", "test_fraction"),
    "split_seed": ("data", "split_seed"),
    "oversample": ("data", "oversample"),
    "eta": ("boost", "eta"),
    "interval": ("boost", "checkpoint_interval"),
    "iterations": ("boost", "total_iterations"),
    "lambda0": ("boost", "lambda0"),
    "error_floor": ("boost", "error_floor"),
    "keep": ("boost", "select"),
    "hidden": ("learner", "hidden_sizes"),
    "l2": ("learner", "l2"),
    "batch_size": ("learner", "batch_size"),
    "lr": ("learner", "base_rate"),
    "decay_factor": ("learner", "decay_factor"),
    "warmup_epochs": ("learner", "warmup_epochs"),
    "imbalance_mu": ("imbalance", "mu"),
    "imbalance_rho": ("imbalance", "rho"),
    "imbalance_seed": ("imbalance", "seed"),
}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> typing.NoReturn:
        raise ConfigError(f"{self.prog}: {message}")


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("data")
    group.add_argument("--config", help="YAML run configuration; flags override its values.")
    group.add_argument("--dataset", choices=["blobs", "csv", "idx"], help="Data source kind.")
    group.add_argument("--data-path", help="CSV file, or IDX images file.")
    group.add_argument("--labels-path", help="IDX labels file.")
    group.add_argument("--label-column", type=int, help="Label column index of a CSV file.")
    group.add_argument("--n-per-class", type=int, help="Synthetic samples per class.")
    group.add_argument("--classes", type=int, help="Synthetic number of classes.")
    group.add_argument("--features", type=int, help="Synthetic number of features.")
    group.add_argument("--spread", type=float, help="Synthetic cluster standard deviation.")
    group.add_argument("--data-seed", type=int, help="Seed for synthetic data.")
    group.add_argument("--test-fraction", type=float, help="Fraction of samples held out.")
    group.add_argument("--split-seed", type=int, help="Seed for the train/test split.")
    group.add_argument(
        "--oversample",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Random minority oversampling of the training split.",
    )
    group.add_argument("--imbalance-mu", type=float, help="Fraction of classes made minority.")
    group.add_argument("--imbalance-rho", type=float, help="Majority to minority size ratio.")
    group.add_argument("--imbalance-seed", type=int, help="Seed for minority selection.")


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training")
    group.add_argument("--method", choices=sorted(METHODS), help="Training method.")
    group.add_argument("--seed", type=int, help="Initialisation and shuffling seed.")
    group.add_argument("--eta", type=float, help="Deviation rate.")
    group.add_argument("--interval", type=int, help="Iterations per checkpoint (t).")
    group.add_argument("--iterations", type=int, help="Total training iterations (T).")
    group.add_argument("--lambda0", type=float, help="Estimated weight of the final model.")
    group.add_argument("--error-floor", type=float, help="Clamp for zero weighted error.")
    group.add_argument("--keep", type=int, help="Members kept by equal-interval selection.")
    group.add_argument("--hidden", type=int, nargs="+", help="Hidden layer sizes.")
    group.add_argument("--l2", type=float, help="L2 regularisation strength.")
    group.add_argument("--batch-size", type=int, help="Mini-batch size.")
    group.add_argument("--lr", type=float, help="Base learning rate.")
    group.add_argument("--decay-factor", type=float, help="Learning-rate decay factor.")
    group.add_argument("--warmup-epochs", type=int, help="Linear warmup epochs.")


def build_arg_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="checkpoint-boost",
        description="Train and analyse checkpoint-boosted neural network ensembles.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log debug messages.")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Log warnings only.")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="Train one run and write its run directory.")
    _add_data_flags(train)
    _add_training_flags(train)
    train.add_argument("--output-dir", help="Run directory (default: $CBNN_OUTPUT_ROOT/<method>-seed<seed>).")
    train.set_defaults(handler=cmd_train)

    evaluate = commands.add_parser("eval", help="Evaluate a saved ensemble.")
    evaluate.add_argument("run_dir", help="Run directory written by 'train'.")
    _add_data_flags(evaluate)
    evaluate.add_argument("--split", choices=["train", "test"], default="test", help="Data split to evaluate.")
    evaluate.add_argument(
        "--select",
        help="Members kept by equal-interval selection, or 'all' (default: the run's boost.select, else all).",
    )
    evaluate.add_argument(
        "--threshold-priors", action="store_true", help="Divide ensemble scores by training-set class priors."
    )
    evaluate.add_argument("--per-class", action="store_true", help="Print the per-class error breakdown.")
    evaluate.set_defaults(handler=cmd_eval)

    diagnose = commands.add_parser("diagnose", help="Write diagnostic CSV files for a saved run.")
    diagnose.add_argument("run_dir", help="Run directory written by 'train'.")
    _add_data_flags(diagnose)
    diagnose.add_argument("--correlation", action="store_true", help="Pairwise member correlation matrix.")
    diagnose.add_argument("--class-weights", action="store_true", help="Average final sample weight per class.")
    diagnose.add_argument(
        "--surface", type=int, nargs=3, metavar=("P1", "P2", "P3"), help="Loss surface through three checkpoints (1-based)."
    )
    diagnose.add_argument("--resolution", type=int, default=21, help="Surface grid points per axis.")
    diagnose.add_argument("--out", help="Directory for the CSV files (default: <run_dir>/diagnostics).")
    diagnose.set_defaults(handler=cmd_diagnose)

    compare = commands.add_parser("compare", help="Compare methods over several seeds.")
    _add_data_flags(compare)
    _add_training_flags(compare)
    compare.add_argument("--methods", nargs="+", choices=sorted(METHODS), help="Methods to compare (default: all).")
    compare.add_argument("--seeds", type=int, default=5, help="Number of seeds, starting from --seed.")
    compare.add_argument("--out", help="CSV file for the per-run results.")
    compare.set_defaults(handler=cmd_compare)
    return parser


def _flag_overrides(args: argparse.Namespace) -> dict[str, typing.Any]:
    overrides = {}
    for dest, (section, key) in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if section is None:
            overrides[key] = value
        else:
            overrides.setdefault(section, {})[key] = value
    return overrides


def _document(args: argparse.Namespace, base: dict[str, typing.Any] = None) -> RunConfigDocument:
    """
    Defaults < stored run configuration < YAML file < command-line flags.
    """
    mapping = base or {}
    if getattr(args, "config", None):
        mapping = merge_mappings(mapping, read_yaml_mapping(args.config))
    return RunConfigDocument.from_mapping(merge_mappings(mapping, _flag_overrides(args)))


def _echo_config(document: RunConfigDocument) -> None:
    print("# configuration")
    print(yaml.safe_dump(document.to_mapping(), sort_keys=False).rstrip())


def _print_table(table: pd.DataFrame) -> None:
    print(_display_opts.format_table(table))


def _write_csv(table: pd.DataFrame, path: str) -> None:
    with fsspec.open(path, mode="wt") as fobj:
        table.to_csv(fobj, float_format="%.17g")
    logger.info("Wrote %s", path)


def _run_document(run_dir: str, args: argparse.Namespace) -> tuple[RunConfigDocument, typing.Any]:
    record = load_run(run_dir)
    document = _document(args, base=record.config.get("run"))
    return document, record


def cmd_train(args: argparse.Namespace) -> int:
    document = _document(args)
    _echo_config(document)
    train, test = document.prepare_data()
    logger.info("Training %s on %r, testing on %r", document.method, train, test)
    try:
        ensemble, record = METHODS[document.method](
            train, config=document.boost, learner=document.learner, seed=document.seed, test=test
        )
    except TrainingDivergedError as err:
        if err.record is not None:
            err.record.config["run"] = document.to_mapping()
            if err.record.checkpoints:
                save_run(err.record, document.run_dir)
        raise
    record.config["run"] = document.to_mapping()
    save_run(record, document.run_dir)

    _print_table(
        record.table[
            ["checkpoint", "step", "error", "lambda", "z", "lambda_sum", "train_error", "test_error", "bound", "exp_loss"]
        ]
    )
    print(f"members: {len(ensemble)}")
    print(f"rejected: {len(record.rejected)}")
    print(f"test_error: {error_rate(ensemble.predict_proba(test.features), test.labels):.8g}")
    print(f"run_dir: {document.run_dir}")
    return EXIT_OK


def _split(document: RunConfigDocument, which: str) -> tuple[Dataset, Dataset]:
    train, test = document.prepare_data()
    return train, (train if which == "train" else test)


def cmd_eval(args: argparse.Namespace) -> int:
    document, record = _run_document(args.run_dir, args)
    train, evaluated = _split(document, args.split)
    ensemble = record.ensemble()
    count = document.boost.select if args.select is None else args.select
    if count not in (None, "all"):
        try:
            count = int(count)
        except ValueError as err:
            raise ConfigError(f"--select must be an integer or 'all', received '{args.select}'.") from err
        if args.select is not None or count < len(ensemble):
            ensemble = select_checkpoints(record, count)

    scores = ensemble.predict_proba(evaluated.features)
    if args.threshold_priors:
        scores = threshold_with_priors(scores, class_priors(train.labels, train.k))
    print(f"members: {len(ensemble)}")
    print(f"steps: {[c.step for c in ensemble.checkpoints]}")
    print(f"error_rate: {error_rate(scores, evaluated.labels):.8g}")
    if args.per_class:
        _print_table(per_class_error(scores, evaluated.labels, evaluated.k).reset_index())
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    if not (args.correlation or args.class_weights or args.surface):
        raise ConfigError("Request at least one of --correlation, --class-weights or --surface.")
    document, record = _run_document(args.run_dir, args)
    out_dir = (args.out or f"{args.run_dir.rstrip('/')}/diagnostics").rstrip("/")
    n_members = len(record.checkpoints)
    if args.correlation and n_members < 2:
        raise ConfigError(f"Correlation needs at least 2 checkpoints; the run has {n_members}.")
    if args.surface and not all(1 <= p <= n_members for p in args.surface):
        raise ConfigError(f"Surface anchors must be checkpoint numbers in [1, {n_members}].")

    train, test = document.prepare_data()
    fs, root = fsspec.core.url_to_fs(out_dir)
    fs.makedirs(root, exist_ok=True)

    if args.correlation:
        members = record.ensemble().member_probabilities(test.features)
        matrix = correlation_matrix(list(members))
        _write_csv(matrix, f"{out_dir}/correlation.csv")
        print(f"mean_off_diagonal_correlation: {off_diagonal_mean(matrix):.8g}")
    if args.class_weights:
        if record.sample_weights is None or len(record.sample_weights) != train.n:
            raise DataFormatError(
                f"The run's sample weights do not match the {train.n}-sample training split."
            )
        averages = per_class_avg_weights(record.sample_weights, train.labels, train.k)
        minority = set(train.minority_classes.tolist())
        table = pd.DataFrame(
            {
                "count": train.class_counts,
                "avg_weight": averages,
                "minority": [c in minority for c in range(train.k)],
            },
            index=pd.RangeIndex(train.k, name="class"),
        )
        _write_csv(table, f"{out_dir}/class_weights.csv")
        _print_table(table.reset_index())
    if args.surface:
        p1, p2, p3 = (record.checkpoints[p - 1].params for p in args.surface)
        grid = surface_grid(p1, p2, p3, train, resolution=args.resolution)
        _write_csv(grid.to_frame().set_index(["x", "y"]), f"{out_dir}/surface.csv")
        _write_csv(grid.anchors, f"{out_dir}/anchors.csv")
        _print_table(grid.anchors.reset_index())
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    document = _document(args)
    _echo_config(document)
    train, test = document.prepare_data()
    if args.seeds < 1:
        raise ConfigError(f"--seeds must be >= 1, received {args.seeds}.")
    results = compare_methods(
        train,
        test,
        methods=args.methods or sorted(METHODS),
        seeds=range(document.seed, document.seed + args.seeds),
        config=document.boost,
        learner=document.learner,
    )
    _print_table(results)
    _print_table(summarize_comparison(results))
    if args.out:
        _write_csv(results.set_index(["seed", "method"]), args.out)
    return EXIT_OK


def main(argv: typing.Sequence[str] = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:
        return err.code or EXIT_OK

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)
    try:
        return args.handler(args)
    except TrainingDivergedError as err:
        logger.error("%s", err)
        return EXIT_DIVERGED
    except (DataFormatError, StorageError, DegenerateBasisError, UndefinedCorrelationError, OSError) as err:
        logger.error("%s", err)
        return EXIT_DATA
    except (CheckpointBoostingError, ValueError) as err:
        logger.error("%s", err)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
