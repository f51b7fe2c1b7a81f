# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import dataclasses
import logging
import math
import time
import typing
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import tlz

from ._boost import (
    FINAL_LAMBDA_FLOOR,
    BoostConfig,
    CheckpointRecord,
    EnsembleModel,
    SampleWeights,
    budget_allows,
    checkpoint_weight,
    combine,
    exp_loss,
    init_weights,
    loss_bound,
    normalizer,
    update_weights,
    weighted_error,
)
from ._data import Dataset
from ._display import display_options as _display_opts
from ._errors import TrainingDivergedError, UndefinedCorrelationError
from ._learner import LearnerConfig, TrainState, predict_labels, predict_onehot, train_segment
from ._metrics import correlation_matrix, error_rate, off_diagonal_mean

logger = logging.getLogger(__name__)

METRIC_COLUMNS = [
    "checkpoint",
    "step",
    "error",
    "lambda",
    "z",
    "lambda_sum",
    "bound",
    "exp_loss",
    "train_error",
    "test_error",
    "final",
]


@dataclass
class RunRecord:
    """
    Everything a training run produced apart from the parameters themselves.

    ``metrics`` holds one row per saved checkpoint describing the ensemble of every member up to and
    including it. ``z_history`` holds the normalisers of the checkpoints that updated the sample
    weights (every saved member except the final model). ``timings`` lists wall-clock seconds per
    training segment and is not part of equality.
    """

    method: str
    seed: int
    config: dict[str, typing.Any]
    checkpoints: list[CheckpointRecord] = field(default_factory=list)
    metrics: list[dict[str, typing.Any]] = field(default_factory=list)
    z_history: list[float] = field(default_factory=list)
    rejected: list[dict[str, typing.Any]] = field(default_factory=list)
    sample_weights: SampleWeights | None = None
    timings: list[dict[str, typing.Any]] = field(default_factory=list, compare=False)

    def __len__(self) -> int:
        return len(self.checkpoints)

    def __repr__(self) -> str:
        return (
            f"<RunRecord method={self.method!r} seed={self.seed} with {len(self)} checkpoint(s), "
            f"{len(self.rejected)} rejected>"
        )

    def _repr_html_(self) -> str:
        return (
            f"<p><strong>{self.method} run (seed {self.seed}) with {len(self)} checkpoint(s)"
            f"</strong>:</p> {_display_opts.html_table(self.table)}"
        )

    def _ipython_display_(self):
        if _display_opts.is_notebook:
            from IPython.display import HTML, display

            display(HTML(self._repr_html_()))
        else:
            print(repr(self))
            print(_display_opts.format_table(self.table))

    @property
    def table(self) -> pd.DataFrame:
        """
        Per-checkpoint metrics with the cumulative training seconds at each checkpoint.
        """
        table = pd.DataFrame(self.metrics, columns=METRIC_COLUMNS)
        if self.timings and not table.empty:
            timings = pd.DataFrame(self.timings, columns=["step", "seconds"])
            table["seconds"] = [
                float(timings.loc[timings["step"] <= step, "seconds"].sum()) for step in table["step"]
            ]
        return table

    @property
    def lambdas(self) -> list[float]:
        return [c.lambda_ for c in self.checkpoints]

    def ensemble(self) -> EnsembleModel:
        return EnsembleModel(self.checkpoints)


def _plain(value: typing.Any) -> typing.Any:
    """
    Convert dataclasses and tuples to dicts and lists so the value can be written as YAML.
    """
    if dataclasses.is_dataclass(value):
        value = dataclasses.asdict(value)
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_plain(v) for v in value]
    return value


class _RunningEnsemble:
    """
    Tracks the ensemble of all checkpoints saved so far on the training and test sets.
    """

    def __init__(self, train: Dataset, test: Dataset = None):
        self._train = train
        self._test = test
        self._lambdas = []
        self._train_onehots = []
        self._test_onehots = []

    def add(self, record: CheckpointRecord) -> dict[str, typing.Any]:
        self._lambdas.append(record.lambda_)
        self._train_onehots.append(predict_onehot(record.params, self._train.features))
        train_scores = combine(self._train_onehots, self._lambdas)
        true_class = train_scores[np.arange(self._train.n), self._train.labels]
        row = {
            "lambda_sum": math.fsum(self._lambdas),
            "exp_loss": exp_loss(np.clip(true_class, 0.0, 1.0)),
            "train_error": error_rate(train_scores, self._train.labels),
            "test_error": None,
        }
        if self._test is not None:
            self._test_onehots.append(predict_onehot(record.params, self._test.features))
            test_scores = combine(self._test_onehots, self._lambdas)
            row["test_error"] = error_rate(test_scores, self._test.labels)
        return row


def _train_timed(
    state: TrainState,
    dataset: Dataset,
    weights: np.ndarray,
    iterations: int,
    learner: LearnerConfig,
    record: RunRecord,
) -> TrainState:
    start = time.perf_counter()
    state = train_segment(
        state,
        dataset,
        weights,
        iterations,
        learner.schedule(dataset.n),
        batch_size=learner.batch_size,
    )
    seconds = time.perf_counter() - start
    record.timings.append({"step": state.step, "seconds": seconds})
    logger.debug("Segment of %d iterations ended at step %d in %.3fs", iterations, state.step, seconds)
    return state


def _save_member(
    record: RunRecord,
    tracker: _RunningEnsemble,
    checkpoint: CheckpointRecord,
    final: bool,
) -> None:
    record.checkpoints.append(checkpoint)
    row = tracker.add(checkpoint)
    row = tlz.merge(
        {
            "checkpoint": len(record.checkpoints),
            "step": checkpoint.step,
            "error": checkpoint.error,
            "lambda": checkpoint.lambda_,
            "z": checkpoint.z,
            "bound": loss_bound([c.z for c in record.checkpoints]),
            "final": final,
        },
        row,
    )
    record.metrics.append({column: row[column] for column in METRIC_COLUMNS})
    logger.info(
        "Saved %scheckpoint %d at step %d: error=%.6g lambda=%.6g z=%.6g lambda_sum=%.6g bound=%.6g",
        "final " if final else "",
        row["checkpoint"],
        row["step"],
        row["error"],
        row["lambda"],
        row["z"],
        row["lambda_sum"],
        row["bound"],
    )


def _prepare(
    dataset: Dataset,
    config: BoostConfig | None,
    learner: LearnerConfig | None,
    seed: int | None,
) -> tuple[BoostConfig, LearnerConfig, int]:
    config = config or BoostConfig()
    learner = learner or LearnerConfig()
    seed = config.seed if seed is None else int(seed)
    config = dataclasses.replace(config, seed=seed).resolved(dataset.n, dataset.k)
    return config, learner, seed


def _new_record(method: str, seed: int, config: BoostConfig, learner: LearnerConfig) -> RunRecord:
    return RunRecord(
        method=method,
        seed=seed,
        config={"boost": _plain(config), "learner": _plain(learner)},
    )


def run_cbnn(
    dataset: Dataset,
    config: BoostConfig = None,
    learner: LearnerConfig = None,
    seed: int = None,
    test: Dataset = None,
) -> tuple[EnsembleModel, RunRecord]:
    """
    Train one network while boosting over its checkpoints.

    Training alternates segments of ``checkpoint_interval`` iterations with a checkpoint evaluation:
    the weighted training error sets the checkpoint weight, checkpoints no better than chance are
    discarded, and saved ones shrink the weight of the samples they classify correctly. Checkpoints
    stop being saved once the weights (including ``lambda0``) reach ``1 / eta`` or too few iterations
    remain; the rest of the ``total_iterations`` budget trains the final model, which is always kept.

    Parameters
    ----------
    dataset: :py:class:`~checkpoint_boosting.Dataset`
        Training data.
    config: :py:class:`~checkpoint_boosting.BoostConfig`, optional
        Boosting hyperparameters.
    learner: :py:class:`~checkpoint_boosting.LearnerConfig`, optional
        Architecture and optimiser settings.
    seed: int, optional
        Overrides ``config.seed``.
    test: :py:class:`~checkpoint_boosting.Dataset`, optional
        Held-out data for the running-ensemble test error.

    Returns
    -------
    ensemble: :py:class:`~checkpoint_boosting.EnsembleModel`
        All saved checkpoints, or ``config.select`` of them chosen at equal intervals.
    record: :py:class:`RunRecord`
        Metadata, metrics and final sample weights of the run.

    Raises
    ------
    TrainingDivergedError
        If the learner diverges; ``err.record`` holds the run up to that point.
    """
    config, learner, seed = _prepare(dataset, config, learner, seed)
    record = _new_record("cbnn", seed, config, learner)
    tracker = _RunningEnsemble(dataset, test)
    total, interval = config.total_iterations, config.checkpoint_interval

    state = learner.init_state(dataset.d, dataset.k, seed)
    weights = init_weights(dataset.n)
    record.sample_weights = weights
    lambdas = []
    consumed = 0
    try:
        while total - consumed - interval > 0 and budget_allows([config.lambda0, *lambdas], config.eta):
            iterations = min(interval, total - consumed - interval)
            state = _train_timed(state, dataset, weights, iterations, learner, record)
            consumed += iterations

            correct = predict_labels(state.params, dataset.features) == dataset.labels
            error = weighted_error(correct, weights)
            weight = checkpoint_weight(error, dataset.k, config.error_floor)
            if weight.rejected:
                record.rejected.append({"step": state.step, "error": error})
                logger.info("Rejected checkpoint at step %d: error=%.6g", state.step, error)
                continue

            z = normalizer(error, config.eta, weight.value)
            weights, z_sum = update_weights(weights, correct, config.eta, weight.value)
            logger.debug(
                "Updated weights at step %d: z=%.12g (closed form %.12g), max weight %.6g",
                state.step,
                z_sum,
                z,
                weights.values.max(),
            )
            record.sample_weights = weights
            record.z_history.append(z)
            lambdas.append(weight.value)
            _save_member(
                record,
                tracker,
                CheckpointRecord(state.params, weight.value, error, z, state.step, seed),
                final=False,
            )

        state = _train_timed(state, dataset, weights, max(interval, total - consumed), learner, record)
    except TrainingDivergedError as err:
        err.record = record
        raise

    correct = predict_labels(state.params, dataset.features) == dataset.labels
    error = weighted_error(correct, weights)
    weight = checkpoint_weight(error, dataset.k, config.error_floor)
    final_lambda = weight.value
    if weight.rejected:
        warnings.warn(
            f"The final model has weighted error {error:.6g} (lambda={weight.value:.6g} <= 0); it is "
            f"kept with weight {FINAL_LAMBDA_FLOOR}.",
            UserWarning,
            stacklevel=2,
        )
        final_lambda = FINAL_LAMBDA_FLOOR
    _save_member(
        record,
        tracker,
        CheckpointRecord(
            state.params, final_lambda, error, normalizer(error, config.eta, final_lambda), state.step, seed
        ),
        final=True,
    )

    ensemble = record.ensemble()
    if config.select is not None and config.select < len(ensemble):
        ensemble = select_checkpoints(record, config.select)
    return ensemble, record


def run_single(
    dataset: Dataset,
    config: BoostConfig = None,
    learner: LearnerConfig = None,
    seed: int = None,
    test: Dataset = None,
) -> tuple[EnsembleModel, RunRecord]:
    """
    Plain training for ``total_iterations`` iterations on uniform weights; an ensemble of one model.
    """
    config, learner, seed = _prepare(dataset, config, learner, seed)
    record = _new_record("single", seed, config, learner)
    tracker = _RunningEnsemble(dataset, test)
    weights = init_weights(dataset.n)
    record.sample_weights = weights

    state = learner.init_state(dataset.d, dataset.k, seed)
    try:
        state = _train_timed(state, dataset, weights, config.total_iterations, learner, record)
    except TrainingDivergedError as err:
        err.record = record
        raise

    correct = predict_labels(state.params, dataset.features) == dataset.labels
    error = weighted_error(correct, weights)
    _save_member(
        record,
        tracker,
        CheckpointRecord(state.params, 1.0, error, normalizer(error, config.eta, 1.0), state.step, seed),
        final=True,
    )
    return record.ensemble(), record


def run_horizontal_voting(
    dataset: Dataset,
    config: BoostConfig = None,
    learner: LearnerConfig = None,
    seed: int = None,
    test: Dataset = None,
) -> tuple[EnsembleModel, RunRecord]:
    """
    Plain training with a snapshot every ``checkpoint_interval`` iterations; the snapshots vote with
    equal weight and the sample weights stay uniform.
    """
    config, learner, seed = _prepare(dataset, config, learner, seed)
    record = _new_record("horizontal", seed, config, learner)
    tracker = _RunningEnsemble(dataset, test)
    total, interval = config.total_iterations, config.checkpoint_interval
    weights = init_weights(dataset.n)
    record.sample_weights = weights

    def snapshot(state: TrainState, final: bool) -> None:
        correct = predict_labels(state.params, dataset.features) == dataset.labels
        error = weighted_error(correct, weights)
        z = normalizer(error, config.eta, 1.0)
        if not final:
            record.z_history.append(z)
        _save_member(
            record, tracker, CheckpointRecord(state.params, 1.0, error, z, state.step, seed), final=final
        )

    state = learner.init_state(dataset.d, dataset.k, seed)
    consumed = 0
    try:
        while consumed + interval < total:
            state = _train_timed(state, dataset, weights, interval, learner, record)
            consumed += interval
            snapshot(state, final=False)
        state = _train_timed(state, dataset, weights, total - consumed, learner, record)
    except TrainingDivergedError as err:
        err.record = record
        raise
    snapshot(state, final=True)

    ensemble = record.ensemble()
    if config.select is not None and config.select < len(ensemble):
        ensemble = select_checkpoints(record, config.select)
    return ensemble, record


METHODS = {
    "cbnn": run_cbnn,
    "single": run_single,
    "horizontal": run_horizontal_voting,
}


def select_checkpoints(record: RunRecord | EnsembleModel, count: int) -> EnsembleModel:
    """
    Keep the final model plus ``count - 1`` earlier checkpoints spread at equal intervals.

    The earlier members are taken at indices ``floor(i * N / (count - 1))`` for ``i = 0 ..
    count - 2``, where N is the number of members before the final model; fractional positions round
    towards earlier checkpoints. Member weights are renormalised by the returned ensemble.

    Raises
    ------
    ValueError
        If ``count`` is below 1 or exceeds the number of saved checkpoints.
    """
    members = list(record.checkpoints)
    if count < 1:
        raise ValueError(f"count must be >= 1, received {count}.")
    if count > len(members):
        raise ValueError(f"count ({count}) exceeds the {len(members)} saved checkpoint(s).")
    earlier = len(members) - 1
    indices = [i * earlier // (count - 1) for i in range(count - 1)] if count > 1 else []
    return EnsembleModel([members[i] for i in indices] + [members[-1]])


def _member_correlation(ensemble: EnsembleModel, features: np.ndarray) -> float:
    if len(ensemble) < 2:
        return float("nan")
    try:
        return off_diagonal_mean(correlation_matrix(list(ensemble.member_probabilities(features))))
    except UndefinedCorrelationError:
        return float("nan")


def compare_methods(
    train: Dataset,
    test: Dataset,
    methods: typing.Sequence[str] = ("cbnn", "single", "horizontal"),
    seeds: typing.Iterable[int] = range(5),
    config: BoostConfig = None,
    learner: LearnerConfig = None,
) -> pd.DataFrame:
    """
    Run every method once per seed under the same configuration.

    Returns
    -------
    results: :py:class:`~pandas.DataFrame`
        One row per (seed, method) with the train and test error of the returned ensemble, its member
        count and the mean off-diagonal correlation of member softmax outputs on the test set (NaN for
        single-member ensembles).
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"Unknown method(s) {sorted(unknown)}; choose from {sorted(METHODS)}.")
    rows = []
    for seed in seeds:
        for method in methods:
            ensemble, _ = METHODS[method](train, config=config, learner=learner, seed=seed, test=test)
            rows.append(
                {
                    "seed": int(seed),
                    "method": method,
                    "members": len(ensemble),
                    "train_error": error_rate(ensemble.predict_proba(train.features), train.labels),
                    "test_error": error_rate(ensemble.predict_proba(test.features), test.labels),
                    "correlation": _member_correlation(ensemble, test.features),
                }
            )
            logger.info("Finished %s seed %s: test error %.6g", method, seed, rows[-1]["test_error"])
    return pd.DataFrame(rows)


def summarize_comparison(results: pd.DataFrame) -> pd.DataFrame:
    """
    Median, mean and standard deviation of the test error (and mean correlation) per method.
    """
    summary = results.groupby("method", sort=False).agg(
        runs=("seed", "count"),
        median_test_error=("test_error", "median"),
        mean_test_error=("test_error", "mean"),
        std_test_error=("test_error", "std"),
        mean_correlation=("correlation", "mean"),
    )
    return summary.reset_index()
