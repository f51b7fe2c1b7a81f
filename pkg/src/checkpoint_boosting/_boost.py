# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""
Sample-weight boosting over checkpoints: weight state, checkpoint weighting, the budget rule,
ensemble combination and the exponential-loss bound. All arithmetic is float64.
"""

import logging
import math
import typing
from dataclasses import dataclass, replace

import numpy as np

from ._learner import MlpParams, forward, onehot_argmax, predict_onehot

SIMPLEX_TOLERANCE = 1e-12
DEFAULT_ERROR_FLOOR = 1e-6
FINAL_LAMBDA_FLOOR = 1e-12

logger = logging.getLogger(__name__)


class SampleWeights:
    """
    A probability vector over the training samples: every entry is > 0 and the entries sum to 1
    (within 1e-12).
    """

    __slots__ = ("_values",)

    def __init__(self, values: typing.Sequence[float]):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError(f"Sample weights must be a non-empty vector, received shape {values.shape}.")
        if not np.all(values > 0):
            raise ValueError("Every sample weight must be > 0.")
        total = math.fsum(values)
        if abs(total - 1.0) > SIMPLEX_TOLERANCE:
            raise ValueError(f"Sample weights must sum to 1, received a sum of {total!r}.")
        values.setflags(write=False)
        self._values = values

    @classmethod
    def from_unnormalized(cls, values: typing.Sequence[float]) -> "SampleWeights":
        values = np.asarray(values, dtype=np.float64)
        return cls(values / math.fsum(values))

    @property
    def values(self) -> np.ndarray:
        return self._values

    def __len__(self) -> int:
        return self._values.size

    def __array__(self, dtype=None, copy=None):
        return self._values if dtype is None else self._values.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleWeights):
            return NotImplemented
        return np.array_equal(self._values, other._values)

    def __repr__(self) -> str:
        return (
            f"SampleWeights(n={len(self)}, min={self._values.min():.6g}, "
            f"max={self._values.max():.6g})"
        )


def init_weights(n: int) -> SampleWeights:
    """
    Uniform sample weights ``1/n``.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, received {n!r}.")
    return SampleWeights(np.full(int(n), 1.0 / n))


def _as_correct(correct: typing.Sequence[bool], n: int) -> np.ndarray:
    correct = np.asarray(correct)
    if correct.shape != (n,):
        raise ValueError(
            f"Correctness vector has shape {correct.shape} but there are {n} sample weights."
        )
    return correct.astype(bool)


def weighted_error(correct: typing.Sequence[bool], weights: SampleWeights) -> float:
    """
    Total weight of the misclassified samples, in [0, 1].
    """
    correct = _as_correct(correct, len(weights))
    return min(math.fsum(weights.values[~correct]), 1.0)


class CheckpointWeight(typing.NamedTuple):
    """
    Weight of a checkpoint in the ensemble. ``rejected`` is True when the weight is not positive,
    i.e. the checkpoint is no better than chance and must not be saved.
    """

    value: float
    rejected: bool


def checkpoint_weight(
    error: float, k: int, error_floor: float = DEFAULT_ERROR_FLOOR
) -> CheckpointWeight:
    """
    ``log((1 - e) / e) + log(k - 1)`` with ``e`` raised to at least ``error_floor``. A checkpoint with
    ``e >= (k - 1) / k`` is no better than chance and is rejected.

    Parameters
    ----------
    error: float
        Weighted training error of the checkpoint, in [0, 1].
    k: int
        Number of classes, at least 2.
    error_floor: float, optional
        Lower clamp for the error, in (0, 0.5); keeps the weight finite at zero error.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, received {k}.")
    if not 0.0 <= error <= 1.0:
        raise ValueError(f"error must lie in [0, 1], received {error}.")
    if not 0.0 < error_floor < 0.5:
        raise ValueError(f"error_floor must lie in (0, 0.5), received {error_floor}.")
    clamped = max(error, error_floor)
    if clamped >= 1.0:
        return CheckpointWeight(value=-math.inf, rejected=True)
    value = math.log((1.0 - clamped) / clamped) + math.log(k - 1)
    if clamped != error:
        logger.debug("Clamped weighted error %.3g to %.3g", error, clamped)
    return CheckpointWeight(value=value, rejected=value <= 0.0 or error >= (k - 1) / k)


def normalizer(error: float, eta: float, lambda_: float) -> float:
    """
    Closed form of the weight normaliser, ``(1 - e) * exp(-eta * lambda) + e``.
    """
    return (1.0 - error) * math.exp(-eta * lambda_) + error


def update_weights(
    weights: SampleWeights, correct: typing.Sequence[bool], eta: float, lambda_: float
) -> tuple[SampleWeights, float]:
    """
    Shrink the weights of correctly classified samples by ``exp(-eta * lambda)`` and renormalise.

    Returns
    -------
    weights: :py:class:`SampleWeights`
        Updated weights.
    z: float
        The normaliser: the total weight after shrinking, before renormalisation.
    """
    if lambda_ <= 0:
        raise ValueError(
            f"lambda must be > 0 to update sample weights, received {lambda_}; reject the "
            "checkpoint instead."
        )
    if eta <= 0:
        raise ValueError(f"eta must be > 0, received {eta}.")
    correct = _as_correct(correct, len(weights))
    shrunk = np.where(correct, weights.values * math.exp(-eta * lambda_), weights.values)
    z = math.fsum(shrunk)
    return SampleWeights(shrunk / z), z


def replay_weights(
    correctness_history: typing.Sequence[typing.Sequence[bool]],
    lambdas: typing.Sequence[float],
    eta: float,
) -> SampleWeights:
    """
    Recompute sample weights from scratch after a sequence of updates.

    Starting from uniform weights, the weights after updates with correctness vectors ``c_m`` and
    checkpoint weights ``lambda_m`` are proportional to ``exp(-eta * sum_m lambda_m * c_m)``.
    """
    history = np.atleast_2d(np.asarray(correctness_history, dtype=np.float64))
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if history.shape[0] != lambdas.size:
        raise ValueError(
            f"Received {history.shape[0]} correctness vectors but {lambdas.size} checkpoint weights."
        )
    exponent = -eta * (lambdas @ history)
    unnormalized = np.exp(exponent - exponent.max())
    return SampleWeights.from_unnormalized(unnormalized)


def budget_allows(lambda_history: typing.Sequence[float], eta: float) -> bool:
    """
    True while the checkpoint weights so far (including the estimate for the final model) sum to
    less than ``1 / eta``.
    """
    if eta <= 0:
        raise ValueError(f"eta must be > 0, received {eta}.")
    return math.fsum(lambda_history) < 1.0 / eta


def combine(onehot_outputs: np.ndarray, lambdas: typing.Sequence[float]) -> np.ndarray:
    """
    Weighted average ``sum_m lambda_m G_m / sum_m lambda_m`` of one-hot member outputs.

    Parameters
    ----------
    onehot_outputs: array-like
        ``(M, k)`` one-hot vectors, or ``(M, n, k)`` for M members over n samples.
    lambdas: sequence of float
        Positive member weights, one per member.
    """
    outputs = np.asarray(onehot_outputs, dtype=np.float64)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if outputs.ndim < 2 or outputs.shape[0] == 0:
        raise ValueError("Cannot combine an empty list of checkpoint outputs.")
    if lambdas.shape != (outputs.shape[0],):
        raise ValueError(
            f"Received {outputs.shape[0]} checkpoint outputs but {lambdas.size} checkpoint weights."
        )
    if np.any(lambdas <= 0):
        raise ValueError("Checkpoint weights must all be > 0.")
    if not (np.all((outputs == 0.0) | (outputs == 1.0)) and np.all(outputs.sum(axis=-1) == 1.0)):
        raise ValueError("Checkpoint outputs must be one-hot vectors.")
    return np.tensordot(lambdas, outputs, axes=1) / math.fsum(lambdas)


def exp_loss(ensemble_true_class_scores: typing.Sequence[float]) -> float:
    """
    Mean of ``exp(-score)`` over the ensemble's scores on each sample's true class.
    """
    scores = np.asarray(ensemble_true_class_scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("Cannot compute the exponential loss of an empty score vector.")
    if np.any(scores < -1e-12) or np.any(scores > 1 + 1e-12):
        raise ValueError("Ensemble scores must lie in [0, 1].")
    return math.fsum(np.exp(-scores)) / scores.size


def loss_bound(z_history: typing.Sequence[float]) -> float:
    """
    Upper bound on the exponential loss: the product of the normalisers.
    """
    return float(math.prod(z_history))


@dataclass(frozen=True)
class BoostConfig:
    """
    Hyperparameters of checkpoint boosting.

    Parameters
    ----------
    eta: float
        Deviation rate; scales the sample-weight update and bounds the checkpoint-weight budget at
        ``1 / eta``.
    checkpoint_interval: int
        Training iterations per checkpoint (``t``).
    total_iterations: int
        Total training iterations (``T``).
    lambda0: float, optional
        Estimated weight of the final model, counted against the budget from the first check.
        Defaults to :py:func:`checkpoint_weight` of ``assumed_final_error``.
    k: int, optional
        Number of classes; taken from the training data when not given.
    error_floor: float, optional
        Clamp for zero error; defaults to ``1 / (2 n)``.
    assumed_final_error: float, optional
        Error used to estimate ``lambda0``.
    select: int, optional
        Number of members kept by equal-interval selection; all members when not given.
    seed: int, optional
        Seed for initialisation and mini-batch shuffling.
    """

    eta: float = 0.01
    checkpoint_interval: int = 100
    total_iterations: int = 1000
    lambda0: float | None = None
    k: int | None = None
    error_floor: float | None = None
    assumed_final_error: float = 0.05
    select: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError(f"eta must be > 0, received {self.eta}.")
        if self.checkpoint_interval < 1 or self.total_iterations < 1:
            raise ValueError("checkpoint_interval and total_iterations must be positive.")
        if self.checkpoint_interval > self.total_iterations:
            raise ValueError(
                f"checkpoint_interval ({self.checkpoint_interval}) cannot exceed total_iterations "
                f"({self.total_iterations})."
            )
        if self.lambda0 is not None and self.lambda0 <= 0:
            raise ValueError(f"lambda0 must be > 0, received {self.lambda0}.")
        if self.k is not None and self.k < 2:
            raise ValueError(f"k must be >= 2, received {self.k}.")
        if self.error_floor is not None and not 0 < self.error_floor < 0.5:
            raise ValueError(f"error_floor must lie in (0, 0.5), received {self.error_floor}.")
        if not 0 < self.assumed_final_error < 1:
            raise ValueError(
                f"assumed_final_error must lie in (0, 1), received {self.assumed_final_error}."
            )
        if self.select is not None and self.select < 1:
            raise ValueError(f"select must be >= 1, received {self.select}.")

    def resolved(self, n_samples: int, n_classes: int) -> "BoostConfig":
        """
        Return a copy with ``k``, ``error_floor`` and ``lambda0`` filled in for a training set of
        ``n_samples`` samples and ``n_classes`` classes.
        """
        if self.k is not None and self.k != n_classes:
            raise ValueError(f"Configured k={self.k} but the training data has {n_classes} classes.")
        if n_classes < 2:
            raise ValueError(f"Boosting needs at least 2 classes, the training data has {n_classes}.")
        error_floor = self.error_floor or min(1.0 / (2 * n_samples), 0.25)
        lambda0 = self.lambda0
        if lambda0 is None:
            estimate = checkpoint_weight(self.assumed_final_error, n_classes, error_floor)
            if estimate.rejected:
                raise ValueError(
                    f"assumed_final_error={self.assumed_final_error} gives a non-positive lambda0 "
                    f"for k={n_classes}; set lambda0 explicitly."
                )
            lambda0 = estimate.value
        return replace(self, k=n_classes, error_floor=error_floor, lambda0=lambda0)


@dataclass(frozen=True)
class CheckpointRecord:
    """
    A saved ensemble member: parameter snapshot, weight ``lambda_`` (> 0), weighted error, the
    normaliser ``z`` of the sample weights it was evaluated against, and its training step.
    """

    params: MlpParams
    lambda_: float
    error: float
    z: float
    step: int
    seed: int = 0

    def __post_init__(self):
        if not self.lambda_ > 0:
            raise ValueError(f"A saved checkpoint needs lambda > 0, received {self.lambda_}.")
        if not 0.0 <= self.error <= 1.0:
            raise ValueError(f"error must lie in [0, 1], received {self.error}.")


class EnsembleModel:
    """
    Ordered checkpoint members combined by their normalised weights.
    """

    def __init__(self, checkpoints: typing.Sequence[CheckpointRecord]):
        if not checkpoints:
            raise ValueError("An ensemble needs at least one checkpoint.")
        self._checkpoints = tuple(checkpoints)
        lambdas = np.array([c.lambda_ for c in self._checkpoints], dtype=np.float64)
        self._lambdas = lambdas
        self._normalized = lambdas / math.fsum(lambdas)

    def __len__(self) -> int:
        return len(self._checkpoints)

    def __repr__(self) -> str:
        steps = [c.step for c in self._checkpoints]
        return f"<EnsembleModel with {len(self)} member(s) at steps {steps}>"

    @property
    def checkpoints(self) -> tuple[CheckpointRecord, ...]:
        return self._checkpoints

    @property
    def lambdas(self) -> np.ndarray:
        return self._lambdas

    @property
    def normalized_weights(self) -> np.ndarray:
        return self._normalized

    def member_onehots(self, features: np.ndarray) -> np.ndarray:
        """
        One-hot predictions of every member, shape ``(M, n, k)``.
        """
        return np.stack([np.atleast_2d(predict_onehot(c.params, features)) for c in self._checkpoints])

    def member_probabilities(self, features: np.ndarray) -> np.ndarray:
        """
        Softmax outputs of every member, shape ``(M, n, k)``.
        """
        return np.stack([np.atleast_2d(forward(c.params, features)) for c in self._checkpoints])

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return combine(self.member_onehots(features), self._lambdas)

    def predict_onehot(self, features: np.ndarray) -> np.ndarray:
        return onehot_argmax(self.predict_proba(features))

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(features), axis=1)

    def subset(self, indices: typing.Sequence[int]) -> "EnsembleModel":
        return EnsembleModel([self._checkpoints[i] for i in indices])
