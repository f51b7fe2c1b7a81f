# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import logging
import math
import typing
from dataclasses import dataclass

import numpy as np
import tlz

from ._data import Dataset
from ._errors import TrainingDivergedError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MlpParams:
    """
    Parameters of a fully-connected softmax classifier.

    ``weights[i]`` has shape ``(fan_in, fan_out)`` and ``biases[i]`` shape ``(fan_out,)``. Every layer
    but the last is followed by a rectified linear unit. ``l2`` is the strength of the penalty
    ``0.5 * l2 * sum(||W||^2)`` taken over the weight matrices.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    l2: float = 1e-4

    def __post_init__(self):
        weights = tuple(np.array(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.array(b, dtype=np.float64) for b in self.biases)
        if not weights or len(weights) != len(biases):
            raise ValueError(
                f"Expected matching, non-empty weight and bias lists, received {len(weights)} weight "
                f"matrices and {len(biases)} bias vectors."
            )
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(
                    f"Layer {i} has weight shape {w.shape} and bias shape {b.shape}; expected (fan_in, "
                    "fan_out) and (fan_out,)."
                )
            if i and weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(
                    f"Layer {i} expects {w.shape[0]} inputs but layer {i - 1} produces "
                    f"{weights[i - 1].shape[1]}."
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"Layer {i} contains non-finite parameters.")
            w.setflags(write=False)
            b.setflags(write=False)
        if self.l2 < 0:
            raise ValueError(f"l2 must be >= 0, received {self.l2}.")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "l2", float(self.l2))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MlpParams):
            return NotImplemented
        return (
            self.l2 == other.l2
            and self.layer_sizes == other.layer_sizes
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )

    def __repr__(self) -> str:
        return f"MlpParams(layer_sizes={self.layer_sizes}, l2={self.l2})"

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        return n_params_for(self.layer_sizes)

    def flatten(self) -> np.ndarray:
        """
        Return all parameters as a single vector, layer by layer, each weight matrix (row-major)
        followed by its bias.
        """
        return np.concatenate(
            list(tlz.concat((w.ravel(), b) for w, b in zip(self.weights, self.biases)))
        )

    @classmethod
    def from_flat(
        cls, vector: np.ndarray, layer_sizes: typing.Sequence[int], l2: float = 1e-4
    ) -> "MlpParams":
        """
        Rebuild parameters from the vector produced by :py:meth:`flatten`.
        """
        vector = np.asarray(vector, dtype=np.float64)
        expected = n_params_for(layer_sizes)
        if vector.shape != (expected,):
            raise ValueError(
                f"Layer sizes {tuple(layer_sizes)} imply {expected} parameters, received a vector of "
                f"shape {vector.shape}."
            )
        weights, biases = [], []
        offset = 0
        for fan_in, fan_out in tlz.sliding_window(2, layer_sizes):
            weights.append(vector[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out))
            offset += fan_in * fan_out
            biases.append(vector[offset : offset + fan_out])
            offset += fan_out
        return cls(weights=tuple(weights), biases=tuple(biases), l2=l2)


def n_params_for(layer_sizes: typing.Sequence[int]) -> int:
    """
    Number of parameters of a network with the given layer sizes.
    """
    return sum(fan_in * fan_out + fan_out for fan_in, fan_out in tlz.sliding_window(2, layer_sizes))


def init_params(layer_sizes: typing.Sequence[int], l2: float = 1e-4, seed: int = 0) -> MlpParams:
    """
    Initialise weights uniformly in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` and biases at zero.

    Parameters
    ----------
    layer_sizes: sequence of int
        Input width, hidden widths and number of classes.
    l2: float, optional
        L2 regularisation strength.
    seed: int, optional
        Seed of the initialisation generator.
    """
    layer_sizes = tuple(int(s) for s in layer_sizes)
    if len(layer_sizes) < 2 or min(layer_sizes) < 1:
        raise ValueError(
            f"layer_sizes must contain at least an input and an output width, all positive; received "
            f"{layer_sizes}."
        )
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in tlz.sliding_window(2, layer_sizes):
        limit = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=tuple(weights), biases=tuple(biases), l2=l2)


class Batch(typing.NamedTuple):
    """
    A mini-batch: features, integer labels and the current sample weights of its rows.
    """

    features: np.ndarray
    labels: np.ndarray
    weights: np.ndarray


class Gradients(typing.NamedTuple):
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def _as_matrix(params: MlpParams, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim not in (1, 2) or features.shape[-1] != params.layer_sizes[0]:
        raise ValueError(
            f"Expected features with {params.layer_sizes[0]} columns, received an array of shape "
            f"{features.shape}."
        )
    return np.atleast_2d(features)


def _forward_pass(params: MlpParams, features: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    activations = [features]
    hidden = features
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        hidden = np.maximum(hidden @ w + b, 0.0)
        activations.append(hidden)
    logits = hidden @ params.weights[-1] + params.biases[-1]
    return activations, logits


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def forward(params: MlpParams, features: np.ndarray) -> np.ndarray:
    """
    Softmax class probabilities.

    Parameters
    ----------
    params: :py:class:`MlpParams`
        Network parameters.
    features: numpy.ndarray
        A single feature vector or an ``(n, d)`` matrix.

    Returns
    -------
    probabilities: numpy.ndarray
        Length-k vector (or ``(n, k)`` matrix) of probabilities.
    """
    single = np.ndim(features) == 1
    _, logits = _forward_pass(params, _as_matrix(params, features))
    probabilities = np.exp(_log_softmax(logits))
    return probabilities[0] if single else probabilities


predict_proba = forward


def onehot_argmax(scores: np.ndarray) -> np.ndarray:
    """
    One-hot encode the argmax of each row; the lowest index wins ties.
    """
    scores = np.atleast_2d(scores)
    onehot = np.zeros_like(scores, dtype=np.float64)
    onehot[np.arange(scores.shape[0]), np.argmax(scores, axis=1)] = 1.0
    return onehot


def predict_onehot(params: MlpParams, features: np.ndarray) -> np.ndarray:
    """
    One-hot prediction: 1 at the most probable class, lowest index on ties.
    """
    single = np.ndim(features) == 1
    onehot = onehot_argmax(forward(params, features))
    return onehot[0] if single else onehot


def predict_labels(params: MlpParams, features: np.ndarray) -> np.ndarray:
    return np.argmax(np.atleast_2d(forward(params, features)), axis=1)


def l2_penalty(params: MlpParams) -> float:
    return 0.5 * params.l2 * math.fsum(float(np.sum(w * w)) for w in params.weights)


def _check_batch(params: MlpParams, batch: Batch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    features = _as_matrix(params, batch.features)
    labels = np.asarray(batch.labels)
    weights = np.asarray(batch.weights, dtype=np.float64)
    if features.shape[0] == 0:
        raise ValueError("Cannot evaluate the loss of an empty batch.")
    if labels.shape != (features.shape[0],) or weights.shape != labels.shape:
        raise ValueError(
            f"Batch has {features.shape[0]} rows but {labels.size} labels and {weights.size} weights."
        )
    if np.any(weights <= 0):
        raise ValueError("Sample weights in a batch must all be > 0.")
    if labels.min() < 0 or labels.max() >= params.n_classes:
        raise ValueError(f"Batch labels must lie in [0, {params.n_classes}).")
    return features, labels, weights


def weighted_batch_loss(params: MlpParams, batch: Batch, n_total: int) -> float:
    """
    Weighted cross-entropy of a mini-batch plus the L2 penalty.

    Each row contributes its cross-entropy scaled by the effective weight ``n_total * w_i``, and the
    contributions are averaged over the batch. With uniform weights ``1/n_total`` this is the plain
    mean cross-entropy.

    Parameters
    ----------
    params: :py:class:`MlpParams`
        Network parameters.
    batch: :py:class:`Batch`
        Features, labels and sample weights of the batch rows.
    n_total: int
        Number of samples in the full training set.
    """
    features, labels, weights = _check_batch(params, batch)
    _, logits = _forward_pass(params, features)
    cross_entropy = -_log_softmax(logits)[np.arange(labels.size), labels]
    return float(np.mean(n_total * weights * cross_entropy)) + l2_penalty(params)


def loss_and_gradient(params: MlpParams, batch: Batch, n_total: int) -> tuple[float, Gradients]:
    """
    :py:func:`weighted_batch_loss` together with its gradient by backpropagation.
    """
    features, labels, weights = _check_batch(params, batch)
    rows = np.arange(labels.size)
    activations, logits = _forward_pass(params, features)
    log_probs = _log_softmax(logits)
    coefficients = n_total * weights / labels.size
    loss = float(np.sum(coefficients * -log_probs[rows, labels])) + l2_penalty(params)

    delta = np.exp(log_probs)
    delta[rows, labels] -= 1.0
    delta *= coefficients[:, None]

    n_layers = len(params.weights)
    grad_w, grad_b = [None] * n_layers, [None] * n_layers
    for layer in reversed(range(n_layers)):
        grad_w[layer] = activations[layer].T @ delta + params.l2 * params.weights[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer:
            delta = (delta @ params.weights[layer].T) * (activations[layer] > 0)
    return loss, Gradients(weights=grad_w, biases=grad_b)


def dataset_loss(params: MlpParams, features: np.ndarray, labels: np.ndarray) -> float:
    """
    L2-regularised mean cross-entropy over a whole dataset (uniform sample weights).
    """
    features = _as_matrix(params, features)
    labels = np.asarray(labels)
    _, logits = _forward_pass(params, features)
    cross_entropy = -_log_softmax(logits)[np.arange(labels.size), labels]
    return float(np.mean(cross_entropy)) + l2_penalty(params)


@dataclass(frozen=True)
class LrSchedule:
    """
    Step-decay learning rate with linear warmup.

    During the first ``warmup_epochs`` epochs the rate rises linearly from
    ``base_rate / warmup_epochs`` to ``base_rate``; afterwards it is multiplied by ``decay_factor``
    every ``decay_every_epochs`` epochs.
    """

    base_rate: float = 0.05
    decay_factor: float = 0.96
    decay_every_epochs: int = 2
    warmup_epochs: int = 5
    steps_per_epoch: int = 1

    def __post_init__(self):
        if self.base_rate < 0:
            raise ValueError(f"base_rate must be >= 0, received {self.base_rate}.")
        if not 0 < self.decay_factor <= 1:
            raise ValueError(f"decay_factor must lie in (0, 1], received {self.decay_factor}.")
        if self.decay_every_epochs < 1 or self.steps_per_epoch < 1:
            raise ValueError("decay_every_epochs and steps_per_epoch must be >= 1.")
        if self.warmup_epochs < 0:
            raise ValueError(f"warmup_epochs must be >= 0, received {self.warmup_epochs}.")


def lr_at(step: int, schedule: LrSchedule) -> float:
    """
    Learning rate applied at a given (zero-based) step.
    """
    if step < 0:
        raise ValueError(f"step must be >= 0, received {step}.")
    epoch = step // schedule.steps_per_epoch
    if epoch < schedule.warmup_epochs:
        return schedule.base_rate * (epoch + 1) / schedule.warmup_epochs
    decays = (epoch - schedule.warmup_epochs) // schedule.decay_every_epochs
    return schedule.base_rate * schedule.decay_factor**decays


@dataclass(frozen=True)
class TrainState:
    params: MlpParams
    step: int = 0
    seed: int = 0


def sgd_step(state: TrainState, batch: Batch, n_total: int, schedule: LrSchedule) -> TrainState:
    """
    Take one gradient-descent step on :py:func:`weighted_batch_loss`.

    Raises
    ------
    TrainingDivergedError
        If the loss, any gradient entry or any updated parameter is not finite.
    """
    rate = lr_at(state.step, schedule)
    with np.errstate(over="ignore", invalid="ignore"):
        loss, grads = loss_and_gradient(state.params, batch, n_total)
        weights = tuple(w - rate * g for w, g in zip(state.params.weights, grads.weights))
        biases = tuple(b - rate * g for b, g in zip(state.params.biases, grads.biases))
    finite = math.isfinite(loss) and all(
        np.all(np.isfinite(a)) for a in tlz.concat([grads.weights, grads.biases, weights, biases])
    )
    if not finite:
        raise TrainingDivergedError(
            f"Training diverged at step {state.step}: non-finite loss, gradient or update "
            f"(loss={loss}).",
            step=state.step,
        )
    params = MlpParams(weights=weights, biases=biases, l2=state.params.l2)
    return TrainState(params=params, step=state.step + 1, seed=state.seed)


def batch_indices(step: int, n: int, batch_size: int, seed: int) -> np.ndarray:
    """
    Rows of the mini-batch used at ``step``.

    Each epoch walks a fresh permutation drawn from ``(seed, epoch)``, so any step can be
    reproduced without replaying earlier ones.
    """
    steps_per_epoch = math.ceil(n / batch_size)
    epoch, position = divmod(step, steps_per_epoch)
    order = np.random.default_rng([seed, epoch]).permutation(n)
    return order[position * batch_size : (position + 1) * batch_size]


def train_segment(
    state: TrainState,
    dataset: Dataset,
    weights: np.ndarray,
    iterations: int,
    schedule: LrSchedule,
    batch_size: int = 32,
) -> TrainState:
    """
    Run ``iterations`` weighted SGD steps over shuffled mini-batches.

    Parameters
    ----------
    state: :py:class:`TrainState`
        Starting parameters, step counter and shuffling seed.
    dataset: :py:class:`~checkpoint_boosting.Dataset`
        Training data.
    weights: array-like
        Current sample weights (a :py:class:`~checkpoint_boosting.SampleWeights` or a vector).
    iterations: int
        Number of steps, at least 1.
    schedule: :py:class:`LrSchedule`
        Learning-rate schedule.
    batch_size: int, optional
        Mini-batch size.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, received {iterations}.")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (dataset.n,):
        raise ValueError(f"Expected {dataset.n} sample weights, received shape {weights.shape}.")
    for _ in range(iterations):
        rows = batch_indices(state.step, dataset.n, batch_size, state.seed)
        batch = Batch(dataset.features[rows], dataset.labels[rows], weights[rows])
        state = sgd_step(state, batch, dataset.n, schedule)
    logger.debug("Trained %d iterations, now at step %d", iterations, state.step)
    return state


@dataclass(frozen=True)
class LearnerConfig:
    """
    Architecture, optimisation and schedule settings of the learner.
    """

    hidden_sizes: tuple[int, ...] = (64, 64)
    l2: float = 1e-4
    batch_size: int = 32
    base_rate: float = 0.05
    decay_factor: float = 0.96
    decay_every_epochs: int = 2
    warmup_epochs: int = 5

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"hidden_sizes must be positive, received {self.hidden_sizes}.")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, received {self.batch_size}.")
        if self.l2 < 0:
            raise ValueError(f"l2 must be >= 0, received {self.l2}.")

    def layer_sizes(self, n_features: int, n_classes: int) -> tuple[int, ...]:
        return (n_features, *self.hidden_sizes, n_classes)

    def schedule(self, n_samples: int) -> LrSchedule:
        return LrSchedule(
            base_rate=self.base_rate,
            decay_factor=self.decay_factor,
            decay_every_epochs=self.decay_every_epochs,
            warmup_epochs=self.warmup_epochs,
            steps_per_epoch=math.ceil(n_samples / self.batch_size),
        )

    def init_state(self, n_features: int, n_classes: int, seed: int) -> TrainState:
        params = init_params(self.layer_sizes(n_features, n_classes), l2=self.l2, seed=seed)
        return TrainState(params=params, step=0, seed=seed)
