# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import logging
import typing
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ._boost import SampleWeights
from ._data import Dataset
from ._errors import DegenerateBasisError, UndefinedCorrelationError
from ._learner import MlpParams, dataset_loss, onehot_argmax

logger = logging.getLogger(__name__)


def pairwise_correlation(softmax_outputs_a: np.ndarray, softmax_outputs_b: np.ndarray) -> float:
    """
    Pearson correlation between two ``(n, k)`` softmax output matrices, taken over all ``n * k``
    entries.

    Raises
    ------
    UndefinedCorrelationError
        If either input has zero variance.
    """
    a = np.asarray(softmax_outputs_a, dtype=np.float64)
    b = np.asarray(softmax_outputs_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"Cannot correlate outputs of shapes {a.shape} and {b.shape}.")
    a = a.ravel() - a.mean()
    b = b.ravel() - b.mean()
    denominator = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if denominator == 0:
        raise UndefinedCorrelationError("Correlation is undefined for a constant input.")
    return float(np.clip(np.dot(a, b) / denominator, -1.0, 1.0))


def correlation_matrix(member_outputs: typing.Sequence[np.ndarray]) -> pd.DataFrame:
    """
    Symmetric matrix of :py:func:`pairwise_correlation` between every pair of members, indexed by
    1-based member number.
    """
    n_members = len(member_outputs)
    if n_members < 2:
        raise ValueError(f"Correlation needs at least 2 members, received {n_members}.")
    matrix = np.eye(n_members)
    for i in range(n_members):
        for j in range(i + 1, n_members):
            matrix[i, j] = matrix[j, i] = pairwise_correlation(member_outputs[i], member_outputs[j])
    labels = pd.RangeIndex(1, n_members + 1, name="member")
    return pd.DataFrame(matrix, index=labels, columns=labels)


def off_diagonal_mean(matrix: pd.DataFrame) -> float:
    values = np.asarray(matrix, dtype=np.float64)
    mask = ~np.eye(values.shape[0], dtype=bool)
    return float(values[mask].mean())


def per_class_avg_weights(
    weights: SampleWeights, labels: np.ndarray, k: int
) -> np.ndarray:
    """
    Mean sample weight within each class. Classes without samples are reported as NaN.
    """
    values = np.asarray(weights, dtype=np.float64)
    labels = np.asarray(labels)
    if values.shape != labels.shape:
        raise ValueError(f"Received {values.size} weights but {labels.size} labels.")
    counts = np.bincount(labels, minlength=k)
    sums = np.bincount(labels, weights=values, minlength=k)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / counts, np.nan)
    if np.any(counts == 0):
        warnings.warn(
            f"Classes {np.flatnonzero(counts == 0).tolist()} have no samples; their average weight is NaN.",
            UserWarning,
            stacklevel=2,
        )
    return means


def class_priors(labels: np.ndarray, k: int) -> np.ndarray:
    """
    Empirical class frequencies.
    """
    counts = np.bincount(np.asarray(labels), minlength=k)
    return counts / counts.sum()


def threshold_with_priors(probabilities: np.ndarray, class_priors: np.ndarray) -> np.ndarray:
    """
    One-hot predictions after dividing each class probability by its prior.

    Raises
    ------
    ValueError
        If any prior is not strictly positive.
    """
    probabilities = np.atleast_2d(np.asarray(probabilities, dtype=np.float64))
    priors = np.asarray(class_priors, dtype=np.float64)
    if priors.shape != (probabilities.shape[1],):
        raise ValueError(
            f"Expected {probabilities.shape[1]} class priors, received shape {priors.shape}."
        )
    if np.any(priors <= 0):
        raise ValueError(
            f"Class priors must all be > 0; classes {np.flatnonzero(priors <= 0).tolist()} are not."
        )
    return onehot_argmax(probabilities / priors)


def error_rate(predictions: np.ndarray, labels: np.ndarray) -> float:
    """
    Fraction of samples whose arg-max prediction differs from the label.
    """
    predictions = np.atleast_2d(np.asarray(predictions))
    labels = np.asarray(labels)
    if predictions.shape[0] != labels.size:
        raise ValueError(f"Received {predictions.shape[0]} predictions but {labels.size} labels.")
    return float(np.mean(np.argmax(predictions, axis=1) != labels))


def per_class_error(predictions: np.ndarray, labels: np.ndarray, k: int) -> pd.DataFrame:
    """
    Per-class sample count and error rate (NaN for classes without samples).
    """
    labels = np.asarray(labels)
    wrong = np.argmax(np.atleast_2d(predictions), axis=1) != labels
    counts = np.bincount(labels, minlength=k)
    errors = np.bincount(labels, weights=wrong.astype(np.float64), minlength=k)
    with np.errstate(invalid="ignore", divide="ignore"):
        rates = np.where(counts > 0, errors / counts, np.nan)
    return pd.DataFrame(
        {"count": counts, "error_rate": rates}, index=pd.RangeIndex(k, name="class")
    )


class TimeToAccuracy(typing.NamedTuple):
    iterations: int
    seconds: float


def time_to_accuracy(record, target: float) -> TimeToAccuracy | None:
    """
    First point of a run at which the running ensemble reaches a test accuracy of ``target``.

    Parameters
    ----------
    record: :py:class:`~checkpoint_boosting.RunRecord`
        A run evaluated against a test set.
    target: float
        Test accuracy to reach, in (0, 1].

    Returns
    -------
    result: :py:class:`TimeToAccuracy` or None
        Training iterations and cumulative training seconds, or None if never reached.
    """
    if not 0 < target <= 1:
        raise ValueError(f"target must lie in (0, 1], received {target}.")
    timings = pd.DataFrame(record.timings, columns=["step", "seconds"])
    for row in record.metrics:
        if row["test_error"] is not None and 1.0 - row["test_error"] >= target:
            seconds = float(timings.loc[timings["step"] <= row["step"], "seconds"].sum())
            return TimeToAccuracy(iterations=row["step"], seconds=seconds)
    return None


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    """
    Loss values on a 2-D plane through three parameter vectors.

    A point ``(x, y)`` maps to ``p2 + x * u / |u| + y * v / |v|`` with ``u = p3 - p2`` and ``v`` the
    component of ``p1 - p2`` orthogonal to ``u``. ``losses[i, j]`` is the loss at ``(xs[j], ys[i])``.
    ``anchors`` gives the plane coordinates of p1, p2 and p3 and the loss evaluated there.
    """

    xs: np.ndarray
    ys: np.ndarray
    losses: np.ndarray
    anchors: pd.DataFrame
    u: np.ndarray
    v: np.ndarray

    @property
    def u_norm(self) -> float:
        return float(np.linalg.norm(self.u))

    @property
    def v_norm(self) -> float:
        return float(np.linalg.norm(self.v))

    def to_frame(self) -> pd.DataFrame:
        """
        Long-format table with one ``x, y, loss`` row per grid point.
        """
        xx, yy = np.meshgrid(self.xs, self.ys)
        return pd.DataFrame({"x": xx.ravel(), "y": yy.ravel(), "loss": self.losses.ravel()})


def surface_basis(p1: np.ndarray, p2: np.ndarray, p3: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Orthogonal plane directions ``u = p3 - p2`` and ``v = (p1 - p2)`` minus its projection on ``u``.

    Raises
    ------
    DegenerateBasisError
        If the three points are collinear (or p3 equals p2).
    """
    u = p3 - p2
    w = p1 - p2
    u_sq = float(np.dot(u, u))
    if u_sq == 0:
        raise DegenerateBasisError("Anchors p2 and p3 coincide; the plane is undefined.")
    v = w - (np.dot(w, u) / u_sq) * u
    if np.linalg.norm(v) <= 1e-10 * max(float(np.linalg.norm(w)), 1.0):
        raise DegenerateBasisError("Anchors p1, p2 and p3 are collinear; the plane is undefined.")
    return u, v


def surface_grid(
    p1: MlpParams,
    p2: MlpParams,
    p3: MlpParams,
    dataset: Dataset,
    extent: tuple[float, float, float, float] = None,
    resolution: int = 21,
) -> SurfaceGrid:
    """
    Evaluate the L2-regularised cross-entropy over a plane through three parameter snapshots.

    Parameters
    ----------
    p1, p2, p3: :py:class:`~checkpoint_boosting.MlpParams`
        Snapshots of one architecture; p2 is the origin of the plane and p3 lies on its x axis.
    dataset: :py:class:`~checkpoint_boosting.Dataset`
        Data the loss is evaluated on (in full at every point).
    extent: tuple of float, optional
        ``(x_min, x_max, y_min, y_max)``. By default the anchors plus a 25% margin.
    resolution: int, optional
        Points per axis.
    """
    if not p1.layer_sizes == p2.layer_sizes == p3.layer_sizes:
        raise ValueError("Surface anchors must share one architecture.")
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, received {resolution}.")
    vectors = [p.flatten() for p in (p1, p2, p3)]
    origin = vectors[1]
    u, v = surface_basis(*vectors)
    u_norm, v_norm = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    u_hat, v_hat = u / u_norm, v / v_norm

    def loss_at(x: float, y: float) -> float:
        params = MlpParams.from_flat(origin + x * u_hat + y * v_hat, p2.layer_sizes, p2.l2)
        return dataset_loss(params, dataset.features, dataset.labels)

    coords = {
        "p1": (float(np.dot(vectors[0] - origin, u_hat)), v_norm),
        "p2": (0.0, 0.0),
        "p3": (u_norm, 0.0),
    }
    if extent is None:
        margin = 0.25 * max(u_norm, v_norm)
        x_values = [c[0] for c in coords.values()]
        extent = (min(x_values) - margin, max(x_values) + margin, -margin, v_norm + margin)
    xs = np.linspace(extent[0], extent[1], resolution)
    ys = np.linspace(extent[2], extent[3], resolution)
    losses = np.array([[loss_at(x, y) for x in xs] for y in ys])
    anchors = pd.DataFrame(
        [(name, x, y, loss_at(x, y)) for name, (x, y) in coords.items()],
        columns=["anchor", "x", "y", "loss"],
    ).set_index("anchor")
    logger.debug("Evaluated a %dx%d loss surface", resolution, resolution)
    return SurfaceGrid(xs=xs, ys=ys, losses=losses, anchors=anchors, u=u, v=v)
