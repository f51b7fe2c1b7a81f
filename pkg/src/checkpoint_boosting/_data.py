# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import logging
import math
import posixpath
import struct
import typing
import warnings
from dataclasses import dataclass

import fsspec
import numpy as np
import pandas as pd
from imblearn.over_sampling import RandomOverSampler
from sklearn import datasets as sk_datasets
from sklearn.model_selection import train_test_split

from ._errors import DataFormatError

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
_IDX_UBYTE = 0x08


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    An immutable labelled dataset.

    Features are stored as an ``(n, d)`` float64 matrix and labels as int64 values in ``[0, k)``.
    """

    features: np.ndarray
    labels: np.ndarray
    k: int
    name: str = "dataset"

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels)
        if features.ndim != 2:
            raise ValueError(f"features must be a 2-D matrix, received shape {features.shape}.")
        if labels.shape != (features.shape[0],):
            raise ValueError(
                f"Expected {features.shape[0]} labels to match the feature rows, received shape "
                f"{labels.shape}."
            )
        if labels.size and not np.all(np.equal(np.mod(labels, 1), 0)):
            raise ValueError("labels must be integers.")
        labels = labels.astype(np.int64)
        if self.k < 1:
            raise ValueError(f"k must be >= 1, received {self.k}.")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k}).")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "k", int(self.k))

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"<Dataset '{self.name}' with {self.n} samples, {self.d} features and {self.k} classes>"

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    @property
    def minority_classes(self) -> np.ndarray:
        """
        Classes with fewer samples than the largest class.
        """
        counts = self.class_counts
        return np.flatnonzero(counts < counts.max())

    def subset(self, rows: typing.Sequence[int], name: str = None) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            features=self.features[rows],
            labels=self.labels[rows],
            k=self.k,
            name=name or self.name,
        )


def load_csv(
    path: str,
    label_column: int = -1,
    header: bool = None,
    storage_options: dict[str, typing.Any] = None,
) -> Dataset:
    """
    Load a dataset from a comma-separated file.

    Parameters
    ----------
    path: str
        Path or fsspec URL of the file.
    label_column: int, optional
        Index of the label column (negative values count from the end).
    header: bool, optional
        Whether the first row is a header. By default a header is assumed when no cell of the first
        row is numeric; a row mixing numbers and text is a malformed data row.
    storage_options: dict, optional
        Parameters passed to the fsspec backend.

    Raises
    ------
    DataFormatError
        If the file is empty, a cell is not numeric or a label is not a non-negative integer. The
        message names the offending (1-based) row of the file.
    """
    with fsspec.open(path, mode="rt", **(storage_options or {})) as fobj:
        try:
            raw = pd.read_csv(fobj, header=None, dtype=str, skip_blank_lines=True)
        except pd.errors.EmptyDataError as e:
            raise DataFormatError(f"'{path}' contains no data.") from e
        except pd.errors.ParserError as e:
            raise DataFormatError(f"Unable to parse '{path}': {e}") from e

    values = raw.apply(pd.to_numeric, errors="coerce")
    if header is None:
        header = bool(values.iloc[0].isna().all())
    if header:
        raw, values = raw.iloc[1:], values.iloc[1:]
    if values.empty:
        raise DataFormatError(f"'{path}' contains a header but no data rows.")

    bad_rows = values.index[values.isna().any(axis=1)]
    if len(bad_rows):
        row = bad_rows[0]
        raise DataFormatError(
            f"Row {row + 1} of '{path}' contains a missing or non-numeric value: "
            f"{raw.loc[row].tolist()}."
        )

    matrix = values.to_numpy(dtype=np.float64)
    n_columns = matrix.shape[1]
    if not -n_columns <= label_column < n_columns or n_columns < 2:
        raise DataFormatError(
            f"'{path}' has {n_columns} column(s); cannot use column {label_column} as the label."
        )
    label_column = label_column % n_columns
    labels = matrix[:, label_column]
    non_integer = np.flatnonzero((np.mod(labels, 1) != 0) | (labels < 0))
    if non_integer.size:
        row = values.index[non_integer[0]]
        raise DataFormatError(
            f"Row {row + 1} of '{path}' has label {labels[non_integer[0]]!r}; labels must be "
            "non-negative integers."
        )
    features = np.delete(matrix, label_column, axis=1)
    labels = labels.astype(np.int64)
    name = posixpath.splitext(posixpath.basename(str(path)))[0]
    return Dataset(features=features, labels=labels, k=int(labels.max()) + 1, name=name)


def save_csv(
    dataset: Dataset, path: str, storage_options: dict[str, typing.Any] = None
) -> None:
    """
    Write a dataset as CSV with a header row, features first and the label in the last column.
    """
    df = pd.DataFrame(dataset.features, columns=[f"x{i}" for i in range(dataset.d)])
    df["label"] = dataset.labels
    with fsspec.open(path, mode="wt", **(storage_options or {})) as fobj:
        df.to_csv(fobj, index=False, float_format="%.17g")


def _read_idx(path: str, expected_magic: int, storage_options: dict) -> np.ndarray:
    with fsspec.open(path, mode="rb", compression="infer", **storage_options) as fobj:
        data = fobj.read()
    if len(data) < 4:
        raise DataFormatError(f"'{path}' is too short to hold an IDX header.")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise DataFormatError(
            f"'{path}' has IDX magic 0x{magic:08x}; expected 0x{expected_magic:08x}."
        )
    ndim = magic & 0xFF
    header_size = 4 + 4 * ndim
    if len(data) < header_size:
        raise DataFormatError(f"'{path}' ends inside its IDX dimension header.")
    dims = struct.unpack(f">{ndim}I", data[4:header_size])
    payload = np.frombuffer(data, dtype=np.uint8, offset=header_size)
    if payload.size != math.prod(dims):
        raise DataFormatError(
            f"'{path}' declares dimensions {dims} ({math.prod(dims)} bytes) but holds "
            f"{payload.size} data bytes."
        )
    return payload.reshape(dims)


def load_idx(
    images_path: str, labels_path: str, storage_options: dict[str, typing.Any] = None
) -> Dataset:
    """
    Load an image/label pair in IDX format (as used by MNIST).

    Images are flattened to ``rows * columns`` features scaled to [0, 1]. Gzipped files are read
    transparently.

    Raises
    ------
    DataFormatError
        On a magic-number mismatch, a truncated payload or differing image and label counts.
    """
    storage_options = storage_options or {}
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, storage_options)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, storage_options)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"'{images_path}' holds {images.shape[0]} images but '{labels_path}' holds "
            f"{labels.shape[0]} labels."
        )
    if images.shape[0] == 0:
        raise DataFormatError(f"'{images_path}' holds no images.")
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    labels = labels.astype(np.int64)
    name = posixpath.basename(str(images_path)).split(".")[0]
    return Dataset(features=features, labels=labels, k=int(labels.max()) + 1, name=name)


def make_blobs(
    n_per_class: int,
    k: int,
    d: int,
    spread: float,
    seed: int = 0,
    center_box: tuple[float, float] = (-10.0, 10.0),
) -> Dataset:
    """
    Gaussian clusters, one per class, at seeded uniform random centres.

    Parameters
    ----------
    n_per_class: int
        Samples drawn for each class.
    k: int
        Number of classes.
    d: int
        Number of features.
    spread: float
        Standard deviation of each cluster.
    seed: int, optional
        Random seed for centres and samples.
    center_box: tuple of float, optional
        Bounding box of the cluster centres.
    """
    if min(n_per_class, k, d) < 1:
        raise ValueError(
            f"n_per_class, k and d must all be >= 1, received {n_per_class}, {k} and {d}."
        )
    if spread < 0:
        raise ValueError(f"spread must be >= 0, received {spread}.")
    features, labels = sk_datasets.make_blobs(
        n_samples=[n_per_class] * k,
        n_features=d,
        centers=None,
        cluster_std=spread,
        center_box=center_box,
        shuffle=False,
        random_state=seed,
    )
    return Dataset(features=features, labels=labels, k=k, name=f"blobs-k{k}-d{d}")


@dataclass(frozen=True)
class ImbalanceSpec:
    """
    Step-imbalance construction: ``mu`` is the fraction of classes made minority and ``rho`` the
    ratio between majority and minority class sizes.
    """

    mu: float = 0.2
    rho: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must lie in (0, 1), received {self.mu}.")
        if self.rho < 1:
            raise ValueError(f"rho must be >= 1, received {self.rho}.")


def step_imbalance(dataset: Dataset, spec: ImbalanceSpec) -> Dataset:
    """
    Subsample ``floor(mu * k)`` randomly chosen classes down to ``floor(n_max / rho)`` samples.

    Majority classes are returned untouched and the original row order is kept. Selection uses a
    generator seeded only by ``spec.seed``.
    """
    n_minority = math.floor(spec.mu * dataset.k + 1e-9)
    if n_minority < 1:
        raise ValueError(
            f"mu={spec.mu} selects no minority class out of k={dataset.k} (floor(mu * k) = 0)."
        )
    counts = dataset.class_counts
    n_max = int(counts.max())
    n_min = math.floor(n_max / spec.rho)
    if n_min < 1:
        raise ValueError(
            f"rho={spec.rho} exceeds the largest class size ({n_max}); minority classes would be empty."
        )

    rng = np.random.default_rng(spec.seed)
    minority = np.sort(rng.choice(dataset.k, size=n_minority, replace=False))
    keep = np.ones(dataset.n, dtype=bool)
    for cls in minority:
        rows = np.flatnonzero(dataset.labels == cls)
        if rows.size > n_min:
            dropped = rng.choice(rows, size=rows.size - n_min, replace=False)
            keep[dropped] = False
    logger.debug("Minority classes %s subsampled to %d samples", minority.tolist(), n_min)
    return dataset.subset(
        np.flatnonzero(keep), name=f"{dataset.name}-imbalanced-mu{spec.mu}-rho{spec.rho}"
    )


def oversample_minority(dataset: Dataset, seed: int = 0) -> Dataset:
    """
    Random Minority Oversampling: duplicate samples of every class, with replacement, until each
    class matches the majority-class count. Original rows come first, followed by the duplicates.
    """
    counts = dataset.class_counts
    present = counts[counts > 0]
    if present.size < counts.size:
        warnings.warn(
            f"Classes {np.flatnonzero(counts == 0).tolist()} have no samples and cannot be oversampled.",
            UserWarning,
            stacklevel=2,
        )
    if present.size <= 1 or np.all(present == present.max()):
        return dataset
    sampler = RandomOverSampler(sampling_strategy="not majority", random_state=seed)
    features, labels = sampler.fit_resample(dataset.features, dataset.labels)
    return Dataset(
        features=features, labels=labels, k=dataset.k, name=f"{dataset.name}-oversampled"
    )


def split(
    dataset: Dataset, test_fraction: float, seed: int = 0, stratified: bool = False
) -> tuple[Dataset, Dataset]:
    """
    Split a dataset into disjoint train and test parts.

    Parameters
    ----------
    dataset: :py:class:`Dataset`
        Dataset to split.
    test_fraction: float
        Fraction of samples (rounded up) placed in the test part.
    seed: int, optional
        Shuffling seed.
    stratified: bool, optional
        If True, keep class proportions in both parts (within one sample per class).

    Returns
    -------
    train, test: :py:class:`Dataset`
        Both parts keep the original row order.
    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), received {test_fraction}.")
    n_test = math.ceil(test_fraction * dataset.n)
    if n_test >= dataset.n or n_test == 0:
        raise ValueError(
            f"test_fraction={test_fraction} leaves an empty side when splitting {dataset.n} samples."
        )
    train_rows, test_rows = train_test_split(
        np.arange(dataset.n),
        test_size=n_test,
        random_state=seed,
        stratify=dataset.labels if stratified else None,
    )
    return (
        dataset.subset(np.sort(train_rows), name=f"{dataset.name}-train"),
        dataset.subset(np.sort(test_rows), name=f"{dataset.name}-test"),
    )
