# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import gzip
import struct

import numpy as np
import pytest

from checkpoint_boosting import (
    DataFormatError,
    Dataset,
    ImbalanceSpec,
    load_csv,
    load_idx,
    make_blobs,
    oversample_minority,
    save_csv,
    split,
    step_imbalance,
)


def _idx_images(n, rows=2, columns=2):
    header = struct.pack(">IIII", 0x00000803, n, rows, columns)
    return header + bytes(range(n * rows * columns))


def _idx_labels(labels):
    return struct.pack(">II", 0x00000801, len(labels)) + bytes(labels)


def test_dataset_validation():
    with pytest.raises(ValueError) as excinfo:
        Dataset(np.zeros((3, 2)), [0, 1, 3], k=3)
    assert "labels must lie in [0, 3)" in str(excinfo.value)

    with pytest.raises(ValueError) as excinfo:
        Dataset(np.zeros((3, 2)), [0, 1], k=2)
    assert "Expected 3 labels" in str(excinfo.value)

    dataset = Dataset(np.zeros((3, 2)), [0, 1, 1], k=3)
    np.testing.assert_array_equal(dataset.class_counts, [1, 2, 0])
    np.testing.assert_array_equal(dataset.minority_classes, [0, 2])
    assert len(dataset) == 3
    with pytest.raises(ValueError):
        dataset.features[0, 0] = 1.0


def test_load_csv(tmp_path):
    """
    Test that three rows of two features plus a label give k=2
    """
    path = tmp_path / "small.csv"
    path.write_text("1.0,2.0,0\n3.0,4.0,1\n5.0,6.0,0\n")
    dataset = load_csv(str(path))
    assert (dataset.n, dataset.d, dataset.k) == (3, 2, 2)
    np.testing.assert_array_equal(dataset.labels, [0, 1, 0])
    np.testing.assert_array_equal(dataset.features[1], [3.0, 4.0])
    assert dataset.name == "small"


def test_load_csv_header_and_label_column(tmp_path):
    path = tmp_path / "header.csv"
    path.write_text("label,a,b\n2,0.5,1.5\n0,2.5,3.5\n")
    dataset = load_csv(str(path), label_column=0)
    assert (dataset.n, dataset.d, dataset.k) == (2, 2, 3)
    np.testing.assert_array_equal(dataset.labels, [2, 0])


@pytest.mark.parametrize(
    "content, message",
    [
        ("", "contains no data"),
        ("a,b,label\n", "header but no data rows"),
        ("1.0,2.0,0\n3.0,oops,1\n", "Row 2"),
        ("1.0,abc,0\n2,3,1\n", "Row 1"),
        ("1.0,2.0,0\n3.0,4.0,1.5\n", "labels must be non-negative integers"),
        ("1.0,2.0,0\n3.0,4.0,-1\n", "Row 2"),
    ],
)
def test_load_csv_invalid(tmp_path, content, message):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(DataFormatError) as excinfo:
        load_csv(str(path))
    assert message in str(excinfo.value)


def test_save_csv_round_trip(tmp_path, blobs):
    path = str(tmp_path / "blobs.csv")
    save_csv(blobs, path)
    loaded = load_csv(path)
    np.testing.assert_array_equal(loaded.features, blobs.features)
    np.testing.assert_array_equal(loaded.labels, blobs.labels)
    assert loaded.k == blobs.k


@pytest.mark.parametrize("compress", [False, True])
def test_load_idx(tmp_path, compress):
    images, labels = _idx_images(3), _idx_labels([0, 2, 1])
    suffix = ".gz" if compress else ""
    images_path = tmp_path / f"images-idx3-ubyte{suffix}"
    labels_path = tmp_path / f"labels-idx1-ubyte{suffix}"
    images_path.write_bytes(gzip.compress(images) if compress else images)
    labels_path.write_bytes(gzip.compress(labels) if compress else labels)

    dataset = load_idx(str(images_path), str(labels_path))
    assert (dataset.n, dataset.d, dataset.k) == (3, 4, 3)
    np.testing.assert_allclose(dataset.features[1], np.arange(4, 8) / 255.0)
    np.testing.assert_array_equal(dataset.labels, [0, 2, 1])


@pytest.mark.parametrize(
    "images, labels, message",
    [
        (_idx_images(3), _idx_labels([0, 1]), "holds 3 images but"),
        (_idx_images(3)[:-1], _idx_labels([0, 1, 2]), "declares dimensions"),
        (_idx_labels([0, 1, 2]), _idx_labels([0, 1, 2]), "expected 0x00000803"),
        (b"\x00\x00", _idx_labels([0]), "too short"),
    ],
)
def test_load_idx_invalid(tmp_path, images, labels, message):
    (tmp_path / "images").write_bytes(images)
    (tmp_path / "labels").write_bytes(labels)
    with pytest.raises(DataFormatError) as excinfo:
        load_idx(str(tmp_path / "images"), str(tmp_path / "labels"))
    assert message in str(excinfo.value)


def test_make_blobs(blobs):
    assert (blobs.n, blobs.d, blobs.k) == (600, 2, 3)
    np.testing.assert_array_equal(blobs.class_counts, [200, 200, 200])
    again = make_blobs(200, k=3, d=2, spread=1.0, seed=0)
    np.testing.assert_array_equal(again.features, blobs.features)


def test_make_blobs_invalid():
    with pytest.raises(ValueError):
        make_blobs(0, k=3, d=2, spread=1.0)
    with pytest.raises(ValueError):
        make_blobs(10, k=3, d=2, spread=-1.0)


def test_step_imbalance():
    """
    Test that mu=0.2 and rho=10 on 10 balanced classes of 500 leave two classes of 50
    """
    dataset = make_blobs(500, k=10, d=2, spread=1.0, seed=0)
    imbalanced = step_imbalance(dataset, ImbalanceSpec(mu=0.2, rho=10, seed=0))
    counts = imbalanced.class_counts
    assert sorted(counts.tolist()) == [50, 50] + [500] * 8
    assert len(imbalanced.minority_classes) == 2
    again = step_imbalance(dataset, ImbalanceSpec(mu=0.2, rho=10, seed=0))
    np.testing.assert_array_equal(again.features, imbalanced.features)
    for cls in np.flatnonzero(counts == 500):
        np.testing.assert_array_equal(
            imbalanced.features[imbalanced.labels == cls], dataset.features[dataset.labels == cls]
        )


@pytest.mark.parametrize(
    "spec, message",
    [
        (ImbalanceSpec(mu=0.05, rho=10), "selects no minority class"),
        (ImbalanceSpec(mu=0.5, rho=1000), "exceeds the largest class size"),
    ],
)
def test_step_imbalance_invalid(blobs, spec, message):
    with pytest.raises(ValueError) as excinfo:
        step_imbalance(blobs, spec)
    assert message in str(excinfo.value)


def test_imbalance_spec_invalid():
    with pytest.raises(ValueError):
        ImbalanceSpec(mu=1.0)
    with pytest.raises(ValueError):
        ImbalanceSpec(rho=0.5)


def test_oversample_minority():
    dataset = step_imbalance(
        make_blobs(100, k=5, d=2, spread=1.0, seed=2), ImbalanceSpec(mu=0.4, rho=5, seed=1)
    )
    balanced = oversample_minority(dataset, seed=0)
    np.testing.assert_array_equal(balanced.class_counts, [100] * 5)
    np.testing.assert_array_equal(balanced.features[: dataset.n], dataset.features)
    np.testing.assert_array_equal(balanced.labels[: dataset.n], dataset.labels)
    original = {(*row, label) for row, label in zip(dataset.features, dataset.labels)}
    duplicates = zip(balanced.features[dataset.n :], balanced.labels[dataset.n :])
    assert all((*row, label) in original for row, label in duplicates)


def test_oversample_balanced_is_identity(blobs):
    assert oversample_minority(blobs) is blobs


def test_oversample_warns_on_empty_class():
    dataset = Dataset(np.arange(6.0).reshape(3, 2), [0, 0, 1], k=3)
    with pytest.warns(UserWarning, match="no samples"):
        balanced = oversample_minority(dataset)
    np.testing.assert_array_equal(balanced.class_counts, [2, 2, 0])


@pytest.mark.parametrize("stratified", [True, False])
def test_split(blobs, stratified):
    train, test = split(blobs, 0.2, seed=0, stratified=stratified)
    assert (train.n, test.n) == (480, 120)
    assert train.name == f"{blobs.name}-train"
    rows = {tuple(row) for row in train.features}
    assert not rows & {tuple(row) for row in test.features}
    if stratified:
        assert np.all(np.abs(test.class_counts - 40) <= 1)


def test_split_invalid(blobs):
    with pytest.raises(ValueError):
        split(blobs, 0.0)
    tiny = blobs.subset([0])
    with pytest.raises(ValueError) as excinfo:
        split(tiny, 0.5)
    assert "empty side" in str(excinfo.value)
