# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import numpy as np
import pytest
import yaml

from checkpoint_boosting import ConfigError, DataConfig, RunConfigDocument
from checkpoint_boosting._config import OUTPUT_ROOT_ENV, merge_mappings, read_yaml_mapping


def test_defaults():
    document = RunConfigDocument.from_mapping({})
    assert document.method == "cbnn"
    assert document.data == DataConfig()
    assert document.imbalance is None
    assert document.boost.seed == document.seed == 0
    mapping = document.to_mapping()
    assert list(mapping) == ["method", "seed", "output_dir", "data", "boost", "learner", "imbalance"]
    assert "seed" not in mapping["boost"]
    assert mapping["learner"]["hidden_sizes"] == [64, 64]


def test_from_mapping_coerces_values():
    document = RunConfigDocument.from_mapping(
        {
            "method": "horizontal",
            "seed": 3,
            "boost": {"eta": 1, "checkpoint_interval": 20, "total_iterations": 100},
            "learner": {"hidden_sizes": [8, 4]},
            "imbalance": {"mu": 0.5, "rho": 4},
        }
    )
    assert document.boost.eta == 1.0 and isinstance(document.boost.eta, float)
    assert document.boost.seed == 3
    assert document.learner.hidden_sizes == (8, 4)
    assert document.imbalance.rho == 4.0


def test_to_mapping_round_trip():
    document = RunConfigDocument.from_mapping(
        {"method": "single", "seed": 2, "learner": {"hidden_sizes": [5]}, "imbalance": {"mu": 0.3}}
    )
    text = yaml.safe_dump(document.to_mapping(), sort_keys=False)
    assert RunConfigDocument.from_mapping(yaml.safe_load(text)) == document


@pytest.mark.parametrize(
    "mapping, message",
    [
        ({"methd": "cbnn"}, "Unknown key(s) ['methd']"),
        ({"boost": {"etaa": 0.1}}, "Unknown key(s) ['etaa'] in section 'boost'"),
        ({"method": "snapshot"}, "method must be one of"),
        ({"seed": "zero"}, "'seed' must be an integer"),
        ({"seed": True}, "'seed' must be an integer"),
        ({"learner": {"hidden_sizes": 8}}, "'learner.hidden_sizes' must be a list"),
        ({"data": {"stratified": "yes"}}, "'data.stratified' must be true or false"),
        ({"data": {"center_box": [1.0]}}, "'data.center_box' must have 2 entries"),
        ({"boost": {"eta": -1.0}}, "Invalid 'boost' settings: eta must be > 0"),
        ({"data": {"source": "csv"}}, "needs a path"),
        ({"data": {"source": "idx", "path": "images"}}, "needs a labels_path"),
        ({"data": []}, "Section 'data' must be a mapping"),
    ],
)
def test_from_mapping_invalid(mapping, message):
    with pytest.raises(ConfigError) as excinfo:
        RunConfigDocument.from_mapping(mapping)
    assert message in str(excinfo.value)


def test_with_overrides():
    document = RunConfigDocument.from_mapping({"boost": {"eta": 0.02, "total_iterations": 500}})
    updated = document.with_overrides({"seed": 7, "boost": {"eta": 0.05}})
    assert updated.seed == updated.boost.seed == 7
    assert updated.boost.eta == 0.05
    assert updated.boost.total_iterations == 500
    assert document.boost.eta == 0.02


def test_merge_mappings():
    merged = merge_mappings(
        {"seed": 1, "boost": {"eta": 0.1, "select": 3}, "imbalance": None},
        {"seed": 2, "boost": {"eta": 0.2}, "imbalance": {"mu": 0.5}},
    )
    assert merged == {"seed": 2, "boost": {"eta": 0.2, "select": 3}, "imbalance": {"mu": 0.5}}


def test_run_dir(monkeypatch):
    monkeypatch.delenv(OUTPUT_ROOT_ENV, raising=False)
    document = RunConfigDocument.from_mapping({"method": "single", "seed": 4})
    assert document.run_dir == "runs/single-seed4"
    monkeypatch.setenv(OUTPUT_ROOT_ENV, "/scratch/cbnn")
    assert document.run_dir == "/scratch/cbnn/single-seed4"
    assert document.with_overrides({"output_dir": "elsewhere"}).run_dir == "elsewhere"


def test_from_yaml(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("method: single\nboost:\n  total_iterations: 300\n")
    document = RunConfigDocument.from_yaml(str(path))
    assert document.method == "single"
    assert document.boost.total_iterations == 300


@pytest.mark.parametrize(
    "content, message",
    [
        ("method: [unclosed\n", "Unable to parse"),
        ("- a\n- b\n", "must hold a mapping"),
    ],
)
def test_read_yaml_mapping_invalid(tmp_path, content, message):
    path = tmp_path / "bad.yaml"
    path.write_text(content)
    with pytest.raises(ConfigError) as excinfo:
        read_yaml_mapping(str(path))
    assert message in str(excinfo.value)


def test_read_yaml_mapping_missing_and_empty(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        read_yaml_mapping(str(tmp_path / "absent.yaml"))
    assert "does not exist" in str(excinfo.value)
    (tmp_path / "empty.yaml").write_text("")
    assert read_yaml_mapping(str(tmp_path / "empty.yaml")) == {}


def test_prepare_data_rebalances_training_split_only():
    document = RunConfigDocument.from_mapping(
        {
            "data": {"n_per_class": 100, "k": 5, "oversample": False},
            "imbalance": {"mu": 0.4, "rho": 10},
        }
    )
    train, test = document.prepare_data()
    assert sorted(train.class_counts.tolist()) == [8, 8, 80, 80, 80]
    np.testing.assert_array_equal(test.class_counts, [20] * 5)

    oversampled, test_again = document.with_overrides({"data": {"oversample": True}}).prepare_data()
    np.testing.assert_array_equal(oversampled.class_counts, [80] * 5)
    np.testing.assert_array_equal(test_again.features, test.features)


def test_prepare_data_csv(tmp_path):
    path = tmp_path / "points.csv"
    rows = "\n".join(f"{i}.0,{i % 3}" for i in range(30))
    path.write_text(rows + "\n")
    document = RunConfigDocument.from_mapping(
        {"data": {"source": "csv", "path": str(path), "test_fraction": 0.2}}
    )
    train, test = document.prepare_data()
    assert (train.n, test.n, train.k, train.d) == (24, 6, 3, 1)
