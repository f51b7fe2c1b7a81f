# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import math

import numpy as np
import pytest

from checkpoint_boosting import (
    BoostConfig,
    CheckpointRecord,
    EnsembleModel,
    SampleWeights,
    budget_allows,
    checkpoint_weight,
    combine,
    exp_loss,
    init_params,
    init_weights,
    loss_bound,
    normalizer,
    replay_weights,
    update_weights,
    weighted_error,
)


@pytest.mark.parametrize("n", [1, 4, 50000])
def test_init_weights(n):
    """
    Test that initial weights are exactly uniform
    """
    weights = init_weights(n)
    assert len(weights) == n
    assert np.all(weights.values == 1.0 / n)
    assert abs(math.fsum(weights.values) - 1.0) <= 1e-12


@pytest.mark.parametrize("n", [0, -3, 2.5])
def test_init_weights_invalid(n):
    with pytest.raises(ValueError) as excinfo:
        init_weights(n)
    assert "n must be a positive integer" in str(excinfo.value)


def test_sample_weights_validation():
    """
    Test that SampleWeights rejects vectors off the probability simplex
    """
    with pytest.raises(ValueError) as excinfo:
        SampleWeights([0.5, 0.6])
    assert "must sum to 1" in str(excinfo.value)

    with pytest.raises(ValueError) as excinfo:
        SampleWeights([1.0, 0.0])
    assert "must be > 0" in str(excinfo.value)

    weights = SampleWeights([0.25, 0.75])
    with pytest.raises(ValueError):
        weights.values[0] = 0.5


@pytest.mark.parametrize(
    "correct, weights, expected",
    [
        ([True, True, True], [0.2, 0.3, 0.5], 0.0),
        ([False] * 5, [0.2] * 5, 1.0),
        ([True, True, True, False], [0.25] * 4, 0.25),
    ],
)
def test_weighted_error(correct, weights, expected):
    assert weighted_error(correct, SampleWeights(weights)) == pytest.approx(expected, abs=1e-15)


def test_weighted_error_length_mismatch():
    with pytest.raises(ValueError) as excinfo:
        weighted_error([True, False], init_weights(3))
    assert "Correctness vector has shape" in str(excinfo.value)


@pytest.mark.parametrize(
    "error, k, expected, tolerance, rejected",
    [
        (0.05, 100, 7.54, 0.005, False),
        (0.5, 2, 0.0, 1e-12, True),
        (0.3, 10, 3.044522, 1e-6, False),
        (0.95, 10, math.log(0.05 / 0.95) + math.log(9), 1e-12, True),
    ],
)
def test_checkpoint_weight(error, k, expected, tolerance, rejected):
    """
    Test the checkpoint weight formula and its rejection signal
    """
    weight = checkpoint_weight(error, k)
    assert weight.value == pytest.approx(expected, abs=tolerance)
    assert weight.rejected is rejected


def test_checkpoint_weight_clamps_zero_error():
    """
    Test that zero error is clamped to the floor, giving a finite weight
    """
    weight = checkpoint_weight(0.0, 3, error_floor=1 / 1200)
    assert weight.value == pytest.approx(math.log(1199) + math.log(2))
    assert checkpoint_weight(1.0, 3, error_floor=0.01).rejected


@pytest.mark.parametrize(
    "error, k, error_floor",
    [
        (0.95, 10, 0.2),
        (1.0, 100, 0.025),
        (0.9, 10, 0.4),
        (0.5, 2, 0.3),
    ],
)
def test_checkpoint_weight_rejects_worse_than_chance(error, k, error_floor):
    """
    Test that errors at or above (k - 1) / k are rejected whatever the floor
    """
    weight = checkpoint_weight(error, k, error_floor=error_floor)
    assert weight.rejected
    assert weight.value <= 0.0


def test_checkpoint_weight_floor_only_raises_error():
    weight = checkpoint_weight(0.95, 10, error_floor=0.2)
    assert weight.value == pytest.approx(math.log(0.05 / 0.95) + math.log(9))
    assert checkpoint_weight(1.0, 5, error_floor=0.1).value == -math.inf


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"error": 0.1, "k": 1}, "k must be >= 2"),
        ({"error": 1.5, "k": 3}, "error must lie in [0, 1]"),
        ({"error": 0.1, "k": 3, "error_floor": 0.6}, "error_floor must lie in (0, 0.5)"),
    ],
)
def test_checkpoint_weight_invalid(kwargs, message):
    with pytest.raises(ValueError) as excinfo:
        checkpoint_weight(**kwargs)
    assert message in str(excinfo.value)


def test_update_weights_examples():
    """
    Test the worked update examples
    """
    weights, z = update_weights(init_weights(4), [True, True, True, False], eta=0.01, lambda_=7.54)
    assert z == pytest.approx(0.945529, abs=1e-5)
    np.testing.assert_allclose(weights.values, [0.245199, 0.245199, 0.245199, 0.264402], atol=1e-6)

    weights, z = update_weights(init_weights(5), [True] * 5, eta=0.01, lambda_=3.0)
    np.testing.assert_allclose(weights.values, 0.2, rtol=0, atol=1e-15)
    assert z == pytest.approx(math.exp(-0.03), abs=1e-15)

    weights, z = update_weights(SampleWeights([0.9, 0.1]), [False, False], eta=0.01, lambda_=3.0)
    np.testing.assert_allclose(weights.values, [0.9, 0.1], atol=1e-15)
    assert z == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("lambda_", [0.0, -1.0])
def test_update_weights_requires_positive_lambda(lambda_):
    with pytest.raises(ValueError) as excinfo:
        update_weights(init_weights(3), [True, False, True], eta=0.01, lambda_=lambda_)
    assert "lambda must be > 0" in str(excinfo.value)


def test_update_weights_randomized():
    """
    Test simplex preservation, the closed-form normaliser and monotone reweighting on 10,000
    random updates
    """
    rng = np.random.default_rng(20260101)
    for _ in range(10_000):
        n = int(rng.integers(2, 40))
        weights = SampleWeights.from_unnormalized(rng.uniform(0.05, 1.0, size=n))
        correct = rng.random(n) < rng.uniform(0.1, 0.9)
        correct[0], correct[1] = True, False
        eta = float(rng.uniform(1e-3, 0.1))
        lambda_ = float(rng.uniform(1e-3, 10.0))

        updated, z = update_weights(weights, correct, eta, lambda_)

        assert abs(math.fsum(updated.values) - 1.0) <= 1e-12
        assert np.all(updated.values > 0)
        error = weighted_error(correct, weights)
        assert abs(z - normalizer(error, eta, lambda_)) <= 1e-12
        assert np.all(updated.values[~correct] > weights.values[~correct])
        assert np.all(updated.values[correct] < weights.values[correct])


def test_replay_matches_incremental_updates():
    """
    Test that replaying a correctness history from uniform weights reproduces the incrementally
    updated weights, over 100 random histories
    """
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(2, 200))
        steps = int(rng.integers(1, 15))
        eta = float(rng.uniform(1e-3, 0.05))
        history = rng.random((steps, n)) < 0.7
        lambdas = rng.uniform(0.1, 8.0, size=steps)

        weights = init_weights(n)
        for correct, lambda_ in zip(history, lambdas):
            weights, _ = update_weights(weights, correct, eta, lambda_)

        replayed = replay_weights(history, lambdas, eta)
        np.testing.assert_allclose(weights.values, replayed.values, rtol=0, atol=1e-10)


def test_replay_weights_length_mismatch():
    with pytest.raises(ValueError) as excinfo:
        replay_weights([[True, False]], [1.0, 2.0], eta=0.01)
    assert "1 correctness vectors but 2 checkpoint weights" in str(excinfo.value)


@pytest.mark.parametrize(
    "history, expected",
    [
        ([7.54], True),
        ([7.54] * 13, True),
        ([7.54] * 14, False),
        ([], True),
    ],
)
def test_budget_allows(history, expected):
    assert budget_allows(history, eta=0.01) is expected


def test_budget_allows_thirteen_checkpoints():
    """
    Test that with lambda0 = 7.54 and checkpoints of 7.54 at most 13 are saved before the budget
    stops the loop
    """
    history = [7.54]
    saved = 0
    while budget_allows(history, eta=0.01):
        history.append(7.54)
        saved += 1
    assert saved == 13


@pytest.mark.parametrize(
    "outputs, lambdas, expected",
    [
        ([[0, 0, 1]], [5.0], [0, 0, 1]),
        ([[1, 0], [0, 1]], [1.0, 1.0], [0.5, 0.5]),
        ([[1, 0], [1, 0], [0, 1]], [2.0, 1.0, 1.0], [0.75, 0.25]),
    ],
)
def test_combine(outputs, lambdas, expected):
    result = combine(outputs, lambdas)
    np.testing.assert_allclose(result, expected, atol=1e-12)
    assert result.sum() == pytest.approx(1.0, abs=1e-9)


def test_combine_order_invariant():
    """
    Test that permuting (output, weight) pairs leaves the combination unchanged
    """
    rng = np.random.default_rng(3)
    outputs = np.eye(4)[rng.integers(0, 4, size=(6, 10))]
    lambdas = rng.uniform(0.1, 5.0, size=6)
    order = rng.permutation(6)
    np.testing.assert_allclose(
        combine(outputs, lambdas), combine(outputs[order], lambdas[order]), rtol=0, atol=1e-12
    )


@pytest.mark.parametrize(
    "outputs, lambdas, message",
    [
        (np.zeros((0, 3)), [], "empty list"),
        ([[1, 0]], [0.0], "must all be > 0"),
        ([[0.5, 0.5]], [1.0], "must be one-hot"),
        ([[1, 0]], [1.0, 2.0], "1 checkpoint outputs but 2 checkpoint weights"),
    ],
)
def test_combine_invalid(outputs, lambdas, message):
    with pytest.raises(ValueError) as excinfo:
        combine(outputs, lambdas)
    assert message in str(excinfo.value)


@pytest.mark.parametrize(
    "scores, expected",
    [
        ([1.0, 1.0, 1.0], math.exp(-1)),
        ([0.0, 0.0], 1.0),
        ([1.0, 0.0], 0.683940),
    ],
)
def test_exp_loss(scores, expected):
    assert exp_loss(scores) == pytest.approx(expected, abs=1e-6)


def test_exp_loss_empty():
    with pytest.raises(ValueError):
        exp_loss([])


@pytest.mark.parametrize(
    "z_history, expected, tolerance",
    [
        ([], 1.0, 0),
        ([0.9, 0.9], 0.81, 1e-12),
        ([0.945529, 0.931006], 0.880293, 1e-5),
    ],
)
def test_loss_bound(z_history, expected, tolerance):
    assert loss_bound(z_history) == pytest.approx(expected, abs=tolerance)


def test_boost_config_resolved():
    """
    Test that resolving a config fills in k, the error floor and lambda0
    """
    config = BoostConfig().resolved(n_samples=480, n_classes=3)
    assert config.k == 3
    assert config.error_floor == pytest.approx(1 / 960)
    assert config.lambda0 == pytest.approx(math.log(19) + math.log(2))

    explicit = BoostConfig(lambda0=7.54, error_floor=0.01).resolved(100, 10)
    assert explicit.lambda0 == 7.54
    assert explicit.error_floor == 0.01


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"eta": 0.0}, "eta must be > 0"),
        ({"checkpoint_interval": 200, "total_iterations": 100}, "cannot exceed total_iterations"),
        ({"lambda0": -1.0}, "lambda0 must be > 0"),
        ({"k": 1}, "k must be >= 2"),
        ({"error_floor": 0.5}, "error_floor must lie in (0, 0.5)"),
        ({"select": 0}, "select must be >= 1"),
    ],
)
def test_boost_config_invalid(kwargs, message):
    with pytest.raises(ValueError) as excinfo:
        BoostConfig(**kwargs)
    assert message in str(excinfo.value)


def test_boost_config_class_mismatch():
    with pytest.raises(ValueError) as excinfo:
        BoostConfig(k=4).resolved(100, 3)
    assert "Configured k=4" in str(excinfo.value)


def test_checkpoint_record_rejects_non_positive_lambda():
    params = init_params((2, 3), seed=0)
    with pytest.raises(ValueError) as excinfo:
        CheckpointRecord(params, lambda_=0.0, error=0.5, z=1.0, step=10)
    assert "lambda > 0" in str(excinfo.value)


def test_ensemble_model():
    """
    Test the normalised weights and predictions of an ensemble
    """
    records = [
        CheckpointRecord(init_params((2, 4, 3), seed=s), lambda_=lam, error=0.1, z=0.9, step=10 * s)
        for s, lam in enumerate([1.0, 2.0, 5.0])
    ]
    ensemble = EnsembleModel(records)
    np.testing.assert_allclose(ensemble.normalized_weights, [0.125, 0.25, 0.625], atol=1e-12)

    features = np.random.default_rng(0).normal(size=(25, 2))
    proba = ensemble.predict_proba(features)
    assert proba.shape == (25, 3)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_array_equal(ensemble.predict(features), np.argmax(proba, axis=1))
    assert len(ensemble.subset([2])) == 1

    with pytest.raises(ValueError):
        EnsembleModel([])
