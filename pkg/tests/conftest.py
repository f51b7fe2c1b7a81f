# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

from pytest import fixture

from checkpoint_boosting import (
    BoostConfig,
    LearnerConfig,
    make_blobs,
    run_cbnn,
    save_run,
    split,
)


@fixture(scope="session")
def blobs():
    """
    Well separated blobs: k=3, d=2, 200 samples per class (n=600)
    """
    return make_blobs(200, k=3, d=2, spread=1.0, seed=0)


@fixture(scope="session")
def blobs_split(blobs):
    return split(blobs, 0.2, seed=0, stratified=True)


@fixture(scope="session")
def overlapping_blobs():
    """
    Blobs with centres packed close enough that no model classifies everything correctly
    """
    return make_blobs(100, k=3, d=2, spread=1.5, seed=1, center_box=(-3.0, 3.0))


@fixture(scope="session")
def small_learner():
    return LearnerConfig(hidden_sizes=(16,), batch_size=32)


@fixture(scope="session")
def boost_config():
    return BoostConfig(eta=0.01, checkpoint_interval=50, total_iterations=400)


@fixture(scope="session")
def cbnn_run(blobs_split, boost_config, small_learner):
    """
    A CBNN run on the blobs training split, evaluated against the test split
    """
    train, test = blobs_split
    return run_cbnn(train, boost_config, small_learner, seed=0, test=test)


@fixture(scope="session")
def run_dir(tmp_path_factory, cbnn_run):
    """
    The CBNN run written to a temporary run directory
    """
    path = tmp_path_factory.mktemp("runs") / "cbnn-seed0"
    save_run(cbnn_run[1], str(path))
    return path
