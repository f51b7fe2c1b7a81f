# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

__version__ = "0.1.0"

from ._boost import (
    BoostConfig,
    CheckpointRecord,
    CheckpointWeight,
    EnsembleModel,
    SampleWeights,
    budget_allows,
    checkpoint_weight,
    combine,
    exp_loss,
    init_weights,
    loss_bound,
    normalizer,
    replay_weights,
    update_weights,
    weighted_error,
)
from ._config import DataConfig, RunConfigDocument
from ._data import (
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
from ._errors import (
    CheckpointBoostingError,
    CheckpointFormatError,
    ChecksumError,
    ConfigError,
    DanglingReferenceError,
    DataFormatError,
    DegenerateBasisError,
    StorageError,
    TrainingDivergedError,
    UndefinedCorrelationError,
    UnsupportedVersionError,
)
from ._learner import (
    Batch,
    LearnerConfig,
    LrSchedule,
    MlpParams,
    TrainState,
    forward,
    init_params,
    loss_and_gradient,
    lr_at,
    predict_onehot,
    predict_proba,
    sgd_step,
    train_segment,
    weighted_batch_loss,
)
from ._metrics import (
    SurfaceGrid,
    class_priors,
    correlation_matrix,
    error_rate,
    off_diagonal_mean,
    pairwise_correlation,
    per_class_avg_weights,
    per_class_error,
    surface_grid,
    threshold_with_priors,
    time_to_accuracy,
)
from ._persistence import (
    load_checkpoint,
    load_ensemble,
    load_run,
    load_sample_weights,
    save_checkpoint,
    save_run,
    save_sample_weights,
)
from .core import (
    METHODS,
    RunRecord,
    compare_methods,
    run_cbnn,
    run_horizontal_voting,
    run_single,
    select_checkpoints,
    summarize_comparison,
)
