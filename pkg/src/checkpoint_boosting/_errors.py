# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0


class CheckpointBoostingError(Exception):
    pass


class TrainingDivergedError(CheckpointBoostingError):
    """
    Raised when a training step produces a non-finite loss or gradient.

    When raised from the engine, ``record`` holds the partial run record
    accumulated up to the failing segment.
    """

    def __init__(self, message: str, step: int = None, record=None):
        super().__init__(message)
        self.step = step
        self.record = record


class DataFormatError(CheckpointBoostingError, ValueError):
    pass


class UndefinedCorrelationError(CheckpointBoostingError, ValueError):
    pass


class DegenerateBasisError(CheckpointBoostingError, ValueError):
    pass


class ConfigError(CheckpointBoostingError, ValueError):
    pass


class StorageError(CheckpointBoostingError):
    def __init__(self, message: str, path: str = None):
        super().__init__(message)
        self.path = path


class ChecksumError(StorageError):
    pass


class UnsupportedVersionError(StorageError):
    pass


class CheckpointFormatError(StorageError):
    pass


class DanglingReferenceError(StorageError):
    pass
