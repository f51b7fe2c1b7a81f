# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""
On-disk layout of a run directory::

    <run>/manifest         YAML: config, checkpoint references, metrics
    <run>/ckpt_<m>.bin     one binary file per saved checkpoint, m = 1, 2, ...
    <run>/weights.bin      final sample weights
    <run>/timings.yaml     wall-clock seconds per training segment

Binary files are little-endian and start with a format-version byte; the parameter payload is
followed by its CRC-32.
"""

import logging
import struct
import typing
import zlib

import fsspec
import numpy as np
import yaml

from ._boost import CheckpointRecord, EnsembleModel, SampleWeights
from ._errors import (
    ChecksumError,
    CheckpointFormatError,
    DanglingReferenceError,
    StorageError,
    UnsupportedVersionError,
)
from ._learner import MlpParams, n_params_for
from .core import RunRecord

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest"
WEIGHTS_NAME = "weights.bin"
TIMINGS_NAME = "timings.yaml"

_CHECKPOINT_META = struct.Struct("<ddddqqQ")
_COUNT = struct.Struct("<I")
_CRC = struct.Struct("<I")
_LENGTH = struct.Struct("<Q")


def checkpoint_name(index: int) -> str:
    """
    File name of the ``index``-th (1-based) checkpoint of a run.
    """
    return f"ckpt_{index}.bin"


def _join(directory: str, name: str) -> str:
    return f"{directory.rstrip('/')}/{name}"


def _write_bytes(path: str, data: bytes, storage_options: dict) -> None:
    try:
        with fsspec.open(path, mode="wb", **storage_options) as fobj:
            fobj.write(data)
    except OSError as err:
        raise StorageError(f"Unable to write {path}: {err}", path=path) from err


def _read_bytes(path: str, storage_options: dict) -> bytes:
    try:
        with fsspec.open(path, mode="rb", **storage_options) as fobj:
            return fobj.read()
    except OSError as err:
        raise StorageError(f"Unable to read {path}: {err}", path=path) from err


def _payload_bytes(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<f8").tobytes()


def _check_version(data: bytes, path: str) -> None:
    if not data:
        raise ChecksumError(f"{path} is empty.", path=path)
    if data[0] != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path} has format version {data[0]}; this version reads {FORMAT_VERSION}.", path=path
        )


def _read_payload(data: bytes, offset: int, count: int, path: str) -> np.ndarray:
    """
    Read ``count`` float64 values at ``offset`` and validate the CRC-32 that follows them.
    """
    end = offset + 8 * count
    if len(data) < end + _CRC.size:
        raise ChecksumError(
            f"{path} is truncated: expected {end + _CRC.size} bytes, found {len(data)}.", path=path
        )
    if len(data) > end + _CRC.size:
        raise CheckpointFormatError(
            f"{path} has {len(data) - end - _CRC.size} unexpected trailing byte(s).", path=path
        )
    payload = data[offset:end]
    (stored,) = _CRC.unpack_from(data, end)
    if zlib.crc32(payload) != stored:
        raise ChecksumError(f"Checksum mismatch in {path}.", path=path)
    return np.frombuffer(payload, dtype="<f8").astype(np.float64)


def save_checkpoint(record: CheckpointRecord, path: str, storage_options: dict = None) -> None:
    """
    Write a checkpoint's parameters and metadata to a binary file.

    Parameters
    ----------
    record: :py:class:`~checkpoint_boosting.CheckpointRecord`
        The checkpoint to write.
    path: str
        Destination, local or any fsspec URL.
    storage_options: dict, optional
        Parameters passed to the fsspec backend.

    Raises
    ------
    StorageError
        If the file cannot be written.
    """
    layer_sizes = record.params.layer_sizes
    payload = _payload_bytes(record.params.flatten())
    data = b"".join(
        [
            bytes([FORMAT_VERSION]),
            _COUNT.pack(len(layer_sizes)),
            struct.pack(f"<{len(layer_sizes)}I", *layer_sizes),
            _CHECKPOINT_META.pack(
                record.params.l2,
                record.lambda_,
                record.error,
                record.z,
                record.step,
                record.seed,
                record.params.n_params,
            ),
            payload,
            _CRC.pack(zlib.crc32(payload)),
        ]
    )
    _write_bytes(path, data, storage_options or {})
    logger.debug("Wrote checkpoint at step %d to %s", record.step, path)


def load_checkpoint(path: str, storage_options: dict = None) -> CheckpointRecord:
    """
    Read a checkpoint written by :py:func:`save_checkpoint`.

    Raises
    ------
    ChecksumError
        If the file is truncated or its payload does not match the stored CRC-32.
    UnsupportedVersionError
        If the file was written in another format version.
    CheckpointFormatError
        If the parameter count disagrees with the stored architecture.
    """
    data = _read_bytes(path, storage_options or {})
    _check_version(data, path)
    try:
        (n_layers,) = _COUNT.unpack_from(data, 1)
        offset = 1 + _COUNT.size
        layer_sizes = struct.unpack_from(f"<{n_layers}I", data, offset)
        offset += 4 * n_layers
        l2, lambda_, error, z, step, seed, n_params = _CHECKPOINT_META.unpack_from(data, offset)
        offset += _CHECKPOINT_META.size
    except struct.error as err:
        raise ChecksumError(f"{path} is truncated inside its header.", path=path) from err

    if n_layers < 2 or n_params != n_params_for(layer_sizes):
        raise CheckpointFormatError(
            f"{path} stores {n_params} parameters, but layer sizes {list(layer_sizes)} imply "
            f"{n_params_for(layer_sizes) if n_layers >= 2 else 0}.",
            path=path,
        )
    flat = _read_payload(data, offset, n_params, path)
    params = MlpParams.from_flat(flat, layer_sizes, l2)
    return CheckpointRecord(
        params=params, lambda_=lambda_, error=error, z=z, step=int(step), seed=int(seed)
    )


def save_sample_weights(weights: SampleWeights, path: str, storage_options: dict = None) -> None:
    payload = _payload_bytes(weights.values)
    data = b"".join(
        [
            bytes([FORMAT_VERSION]),
            _LENGTH.pack(len(weights)),
            payload,
            _CRC.pack(zlib.crc32(payload)),
        ]
    )
    _write_bytes(path, data, storage_options or {})


def load_sample_weights(path: str, storage_options: dict = None) -> SampleWeights:
    data = _read_bytes(path, storage_options or {})
    _check_version(data, path)
    try:
        (n,) = _LENGTH.unpack_from(data, 1)
    except struct.error as err:
        raise ChecksumError(f"{path} is truncated inside its header.", path=path) from err
    return SampleWeights(_read_payload(data, 1 + _LENGTH.size, n, path))


def _builtin(value: typing.Any) -> typing.Any:
    """
    Numpy scalars to Python scalars, recursively, so that YAML stays plain.
    """
    if isinstance(value, dict):
        return {k: _builtin(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_builtin(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def save_run(record: RunRecord, run_dir: str, storage_options: dict = None) -> None:
    """
    Write a run directory: one binary file per checkpoint, the final sample weights, a YAML
    manifest and the segment timings.

    Identical runs produce byte-identical manifests; wall-clock timings live in their own file.
    """
    storage_options = storage_options or {}
    fs, root = fsspec.core.url_to_fs(run_dir, **storage_options)
    try:
        fs.makedirs(root, exist_ok=True)
    except OSError as err:
        raise StorageError(f"Unable to create run directory {run_dir}: {err}", path=run_dir) from err

    references = []
    for index, checkpoint in enumerate(record.checkpoints, start=1):
        name = checkpoint_name(index)
        save_checkpoint(checkpoint, _join(run_dir, name), storage_options)
        references.append(
            {
                "file": name,
                "step": checkpoint.step,
                "lambda": checkpoint.lambda_,
                "error": checkpoint.error,
                "z": checkpoint.z,
            }
        )
    if record.sample_weights is not None:
        save_sample_weights(record.sample_weights, _join(run_dir, WEIGHTS_NAME), storage_options)

    manifest = {
        "format_version": FORMAT_VERSION,
        "method": record.method,
        "seed": record.seed,
        "config": record.config,
        "checkpoints": references,
        "sample_weights": WEIGHTS_NAME if record.sample_weights is not None else None,
        "z_history": record.z_history,
        "rejected": record.rejected,
        "metrics": record.metrics,
    }
    text = yaml.safe_dump(_builtin(manifest), sort_keys=False)
    _write_bytes(_join(run_dir, MANIFEST_NAME), text.encode(), storage_options)
    timings = yaml.safe_dump(_builtin(record.timings), sort_keys=False)
    _write_bytes(_join(run_dir, TIMINGS_NAME), timings.encode(), storage_options)
    logger.info("Saved %d checkpoint(s) to %s", len(record.checkpoints), run_dir)


def _read_manifest(run_dir: str, storage_options: dict) -> dict[str, typing.Any]:
    path = _join(run_dir, MANIFEST_NAME)
    try:
        manifest = yaml.safe_load(_read_bytes(path, storage_options))
    except yaml.YAMLError as err:
        raise CheckpointFormatError(f"Unable to parse {path}: {err}", path=path) from err
    if not isinstance(manifest, dict):
        raise CheckpointFormatError(f"{path} is not a run manifest.", path=path)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path} has format version {manifest.get('format_version')}; this version reads "
            f"{FORMAT_VERSION}.",
            path=path,
        )
    return manifest


def load_run(run_dir: str, storage_options: dict = None) -> RunRecord:
    """
    Read a run directory written by :py:func:`save_run`.

    Raises
    ------
    DanglingReferenceError
        If the manifest names a checkpoint or weights file that does not exist.
    """
    storage_options = storage_options or {}
    fs, _ = fsspec.core.url_to_fs(run_dir, **storage_options)
    manifest = _read_manifest(run_dir, storage_options)

    def existing(name: str) -> str:
        path = _join(run_dir, name)
        if not fs.exists(path):
            raise DanglingReferenceError(
                f"Manifest in {run_dir} references {name}, which does not exist.", path=path
            )
        return path

    checkpoints = [
        load_checkpoint(existing(ref["file"]), storage_options) for ref in manifest["checkpoints"]
    ]
    sample_weights = None
    if manifest.get("sample_weights"):
        sample_weights = load_sample_weights(existing(manifest["sample_weights"]), storage_options)

    timings = []
    timings_path = _join(run_dir, TIMINGS_NAME)
    if fs.exists(timings_path):
        timings = yaml.safe_load(_read_bytes(timings_path, storage_options)) or []

    return RunRecord(
        method=manifest["method"],
        seed=manifest["seed"],
        config=manifest["config"],
        checkpoints=checkpoints,
        metrics=manifest.get("metrics") or [],
        z_history=manifest.get("z_history") or [],
        rejected=manifest.get("rejected") or [],
        sample_weights=sample_weights,
        timings=timings,
    )


def load_ensemble(run_dir: str, storage_options: dict = None) -> EnsembleModel:
    return load_run(run_dir, storage_options).ensemble()
