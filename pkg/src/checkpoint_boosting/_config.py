# Copyright 2026 checkpoint-boosting contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

import dataclasses
import logging
import os
import posixpath
import types
import typing
from dataclasses import dataclass, field

import fsspec
import tlz
import yaml

from ._boost import BoostConfig
from ._data import (
    Dataset,
    ImbalanceSpec,
    load_csv,
    load_idx,
    make_blobs,
    oversample_minority,
    split,
    step_imbalance,
)
from ._errors import ConfigError
from ._learner import LearnerConfig
from .core import METHODS, _plain

OUTPUT_ROOT_ENV = "CBNN_OUTPUT_ROOT"

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_ROOT = "runs"
DATA_SOURCES = ("blobs", "csv", "idx")


@dataclass(frozen=True)
class DataConfig:
    """
    Where the data comes from and how it is split.

    ``source`` is one of ``blobs`` (synthetic Gaussian clusters), ``csv`` (``path`` with the label in
    ``label_column``) or ``idx`` (``path`` holds images and ``labels_path`` labels). The test split
    is never rebalanced; ``oversample`` applies Random Minority Oversampling to the training split.
    """

    source: str = "blobs"
    path: str | None = None
    labels_path: str | None = None
    label_column: int = -1
    n_per_class: int = 200
    k: int = 3
    d: int = 2
    spread: float = 1.0
    center_box: tuple[float, float] = (-10.0, 10.0)
    data_seed: int = 0
    test_fraction: float = 0.2
    split_seed: int = 0
    stratified: bool = True
    oversample: bool = False

    def __post_init__(self):
        if self.source not in DATA_SOURCES:
            raise ValueError(f"source must be one of {list(DATA_SOURCES)}, received '{self.source}'.")
        if self.source in ("csv", "idx") and not self.path:
            raise ValueError(f"A '{self.source}' data source needs a path.")
        if self.source == "idx" and not self.labels_path:
            raise ValueError("An 'idx' data source needs a labels_path.")
        if not 0 < self.test_fraction < 1:
            raise ValueError(f"test_fraction must lie in (0, 1), received {self.test_fraction}.")

    def load(self) -> Dataset:
        if self.source == "csv":
            return load_csv(self.path, label_column=self.label_column)
        if self.source == "idx":
            return load_idx(self.path, self.labels_path)
        return make_blobs(
            self.n_per_class,
            self.k,
            self.d,
            self.spread,
            seed=self.data_seed,
            center_box=self.center_box,
        )


_SECTIONS = {
    "data": DataConfig,
    "boost": BoostConfig,
    "learner": LearnerConfig,
    "imbalance": ImbalanceSpec,
}


def _coerce(value: typing.Any, hint: typing.Any, key: str) -> typing.Any:
    """
    Check ``value`` against a dataclass field annotation, converting lists to tuples and ints to
    floats where the annotation asks for them.
    """
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        (inner,) = [a for a in args if a is not type(None)]
        return _coerce(value, inner, key)
    if origin is tuple:
        if not isinstance(value, list | tuple):
            raise ConfigError(f"'{key}' must be a list, received {value!r}.")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0], key) for v in value)
        if len(value) != len(args):
            raise ConfigError(f"'{key}' must have {len(args)} entries, received {value!r}.")
        return tuple(_coerce(v, a, key) for v, a in zip(value, args))
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"'{key}' must be true or false, received {value!r}.")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{key}' must be an integer, received {value!r}.")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ConfigError(f"'{key}' must be a number, received {value!r}.")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"'{key}' must be a string, received {value!r}.")
        return value
    return value


def _build_section(cls: type, mapping: typing.Any, section: str):
    if not isinstance(mapping, dict):
        raise ConfigError(f"Section '{section}' must be a mapping, received {mapping!r}.")
    hints = typing.get_type_hints(cls)
    unknown = sorted(set(mapping) - set(hints))
    if unknown:
        raise ConfigError(
            f"Unknown key(s) {unknown} in section '{section}'; valid keys are {sorted(hints)}."
        )
    values = {k: _coerce(v, hints[k], f"{section}.{k}") for k, v in mapping.items()}
    try:
        return cls(**values)
    except ValueError as err:
        raise ConfigError(f"Invalid '{section}' settings: {err}") from err


@dataclass(frozen=True)
class RunConfigDocument:
    """
    A complete, validated description of one training run.

    Parameters
    ----------
    method: str
        ``cbnn``, ``single`` or ``horizontal``.
    seed: int
        Seed for initialisation and mini-batch order (overrides ``boost.seed``).
    output_dir: str, optional
        Run directory; defaults to ``<root>/<method>-seed<seed>`` with ``root`` taken from the
        ``CBNN_OUTPUT_ROOT`` environment variable (``runs`` when unset).
    data, boost, learner, imbalance:
        Section settings; ``imbalance`` is optional and applies to the training split only.
    """

    method: str = "cbnn"
    seed: int = 0
    output_dir: str | None = None
    data: DataConfig = field(default_factory=DataConfig)
    boost: BoostConfig = field(default_factory=BoostConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    imbalance: ImbalanceSpec | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {sorted(METHODS)}, received '{self.method}'.")
        object.__setattr__(self, "boost", dataclasses.replace(self.boost, seed=self.seed))

    @classmethod
    def from_mapping(cls, mapping: dict[str, typing.Any] = None) -> "RunConfigDocument":
        """
        Build a document from nested mappings, rejecting unknown keys at every level.

        Raises
        ------
        ConfigError
            On unknown keys, values of the wrong type or invalid settings.
        """
        mapping = mapping or {}
        if not isinstance(mapping, dict):
            raise ConfigError(f"A run configuration must be a mapping, received {mapping!r}.")
        top_level = {"method": str, "seed": int, "output_dir": str | None}
        unknown = sorted(set(mapping) - set(top_level) - set(_SECTIONS))
        if unknown:
            raise ConfigError(
                f"Unknown key(s) {unknown}; valid keys are {sorted([*top_level, *_SECTIONS])}."
            )
        kwargs = {k: _coerce(mapping[k], hint, k) for k, hint in top_level.items() if k in mapping}
        for section, section_cls in _SECTIONS.items():
            if mapping.get(section) is not None:
                kwargs[section] = _build_section(section_cls, mapping[section], section)
        try:
            return cls(**kwargs)
        except ValueError as err:
            raise ConfigError(str(err)) from err

    @classmethod
    def from_yaml(
        cls, path: str, storage_options: dict[str, typing.Any] = None
    ) -> "RunConfigDocument":
        return cls.from_mapping(read_yaml_mapping(path, storage_options))

    def to_mapping(self) -> dict[str, typing.Any]:
        """
        The fully defaulted document as plain nested dicts and lists.
        """
        mapping = _plain(self)
        del mapping["boost"]["seed"]
        return mapping

    def with_overrides(self, overrides: dict[str, typing.Any]) -> "RunConfigDocument":
        """
        Return a new document with ``overrides`` (same nesting as :py:meth:`to_mapping`) applied on
        top of this one.
        """
        return self.from_mapping(merge_mappings(self.to_mapping(), overrides))

    @property
    def run_dir(self) -> str:
        if self.output_dir:
            return self.output_dir
        root = os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT)
        return posixpath.join(root, f"{self.method}-seed{self.seed}")

    def prepare_data(self) -> tuple[Dataset, Dataset]:
        """
        Load the data and split it into (train, test). Step imbalance and oversampling, when
        requested, change the training split only.
        """
        dataset = self.data.load()
        train, test = split(
            dataset,
            self.data.test_fraction,
            seed=self.data.split_seed,
            stratified=self.data.stratified,
        )
        if self.imbalance is not None:
            train = step_imbalance(train, self.imbalance)
        if self.data.oversample:
            train = oversample_minority(train, seed=self.data.split_seed)
        return train, test


def merge_mappings(
    base: dict[str, typing.Any], overrides: dict[str, typing.Any]
) -> dict[str, typing.Any]:
    """
    Merge ``overrides`` into ``base`` one section deep; override values win.
    """
    merged = tlz.merge(base, {k: v for k, v in overrides.items() if not isinstance(v, dict)})
    for key, value in overrides.items():
        if isinstance(value, dict):
            merged[key] = tlz.merge(base.get(key) or {}, value)
    return merged


def read_yaml_mapping(path: str, storage_options: dict[str, typing.Any] = None) -> dict:
    """
    Read a YAML document through fsspec, requiring a mapping at the top level.
    """
    try:
        with fsspec.open(path, mode="rt", **(storage_options or {})) as fobj:
            mapping = yaml.safe_load(fobj)
    except FileNotFoundError as err:
        raise ConfigError(f"Config file '{path}' does not exist.") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"Unable to parse config file '{path}': {err}") from err
    logger.debug("Read config file %s", path)
    if mapping is None:
        return {}
    if not isinstance(mapping, dict):
        raise ConfigError(f"Config file '{path}' must hold a mapping, received {type(mapping).__name__}.")
    return mapping
