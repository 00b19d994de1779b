# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Model bundles: a config plus named float32 weights in one TLRW file.

Layout (little-endian)::

    "TLRW"  u32 version
    u32 config length, UTF-8 JSON config
    u32 tensor count
    per tensor: u16 name length, UTF-8 name, u8 rank, u32 dims[rank], f32 data

Loading checks every tensor against the shapes the config implies.
"""

from pathlib import Path
import struct
from typing import BinaryIO, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn

from ..models.config import ModelConfig
from ..models.recognizer import LineRecognizer
from ..ops.random import Rng
from ..support.exceptions import (
    BadMagicError,
    ConfigError,
    FormatError,
    MissingWeightError,
    TruncatedFileError,
    UnexpectedWeightError,
    UnsupportedVersionError,
    WeightShapeError,
)
from ..support.logging import pipeline_logger as logger

__all__ = [
    "INIT_RANGE",
    "ModelBundle",
    "WeightArchive",
    "WeightArchiveBuilder",
    "init_random",
    "load_model",
    "save_model",
]

BUNDLE_MAGIC = b"TLRW"
BUNDLE_VERSION = 1
INIT_RANGE = 0.08

# A loaded bundle is the recognizer module itself.
ModelBundle = LineRecognizer


################################################################################
# Archive I/O
################################################################################


class WeightArchiveBuilder:
    """Accumulates named tensors and writes them as a TLRW file."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self._tensors: List[Tuple[str, torch.Tensor]] = []

    def add_tensor(self, name: str, tensor: torch.Tensor):
        self._tensors.append((name, tensor.detach().to(torch.float32).contiguous()))

    def add_module(self, module: nn.Module):
        for name, p in module.named_parameters():
            self.add_tensor(name, p)

    def save(self, file_path: Union[str, Path]):
        config = self.config.to_json().encode("utf-8")
        with open(file_path, "wb") as f:
            f.write(BUNDLE_MAGIC)
            f.write(struct.pack("<II", BUNDLE_VERSION, len(config)))
            f.write(config)
            f.write(struct.pack("<I", len(self._tensors)))
            for name, t in self._tensors:
                raw_name = name.encode("utf-8")
                f.write(struct.pack("<H", len(raw_name)))
                f.write(raw_name)
                f.write(struct.pack("<B", t.dim()))
                f.write(struct.pack(f"<{t.dim()}I", *t.shape))
                f.write(t.numpy().astype("<f4", copy=False).tobytes())


class WeightArchive:
    """Reads a TLRW file into its config and named CPU tensors."""

    def __init__(self, file_path: Union[str, Path]):
        self.path = file_path
        self.config: ModelConfig
        self.tensors: List[Tuple[str, torch.Tensor]] = []
        with open(file_path, "rb") as f:
            self._load(f)

    def _read(self, f: BinaryIO, n: int, what: str) -> bytes:
        data = f.read(n)
        if len(data) != n:
            raise TruncatedFileError(self.path, what)
        return data

    def _load(self, f: BinaryIO):
        magic = f.read(len(BUNDLE_MAGIC))
        if magic != BUNDLE_MAGIC:
            raise BadMagicError(self.path, BUNDLE_MAGIC, magic)
        (version,) = struct.unpack("<I", self._read(f, 4, "version"))
        if version != BUNDLE_VERSION:
            raise UnsupportedVersionError(self.path, version, BUNDLE_VERSION)
        (config_len,) = struct.unpack("<I", self._read(f, 4, "config length"))
        try:
            config_text = self._read(f, config_len, "config").decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"{self.path}: config is not UTF-8: {e}") from e
        try:
            self.config = ModelConfig.from_json(config_text)
        except ConfigError as e:
            raise FormatError(f"{self.path}: embedded config is invalid: {e}") from e
        (count,) = struct.unpack("<I", self._read(f, 4, "tensor count"))
        for i in range(count):
            (name_len,) = struct.unpack("<H", self._read(f, 2, f"tensor {i} name"))
            name = self._read(f, name_len, f"tensor {i} name").decode("utf-8")
            (rank,) = struct.unpack("<B", self._read(f, 1, f"'{name}' rank"))
            dims = struct.unpack(f"<{rank}I", self._read(f, 4 * rank, f"'{name}' dims"))
            numel = int(np.prod(dims)) if rank else 1
            data = self._read(f, 4 * numel, f"'{name}' data")
            array = np.frombuffer(data, dtype="<f4").astype(np.float32).reshape(dims)
            self.tensors.append((name, torch.from_numpy(array)))
        if f.read(1):
            raise FormatError(f"{self.path}: trailing bytes after {count} tensors")

    def items(self) -> Iterator[Tuple[str, torch.Tensor]]:
        return iter(self.tensors)

    def __repr__(self):
        return f"WeightArchive({self.path}, tensors={len(self.tensors)})"


################################################################################
# Bundles
################################################################################


def save_model(file_path: Union[str, Path], model: LineRecognizer):
    """One shot save of a recognizer's config and parameters."""
    builder = WeightArchiveBuilder(model.config)
    builder.add_module(model)
    builder.save(file_path)


def load_model(file_path: Union[str, Path]) -> ModelBundle:
    archive = WeightArchive(file_path)
    model = LineRecognizer(archive.config)
    params: Dict[str, nn.Parameter] = dict(model.named_parameters())
    seen = set()
    for name, tensor in archive.items():
        target = params.get(name)
        if target is None or name in seen:
            raise UnexpectedWeightError(name)
        if tuple(target.shape) != tuple(tensor.shape):
            raise WeightShapeError(name, tuple(target.shape), tuple(tensor.shape))
        with torch.no_grad():
            target.copy_(tensor)
        seen.add(name)
    for name in params:
        if name not in seen:
            raise MissingWeightError(name)
    logger.debug(
        "Loaded %s: %d tensors, %d parameters",
        file_path,
        len(seen),
        model.parameter_count(),
    )
    return model


def init_random(
    config: ModelConfig,
    seed: int = 0,
    file_path: Optional[Union[str, Path]] = None,
) -> ModelBundle:
    """Fills every weight uniformly in [-0.08, 0.08) from a seeded stream.

    Tensors draw from one ``Rng(seed)`` in ``named_parameters()`` order, so
    the same config and seed always give the same bytes.
    """
    config.validate()
    model = LineRecognizer(config)
    rng = Rng(seed)
    with torch.no_grad():
        for _, p in model.named_parameters():
            p.copy_(rng.uniform(p.shape, -INIT_RANGE, INIT_RANGE))
    if file_path is not None:
        save_model(file_path, model)
    return model
