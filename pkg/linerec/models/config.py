# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Architecture configuration for a line recognizer.

The configuration is a small tree of dataclasses serialized as a JSON
document with a fixed set of keys. Defaults reproduce the published
geometry: a 40 px, block-4 isometric backbone with 11 fused bottlenecks of
64 channels, a 4-head 256-wide encoder, 320 px chunks with 48 px of
padding on either side, and a 1024 px fixed width for the Transformer path.

The backbone and Transformer decoder depths are not pinned: the defaults
and every preset use 11 bottlenecks and 8 decoder layers, while other
non-negative (backbone) or positive (decoder) depths are accepted for
ablations and small test models. Encoder depths stay within their
published ranges.
"""

from dataclasses import asdict, dataclass, field, fields
import enum
import json
from pathlib import Path
from typing import Any, Dict, Type, TypeVar, Union

from ..support.exceptions import ConfigError

__all__ = [
    "BackboneConfig",
    "ChunkConfig",
    "DecoderConfig",
    "DecoderType",
    "EncoderConfig",
    "EncoderType",
    "ModelConfig",
    "PaddingPolicy",
    "PositionalEncoding",
    "ResizePolicy",
    "BOS_SYMBOL",
]

# Reserved context symbol used by the character LM; never part of an alphabet.
BOS_SYMBOL = "\x02"

SELF_ATTENTION_DEPTHS = (4, 8, 12, 16, 20)
GRCL_BLOCK_RANGE = range(1, 7)
BILSTM_DEPTH_RANGE = range(1, 4)


class EncoderType(str, enum.Enum):
    SELF_ATTENTION = "self_attention"
    GRCL = "grcl"
    BILSTM = "bilstm"


class DecoderType(str, enum.Enum):
    CTC = "ctc"
    TRANSFORMER = "transformer"


class PositionalEncoding(str, enum.Enum):
    RELATIVE = "relative"
    ABSOLUTE = "absolute"
    NONE = "none"


class PaddingPolicy(str, enum.Enum):
    ZERO = "zero"
    EDGE = "edge"


class ResizePolicy(str, enum.Enum):
    # Shrink lines wider than max_width, pad narrower ones.
    RESIZE = "resize"
    # Only pad; wider lines are fed at their natural width.
    NONE = "none"


E = TypeVar("E", bound=enum.Enum)


def _enum(enum_type: Type[E], value: Any, key: str) -> E:
    try:
        return enum_type(value)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_type)
        raise ConfigError(f"'{key}' must be one of [{allowed}], got {value!r}")


def _check(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


T = TypeVar("T")


def _from_section(cls: Type[T], d: Any, section: str) -> T:
    if not isinstance(d, dict):
        raise ConfigError(f"Config section '{section}' must be an object")
    known = {f.name for f in fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in '{section}': {', '.join(unknown)}")
    try:
        return cls(**d)
    except TypeError as e:
        raise ConfigError(f"Bad '{section}' section: {e}") from e


@dataclass
class BackboneConfig:
    height: int = 40
    block_size: int = 4
    channels: int = 64
    expansion: int = 8
    layers: int = 11
    kernel: int = 3

    @property
    def frame_stride(self) -> int:
        return self.block_size

    @property
    def collapse_height(self) -> int:
        return self.height // self.block_size

    def validate(self):
        _check(self.block_size >= 1, "backbone.block_size must be >= 1")
        _check(
            self.height % self.block_size == 0,
            "backbone.height must be divisible by backbone.block_size",
        )
        _check(self.channels >= 1, "backbone.channels must be >= 1")
        _check(self.expansion >= 1, "backbone.expansion must be >= 1")
        _check(self.layers >= 0, "backbone.layers must be >= 0")
        _check(self.kernel >= 1 and self.kernel % 2 == 1, "backbone.kernel must be odd")


@dataclass
class EncoderConfig:
    type: EncoderType = EncoderType.SELF_ATTENTION
    # Self-attention.
    layers: int = 4
    hidden: int = 256
    heads: int = 4
    ffn: int = 1024
    positional: PositionalEncoding = PositionalEncoding.RELATIVE
    # GRCL.
    blocks_per_set: int = 2
    iterations: int = 2
    # BiLSTM.
    depth: int = 2

    def __post_init__(self):
        self.type = _enum(EncoderType, self.type, "encoder.type")
        self.positional = _enum(PositionalEncoding, self.positional, "encoder.positional")

    def validate(self):
        if self.type == EncoderType.SELF_ATTENTION:
            _check(
                self.layers in SELF_ATTENTION_DEPTHS,
                f"encoder.layers must be one of {list(SELF_ATTENTION_DEPTHS)}",
            )
            _check(self.heads >= 1, "encoder.heads must be >= 1")
            _check(
                self.hidden % self.heads == 0,
                "encoder.hidden must be divisible by encoder.heads",
            )
        elif self.type == EncoderType.GRCL:
            _check(
                self.blocks_per_set in GRCL_BLOCK_RANGE,
                "encoder.blocks_per_set must be within 1..6",
            )
            _check(self.iterations >= 1, "encoder.iterations must be >= 1")
        else:
            _check(self.depth in BILSTM_DEPTH_RANGE, "encoder.depth must be within 1..3")


@dataclass
class DecoderConfig:
    type: DecoderType = DecoderType.CTC
    # Transformer decoder only.
    layers: int = 8
    hidden: int = 256
    heads: int = 4
    ffn: int = 1024
    max_positions: int = 256
    max_output_len: int = 128

    def __post_init__(self):
        self.type = _enum(DecoderType, self.type, "decoder.type")

    def validate(self):
        if self.type != DecoderType.TRANSFORMER:
            return
        _check(self.layers >= 1, "decoder.layers must be >= 1")
        _check(
            self.hidden % self.heads == 0,
            "decoder.hidden must be divisible by decoder.heads",
        )
        _check(self.max_output_len >= 1, "decoder.max_output_len must be >= 1")
        _check(
            self.max_output_len < self.max_positions,
            "decoder.max_output_len must leave room for BOS within max_positions",
        )


@dataclass
class ChunkConfig:
    width_px: int = 320
    pad_px: int = 48
    policy: PaddingPolicy = PaddingPolicy.EDGE

    def __post_init__(self):
        self.policy = _enum(PaddingPolicy, self.policy, "chunk.policy")

    def validate(self, frame_stride: int):
        _check(
            self.width_px > 0 and self.width_px % frame_stride == 0,
            f"chunk.width_px must be a positive multiple of {frame_stride}",
        )
        _check(
            0 <= self.pad_px < self.width_px // 2,
            "chunk.pad_px must be within [0, width_px / 2)",
        )
        _check(
            self.pad_px % frame_stride == 0,
            f"chunk.pad_px must be a multiple of {frame_stride}",
        )


@dataclass
class ModelConfig:
    alphabet: str
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    chunk: ChunkConfig = field(default_factory=ChunkConfig)
    max_width: int = 1024
    resize_policy: ResizePolicy = ResizePolicy.RESIZE

    def __post_init__(self):
        self.resize_policy = _enum(ResizePolicy, self.resize_policy, "resize_policy")

    @property
    def num_symbols(self) -> int:
        return len(self.alphabet)

    def validate(self) -> "ModelConfig":
        _check(len(self.alphabet) > 0, "alphabet must not be empty")
        dupes = sorted({c for c in self.alphabet if self.alphabet.count(c) > 1})
        _check(not dupes, f"alphabet has duplicate symbols: {dupes!r}")
        _check(BOS_SYMBOL not in self.alphabet, "alphabet must not contain U+0002")
        self.backbone.validate()
        self.encoder.validate()
        self.decoder.validate()
        self.chunk.validate(self.backbone.frame_stride)
        _check(
            self.max_width > 0 and self.max_width % self.backbone.frame_stride == 0,
            f"max_width must be a positive multiple of {self.backbone.frame_stride}",
        )
        return self

    def to_dict(self) -> Dict[str, Any]:
        def plain(v):
            return v.value if isinstance(v, enum.Enum) else v

        d = asdict(self)
        return json.loads(json.dumps(d, default=plain))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "ModelConfig":
        if not isinstance(d, dict):
            raise ConfigError("Model config must be a JSON object")
        d = dict(d)
        try:
            alphabet = d.pop("alphabet")
        except KeyError:
            raise ConfigError("Model config requires 'alphabet'")
        sections: Dict[str, Any] = {}
        for name, cls in (
            ("backbone", BackboneConfig),
            ("encoder", EncoderConfig),
            ("decoder", DecoderConfig),
            ("chunk", ChunkConfig),
        ):
            if name in d:
                sections[name] = _from_section(cls, d.pop(name), name)
        scalars = {k: d.pop(k) for k in ("max_width", "resize_policy") if k in d}
        if d:
            raise ConfigError(f"Unknown top-level config keys: {', '.join(sorted(d))}")
        if not isinstance(alphabet, str):
            raise ConfigError("'alphabet' must be a string")
        return ModelConfig(alphabet=alphabet, **sections, **scalars).validate()

    @staticmethod
    def from_json(text: str) -> "ModelConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Model config is not valid JSON: {e}") from e
        return ModelConfig.from_dict(d)

    @staticmethod
    def load(path: Union[str, Path]) -> "ModelConfig":
        return ModelConfig.from_json(Path(path).read_text(encoding="utf-8"))
