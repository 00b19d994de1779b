# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Fixed-width overlapping chunks for arbitrary-width lines.

A line of width ``W`` is cut into cores of ``C = chunk_width - 2P`` pixels.
Each chunk reads its core plus ``P`` pixels on either side, so every read
window is exactly ``chunk_width`` wide; reads outside the line (including
the tail of the last chunk) are synthesized by the padding policy. After
the per-chunk network, only the frames under each core are kept and
concatenated back into ``W / stride`` frames.
"""

from dataclasses import dataclass
import math
from typing import List, Sequence, Tuple

import torch
import torch.nn.functional as F

from ..models.config import PaddingPolicy
from ..support import debugging
from ..support.exceptions import DimensionError, InputError, ParameterError
from ..support.logging import pipeline_logger as logger

__all__ = [
    "ChunkPlan",
    "ChunkSpan",
    "merge_valid",
    "pad_columns",
    "plan_chunks",
    "split",
]

CHUNK_WIDTH_PX = 320
FRAME_STRIDE = 4


@dataclass(frozen=True)
class ChunkSpan:
    core_start: int
    core_end: int
    read_start: int
    read_end: int
    valid_frames: Tuple[int, int]

    @property
    def core_width(self) -> int:
        return self.core_end - self.core_start


@dataclass(frozen=True)
class ChunkPlan:
    width: int
    pad: int
    chunk_width: int
    frame_stride: int
    chunks: Tuple[ChunkSpan, ...]

    @property
    def core_px(self) -> int:
        return self.chunk_width - 2 * self.pad

    @property
    def num_chunks(self) -> int:
        return len(self.chunks)

    @property
    def total_frames(self) -> int:
        return self.width // self.frame_stride

    @property
    def frames_per_chunk(self) -> int:
        return self.chunk_width // self.frame_stride

    @property
    def tail_pad(self) -> int:
        """Columns synthesized right of the line for the last read window."""
        return self.chunks[-1].read_end - self.width

    def verify(self):
        cursor = 0
        frames = 0
        for span in self.chunks:
            assert span.core_start == cursor, f"gap or overlap at {cursor}"
            assert span.read_end - span.read_start == self.chunk_width
            lo, hi = span.valid_frames
            assert hi - lo == span.core_width // self.frame_stride
            cursor = span.core_end
            frames += hi - lo
        assert cursor == self.width, f"cores end at {cursor}, line at {self.width}"
        assert frames == self.total_frames


def plan_chunks(
    width: int,
    pad: int,
    chunk_width: int = CHUNK_WIDTH_PX,
    frame_stride: int = FRAME_STRIDE,
) -> ChunkPlan:
    if chunk_width <= 0 or chunk_width % frame_stride != 0:
        raise ParameterError(
            f"chunk width {chunk_width} must be a positive multiple of {frame_stride}"
        )
    if pad % frame_stride != 0:
        raise ParameterError(f"chunk padding {pad} is not a multiple of {frame_stride}")
    if not 0 <= pad < chunk_width // 2:
        raise ParameterError(f"chunk padding {pad} must be within [0, {chunk_width // 2})")
    if width < 1 or width % frame_stride != 0:
        raise DimensionError(f"line width {width} must be a positive multiple of {frame_stride}")

    core = chunk_width - 2 * pad
    count = math.ceil(width / core)
    first_valid = pad // frame_stride
    spans = []
    for i in range(count):
        core_start = i * core
        core_end = min(core_start + core, width)
        read_start = core_start - pad
        spans.append(
            ChunkSpan(
                core_start=core_start,
                core_end=core_end,
                read_start=read_start,
                read_end=read_start + chunk_width,
                valid_frames=(
                    first_valid,
                    first_valid + (core_end - core_start) // frame_stride,
                ),
            )
        )
    plan = ChunkPlan(width, pad, chunk_width, frame_stride, tuple(spans))
    if not debugging.NDEBUG:
        plan.verify()
    logger.debug("Chunk plan: W=%d P=%d C=%d k=%d", width, pad, core, count)
    return plan


def pad_columns(
    image: torch.Tensor, left: int, right: int, policy: PaddingPolicy
) -> torch.Tensor:
    """Pads an ``H x W x C`` image along its width."""
    if left == 0 and right == 0:
        return image
    nchw = image.permute(2, 0, 1).unsqueeze(0)
    if PaddingPolicy(policy) == PaddingPolicy.EDGE:
        padded = F.pad(nchw, (left, right, 0, 0), mode="replicate")
    else:
        padded = F.pad(nchw, (left, right, 0, 0), mode="constant", value=0.0)
    return padded.squeeze(0).permute(1, 2, 0).contiguous()


def split(image: torch.Tensor, plan: ChunkPlan, policy: PaddingPolicy) -> List[torch.Tensor]:
    if image.dim() != 3 or image.shape[1] != plan.width:
        raise InputError(
            f"image of shape {tuple(image.shape)} does not match a plan for width {plan.width}"
        )
    padded = pad_columns(image, plan.pad, plan.tail_pad, policy)
    # Column x of the line sits at x + pad in the padded image.
    return [
        padded[:, span.read_start + plan.pad : span.read_end + plan.pad, :]
        for span in plan.chunks
    ]


def merge_valid(features: Sequence[torch.Tensor], plan: ChunkPlan) -> torch.Tensor:
    if len(features) != plan.num_chunks:
        raise InputError(f"expected {plan.num_chunks} chunk outputs, got {len(features)}")
    pieces = []
    for i, (f, span) in enumerate(zip(features, plan.chunks)):
        if f.dim() != 2 or f.shape[0] != plan.frames_per_chunk:
            raise InputError(
                f"chunk {i} has shape {tuple(f.shape)}, "
                f"expected {plan.frames_per_chunk} frames"
            )
        lo, hi = span.valid_frames
        pieces.append(f[lo:hi])
    return torch.cat(pieces, dim=0)
