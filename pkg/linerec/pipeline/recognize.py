# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Single-line recognition.

CTC models run chunked: the line is split into overlapping fixed-width
chunks, each goes through the backbone and encoder, and the valid frames are
merged before the logits head and the selected CTC decoder. Transformer
models see one fixed-width input: wider lines are squeezed to the maximum
width (unless the resize policy is ``none``), narrower ones are padded.
"""

import enum
import time
from typing import NamedTuple, Optional, Union

import torch

from ..decoding.ctc import (
    DEFAULT_BEAM_WIDTH,
    FrameLogits,
    LogLinearWeights,
    decode_fused,
    greedy_decode,
    prefix_beam_search,
)
from ..models.config import PaddingPolicy, ResizePolicy
from ..models.recognizer import LineRecognizer
from ..models.transformer_decoder import greedy_generate
from ..support.exceptions import InputError, ParameterError
from ..support.logging import pipeline_logger as logger
from .chunking import merge_valid, pad_columns, plan_chunks, split
from .images import LineImage, resize_width

__all__ = [
    "DecoderKind",
    "RecognitionResult",
    "StageTimings",
    "line_logits",
    "recognize_line",
    "transformer_input",
]


class DecoderKind(str, enum.Enum):
    GREEDY = "greedy"
    BEAM = "beam"
    FUSED = "fused"
    TRANSFORMER = "transformer"


class StageTimings(NamedTuple):
    """Wall time per stage in seconds."""

    backbone: float = 0.0
    encoder: float = 0.0
    decoder: float = 0.0

    @property
    def total(self) -> float:
        return self.backbone + self.encoder + self.decoder


class RecognitionResult(NamedTuple):
    text: str
    timings: StageTimings
    # Frames presented to the decoder.
    frames: int
    # Width of the image the backbone actually saw (after resize/pad).
    input_width: int
    logits: Optional[FrameLogits] = None


class _Clock:
    def __init__(self):
        self.backbone = 0.0
        self.encoder = 0.0
        self.decoder = 0.0

    def timings(self) -> StageTimings:
        return StageTimings(self.backbone, self.encoder, self.decoder)


def _pixels(img: Union[LineImage, torch.Tensor]) -> torch.Tensor:
    pixels = img.pixels if isinstance(img, LineImage) else img
    if pixels.dim() != 3 or pixels.shape[1] == 0:
        raise InputError(f"expected a non-empty H x W x 1 line, got {tuple(pixels.shape)}")
    return pixels


def line_logits(
    img: Union[LineImage, torch.Tensor],
    model: LineRecognizer,
    *,
    chunk_pad: Optional[int] = None,
    _clock: Optional[_Clock] = None,
) -> FrameLogits:
    """Chunked backbone and encoder followed by the CTC head."""
    pixels = _pixels(img)
    config = model.config
    clock = _clock or _Clock()
    pad = config.chunk.pad_px if chunk_pad is None else chunk_pad
    plan = plan_chunks(
        pixels.shape[1],
        pad,
        chunk_width=config.chunk.width_px,
        frame_stride=config.backbone.frame_stride,
    )
    features = []
    with torch.no_grad():
        for chunk in split(pixels, plan, config.chunk.policy):
            start = time.perf_counter()
            frames = model.backbone_frames(chunk)
            mid = time.perf_counter()
            features.append(model.encode(frames))
            clock.backbone += mid - start
            clock.encoder += time.perf_counter() - mid
        start = time.perf_counter()
        result = model.frame_logits(merge_valid(features, plan))
        clock.encoder += time.perf_counter() - start
    return result


def transformer_input(
    pixels: torch.Tensor,
    max_width: int,
    resize_policy: ResizePolicy = ResizePolicy.RESIZE,
    pad_policy: PaddingPolicy = PaddingPolicy.EDGE,
) -> torch.Tensor:
    width = pixels.shape[1]
    if width > max_width:
        if ResizePolicy(resize_policy) == ResizePolicy.RESIZE:
            return resize_width(pixels, max_width)
        return pixels
    return pad_columns(pixels, 0, max_width - width, pad_policy)


def recognize_line(
    img: Union[LineImage, torch.Tensor],
    model: LineRecognizer,
    lm=None,
    weights: Optional[LogLinearWeights] = None,
    *,
    decoder: Optional[Union[str, DecoderKind]] = None,
    beam_width: int = DEFAULT_BEAM_WIDTH,
    max_width: Optional[int] = None,
    resize_policy: Optional[ResizePolicy] = None,
    chunk_pad: Optional[int] = None,
) -> RecognitionResult:
    if decoder is None:
        decoder = DecoderKind.GREEDY if model.is_ctc else DecoderKind.TRANSFORMER
    try:
        kind = DecoderKind(decoder)
    except ValueError:
        raise ParameterError(f"Unknown decoder '{decoder}'")
    if model.is_ctc == (kind == DecoderKind.TRANSFORMER):
        raise ParameterError(
            f"Decoder '{kind.value}' does not match a "
            f"{'CTC' if model.is_ctc else 'Transformer'} model"
        )
    if kind == DecoderKind.FUSED and (lm is None or weights is None):
        raise InputError("Fused decoding needs both a language model and weights")
    pixels = _pixels(img)
    clock = _Clock()

    if kind == DecoderKind.TRANSFORMER:
        config = model.config
        m = config.max_width if max_width is None else max_width
        policy = config.resize_policy if resize_policy is None else resize_policy
        x = transformer_input(pixels, m, policy, config.chunk.policy)
        with torch.no_grad():
            start = time.perf_counter()
            frames = model.backbone_frames(x)
            mid = time.perf_counter()
            encoded = model.encode(frames)
            end = time.perf_counter()
            decoder_module = model.decoder
            g = decoder_module.generation_config(config.decoder.max_output_len)
            text = greedy_generate(encoded, decoder_module, g, model.alphabet)
            clock.backbone = mid - start
            clock.encoder = end - mid
            clock.decoder = time.perf_counter() - end
        logger.debug(
            "transformer path: %d px -> %d px, %d frames",
            pixels.shape[1],
            x.shape[1],
            encoded.shape[0],
        )
        return RecognitionResult(text, clock.timings(), encoded.shape[0], x.shape[1])

    frame_logits = line_logits(pixels, model, chunk_pad=chunk_pad, _clock=clock)
    start = time.perf_counter()
    if kind == DecoderKind.GREEDY:
        text = greedy_decode(frame_logits)
    elif kind == DecoderKind.BEAM:
        text = prefix_beam_search(frame_logits, beam_width)[0][0]
    else:
        text = decode_fused(frame_logits, lm, weights, beam_width)  # type: ignore[arg-type]
    clock.decoder = time.perf_counter() - start
    return RecognitionResult(
        text, clock.timings(), frame_logits.num_frames, pixels.shape[1], frame_logits
    )
