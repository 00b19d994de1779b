# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Per-stage latency of randomly initialized model variants.

A variant is ``preset[:decoder]``, e.g. ``sa-ctc:greedy`` or
``sa-transformer``. Every variant recognizes the same synthetic line of the
requested width; Transformer variants use that width as their fixed input
width so that all variants see the same pixels. Reported figures are
medians over the repetitions, in milliseconds.
"""

import csv
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, TextIO

import numpy as np

from ..decoding.ctc import DEFAULT_BEAM_WIDTH, LogLinearWeights
from ..models.presets import DEFAULT_ALPHABET, PRESETS, preset_config
from ..models.recognizer import LineRecognizer
from ..ops.random import Rng
from ..support.exceptions import ParameterError
from ..support.logging import pipeline_logger as logger
from .bundle import init_random
from .recognize import DecoderKind, recognize_line

__all__ = [
    "BENCH_COLUMNS",
    "BenchRow",
    "BenchVariant",
    "bench",
    "parse_variant",
    "write_bench_csv",
]

BENCH_COLUMNS = [
    "variant",
    "width",
    "reps",
    "params",
    "backbone_ms",
    "encoder_ms",
    "decoder_ms",
    "total_ms",
]


@dataclass(frozen=True)
class BenchVariant:
    preset: str
    decoder: DecoderKind

    @property
    def name(self) -> str:
        return f"{self.preset}:{self.decoder.value}"


@dataclass(frozen=True)
class BenchRow:
    variant: str
    width: int
    reps: int
    params: int
    backbone_ms: float
    encoder_ms: float
    decoder_ms: float

    @property
    def total_ms(self) -> float:
        return self.backbone_ms + self.encoder_ms + self.decoder_ms


def parse_variant(text: str) -> BenchVariant:
    preset, _, decoder = text.partition(":")
    if preset not in PRESETS:
        raise ParameterError(f"Unknown preset '{preset}' in variant '{text}'")
    if not decoder:
        decoder = "transformer" if preset.endswith("transformer") else "greedy"
    try:
        kind = DecoderKind(decoder)
    except ValueError:
        raise ParameterError(f"Unknown decoder '{decoder}' in variant '{text}'")
    return BenchVariant(preset, kind)


def bench(
    variants: Sequence[BenchVariant],
    width: int = 320,
    repetitions: int = 5,
    *,
    seed: int = 0,
    alphabet: str = DEFAULT_ALPHABET,
    lm=None,
    weights: Optional[LogLinearWeights] = None,
    beam_width: int = DEFAULT_BEAM_WIDTH,
) -> List[BenchRow]:
    if repetitions < 3:
        raise ParameterError(f"bench needs at least 3 repetitions, got {repetitions}")
    if width < 4 or width % 4:
        raise ParameterError(f"bench width must be a positive multiple of 4, got {width}")
    line = Rng(seed).uniform((40, width, 1), -1.0, 1.0)
    models: Dict[str, LineRecognizer] = {}
    rows = []
    for variant in variants:
        model = models.get(variant.preset)
        if model is None:
            model = models[variant.preset] = init_random(
                preset_config(variant.preset, alphabet), seed
            )
        samples = []
        for _ in range(repetitions):
            result = recognize_line(
                line,
                model,
                lm,
                weights,
                decoder=variant.decoder,
                beam_width=beam_width,
                max_width=width,
            )
            samples.append(result.timings)
        medians = np.median(np.asarray(samples, dtype=np.float64), axis=0) * 1000.0
        row = BenchRow(
            variant=variant.name,
            width=width,
            reps=repetitions,
            params=model.parameter_count(),
            backbone_ms=float(medians[0]),
            encoder_ms=float(medians[1]),
            decoder_ms=float(medians[2]),
        )
        logger.info("%s: %.3f ms total", row.variant, row.total_ms)
        rows.append(row)
    return rows


def write_bench_csv(rows: Sequence[BenchRow], f: TextIO):
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for r in rows:
        writer.writerow(
            [
                r.variant,
                r.width,
                r.reps,
                r.params,
                f"{r.backbone_ms:.4f}",
                f"{r.encoder_ms:.4f}",
                f"{r.decoder_ms:.4f}",
                f"{r.total_ms:.4f}",
            ]
        )
