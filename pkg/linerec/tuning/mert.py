# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Minimum error rate tuning of the log-linear decoding weights.

Coordinate descent over a geometric grid: each non-CTC weight in turn is
swept while the others stay fixed. The sweep picks the argmin of the pooled
dev CER, ties going to the smaller magnitude, and that value replaces the
current one only if it strictly lowers the CER. A candidate that merely ties
the current value is not taken, so a weight vector that is already optimal
is a fixed point. The CTC weight is pinned to 1 as the scale of the cost.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..decoding.ctc import FrameLogits, LogLinearWeights, decode_fused
from ..metrics import levenshtein
from ..support.exceptions import InputError, ParameterError
from ..support.logging import tuning_logger as logger

__all__ = [
    "TUNABLE_WEIGHTS",
    "DevExample",
    "TuneConfig",
    "TuneReport",
    "TuneStep",
    "candidate_values",
    "dev_error",
    "mert_tune",
]

TUNABLE_WEIGHTS = ("lm", "prior", "new_char", "blank", "repeat")


@dataclass
class DevExample:
    logits: FrameLogits
    truth: str


@dataclass(frozen=True)
class TuneConfig:
    grid_points: int = 17
    grid_low: float = 1e-2
    grid_high: float = 1e2
    max_rounds: int = 10
    beam_width: int = 8
    # Weights swept each round; the rest keep their initial value.
    tune: Tuple[str, ...] = TUNABLE_WEIGHTS
    workers: int = 1

    def __post_init__(self):
        if self.grid_points < 1:
            raise ParameterError("grid_points must be >= 1")
        if not 0 < self.grid_low < self.grid_high:
            raise ParameterError("grid needs 0 < grid_low < grid_high")
        if self.max_rounds < 1:
            raise ParameterError("max_rounds must be >= 1")
        unknown = set(self.tune) - set(TUNABLE_WEIGHTS)
        if unknown:
            raise ParameterError(f"Cannot tune {sorted(unknown)}")


@dataclass(frozen=True)
class TuneStep:
    round: int
    weight: str
    value: float
    error: float


@dataclass
class TuneReport:
    weights: LogLinearWeights
    cer_before: float
    cer_after: float
    rounds: int
    trajectory: List[TuneStep] = field(default_factory=list)


def _decode_errors(
    example: DevExample, lm, w: LogLinearWeights, beam_width: int
) -> Tuple[int, int]:
    pred = decode_fused(example.logits, lm, w, beam_width)
    return levenshtein(pred, example.truth), max(1, len(example.truth))


def dev_error(
    examples: Sequence[DevExample],
    lm,
    w: LogLinearWeights,
    *,
    beam_width: int = 8,
    workers: int = 1,
) -> float:
    """Pooled CER of fused decoding over the dev set."""
    if not examples:
        raise InputError("Development set is empty")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(
                executor.map(lambda ex: _decode_errors(ex, lm, w, beam_width), examples)
            )
    else:
        results = [_decode_errors(ex, lm, w, beam_width) for ex in examples]
    distance = sum(d for d, _ in results)
    length = sum(n for _, n in results)
    return distance / length


def candidate_values(current: float, config: TuneConfig) -> List[float]:
    """Geometric grid around ``current`` (around 1 when it is 0), plus 0."""
    scale = current if current != 0.0 else 1.0
    grid = np.geomspace(config.grid_low, config.grid_high, config.grid_points) * scale
    values = [0.0] + [float(v) for v in grid]
    if current not in values:
        values.append(current)
    return values


def mert_tune(
    examples: Sequence[DevExample],
    lm,
    init: LogLinearWeights,
    config: Optional[TuneConfig] = None,
) -> TuneReport:
    config = config or TuneConfig()
    if init.ctc <= 0.0:
        raise ParameterError(f"ctc weight must be > 0, got {init.ctc}")
    # Costs are scale-free; rescaling keeps every decision and pins ctc to 1.
    current = LogLinearWeights(**{k: v / init.ctc for k, v in init.to_dict().items()})
    current.ctc = 1.0

    memo: Dict[Tuple[float, ...], float] = {}

    def evaluate(w: LogLinearWeights) -> float:
        key = w.key()
        if key not in memo:
            memo[key] = dev_error(
                examples, lm, w, beam_width=config.beam_width, workers=config.workers
            )
        return memo[key]

    before = evaluate(current)
    error = before
    logger.info("MERT start: dev CER %.6f with %r", before, current)
    trajectory: List[TuneStep] = []
    rounds = 0
    for rounds in range(1, config.max_rounds + 1):
        improved = False
        for name in config.tune:
            value = getattr(current, name)
            scored = [
                (evaluate(current.replace(**{name: v})), abs(v), v)
                for v in candidate_values(value, config)
            ]
            best_error, _, best_value = min(scored)
            if best_error < error:
                current = current.replace(**{name: best_value})
                error = best_error
                improved = True
                trajectory.append(TuneStep(rounds, name, best_value, error))
                logger.debug("round %d: %s=%g -> CER %.6f", rounds, name, best_value, error)
        if not improved:
            break
    logger.info("MERT done after %d round(s): dev CER %.6f", rounds, error)
    return TuneReport(
        weights=current,
        cer_before=before,
        cer_after=error,
        rounds=rounds,
        trajectory=trajectory,
    )
