# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Character N-gram language model with stupid-backoff scoring.

Every training line is prefixed with a single BOS symbol (U+0002). Count
tables hold every n-gram of order 1..N that ends on a real character, plus
the BOS unigram (one per line) which serves as the count of the BOS
context. Scores are unnormalized:

    S(c | ctx) = count(ctx c) / count(ctx)       if count(ctx c) > 0
               = alpha * S(c | ctx[1:])          otherwise
    S(c)       = count(c) / total, or the floor 1e-7 for unseen characters
"""

from collections import Counter
from dataclasses import dataclass
import math
from pathlib import Path
import struct
from typing import BinaryIO, Dict, Iterable, List, Optional, Tuple, Union

from ..models.config import BOS_SYMBOL
from ..support.exceptions import (
    BadMagicError,
    InputError,
    ParameterError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from ..support.logging import lm_logger as logger

__all__ = [
    "BOS_SYMBOL",
    "CharNGramLM",
    "LmState",
    "lm_score",
    "lm_sequence_logscore",
    "lm_train",
    "load_lm",
    "save_lm",
]

DEFAULT_ALPHA = 0.4
DEFAULT_ORDER = 9
UNSEEN_FLOOR = 1e-7

LM_MAGIC = b"TLLM"
LM_VERSION = 1


@dataclass(frozen=True)
class LmState:
    """The last ``min(N - 1, len)`` characters of a hypothesis (BOS included)."""

    history: str = ""


class CharNGramLM:
    def __init__(
        self,
        order: int,
        counts: List[Dict[str, int]],
        *,
        alpha: float = DEFAULT_ALPHA,
    ):
        if order < 1:
            raise ParameterError(f"LM order must be >= 1, got {order}")
        if len(counts) != order:
            raise ParameterError(f"Expected {order} count tables, got {len(counts)}")
        self.order = order
        self.alpha = alpha
        # counts[k - 1] maps an order-k n-gram string to its count.
        self.counts = counts
        self.total = sum(
            n for gram, n in counts[0].items() if gram != BOS_SYMBOL
        )
        self._alphabet = frozenset(g for g in counts[0] if g != BOS_SYMBOL)

    @property
    def alphabet(self) -> frozenset:
        return self._alphabet

    def count(self, gram: str) -> int:
        if not gram or len(gram) > self.order:
            return 0
        return self.counts[len(gram) - 1].get(gram, 0)

    def initial_state(self) -> LmState:
        if self.order == 1:
            return LmState("")
        return LmState(BOS_SYMBOL)

    def advance(self, state: LmState, c: str) -> LmState:
        if self.order == 1:
            return state
        return LmState((state.history + c)[-(self.order - 1) :])

    def with_alpha(self, alpha: float) -> "CharNGramLM":
        return CharNGramLM(self.order, self.counts, alpha=alpha)

    def unigram_logscore(self, c: str) -> float:
        """Log of the base-case score S(c), used as the character prior."""
        return _log(self._unigram(c))

    def _unigram(self, c: str) -> float:
        n = self.count(c) if c != BOS_SYMBOL else 0
        if n > 0 and self.total > 0:
            return n / self.total
        return UNSEEN_FLOOR

    def __repr__(self):
        sizes = ", ".join(str(len(t)) for t in self.counts)
        return f"CharNGramLM(order={self.order}, alpha={self.alpha}, entries=[{sizes}])"


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else float("-inf")


def lm_train(corpus: Iterable[str], order: int, *, alpha: float = DEFAULT_ALPHA) -> CharNGramLM:
    if order < 1:
        raise ParameterError(f"LM order must be >= 1, got {order}")
    counts: List[Counter] = [Counter() for _ in range(order)]
    lines = 0
    for line in corpus:
        line = line.rstrip("\r\n").replace(BOS_SYMBOL, "")
        lines += 1
        padded = BOS_SYMBOL + line
        counts[0][BOS_SYMBOL] += 1
        for end in range(1, len(padded)):
            for k in range(1, order + 1):
                start = end - k + 1
                if start < 0:
                    break
                counts[k - 1][padded[start : end + 1]] += 1
    if lines == 0:
        raise InputError("LM training corpus is empty")
    lm = CharNGramLM(order, [dict(c) for c in counts], alpha=alpha)
    logger.debug("Trained %r on %d lines", lm, lines)
    return lm


def lm_score(lm: CharNGramLM, state: LmState, c: str) -> float:
    """Natural-log stupid-backoff score of ``c`` following ``state``."""
    multiplier = 1.0
    ctx = state.history
    while ctx:
        numerator = lm.count(ctx + c)
        if numerator > 0:
            denominator = lm.count(ctx)
            if denominator > 0:
                return _log(multiplier * numerator / denominator)
        multiplier *= lm.alpha
        ctx = ctx[1:]
    return _log(multiplier * lm._unigram(c))


def lm_sequence_logscore(
    lm: CharNGramLM, text: str, state: Optional[LmState] = None
) -> float:
    """Sum of per-character scores from ``state`` (BOS by default)."""
    if state is None:
        state = lm.initial_state()
    total = 0.0
    for c in text:
        total += lm_score(lm, state, c)
        state = lm.advance(state, c)
    return total


################################################################################
# TLLM archives
#
# magic "TLLM", u32 version, u32 N, f64 alpha, then for each order 1..N:
# u64 entry count followed by entries (u16 len + UTF-8 context,
# u16 len + UTF-8 char, u64 count). All little-endian; entries sorted.
################################################################################


def save_lm(lm: CharNGramLM, path: Union[str, Path]):
    with open(path, "wb") as f:
        f.write(LM_MAGIC)
        f.write(struct.pack("<IId", LM_VERSION, lm.order, lm.alpha))
        for table in lm.counts:
            f.write(struct.pack("<Q", len(table)))
            for gram in sorted(table):
                ctx = gram[:-1].encode("utf-8")
                char = gram[-1].encode("utf-8")
                f.write(struct.pack("<H", len(ctx)))
                f.write(ctx)
                f.write(struct.pack("<H", len(char)))
                f.write(char)
                f.write(struct.pack("<Q", table[gram]))


def _read(f: BinaryIO, n: int, path, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise TruncatedFileError(path, what)
    return data


def _read_str(f: BinaryIO, path, what: str) -> str:
    (length,) = struct.unpack("<H", _read(f, 2, path, what))
    return _read(f, length, path, what).decode("utf-8")


def load_lm(path: Union[str, Path]) -> CharNGramLM:
    with open(path, "rb") as f:
        magic = f.read(len(LM_MAGIC))
        if magic != LM_MAGIC:
            raise BadMagicError(path, LM_MAGIC, magic)
        version, order, alpha = struct.unpack("<IId", _read(f, 16, path, "header"))
        if version != LM_VERSION:
            raise UnsupportedVersionError(path, version, LM_VERSION)
        counts: List[Dict[str, int]] = []
        for k in range(1, order + 1):
            (entries,) = struct.unpack("<Q", _read(f, 8, path, f"order {k} size"))
            table: Dict[str, int] = {}
            for _ in range(entries):
                ctx = _read_str(f, path, f"order {k} context")
                char = _read_str(f, path, f"order {k} char")
                (n,) = struct.unpack("<Q", _read(f, 8, path, f"order {k} count"))
                table[ctx + char] = n
            counts.append(table)
    return CharNGramLM(order, counts, alpha=alpha)
