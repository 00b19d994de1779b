# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Recognition metrics: edit distance, CER, WPA and width-bucketed reports.

CER is case-sensitive over Unicode scalar values and pools distances over
truth lengths (micro-average). A record with an empty truth scores
``len(prediction)``, i.e. it weighs as one truth character, and is flagged
in the report. Buckets and the aggregate share these weights, so the
weighted mean of the bucket CERs is the aggregate CER.
"""

import csv
from dataclasses import dataclass, field
import io
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Union

from .support.exceptions import DataError, InputError

__all__ = [
    "BUCKET_PX",
    "BucketStat",
    "EvalRecord",
    "EvalReport",
    "bucketed_cer",
    "cer",
    "levenshtein",
    "read_predictions",
    "word_errors",
    "wpa",
    "write_predictions",
]

BUCKET_PX = 100


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Minimal number of insertions, deletions and substitutions."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        current = [i]
        for j, y in enumerate(b, 1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (x != y),
                )
            )
        previous = current
    return previous[-1]


def cer(pred: str, truth: str) -> float:
    distance = levenshtein(pred, truth)
    if not truth:
        return float(distance)
    return distance / len(truth)


def _words(text: str) -> List[str]:
    return text.casefold().split()


def word_errors(pred: str, truth: str) -> int:
    return levenshtein(_words(pred), _words(truth))


@dataclass
class EvalRecord:
    prediction: str
    truth: str
    width: int
    path: str = ""
    # The image could not be read; prediction is empty by convention.
    failed: bool = False

    def __post_init__(self):
        if self.width <= 0:
            raise InputError(f"EvalRecord width must be > 0, got {self.width}")

    @property
    def distance(self) -> int:
        return levenshtein(self.prediction, self.truth)

    @property
    def weight(self) -> int:
        """CER denominator: the truth length, at least 1."""
        return max(1, len(self.truth))

    @property
    def bucket(self) -> int:
        return self.width // BUCKET_PX


def wpa(records: Iterable[EvalRecord]) -> float:
    errors = 0
    total = 0
    for r in records:
        errors += word_errors(r.prediction, r.truth)
        total += len(_words(r.truth))
    if total == 0:
        raise InputError("WPA is undefined without any ground-truth words")
    return 1.0 - errors / total


@dataclass
class BucketStat:
    start_px: int
    count: int
    distance: int
    truth_chars: int
    weight: int

    @property
    def cer(self) -> float:
        return self.distance / self.weight


@dataclass
class EvalReport:
    cer: float
    wpa: Optional[float]
    count: int
    distance: int
    truth_chars: int
    weight: int
    buckets: List[BucketStat] = field(default_factory=list)
    empty_truths: int = 0
    failed: int = 0

    def to_csv(self) -> str:
        out = io.StringIO()
        self.write_csv(out)
        return out.getvalue()

    def write_csv(self, f: TextIO):
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["bucket_start_px", "count", "cer"])
        for b in self.buckets:
            writer.writerow([b.start_px, b.count, repr(b.cer)])
        writer.writerow(["all", self.count, repr(self.cer)])

    def summary(self) -> Dict[str, object]:
        return {
            "lines": self.count,
            "cer": self.cer,
            "wpa": self.wpa,
            "empty_truths": self.empty_truths,
            "failed": self.failed,
        }


def bucketed_cer(records: Sequence[EvalRecord]) -> EvalReport:
    if not records:
        raise InputError("Cannot report on an empty record set")
    buckets: Dict[int, BucketStat] = {}
    distance = 0
    truth_chars = 0
    weight = 0
    empty = 0
    for r in records:
        d = r.distance
        distance += d
        truth_chars += len(r.truth)
        weight += r.weight
        empty += not r.truth
        b = buckets.get(r.bucket)
        if b is None:
            b = buckets[r.bucket] = BucketStat(r.bucket * BUCKET_PX, 0, 0, 0, 0)
        b.count += 1
        b.distance += d
        b.truth_chars += len(r.truth)
        b.weight += r.weight
    try:
        word_accuracy: Optional[float] = wpa(records)
    except InputError:
        word_accuracy = None
    return EvalReport(
        cer=distance / weight,
        wpa=word_accuracy,
        count=len(records),
        distance=distance,
        truth_chars=truth_chars,
        weight=weight,
        buckets=[buckets[k] for k in sorted(buckets)],
        empty_truths=empty,
        failed=sum(r.failed for r in records),
    )


################################################################################
# Per-line prediction files
################################################################################

PREDICTION_COLUMNS = ["path", "width", "truth", "prediction", "error"]


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out = []
    it = iter(text)
    for c in it:
        if c == "\\":
            nxt = next(it, "")
            out.append({"t": "\t", "n": "\n", "\\": "\\"}.get(nxt, "\\" + nxt))
        else:
            out.append(c)
    return "".join(out)


def write_predictions(records: Sequence[EvalRecord], path: Union[str, Path]):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\t".join(PREDICTION_COLUMNS) + "\n")
        for r in records:
            fields = [
                _escape(r.path),
                str(r.width),
                _escape(r.truth),
                _escape(r.prediction),
                "1" if r.failed else "0",
            ]
            f.write("\t".join(fields) + "\n")


def read_predictions(path: Union[str, Path]) -> List[EvalRecord]:
    records: List[EvalRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != PREDICTION_COLUMNS:
            raise DataError(f"{path}: not a predictions file (header {header!r})")
        for lineno, line in enumerate(f, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != len(PREDICTION_COLUMNS):
                raise DataError(f"{path}:{lineno}: expected 5 columns, got {len(parts)}")
            try:
                width = int(parts[1])
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: bad width {parts[1]!r}") from e
            if width <= 0:
                raise DataError(f"{path}:{lineno}: width must be > 0, got {width}")
            records.append(
                EvalRecord(
                    prediction=_unescape(parts[3]),
                    truth=_unescape(parts[2]),
                    width=width,
                    path=_unescape(parts[0]),
                    failed=parts[4] == "1",
                )
            )
    return records
