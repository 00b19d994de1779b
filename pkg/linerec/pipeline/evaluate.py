# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Dataset evaluation over a ``path<TAB>transcription`` manifest."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Union

from ..decoding.ctc import DEFAULT_BEAM_WIDTH, LogLinearWeights
from ..metrics import EvalRecord, EvalReport, bucketed_cer, write_predictions
from ..models.config import ResizePolicy
from ..models.recognizer import LineRecognizer
from ..support.exceptions import DataError, FormatError
from ..support.logging import pipeline_logger as logger
from .images import load_line_image
from .recognize import recognize_line

__all__ = [
    "EvalOutcome",
    "ManifestRecord",
    "evaluate",
    "read_manifest",
]


@dataclass(frozen=True)
class ManifestRecord:
    path: Path
    truth: str


class EvalOutcome(NamedTuple):
    report: EvalReport
    records: List[EvalRecord]


def read_manifest(path: Union[str, Path]) -> List[ManifestRecord]:
    """Parses a manifest; relative image paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"Cannot read manifest {path}: {e}") from e
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        image, sep, truth = line.partition("\t")
        if not sep:
            raise DataError(f"{path}:{lineno}: expected 'path<TAB>transcription'")
        image_path = Path(image)
        if not image_path.is_absolute():
            image_path = path.parent / image_path
        records.append(ManifestRecord(image_path, truth))
    if not records:
        raise DataError(f"Manifest {path} has no records")
    return records


def evaluate(
    manifest: Union[str, Path, Sequence[ManifestRecord]],
    model: LineRecognizer,
    lm=None,
    weights: Optional[LogLinearWeights] = None,
    *,
    decoder: Optional[str] = None,
    beam_width: int = DEFAULT_BEAM_WIDTH,
    max_width: Optional[int] = None,
    resize_policy: Optional[ResizePolicy] = None,
    chunk_pad: Optional[int] = None,
    threads: int = 1,
    predictions_out: Optional[Union[str, Path]] = None,
    report_out: Optional[Union[str, Path]] = None,
) -> EvalOutcome:
    if isinstance(manifest, (str, Path)):
        entries = read_manifest(manifest)
    else:
        entries = list(manifest)
        if not entries:
            raise DataError("Manifest has no records")

    def run(entry: ManifestRecord) -> EvalRecord:
        try:
            img = load_line_image(entry.path)
        except (DataError, FormatError) as e:
            logger.error("Skipping unreadable line image %s: %s", entry.path, e)
            return EvalRecord("", entry.truth, width=1, path=str(entry.path), failed=True)
        result = recognize_line(
            img,
            model,
            lm,
            weights,
            decoder=decoder,
            beam_width=beam_width,
            max_width=max_width,
            resize_policy=resize_policy,
            chunk_pad=chunk_pad,
        )
        return EvalRecord(result.text, entry.truth, img.natural_width, str(entry.path))

    if threads > 1:
        # map() yields in submission order, so records follow the manifest.
        with ThreadPoolExecutor(max_workers=threads) as executor:
            records = list(executor.map(run, entries))
    else:
        records = [run(e) for e in entries]

    report = bucketed_cer(records)
    if report.failed:
        logger.warning("%d of %d line(s) could not be read", report.failed, report.count)
    if predictions_out is not None:
        write_predictions(records, predictions_out)
    if report_out is not None:
        with open(report_out, "w", encoding="utf-8", newline="") as f:
            report.write_csv(f)
    return EvalOutcome(report, records)
