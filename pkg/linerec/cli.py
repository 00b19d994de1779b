# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Command line front end.

Exit codes: 0 success, 1 usage or configuration, 2 bad input data,
3 malformed model/LM/image files.
"""

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

import torch

from .decoding.ctc import DEFAULT_BEAM_WIDTH, LogLinearWeights
from .lm.ngram import DEFAULT_ALPHA, DEFAULT_ORDER, load_lm, lm_train, save_lm
from .metrics import bucketed_cer, read_predictions
from .models.config import ModelConfig, ResizePolicy
from .models.presets import DEFAULT_ALPHABET, PRESETS, preset_config
from .pipeline.bench import bench, parse_variant, write_bench_csv
from .pipeline.bundle import init_random, load_model
from .pipeline.evaluate import evaluate, read_manifest
from .pipeline.images import load_line_image
from .pipeline.recognize import DecoderKind, line_logits, recognize_line
from .support.exceptions import (
    ConfigError,
    DataError,
    FormatError,
    LineRecError,
    ParameterError,
)
from .support.logging import pipeline_logger as logger
from .support.logging import set_log_level
from .tuning.mert import DevExample, TuneConfig, mert_tune

__all__ = [
    "main",
]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_FORMAT = 3


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_decoding_args(p: argparse.ArgumentParser):
    p.add_argument("--model", required=True, help="Model bundle (.tlrw)")
    p.add_argument(
        "--decoder",
        choices=[k.value for k in DecoderKind],
        help="Decoder (default: greedy for CTC models, transformer otherwise)",
    )
    p.add_argument("--lm", help="Character LM (.tllm) for fused decoding")
    p.add_argument("--weights", help="Log-linear weights (JSON) for fused decoding")
    p.add_argument("--beam-width", type=int, default=DEFAULT_BEAM_WIDTH)
    p.add_argument("--max-width", type=int, help="Fixed width of the Transformer path")
    p.add_argument(
        "--resize-policy",
        choices=[r.value for r in ResizePolicy],
        help="Transformer path handling of lines wider than --max-width",
    )
    p.add_argument("--chunk-pad", type=int, help="Chunk padding in pixels (CTC path)")
    p.add_argument("--threads", type=int, default=1)


def _load_fusion(args):
    lm = load_lm(args.lm) if args.lm else None
    weights = LogLinearWeights.load(args.weights) if args.weights else None
    return lm, weights


def _set_threads(threads: int):
    if threads < 1:
        raise ParameterError(f"--threads must be >= 1, got {threads}")
    torch.set_num_threads(threads)


def cmd_recognize(args) -> int:
    _set_threads(args.threads)
    model = load_model(args.model)
    lm, weights = _load_fusion(args)
    for image in args.images:
        img = load_line_image(image)
        result = recognize_line(
            img,
            model,
            lm,
            weights,
            decoder=args.decoder,
            beam_width=args.beam_width,
            max_width=args.max_width,
            resize_policy=args.resize_policy,
            chunk_pad=args.chunk_pad,
        )
        print(f"{image}\t{result.text}")
        t = result.timings
        logger.info(
            "%s: backbone %.2f ms, encoder %.2f ms, decoder %.2f ms",
            image,
            t.backbone * 1e3,
            t.encoder * 1e3,
            t.decoder * 1e3,
        )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _set_threads(args.threads)
    model = load_model(args.model)
    lm, weights = _load_fusion(args)
    outcome = evaluate(
        args.manifest,
        model,
        lm,
        weights,
        decoder=args.decoder,
        beam_width=args.beam_width,
        max_width=args.max_width,
        resize_policy=args.resize_policy,
        chunk_pad=args.chunk_pad,
        threads=args.threads,
        predictions_out=args.predictions,
        report_out=args.out,
    )
    print(json.dumps(outcome.report.summary(), sort_keys=True))
    if args.out is None:
        outcome.report.write_csv(sys.stdout)
    return EXIT_OK


def cmd_bench(args) -> int:
    _set_threads(args.threads)
    variants = [parse_variant(v) for v in args.variants]
    lm, weights = _load_fusion(args)
    rows = bench(
        variants,
        width=args.width,
        repetitions=args.reps,
        seed=args.seed,
        lm=lm,
        weights=weights,
        beam_width=args.beam_width,
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            write_bench_csv(rows, f)
    else:
        write_bench_csv(rows, sys.stdout)
    return EXIT_OK


def cmd_lm_train(args) -> int:
    try:
        with open(args.input, "r", encoding="utf-8") as f:
            lm = lm_train(f, args.order, alpha=args.alpha)
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"Cannot read corpus {args.input}: {e}") from e
    save_lm(lm, args.out)
    logger.info("Wrote %r to %s", lm, args.out)
    return EXIT_OK


def cmd_mert(args) -> int:
    _set_threads(args.threads)
    model = load_model(args.model)
    if not model.is_ctc:
        raise ParameterError("MERT tunes CTC decoding; the model has a Transformer decoder")
    lm = load_lm(args.lm)
    examples = [
        DevExample(line_logits(load_line_image(r.path), model), r.truth)
        for r in read_manifest(args.dev)
    ]
    init = LogLinearWeights.load(args.init) if args.init else LogLinearWeights(lm=1.0)
    report = mert_tune(
        examples,
        lm,
        init,
        TuneConfig(
            max_rounds=args.max_rounds,
            beam_width=args.beam_width,
            workers=args.threads,
        ),
    )
    report.weights.save(args.out)
    print(
        json.dumps(
            {
                "cer_before": report.cer_before,
                "cer_after": report.cer_after,
                "rounds": report.rounds,
                "weights": report.weights.to_dict(),
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def cmd_init_random(args) -> int:
    if args.config:
        if args.preset:
            raise ParameterError("Pass either --config or --preset, not both")
        config = ModelConfig.load(args.config)
    else:
        config = preset_config(args.preset or "sa-ctc", args.alphabet)
    model = init_random(config, args.seed, args.out)
    logger.info("Wrote %s (%d parameters)", args.out, model.parameter_count())
    return EXIT_OK


def cmd_buckets(args) -> int:
    report = bucketed_cer(read_predictions(args.predictions))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            report.write_csv(f)
    else:
        report.write_csv(sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="linerec", description="Text-line recognition engine")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="More logging (repeatable)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recognize", help="Recognize line images")
    _add_decoding_args(p)
    p.add_argument("images", nargs="+", help="PGM/PNG line images")
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("evaluate", help="Evaluate a manifest")
    _add_decoding_args(p)
    p.add_argument("--manifest", required=True, help="path<TAB>transcription lines")
    p.add_argument("--out", help="Bucketed CER CSV")
    p.add_argument("--predictions", help="Per-line predictions TSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="Per-stage latency of random models")
    p.add_argument(
        "--variants",
        nargs="+",
        default=["sa-ctc:greedy", "sa-transformer:transformer"],
        help=f"preset[:decoder] with preset in {', '.join(PRESETS)}",
    )
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lm", help="Character LM for fused variants")
    p.add_argument("--weights", help="Log-linear weights for fused variants")
    p.add_argument("--beam-width", type=int, default=DEFAULT_BEAM_WIDTH)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("lm-train", help="Train a character N-gram LM")
    p.add_argument("--order", type=int, default=DEFAULT_ORDER)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--in", dest="input", required=True, help="UTF-8 corpus, one line each")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lm_train)

    p = sub.add_parser("mert", help="Tune fused decoding weights on a dev manifest")
    p.add_argument("--dev", required=True)
    p.add_argument("--lm", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--init", help="Starting weights (default: ctc=1, lm=1)")
    p.add_argument("--beam-width", type=int, default=DEFAULT_BEAM_WIDTH)
    p.add_argument("--max-rounds", type=int, default=10)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mert)

    p = sub.add_parser("init-random", help="Write a randomly initialized bundle")
    p.add_argument("--preset", choices=list(PRESETS))
    p.add_argument("--config", help="Model config JSON")
    p.add_argument("--alphabet", default=DEFAULT_ALPHABET)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_random)

    p = sub.add_parser("buckets", help="Bucketed CER from a predictions TSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_buckets)
    return parser


def _exit_code(e: BaseException) -> int:
    if isinstance(e, (ConfigError, ParameterError)):
        return EXIT_USAGE
    if isinstance(e, FormatError):
        return EXIT_FORMAT
    return EXIT_DATA


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        set_log_level(logging.DEBUG if args.verbose > 1 else logging.INFO)
    try:
        return args.func(args)
    except (LineRecError, OSError) as e:
        logger.error("%s", e)
        return _exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
