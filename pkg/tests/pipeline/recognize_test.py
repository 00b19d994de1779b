# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

import logging
import unittest

from parameterized import parameterized
import torch

from linerec.decoding import LogLinearWeights, greedy_decode, prefix_beam_search
from linerec.lm import lm_train
from linerec.models import PaddingPolicy, ResizePolicy, preset_config
from linerec.ops import Rng
from linerec.pipeline import (
    DecoderKind,
    init_random,
    line_logits,
    normalize_line,
    recognize_line,
    transformer_input,
)
from linerec.support.exceptions import InputError, ParameterError

TINY = {
    "backbone": {"channels": 8, "expansion": 2, "layers": 2},
    "encoder": {"hidden": 32, "heads": 2, "ffn": 64},
    "decoder": {"layers": 1, "hidden": 32, "heads": 2, "ffn": 64, "max_output_len": 6},
}
ALPHABET = "abc "


def tiny_model(preset="sa-ctc", seed=0):
    return init_random(preset_config(preset, ALPHABET, **TINY), seed)


def random_line(width, seed=1):
    return Rng(seed).uniform((40, width, 1), -1.0, 1.0)


class CtcPathTest(unittest.TestCase):
    def testLongLineFrames(self):
        model = tiny_model()
        result = recognize_line(random_line(2000), model)
        self.assertEqual(result.frames, 500)
        self.assertEqual(result.input_width, 2000)
        self.assertEqual(tuple(result.logits.scores.shape), (500, 5))
        self.assertEqual(result.text, greedy_decode(result.logits))
        self.assertGreaterEqual(result.timings.backbone, 0.0)
        self.assertAlmostEqual(
            result.timings.total,
            result.timings.backbone + result.timings.encoder + result.timings.decoder,
        )

    @parameterized.expand([(4,), (220,), (224,), (228,), (996,)])
    def testFrameCount(self, width):
        logits = line_logits(random_line(width), tiny_model())
        self.assertEqual(logits.num_frames, width // 4)

    @parameterized.expand([(224,), (300,), (640,), (1000,)])
    def testAppendedPadKeepsFrames(self, width):
        config = preset_config("sa-ctc", ALPHABET, chunk={"policy": "zero"}, **TINY)
        model = init_random(config, 3)
        line = random_line(width, seed=width)
        extended = torch.cat([line, torch.zeros(40, 320, 1)], dim=1)
        a = line_logits(line, model)
        b = line_logits(extended, model)
        self.assertEqual(b.num_frames, a.num_frames + 80)
        torch.testing.assert_close(
            b.scores[: a.num_frames], a.scores, rtol=0, atol=1e-6
        )

    def testChunkPadOverride(self):
        logits = line_logits(random_line(700), tiny_model(), chunk_pad=0)
        self.assertEqual(logits.num_frames, 175)

    def testDeterministic(self):
        model = tiny_model()
        line = random_line(640, seed=5)
        first = recognize_line(line, model)
        for _ in range(3):
            again = recognize_line(line, model)
            self.assertEqual(again.text, first.text)
            self.assertTrue(torch.equal(again.logits.scores, first.logits.scores))

    def testDecoders(self):
        model = tiny_model()
        line = random_line(320, seed=2)
        logits = line_logits(line, model)
        beam = recognize_line(line, model, decoder="beam", beam_width=4)
        self.assertEqual(beam.text, prefix_beam_search(logits, 4)[0][0])
        lm = lm_train(["abc abc", "cab"], 3)
        fused = recognize_line(
            line, model, lm, LogLinearWeights(), decoder=DecoderKind.FUSED, beam_width=4
        )
        self.assertEqual(fused.text, beam.text)

    def testAcceptsLineImage(self):
        raw = (Rng(3).uniform((40, 50), 0.0, 255.0)).to(torch.uint8).numpy()
        img = normalize_line(raw)
        self.assertEqual(recognize_line(img, tiny_model()).frames, 13)

    def testRejects(self):
        model = tiny_model()
        line = random_line(64)
        with self.assertRaises(ParameterError):
            recognize_line(line, model, decoder="transformer")
        with self.assertRaises(ParameterError):
            recognize_line(line, model, decoder="viterbi")
        with self.assertRaises(InputError):
            recognize_line(line, model, decoder="fused")
        with self.assertRaises(InputError):
            recognize_line(torch.zeros((40, 0, 1)), model)


class TransformerPathTest(unittest.TestCase):
    def setUp(self):
        self.model = tiny_model("sa-transformer")

    def testPadsToMaxWidth(self):
        result = recognize_line(random_line(600), self.model)
        self.assertEqual(result.input_width, 1024)
        self.assertEqual(result.frames, 256)
        self.assertIsNone(result.logits)
        self.assertLessEqual(len(result.text), 6)
        self.assertTrue(set(result.text) <= set(ALPHABET))

    def testResizePolicy(self):
        line = random_line(1200)
        squeezed = recognize_line(line, self.model)
        self.assertEqual(squeezed.input_width, 1024)
        natural = recognize_line(line, self.model, resize_policy=ResizePolicy.NONE)
        self.assertEqual(natural.input_width, 1200)
        self.assertEqual(natural.frames, 300)
        narrow = recognize_line(line, self.model, max_width=320)
        self.assertEqual(narrow.frames, 80)

    def testRejectsCtcDecoder(self):
        with self.assertRaises(ParameterError):
            recognize_line(random_line(64), self.model, decoder="greedy")

    def testTransformerInput(self):
        line = random_line(8)
        padded = transformer_input(line, 12, ResizePolicy.RESIZE, PaddingPolicy.ZERO)
        self.assertEqual(tuple(padded.shape), (40, 12, 1))
        self.assertTrue(torch.equal(padded[:, :8], line))
        self.assertTrue(bool((padded[:, 8:] == 0).all()))
        self.assertIs(transformer_input(line, 8), line)


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG)
    unittest.main()
