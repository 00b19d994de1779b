# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

import logging
import unittest

from parameterized import parameterized
import torch

from linerec.models import (
    DEFAULT_ALPHABET,
    PRESETS,
    LineRecognizer,
    preset_config,
)
from linerec.ops import Rng
from linerec.support.exceptions import ConfigError

TINY = {
    "backbone": {"channels": 8, "expansion": 2, "layers": 2},
    "encoder": {"hidden": 32, "heads": 2, "ffn": 64},
}


class PresetTest(unittest.TestCase):
    def testNames(self):
        self.assertEqual(
            sorted(PRESETS), ["bilstm-ctc", "grcl-ctc", "sa-ctc", "sa-transformer"]
        )

    def testDefaultAlphabet(self):
        self.assertEqual(len(DEFAULT_ALPHABET), len(set(DEFAULT_ALPHABET)))
        self.assertIn(" ", DEFAULT_ALPHABET)

    def testOverridesMerge(self):
        config = preset_config("grcl-ctc", "ab", encoder={"blocks_per_set": 1})
        self.assertEqual(config.encoder.type.value, "grcl")
        self.assertEqual(config.encoder.blocks_per_set, 1)
        self.assertEqual(config.alphabet, "ab")

    def testUnknown(self):
        with self.assertRaises(ConfigError):
            preset_config("cnn-ctc")


class LineRecognizerTest(unittest.TestCase):
    @parameterized.expand(
        [
            ("sa-ctc", "enc.sa.L3.wq.weight", (256, 256)),
            ("grcl-ctc", "enc.grcl.S2.B1.gate.weight", (1, 7, 256, 128)),
            ("bilstm-ctc", "enc.lstm.L1.bwd.weight_ih", (2048, 1024)),
            ("sa-transformer", "dec.tfmr.L7.ck.weight", (256, 256)),
        ]
    )
    def testWeightNames(self, preset, name, shape):
        model = LineRecognizer(preset_config(preset, "abc"))
        shapes = model.weight_shapes()
        self.assertEqual(shapes[name], shape)
        self.assertEqual(shapes["backbone.stem.weight"][-1], 64)
        self.assertEqual(model.parameter_count(), sum(p.numel() for p in model.parameters()))

    def testCtcHead(self):
        model = LineRecognizer(preset_config("sa-ctc", "abc"))
        self.assertTrue(model.is_ctc)
        self.assertEqual(model.weight_shapes()["head.logits.weight"], (256, 4))
        self.assertIsNone(model.dec)

    def testTransformerHasNoHead(self):
        model = LineRecognizer(preset_config("sa-transformer", "abc"))
        self.assertFalse(model.is_ctc)
        self.assertIsNone(model.head)
        self.assertEqual(model.weight_shapes()["dec.tfmr.embed"], (5, 256))

    def testStages(self):
        model = LineRecognizer(preset_config("sa-ctc", "abcde", **TINY))
        rng = Rng(0)
        with torch.no_grad():
            for _, p in model.named_parameters():
                p.copy_(rng.uniform(p.shape, -0.08, 0.08))
        image = Rng(1).uniform((40, 64, 1), -1.0, 1.0)
        frames = model.backbone_frames(image)
        self.assertEqual(tuple(frames.shape), (16, 8))
        encoded = model.encode(frames)
        self.assertEqual(tuple(encoded.shape), (16, 32))
        result = model.frame_logits(encoded)
        self.assertEqual(tuple(result.scores.shape), (16, 6))
        self.assertEqual(result.alphabet, "abcde")

    def testNoGradients(self):
        model = LineRecognizer(preset_config("bilstm-ctc", "ab", **TINY))
        self.assertFalse(any(p.requires_grad for p in model.parameters()))
        self.assertFalse(model.training)


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG)
    unittest.main()
