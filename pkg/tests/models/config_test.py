# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

import logging
import os
import tempfile
import unittest

from parameterized import parameterized

from linerec.models import (
    DecoderType,
    EncoderType,
    PRESETS,
    ModelConfig,
    PaddingPolicy,
    PositionalEncoding,
    ResizePolicy,
    preset_config,
)
from linerec.support.exceptions import ConfigError


class ModelConfigTest(unittest.TestCase):
    def testDefaults(self):
        config = ModelConfig.from_dict({"alphabet": "abc"})
        self.assertEqual(config.backbone.frame_stride, 4)
        self.assertEqual(config.backbone.collapse_height, 10)
        self.assertEqual(config.encoder.type, EncoderType.SELF_ATTENTION)
        self.assertEqual(config.encoder.positional, PositionalEncoding.RELATIVE)
        self.assertEqual(config.decoder.type, DecoderType.CTC)
        self.assertEqual(config.chunk.width_px, 320)
        self.assertEqual(config.chunk.pad_px, 48)
        self.assertEqual(config.chunk.policy, PaddingPolicy.EDGE)
        self.assertEqual(config.resize_policy, ResizePolicy.RESIZE)
        self.assertEqual(config.num_symbols, 3)

    def testJsonRoundTrip(self):
        config = ModelConfig.from_dict(
            {
                "alphabet": "xyz",
                "encoder": {"type": "grcl", "blocks_per_set": 3},
                "chunk": {"pad_px": 32, "policy": "zero"},
                "max_width": 512,
            }
        )
        again = ModelConfig.from_json(config.to_json())
        self.assertEqual(again, config)
        self.assertEqual(again.to_dict()["chunk"]["policy"], "zero")

    def testLoad(self):
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "model.json")
            with open(path, "w", encoding="utf-8") as f:
                f.write('{"alphabet": "ab", "decoder": {"type": "transformer"}}')
            config = ModelConfig.load(path)
        self.assertEqual(config.decoder.type, DecoderType.TRANSFORMER)

    @parameterized.expand(
        [
            ("missing_alphabet", {}),
            ("empty_alphabet", {"alphabet": ""}),
            ("duplicate_symbol", {"alphabet": "abca"}),
            ("reserved_symbol", {"alphabet": "a\x02"}),
            ("unknown_top_level", {"alphabet": "a", "beam": 3}),
            ("unknown_section_key", {"alphabet": "a", "encoder": {"depthh": 2}}),
            ("section_not_object", {"alphabet": "a", "chunk": 48}),
            ("bad_enum", {"alphabet": "a", "encoder": {"type": "gru"}}),
            ("bad_sa_depth", {"alphabet": "a", "encoder": {"layers": 6}}),
            ("bad_heads", {"alphabet": "a", "encoder": {"heads": 3}}),
            ("bad_grcl_blocks", {"alphabet": "a", "encoder": {"type": "grcl", "blocks_per_set": 7}}),
            ("bad_lstm_depth", {"alphabet": "a", "encoder": {"type": "bilstm", "depth": 4}}),
            ("odd_height", {"alphabet": "a", "backbone": {"height": 42}}),
            ("even_kernel", {"alphabet": "a", "backbone": {"kernel": 4}}),
            ("pad_too_large", {"alphabet": "a", "chunk": {"pad_px": 160}}),
            ("pad_not_stride", {"alphabet": "a", "chunk": {"pad_px": 6}}),
            ("chunk_not_stride", {"alphabet": "a", "chunk": {"width_px": 322}}),
            ("max_width", {"alphabet": "a", "max_width": 1022}),
            (
                "output_len",
                {
                    "alphabet": "a",
                    "decoder": {"type": "transformer", "max_output_len": 256},
                },
            ),
        ]
    )
    def testRejects(self, _, d):
        with self.assertRaises(ConfigError):
            ModelConfig.from_dict(d)

    def testRejectsBadJson(self):
        with self.assertRaises(ConfigError):
            ModelConfig.from_json("{alphabet")

    def testTransformerFieldsIgnoredForCtc(self):
        config = ModelConfig.from_dict(
            {"alphabet": "a", "decoder": {"type": "ctc", "max_output_len": 999}}
        )
        self.assertEqual(config.decoder.type, DecoderType.CTC)

    def testPresetsPinPublishedDepths(self):
        for name in PRESETS:
            config = preset_config(name, "ab")
            self.assertEqual(config.backbone.layers, 11, name)
            self.assertEqual(config.decoder.layers, 8, name)
        self.assertEqual(ModelConfig.from_dict({"alphabet": "a"}).backbone.layers, 11)

    def testShallowStacksAreAccepted(self):
        config = ModelConfig.from_dict(
            {
                "alphabet": "a",
                "backbone": {"layers": 0},
                "decoder": {"type": "transformer", "layers": 1},
            }
        )
        self.assertEqual(config.backbone.layers, 0)
        self.assertEqual(config.decoder.layers, 1)

    @parameterized.expand(
        [
            ("negative_backbone", {"alphabet": "a", "backbone": {"layers": -1}}),
            (
                "no_decoder_layers",
                {"alphabet": "a", "decoder": {"type": "transformer", "layers": 0}},
            ),
        ]
    )
    def testRejectsEmptyOrNegativeDepth(self, _, d):
        with self.assertRaises(ConfigError):
            ModelConfig.from_dict(d)


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG)
    unittest.main()
