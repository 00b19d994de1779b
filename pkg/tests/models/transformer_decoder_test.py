# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

import logging
import random
import unittest

import torch

from linerec.models import (
    DecoderConfig,
    GenerationConfig,
    TransformerDecoder,
    decoder_forward,
    decoder_step,
    greedy_generate,
)
from linerec.ops import Rng
from linerec.support.exceptions import CapacityError, InputError

ALPHABET = "abc"


def small_decoder(seed=0):
    config = DecoderConfig(
        type="transformer",
        layers=2,
        hidden=32,
        heads=2,
        ffn=64,
        max_positions=16,
        max_output_len=8,
    )
    decoder = TransformerDecoder(len(ALPHABET), 16, config)
    rng = Rng(seed)
    with torch.no_grad():
        for _, p in decoder.named_parameters():
            p.copy_(rng.uniform(p.shape, -0.08, 0.08))
    return decoder


class TransformerDecoderTest(unittest.TestCase):
    def testVocabulary(self):
        decoder = small_decoder()
        self.assertEqual(decoder.bos_id, 3)
        self.assertEqual(decoder.eos_id, 4)
        self.assertEqual(tuple(decoder.embed.shape), (5, 32))
        self.assertEqual(tuple(decoder.out.weight.shape), (32, 5))

    def testCausal(self):
        decoder = small_decoder(1)
        encoded = Rng(2).uniform((10, 16), -1.0, 1.0)
        rnd = random.Random(3)
        for _ in range(50):
            length = rnd.randint(2, 8)
            cut = rnd.randint(1, length - 1)
            head = [decoder.bos_id] + [rnd.randrange(3) for _ in range(cut - 1)]
            tail_a = [rnd.randrange(5) for _ in range(length - cut)]
            tail_b = [rnd.randrange(5) for _ in range(length - cut)]
            a = decoder_forward(head + tail_a, encoded, decoder)
            b = decoder_forward(head + tail_b, encoded, decoder)
            self.assertTrue(torch.equal(a[:cut], b[:cut]))

    def testCachedMemoryMatches(self):
        decoder = small_decoder(4)
        encoded = Rng(5).uniform((7, 16), -1.0, 1.0)
        tokens = [decoder.bos_id, 0, 2, 1]
        fresh = decoder_forward(tokens, encoded, decoder)
        cached = decoder_forward(tokens, encoded, decoder, memory=decoder.memory(encoded))
        self.assertTrue(torch.equal(fresh, cached))
        torch.testing.assert_close(
            decoder_step(tokens, encoded, decoder), fresh[-1], rtol=0, atol=0
        )

    def testCrossAttentionRows(self):
        decoder = small_decoder(6)
        encoded = Rng(7).uniform((9, 16), -1.0, 1.0)
        cross = []
        decoder_forward([decoder.bos_id, 1], encoded, decoder, cross_attention_out=cross)
        self.assertEqual(len(cross), 2)
        self.assertEqual(tuple(cross[0].shape), (2, 9))
        torch.testing.assert_close(cross[0].sum(dim=-1), torch.ones(2), rtol=0, atol=1e-6)

    def testErrors(self):
        decoder = small_decoder()
        encoded = torch.zeros((4, 16))
        with self.assertRaises(InputError):
            decoder_forward([], encoded, decoder)
        with self.assertRaises(InputError):
            decoder_forward([decoder.bos_id, 5], encoded, decoder)
        with self.assertRaises(CapacityError):
            decoder_forward([decoder.bos_id] * 17, encoded, decoder)
        with self.assertRaises(InputError):
            GenerationConfig(0, bos_id=3, eos_id=4)

    def testGreedyStopsAtEos(self):
        decoder = small_decoder(8)
        with torch.no_grad():
            decoder.out.bias[decoder.eos_id] = 100.0
        encoded = Rng(9).uniform((6, 16), -1.0, 1.0)
        g = decoder.generation_config(8)
        self.assertEqual(greedy_generate(encoded, decoder, g, ALPHABET), "")

    def testGreedyRespectsMaxOutputLen(self):
        decoder = small_decoder(10)
        with torch.no_grad():
            decoder.out.bias[1] = 100.0
        encoded = Rng(11).uniform((6, 16), -1.0, 1.0)
        self.assertEqual(
            greedy_generate(encoded, decoder, decoder.generation_config(8), ALPHABET),
            "b" * 8,
        )
        self.assertEqual(
            greedy_generate(encoded, decoder, decoder.generation_config(3), ALPHABET),
            "bbb",
        )

    def testGreedyDropsBos(self):
        decoder = small_decoder(12)
        with torch.no_grad():
            decoder.out.bias[decoder.bos_id] = 100.0
        encoded = Rng(13).uniform((6, 16), -1.0, 1.0)
        self.assertEqual(
            greedy_generate(encoded, decoder, decoder.generation_config(5), ALPHABET), ""
        )


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG)
    unittest.main()
