# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

import logging
import random
import unittest

from parameterized import parameterized
import torch

from linerec.models import Backbone, BackboneConfig, backbone_forward, receptive_field_radius
from linerec.ops import Rng
from linerec.support.exceptions import DimensionError


def randomize(module, seed, scale=0.08):
    rng = Rng(seed)
    with torch.no_grad():
        for _, p in module.named_parameters():
            p.copy_(rng.uniform(p.shape, -scale, scale))
    return module


# Same depth and kernels as the full backbone, far fewer channels.
SMALL = BackboneConfig(channels=8, expansion=2)


class BackboneTest(unittest.TestCase):
    def testFullGeometry(self):
        backbone = randomize(Backbone(BackboneConfig()), 0)
        image = Rng(1).uniform((40, 320, 1), -1.0, 1.0)
        out = backbone_forward(image, backbone)
        self.assertEqual(tuple(out.shape), (80, 64))

    def testMinimalWidth(self):
        backbone = randomize(Backbone(SMALL), 0)
        out = backbone_forward(torch.zeros(40, 4, 1), backbone)
        self.assertEqual(tuple(out.shape), (1, 8))

    def testZeroImageZeroBiases(self):
        backbone = randomize(Backbone(SMALL), 3)
        with torch.no_grad():
            for name, p in backbone.named_parameters():
                if name.endswith(".bias") or name.endswith(".shift"):
                    p.zero_()
        out = backbone_forward(torch.zeros(40, 64, 1), backbone)
        torch.testing.assert_close(out, torch.zeros(16, 8), rtol=0, atol=0)

    def testParameterNames(self):
        names = [n for n, _ in Backbone(BackboneConfig()).named_parameters()]
        self.assertIn("stem.weight", names)
        self.assertIn("L10.expand.weight", names)
        self.assertIn("L10.project.weight", names)
        self.assertIn("L0.norm.scale", names)
        self.assertIn("collapse.conv.weight", names)
        self.assertIn("collapse.residual.weight", names)
        self.assertNotIn("L11.expand.weight", names)

    def testLayerShapes(self):
        backbone = Backbone(BackboneConfig())
        layer = backbone.bottlenecks()[0]
        self.assertEqual(len(backbone.bottlenecks()), 11)
        self.assertEqual(tuple(layer.expand.weight.shape), (3, 3, 64, 512))
        self.assertEqual(tuple(layer.project.weight.shape), (1, 1, 512, 64))
        self.assertEqual(tuple(backbone.stem.weight.shape), (1, 1, 16, 64))
        self.assertEqual(tuple(backbone.collapse.conv.weight.shape), (10, 1, 64, 64))

    def testWrongHeight(self):
        backbone = Backbone(SMALL)
        with self.assertRaises(DimensionError):
            backbone_forward(torch.zeros(32, 64, 1), backbone)

    def testWidthNotMultipleOfBlock(self):
        backbone = Backbone(SMALL)
        with self.assertRaises(DimensionError):
            backbone_forward(torch.zeros(40, 66, 1), backbone)

    def testWrongChannels(self):
        backbone = Backbone(SMALL)
        with self.assertRaises(DimensionError):
            backbone_forward(torch.zeros(40, 64, 3), backbone)

    def testReceptiveFieldRadius(self):
        self.assertEqual(receptive_field_radius(Backbone(BackboneConfig())), 47)
        self.assertEqual(receptive_field_radius(Backbone(BackboneConfig(layers=2))), 11)

    @parameterized.expand([(4,), (320,), (1024,), (4096,)])
    def testFrameCount(self, width):
        backbone = randomize(Backbone(SMALL), width)
        out = backbone_forward(Rng(width).uniform((40, width, 1), -1.0, 1.0), backbone)
        self.assertEqual(tuple(out.shape), (width // 4, 8))

    def testLocality(self):
        backbone = randomize(Backbone(SMALL), 5)
        radius = receptive_field_radius(backbone)
        rnd = random.Random(6)
        width = 240
        image = Rng(6).uniform((40, width, 1), -1.0, 1.0)
        a = backbone_forward(image, backbone)
        for trial in range(50):
            column = rnd.randrange(width)
            rows = sorted(rnd.sample(range(40), 2))
            perturbed = image.clone()
            perturbed[rows[0] : rows[1] + 1, column, 0] += rnd.uniform(0.5, 2.0)
            b = backbone_forward(perturbed, backbone)
            for f in range(a.shape[0]):
                # Pixels of frame f span 4f..4f+3.
                if column < 4 * f - radius or column > 4 * f + 3 + radius:
                    self.assertTrue(torch.equal(a[f], b[f]), f"trial {trial} frame {f}")
            self.assertFalse(torch.equal(a[column // 4], b[column // 4]), f"trial {trial}")


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG)
    unittest.main()
