# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

import logging
import unittest

from parameterized import parameterized

from linerec.support.exceptions import (
    BadMagicError,
    CapacityError,
    ConfigError,
    DataError,
    DimensionError,
    FormatError,
    ImageDecodeError,
    ImageFormatError,
    InputError,
    LineRecError,
    MissingWeightError,
    NonFiniteError,
    ParameterError,
    TruncatedFileError,
    UnexpectedWeightError,
    UnsupportedVersionError,
    WeightShapeError,
)


class ExceptionsTest(unittest.TestCase):
    @parameterized.expand(
        [
            (DimensionError("x"), ValueError),
            (ParameterError("x"), ValueError),
            (InputError("x"), ValueError),
            (ConfigError("x"), ValueError),
            (NonFiniteError("matmul"), ArithmeticError),
            (CapacityError("Decoder position", 300, 256), LineRecError),
            (ImageDecodeError("a.pgm", "gone"), DataError),
            (BadMagicError("m", b"TLRW", b"XXXX"), FormatError),
            (UnsupportedVersionError("m", 2, 1), FormatError),
            (TruncatedFileError("m", "dims"), FormatError),
            (ImageFormatError("a.pgm", "bad"), FormatError),
            (MissingWeightError("head.logits.bias"), FormatError),
            (WeightShapeError("w", (2, 3), (3, 2)), FormatError),
            (UnexpectedWeightError("w"), FormatError),
        ]
    )
    def testHierarchy(self, error, base):
        self.assertIsInstance(error, base)
        self.assertIsInstance(error, LineRecError)

    def testMessages(self):
        self.assertIn("'matmul'", str(NonFiniteError("matmul")))
        e = CapacityError("Decoder position", 300, 256)
        self.assertEqual((e.requested, e.capacity), (300, 256))
        self.assertIn("[3, 2]", str(WeightShapeError("w", (2, 3), (3, 2))))
        self.assertEqual(MissingWeightError("head.logits.bias").name, "head.logits.bias")


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG)
    unittest.main()
