# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

import logging
import unittest

from linerec.pipeline import plan_chunks
from linerec.support import debugging
from linerec.support.debugging import DebugFlags


class DebugFlagsTest(unittest.TestCase):
    def setUp(self):
        self.ndebug = debugging.NDEBUG

    def tearDown(self):
        debugging.NDEBUG = self.ndebug

    def testDefaults(self):
        flags = DebugFlags.parse("")
        self.assertEqual(flags.log_level, logging.WARNING)
        self.assertFalse(flags.asserts)

    def testLogLevel(self):
        self.assertEqual(DebugFlags.parse("log_level=debug").log_level, logging.DEBUG)
        with self.assertLogs("linerec.bootstrap", level="WARNING"):
            flags = DebugFlags.parse("log_level=chatty")
        self.assertEqual(flags.log_level, logging.WARNING)

    def testAssertsToggleNdebug(self):
        flags = DebugFlags.parse("asserts")
        self.assertTrue(flags.asserts)
        self.assertFalse(debugging.NDEBUG)
        # Plans are verified while asserts are on.
        plan_chunks(1000, 48)
        flags = DebugFlags.parse(" log_level=info , -asserts")
        self.assertFalse(flags.asserts)
        self.assertEqual(flags.log_level, logging.INFO)
        self.assertTrue(debugging.NDEBUG)
        self.assertFalse(DebugFlags.parse("asserts=off").asserts)

    def testUnknownFlag(self):
        with self.assertLogs("linerec.bootstrap", level="WARNING"):
            DebugFlags.parse("turbo")


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG)
    unittest.main()
