# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

import logging
import os
import tempfile
import unittest

import numpy as np

from linerec.metrics import read_predictions
from linerec.models import preset_config
from linerec.pipeline import ManifestRecord, evaluate, init_random, read_manifest, write_pgm
from linerec.support.exceptions import DataError

TINY = {
    "backbone": {"channels": 8, "expansion": 2, "layers": 2},
    "encoder": {"hidden": 32, "heads": 2, "ffn": 64},
}


class EvaluateTest(unittest.TestCase):
    def setUp(self):
        self._td = tempfile.TemporaryDirectory()
        self.dir = self._td.name
        rnd = np.random.default_rng(0)
        for name, width in (("a.pgm", 90), ("b.pgm", 130), ("c.pgm", 260)):
            write_pgm(
                os.path.join(self.dir, name),
                rnd.integers(0, 256, size=(40, width), dtype=np.uint8),
            )
        self.manifest = os.path.join(self.dir, "dev.tsv")
        with open(self.manifest, "w", encoding="utf-8") as f:
            f.write("a.pgm\tab\n\nb.pgm\tc a\n")
            f.write(f"{os.path.join(self.dir, 'c.pgm')}\tabc\n")
            f.write("missing.pgm\tlost\n")
        self.model = init_random(preset_config("sa-ctc", "abc ", **TINY), 0)

    def tearDown(self):
        self._td.cleanup()

    def testReadManifest(self):
        records = read_manifest(self.manifest)
        self.assertEqual(len(records), 4)
        self.assertEqual(records[0], ManifestRecord(records[0].path, "ab"))
        self.assertEqual(str(records[0].path), os.path.join(self.dir, "a.pgm"))
        self.assertEqual(records[1].truth, "c a")

    def testEvaluate(self):
        report_path = os.path.join(self.dir, "report.csv")
        predictions_path = os.path.join(self.dir, "pred.tsv")
        outcome = evaluate(
            self.manifest,
            self.model,
            predictions_out=predictions_path,
            report_out=report_path,
        )
        report, records = outcome
        self.assertEqual(report.count, 4)
        self.assertEqual(report.failed, 1)
        self.assertEqual([r.truth for r in records], ["ab", "c a", "abc", "lost"])
        self.assertEqual([r.width for r in records], [90, 130, 260, 1])
        self.assertTrue(records[-1].failed)
        self.assertEqual(records[-1].prediction, "")
        self.assertEqual([b.start_px for b in report.buckets], [0, 100, 200])
        self.assertEqual(report.truth_chars, 2 + 3 + 3 + 4)
        self.assertEqual(read_predictions(predictions_path), records)
        with open(report_path, encoding="utf-8") as f:
            self.assertEqual(f.read(), report.to_csv())

    def testThreadsKeepOrder(self):
        serial = evaluate(self.manifest, self.model)
        threaded = evaluate(self.manifest, self.model, threads=3)
        self.assertEqual(threaded.records, serial.records)
        self.assertEqual(threaded.report, serial.report)

    def testRecordsInput(self):
        records = read_manifest(self.manifest)[:2]
        outcome = evaluate(records, self.model, decoder="beam", beam_width=2)
        self.assertEqual(outcome.report.count, 2)

    def testRejects(self):
        with self.assertRaises(DataError):
            evaluate([], self.model)
        with self.assertRaises(DataError):
            read_manifest(os.path.join(self.dir, "absent.tsv"))
        bad = os.path.join(self.dir, "bad.tsv")
        with open(bad, "w", encoding="utf-8") as f:
            f.write("a.pgm ab\n")
        with self.assertRaises(DataError):
            read_manifest(bad)
        empty = os.path.join(self.dir, "empty.tsv")
        with open(empty, "w", encoding="utf-8") as f:
            f.write("\n\n")
        with self.assertRaises(DataError):
            read_manifest(empty)


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG)
    unittest.main()
