from __future__ import annotations

import json
import math
import tempfile
import unittest
from pathlib import Path

import pandas as pd

from qpbc.bench import REPORT_COLUMNS, run_benchmark
from qpbc.bnc import BnCConfig
from qpbc.generate import GenSpec, write_instance

TINY_SUITE = [
    GenSpec("dense_concave", 3, 1),
    GenSpec("norm_max", 3, 1, {"lower": -1.0, "upper": 2.0}),
    GenSpec("sparse_concave", 3, 2),
]


class BenchmarkTests(unittest.TestCase):
    def test_tiny_suite_is_solved_and_written(self) -> None:
        cfg = BnCConfig(eps=1e-4, time_limit_sec=60.0)
        report = run_benchmark(TINY_SUITE, cfg)
        self.assertEqual(len(report), 3)
        table = report.table
        self.assertEqual(list(table.columns), list(REPORT_COLUMNS))
        self.assertTrue((table["status"] == "optimal_within_eps").all())
        for row in report.rows:
            self.assertLessEqual(row["lb"], row["q_star"] + 1e-6)
            self.assertLessEqual(row["q_star"], row["ub"] + 1e-4)
        self.assertAlmostEqual(report.rows[1]["q_star"], -12.0)

        with tempfile.TemporaryDirectory() as tmp:
            csv_path, json_path = report.write(tmp)
            self.assertEqual(len(pd.read_csv(csv_path)), 3)
            records = json.loads(Path(json_path).read_text(encoding="utf-8"))
            self.assertEqual([r["instance"] for r in records], [s.name for s in TINY_SUITE])

    def test_time_limit_keeps_bounds_ordered(self) -> None:
        report = run_benchmark(TINY_SUITE[:1], BnCConfig(time_limit_sec=0.001), with_oracle=False)
        row = report.rows[0]
        self.assertIn(row["status"], {"time_limit", "optimal_within_eps"})
        self.assertLessEqual(row["lb"], row["ub"])
        self.assertTrue(math.isnan(row["q_star"]))

    def test_empty_suite(self) -> None:
        report = run_benchmark([])
        self.assertEqual(len(report), 0)
        self.assertEqual(list(report.table.columns), list(REPORT_COLUMNS))

    def test_failures_are_recorded_per_row(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            good = Path(tmp) / "good.json"
            write_instance(GenSpec("dense_concave", 3, 1), good)
            missing = Path(tmp) / "missing.json"
            report = run_benchmark([missing, good], BnCConfig(eps=1e-4))
        statuses = list(report.table["status"])
        self.assertEqual(statuses[0], "error")
        self.assertIn("missing", report.rows[0]["instance"])
        self.assertEqual(statuses[1], "optimal_within_eps")

    def test_parallel_rows_keep_input_order(self) -> None:
        report = run_benchmark(TINY_SUITE, BnCConfig(eps=1e-4), n_jobs=2, with_oracle=False)
        self.assertEqual(list(report.table["instance"]), [s.name for s in TINY_SUITE])


if __name__ == "__main__":
    unittest.main()
