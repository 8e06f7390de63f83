from __future__ import annotations

import json
import logging
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from qpbc.exceptions import InvalidInstanceError
from qpbc.utils import (
    as_float_array,
    clip_psd,
    dumps,
    gaussian,
    is_psd,
    load_json,
    min_eig,
    philox_rng,
    save_csv,
    save_json,
    save_jsonl,
    setup_logging,
    to_jsonable,
)


class RandomStreamTests(unittest.TestCase):
    def test_same_key_same_stream(self) -> None:
        a = philox_rng(7, 3).random(16)
        b = philox_rng(7, 3).random(16)
        np.testing.assert_array_equal(a, b)

    def test_streams_and_seeds_differ(self) -> None:
        base = philox_rng(7, 0).random(16)
        self.assertFalse(np.array_equal(base, philox_rng(7, 1).random(16)))
        self.assertFalse(np.array_equal(base, philox_rng(8, 0).random(16)))

    def test_gaussian_moments(self) -> None:
        z = gaussian(philox_rng(1), 50_000)
        self.assertTrue(np.all(np.isfinite(z)))
        self.assertLess(abs(float(z.mean())), 0.03)
        self.assertLess(abs(float(z.std()) - 1.0), 0.03)

    def test_out_of_range_seed(self) -> None:
        with self.assertRaises(ValueError):
            philox_rng(-1)
        with self.assertRaises(ValueError):
            philox_rng(0, 2**64)


class MatrixHelperTests(unittest.TestCase):
    def test_psd_checks_and_clipping(self) -> None:
        G = np.array([[1.0, 0.0], [0.0, -1e-3]])
        self.assertFalse(is_psd(G))
        self.assertAlmostEqual(min_eig(G), -1e-3)
        C = clip_psd(G)
        self.assertTrue(is_psd(C))
        np.testing.assert_allclose(C, np.diag([1.0, 0.0]), atol=1e-12)
        self.assertTrue(is_psd(np.array([[1.0, 0.0], [0.0, -1e-9]])))

    def test_as_float_array(self) -> None:
        self.assertEqual(as_float_array([[1, 2]], "A", ndim=2).dtype, np.float64)
        with self.assertRaises(InvalidInstanceError):
            as_float_array([1.0, 2.0], "A", ndim=2)
        with self.assertRaises(InvalidInstanceError):
            as_float_array(["x"], "b", ndim=1)
        with self.assertRaises(InvalidInstanceError):
            as_float_array([np.inf], "b", ndim=1)


class FileHelperTests(unittest.TestCase):
    def test_writers_create_parent_directories(self) -> None:
        df = pd.DataFrame({"id": [0, 1], "action": ["branched", "fathomed_gap"]})
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp) / "nested" / "dir"
            csv_path = save_csv(df, root / "t.csv")
            jsonl_path = save_jsonl(df, root / "t.jsonl")
            json_path = save_json({"lower": 1.5}, root / "t.json")
            self.assertEqual(len(pd.read_csv(csv_path)), 2)
            lines = jsonl_path.read_text(encoding="utf-8").strip().splitlines()
            self.assertEqual(json.loads(lines[1])["action"], "fathomed_gap")
            self.assertEqual(json.loads(json_path.read_text(encoding="utf-8")), {"lower": 1.5})

    def test_numpy_values_and_infinite_bounds_serialize(self) -> None:
        payload = {"lower": -np.inf, "upper": np.float64(2.5), "x": np.array([1.0, np.nan])}
        self.assertEqual(to_jsonable(payload), {"lower": None, "upper": 2.5, "x": [1.0, None]})
        self.assertEqual(json.loads(dumps(payload))["x"], [1.0, None])
        with tempfile.TemporaryDirectory() as tmp:
            path = save_json({"nodes": np.int64(3)}, Path(tmp) / "r.json")
            self.assertEqual(load_json(path), {"nodes": 3})

    def test_malformed_json_is_invalid_input(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "broken.json"
            path.write_text("{not json", encoding="utf-8")
            with self.assertRaises(InvalidInstanceError):
                load_json(path)


class LoggingTests(unittest.TestCase):
    def test_verbose_switches_package_level(self) -> None:
        logger = logging.getLogger("qpbc")
        previous = logger.level
        try:
            setup_logging(verbose=True)
            self.assertEqual(logger.level, logging.DEBUG)
            setup_logging()
            self.assertEqual(logger.level, logging.INFO)
        finally:
            logger.setLevel(previous)


if __name__ == "__main__":
    unittest.main()
