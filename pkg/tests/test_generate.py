from __future__ import annotations

import tempfile
import unittest
from pathlib import Path

import numpy as np

from qpbc.config import GENERATOR_KINDS
from qpbc.generate import GenSpec, _acceptable, default_suite, generate_instance, write_instance
from qpbc.geometry import check_bounded_fulldim
from qpbc.model import QpInstance
from qpbc.oracle import brute_force_optimum, is_concave


class GenSpecTests(unittest.TestCase):
    def test_validation(self) -> None:
        with self.assertRaises(ValueError):
            GenSpec("unknown", 4, 1)
        with self.assertRaises(ValueError):
            GenSpec("stqp", 1, 1)
        with self.assertRaises(ValueError):
            GenSpec("stqp", 3, -1)
        self.assertEqual(GenSpec("stqp", 3, 9).name, "stqp-n3-s9")


class GeneratorTests(unittest.TestCase):
    def test_dense_concave_shape_and_spectrum(self) -> None:
        inst = generate_instance(GenSpec("dense_concave", 5, 1))
        self.assertEqual(inst.m, 2 * 5 + 1)
        self.assertLessEqual(float(np.linalg.eigvalsh(inst.Q)[-1]), 1e-12)
        np.testing.assert_array_equal(inst.A[5], np.ones(5))
        self.assertEqual(inst.b[5], 100.0)
        check = check_bounded_fulldim(inst.polytope)
        self.assertTrue(check.bounded)
        self.assertTrue(check.reduced.full_dimensional)

    def test_norm_max_box_optimum(self) -> None:
        inst = generate_instance(GenSpec("norm_max", 3, 1, {"lower": -1.0, "upper": 2.0}))
        self.assertEqual(inst.known_optimum, -12.0)
        self.assertAlmostEqual(brute_force_optimum(inst).value, -12.0)

    def test_norm_max_dense_polytope(self) -> None:
        inst = generate_instance(GenSpec("norm_max", 3, 2, {"polytope": "dense"}))
        np.testing.assert_array_equal(inst.Q, -np.eye(3))
        self.assertIsNone(inst.known_optimum)

    def test_every_kind_is_reproducible(self) -> None:
        for kind in GENERATOR_KINDS:
            spec = GenSpec(kind, 4, 11)
            a, b = generate_instance(spec), generate_instance(spec)
            np.testing.assert_array_equal(a.Q, b.Q)
            np.testing.assert_array_equal(a.A, b.A)
            np.testing.assert_array_equal(a.b, b.b)
            np.testing.assert_array_equal(a.c, b.c)

    def test_seeds_differ(self) -> None:
        a = generate_instance(GenSpec("dense_concave", 4, 1))
        b = generate_instance(GenSpec("dense_concave", 4, 2))
        self.assertFalse(np.array_equal(a.Q, b.Q))

    def test_sparse_concave_is_concave(self) -> None:
        inst = generate_instance(GenSpec("sparse_concave", 6, 3, {"density": 0.5}))
        self.assertTrue(is_concave(inst.Q))

    def test_box_qp_equalities_hold_at_some_point(self) -> None:
        inst = generate_instance(GenSpec("box_qp", 5, 2, {"equalities": 2}))
        self.assertEqual(inst.m, 2 * 5 + 4)
        check = check_bounded_fulldim(inst.polytope)
        self.assertEqual(check.reduced.dim, 3)
        with self.assertRaises(ValueError):
            generate_instance(GenSpec("box_qp", 3, 1, {"equalities": 3}))

    def test_stqp_is_on_the_simplex(self) -> None:
        inst = generate_instance(GenSpec("stqp", 4, 5))
        self.assertTrue(np.all(inst.Q >= 0.0))
        self.assertTrue(inst.polytope.contains(np.full(4, 0.25)))
        self.assertFalse(inst.polytope.contains(np.full(4, 0.3)))

    def test_acceptance_follows_the_kind_not_the_name(self) -> None:
        inst = generate_instance(GenSpec("stqp", 3, 1))
        renamed = QpInstance(inst.Q, inst.c, inst.polytope, name="custom")
        self.assertTrue(_acceptable(renamed, "stqp"))
        self.assertFalse(_acceptable(renamed, "dense_concave"))


class WriteTests(unittest.TestCase):
    def test_same_seed_gives_identical_files(self) -> None:
        spec = GenSpec("dense_concave", 4, 17)
        with tempfile.TemporaryDirectory() as tmp:
            first, second = Path(tmp) / "a.json", Path(tmp) / "b.json"
            write_instance(spec, first)
            write_instance(spec, second)
            self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_default_suite_order(self) -> None:
        suite = default_suite(("dense_concave", "norm_max"), (5, 6), (1,))
        self.assertEqual(
            [s.name for s in suite],
            ["dense_concave-n5-s1", "dense_concave-n6-s1", "norm_max-n5-s1", "norm_max-n6-s1"],
        )


if __name__ == "__main__":
    unittest.main()
