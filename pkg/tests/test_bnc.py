from __future__ import annotations

import math
import time
import unittest

import numpy as np

from qpbc.bnc import BnCConfig, branch_direction, solve_bnc, update_lower_bound
from qpbc.exceptions import InvalidInstanceError, UnboundedPolytopeError
from qpbc.generate import GenSpec, generate_instance
from qpbc.model import Polytope, QpInstance
from qpbc.oracle import brute_force_optimum

EPS = 1e-4
ACTIONS = {"fathomed_gap", "fathomed_empty", "cut_added", "branched"}


class HelperTests(unittest.TestCase):
    def test_lower_bound_ledger(self) -> None:
        self.assertEqual(update_lower_bound([-3.0, -1.0], [-2.0]), -3.0)
        self.assertEqual(update_lower_bound([], []), -math.inf)

    def test_branch_direction_is_a_deterministic_unit_vector(self) -> None:
        d = branch_direction(42, 7, 5)
        self.assertAlmostEqual(float(np.linalg.norm(d)), 1.0)
        np.testing.assert_array_equal(d, branch_direction(42, 7, 5))
        self.assertFalse(np.allclose(d, branch_direction(42, 8, 5)))

    def test_config_validation(self) -> None:
        with self.assertRaises(ValueError):
            BnCConfig(eps=0.0)
        with self.assertRaises(ValueError):
            BnCConfig(max_nodes=0)
        with self.assertRaises(ValueError):
            BnCConfig(bound_variant="Z")


class SolveTests(unittest.TestCase):
    def test_root_bound_is_exact(self) -> None:
        inst = QpInstance(np.array([[-1.0]]), np.zeros(1), Polytope.box([0.0], [1.0]))
        res = solve_bnc(inst, BnCConfig(eps=EPS))
        self.assertEqual(res.status, "optimal_within_eps")
        self.assertEqual(res.nodes_processed, 1)
        self.assertAlmostEqual(res.upper, -1.0, places=9)
        np.testing.assert_allclose(res.incumbent, [1.0])

    def test_norm_max_box(self) -> None:
        inst = generate_instance(GenSpec("norm_max", 3, 1, {"lower": -1.0, "upper": 2.0}))
        res = solve_bnc(inst, BnCConfig(eps=EPS))
        self.assertEqual(res.status, "optimal_within_eps")
        self.assertAlmostEqual(res.upper, -12.0, places=6)
        self.assertLessEqual(res.lower, res.upper)
        self.assertGreaterEqual(res.lower, -12.0 - EPS - 1e-6)

    def test_random_concave_instances_match_oracle(self) -> None:
        for seed in range(1, 6):
            inst = generate_instance(GenSpec("dense_concave", 4, seed))
            start = time.perf_counter()
            res = solve_bnc(inst, BnCConfig(eps=EPS, time_limit_sec=60.0))
            self.assertLess(time.perf_counter() - start, 60.0)
            q_star = brute_force_optimum(inst).value
            self.assertEqual(res.status, "optimal_within_eps", inst.name)
            self.assertLessEqual(abs(res.upper - q_star), EPS + 1e-6, inst.name)
            self.assertLessEqual(res.lower, q_star + 1e-6, inst.name)
            self.assertTrue(inst.polytope.contains(res.incumbent, tol=1e-7))

    def test_event_log(self) -> None:
        inst = generate_instance(GenSpec("dense_concave", 4, 2))
        res = solve_bnc(inst, BnCConfig(eps=EPS))
        self.assertTrue(res.events)
        self.assertEqual(res.events[0]["id"], 0)
        self.assertIsNone(res.events[0]["parent"])
        for event in res.events:
            self.assertIn(event["action"], ACTIONS)
            self.assertLessEqual(event["global_lower"], event["upper"] + 1e-9)
        history = list(res.lower_history)
        self.assertTrue(all(b >= a - 1e-12 for a, b in zip(history, history[1:])))
        self.assertEqual(res.to_dict()["nodes"], res.nodes_processed)

    def test_parallel_matches_serial(self) -> None:
        inst = generate_instance(GenSpec("dense_concave", 4, 3))
        serial = solve_bnc(inst, BnCConfig(eps=EPS, seed=7))
        parallel = solve_bnc(inst, BnCConfig(eps=EPS, seed=7, parallel=True, n_jobs=2))
        self.assertEqual(serial.nodes_processed, parallel.nodes_processed)
        self.assertAlmostEqual(serial.upper, parallel.upper, places=9)
        actions = [e["action"] for e in serial.events]
        self.assertEqual(actions, [e["action"] for e in parallel.events])

    def test_node_limit(self) -> None:
        inst = generate_instance(GenSpec("dense_concave", 5, 1))
        res = solve_bnc(inst, BnCConfig(eps=1e-12, max_nodes=1))
        self.assertIn(res.status, {"node_limit", "optimal_within_eps"})
        self.assertLessEqual(res.lower, res.upper)

    def test_lower_dimensional_polytope(self) -> None:
        # x1 + x2 = 1 on the unit square, q = -x1^2 - x2^2: optimum -1 at the endpoints.
        P = Polytope.box([0.0, 0.0], [1.0, 1.0]).with_rows([[1.0, 1.0], [-1.0, -1.0]], [1.0, -1.0])
        inst = QpInstance(-np.eye(2), np.zeros(2), P)
        res = solve_bnc(inst, BnCConfig(eps=EPS))
        self.assertAlmostEqual(res.upper, -1.0, places=6)
        self.assertAlmostEqual(float(res.incumbent.sum()), 1.0, places=8)

    def test_singleton_polytope(self) -> None:
        inst = QpInstance(-np.eye(2), np.zeros(2), Polytope.box([1.0, 1.0], [1.0, 1.0]))
        res = solve_bnc(inst)
        self.assertEqual(res.lower, res.upper)
        self.assertAlmostEqual(res.upper, -2.0)

    def test_rejects_nonconcave_and_unbounded(self) -> None:
        box = Polytope.box([0.0], [1.0])
        with self.assertRaises(InvalidInstanceError):
            solve_bnc(QpInstance(np.array([[1.0]]), np.zeros(1), box))
        with self.assertRaises(UnboundedPolytopeError):
            solve_bnc(QpInstance(np.array([[-1.0]]), np.zeros(1), Polytope([[-1.0]], [0.0])))


class RandomSuiteTests(unittest.TestCase):
    def _check(self, inst: QpInstance) -> None:
        start = time.perf_counter()
        res = solve_bnc(inst, BnCConfig(eps=EPS, time_limit_sec=60.0))
        self.assertLess(time.perf_counter() - start, 60.0, inst.name)
        q_star = brute_force_optimum(inst).value
        self.assertEqual(res.status, "optimal_within_eps", inst.name)
        self.assertLessEqual(abs(res.upper - q_star), EPS + 1e-6 * (1.0 + abs(q_star)), inst.name)
        history = list(res.lower_history)
        self.assertTrue(all(b >= a - 1e-12 for a, b in zip(history, history[1:])), inst.name)

    def test_concave_instances(self) -> None:
        for k in range(10):
            self._check(generate_instance(GenSpec("dense_concave", 3 + k % 4, 200 + k)))
        for k in range(10):
            self._check(generate_instance(GenSpec("sparse_concave", 4 + k % 5, 300 + k)))

    def test_norm_max_boxes(self) -> None:
        for k in range(5):
            inst = generate_instance(
                GenSpec("norm_max", 2 + k, 400 + k, {"lower": -1.0 - 0.5 * k, "upper": 1.0 + k})
            )
            assert inst.known_optimum is not None
            self._check(inst)
            self.assertAlmostEqual(brute_force_optimum(inst).value, inst.known_optimum, places=8)


if __name__ == "__main__":
    unittest.main()
