from __future__ import annotations

import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from qpbc.exceptions import EmptyPolytopeError, InvalidInstanceError
from qpbc.model import (
    AffineFunc,
    MultiplierCertificate,
    Polytope,
    QpInstance,
    certificate_gram,
    instance_from_dict,
    is_nonnegative_on,
    load_instance,
    save_instance,
)
from qpbc.utils import is_psd


def _neg_square_on_unit_interval() -> QpInstance:
    return QpInstance(np.array([[-1.0]]), np.zeros(1), Polytope([[1.0], [-1.0]], [1.0, 0.0]))


class PolytopeTests(unittest.TestCase):
    def test_rejects_mismatched_rhs(self) -> None:
        with self.assertRaises(InvalidInstanceError):
            Polytope(np.eye(2), [1.0])

    def test_rejects_non_finite_entries(self) -> None:
        with self.assertRaises(InvalidInstanceError):
            Polytope([[1.0, np.nan]], [1.0])

    def test_box_contains_and_slack(self) -> None:
        P = Polytope.box([0.0, -1.0], [1.0, 2.0])
        self.assertEqual((P.m, P.n), (4, 2))
        self.assertTrue(P.contains([1.0, -1.0]))
        self.assertFalse(P.contains([1.5, 0.0]))
        np.testing.assert_allclose(P.slack(np.array([0.5, 0.0])), [0.5, 2.0, 0.5, 1.0])

    def test_with_rows_appends(self) -> None:
        P = Polytope.box([0.0, 0.0], [1.0, 1.0]).with_rows([1.0, 1.0], [1.0])
        self.assertEqual(P.m, 5)
        self.assertFalse(P.contains([1.0, 1.0]))


class AffineFuncTests(unittest.TestCase):
    def test_cone_operations(self) -> None:
        f = AffineFunc([1.0, -2.0], 3.0)
        g = AffineFunc([0.5, 0.5], -1.0)
        h = f + 2.0 * g
        np.testing.assert_allclose(h.grad, [2.0, -1.0])
        self.assertAlmostEqual(h.offset, 1.0)
        x = np.array([0.3, 0.7])
        self.assertAlmostEqual(h(x), f(x) + 2.0 * g(x))
        self.assertEqual(AffineFunc.zero(3).norm, 0.0)

    def test_nonnegativity_on_polytope(self) -> None:
        P = Polytope.box([0.0], [1.0])
        check = is_nonnegative_on(AffineFunc([1.0], 1.0), P)
        self.assertTrue(check)
        self.assertAlmostEqual(check.minimum, 1.0)
        self.assertFalse(is_nonnegative_on(AffineFunc([1.0], -0.5), P))

    def test_nonnegativity_on_unbounded_and_empty_sets(self) -> None:
        half_line = Polytope([[1.0]], [0.0])
        self.assertFalse(is_nonnegative_on(AffineFunc([1.0], 0.0), half_line))
        empty = Polytope([[1.0], [-1.0]], [0.0, -1.0])
        with self.assertRaises(EmptyPolytopeError):
            is_nonnegative_on(AffineFunc([1.0], 0.0), empty)


class InstanceTests(unittest.TestCase):
    def test_objective_value(self) -> None:
        inst = QpInstance(np.diag([1.0, -2.0]), np.array([1.0, 0.0]), Polytope.box([0, 0], [1, 1]))
        self.assertAlmostEqual(inst.objective(np.array([1.0, 1.0])), 1.0 - 2.0 + 2.0)

    def test_asymmetric_q_is_rejected(self) -> None:
        with self.assertRaises(InvalidInstanceError):
            QpInstance(
                np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros(2), Polytope.box([0, 0], [1, 1])
            )

    def test_dimension_mismatch_is_rejected(self) -> None:
        with self.assertRaises(InvalidInstanceError):
            QpInstance(np.eye(2), np.zeros(3), Polytope.box([0, 0], [1, 1]))
        with self.assertRaises(InvalidInstanceError):
            QpInstance(np.eye(3), np.zeros(3), Polytope.box([0, 0], [1, 1]))

    def test_certificate_gram_of_exact_certificate_is_zero(self) -> None:
        inst = _neg_square_on_unit_interval()
        # -x^2 + 1 + (x + 1)(x - 1) vanishes identically.
        cert = MultiplierCertificate((AffineFunc([1.0], 1.0), AffineFunc.zero(1)), level=-1.0)
        G = certificate_gram(inst, cert)
        np.testing.assert_allclose(G, np.zeros((2, 2)), atol=1e-14)
        self.assertTrue(is_psd(G))

    def test_certificate_with_wrong_length_is_rejected(self) -> None:
        inst = _neg_square_on_unit_interval()
        cert = MultiplierCertificate((AffineFunc.zero(1),), level=0.0)
        with self.assertRaises(InvalidInstanceError):
            certificate_gram(inst, cert)


class InstanceJsonTests(unittest.TestCase):
    def test_equalities_become_row_pairs(self) -> None:
        inst = instance_from_dict(
            {
                "n": 2,
                "Q": [[0.0, 1.0], [1.0, 0.0]],
                "c": [0.0, 0.0],
                "A": [[-1.0, 0.0], [0.0, -1.0]],
                "b": [0.0, 0.0],
                "equalities": {"E": [[1.0, 1.0]], "f": [1.0]},
            }
        )
        self.assertEqual(inst.m, 4)
        np.testing.assert_allclose(inst.A[2] + inst.A[3], [0.0, 0.0])
        self.assertAlmostEqual(inst.b[2] + inst.b[3], 0.0)

    def test_missing_key_and_bad_shapes(self) -> None:
        with self.assertRaises(InvalidInstanceError):
            instance_from_dict({"n": 1, "Q": [[1.0]], "c": [0.0], "A": [[1.0]]})
        with self.assertRaises(InvalidInstanceError):
            instance_from_dict({"n": 2, "Q": [[1.0]], "c": [0.0], "A": [[1.0]], "b": [1.0]})
        with self.assertRaises(InvalidInstanceError):
            instance_from_dict({"n": True, "Q": [[1.0]], "c": [0.0], "A": [[1.0]], "b": [1.0]})

    def test_save_and_load_preserve_data(self) -> None:
        inst = QpInstance(
            -np.eye(2),
            np.array([0.5, 0.0]),
            Polytope.box([-1, -1], [2, 2]),
            name="norm-box",
            known_optimum=-8.0,
        )
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "inst.json"
            save_instance(inst, path)
            data = json.loads(path.read_text(encoding="utf-8"))
            self.assertEqual(data["name"], "norm-box")
            loaded = load_instance(path)
        np.testing.assert_array_equal(loaded.Q, inst.Q)
        np.testing.assert_array_equal(loaded.A, inst.A)
        self.assertEqual(loaded.known_optimum, -8.0)

    def test_load_rejects_non_object(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "list.json"
            path.write_text("[1, 2]", encoding="utf-8")
            with self.assertRaises(InvalidInstanceError):
                load_instance(path)


if __name__ == "__main__":
    unittest.main()
