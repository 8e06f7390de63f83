from __future__ import annotations

import unittest

import numpy as np

from qpbc.conic import (
    ConicProblem,
    _Breakdown,
    _interior_step,
    _is_interior,
    _Layout,
    _NewtonSystem,
    free,
    get_backend,
    nonneg,
    psd,
    skron,
    smat,
    solve_convex_qp,
    solve_lp,
    solve_sdp,
    svec,
    svec_dim,
)
from qpbc.exceptions import InvalidInstanceError
from qpbc.utils import philox_rng


def _projected_gradient(
    H: np.ndarray, g: np.ndarray, lo: np.ndarray, hi: np.ndarray, iters: int = 100_000
) -> np.ndarray:
    step = 1.0 / (2.0 * float(np.linalg.eigvalsh(H)[-1]))
    x = 0.5 * (lo + hi)
    for _ in range(iters):
        x = np.clip(x - step * 2.0 * (H @ x + g), lo, hi)
    return x


class SvecTests(unittest.TestCase):
    def test_svec_preserves_inner_products(self) -> None:
        A = np.array([[1.0, 2.0, 0.0], [2.0, -1.0, 3.0], [0.0, 3.0, 4.0]])
        B = np.array([[0.5, -1.0, 1.0], [-1.0, 2.0, 0.0], [1.0, 0.0, 1.0]])
        self.assertEqual(svec(A).shape, (svec_dim(3),))
        self.assertAlmostEqual(float(svec(A) @ svec(B)), float(np.trace(A @ B)))
        np.testing.assert_allclose(smat(svec(A), 3), A)


class NewtonSystemTests(unittest.TestCase):
    BLOCKS = (free(1), nonneg(2), psd(2))

    def _iterate(self, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rng = philox_rng(seed)
        A = rng.standard_normal((3, 6))
        G = rng.standard_normal((2, 2))
        H = rng.standard_normal((2, 2))
        x = np.concatenate([[0.3], 0.5 + rng.random(2), svec(G @ G.T + np.eye(2))])
        s = np.concatenate([[0.0], 0.5 + rng.random(2), svec(H @ H.T + np.eye(2))])
        return A, x, s

    def test_direction_solves_the_full_linear_system(self) -> None:
        layout = _Layout.of(self.BLOCKS)
        for seed in range(5):
            A, x, s = self._iterate(seed)
            rng = philox_rng(100 + seed)
            R, rp, rd = rng.standard_normal(6), rng.standard_normal(3), rng.standard_normal(6)
            system = _NewtonSystem.at(layout, A, x, s)
            dx, dy, ds = system.direction(R, rp, rd)

            W = np.zeros((6, 6))
            W[1:3, 1:3] = np.diag(x[1:3] / s[1:3])
            W[3:, 3:] = skron(smat(x[3:], 2), np.linalg.inv(smat(s[3:], 2)))
            # Unknowns (dx, dy, ds); rows: primal, dual, complementarity on cone, ds_free = 0.
            K = np.zeros((15, 15))
            K[:3, :6] = A
            K[3:9, 6:9] = A.T
            K[3:9, 9:] = np.eye(6)
            K[9:14, 1:6] = np.eye(5)
            K[9:14, 9:] = W[1:, :]
            K[14, 9] = 1.0
            ref = np.linalg.solve(K, np.concatenate([rp, rd, R[1:], [0.0]]))

            np.testing.assert_allclose(dx, ref[:6], atol=1e-8)
            np.testing.assert_allclose(dy, ref[6:9], atol=1e-8)
            np.testing.assert_allclose(ds, ref[9:], atol=1e-8)
            np.testing.assert_allclose(A @ dx, rp, atol=1e-8)
            np.testing.assert_allclose(A.T @ dy + ds, rd, atol=1e-8)
            np.testing.assert_allclose((dx + system.apply_w(ds))[1:], R[1:], atol=1e-8)

    def test_indefinite_dual_slack_breaks_down(self) -> None:
        layout = _Layout.of(self.BLOCKS)
        A, x, s = self._iterate(7)
        s[3:] = svec(np.diag([1.0, -1.0]))
        with self.assertRaises(_Breakdown):
            _NewtonSystem.at(layout, A, x, s)


class InteriorStepTests(unittest.TestCase):
    def test_psd_step_backs_off_to_a_definite_matrix(self) -> None:
        layout = _Layout.of((psd(2),))
        v, dv = svec(np.eye(2)), svec(-2.0 * np.eye(2))
        step = _interior_step(layout, v, dv, 1.0)
        self.assertLess(step, 0.5)
        self.assertGreater(step, 0.4)
        self.assertTrue(_is_interior(layout, v + step * dv))

    def test_boundary_of_the_orthant_is_not_interior(self) -> None:
        layout = _Layout.of((nonneg(2),))
        v, dv = np.ones(2), np.array([-1.0, 0.5])
        self.assertFalse(_is_interior(layout, v + dv))
        self.assertAlmostEqual(_interior_step(layout, v, dv, 1.0), 0.9)
        self.assertEqual(_interior_step(layout, v, dv, 0.5), 0.5)

    def test_no_interior_point_breaks_down(self) -> None:
        layout = _Layout.of((nonneg(1),))
        with self.assertRaises(_Breakdown):
            _interior_step(layout, np.ones(1), np.array([-1e40]), 1.0)


class ConicSolveTests(unittest.TestCase):
    def test_min_eigenvalue_sdp(self) -> None:
        C = np.array([[2.0, 1.0], [1.0, 2.0]])
        problem = ConicProblem(svec(C), svec(np.eye(2))[None, :], [1.0], (psd(2),))
        sol = solve_sdp(problem)
        self.assertTrue(sol.ok)
        self.assertAlmostEqual(sol.objective_value, 1.0, places=6)
        X = sol.block(0)
        self.assertAlmostEqual(float(np.trace(X)), 1.0, places=6)
        np.testing.assert_allclose(X, 0.5 * np.array([[1.0, -1.0], [-1.0, 1.0]]), atol=1e-5)

    def test_linear_program_in_conic_form(self) -> None:
        problem = ConicProblem([1.0, 2.0], [[1.0, 1.0]], [1.0], (nonneg(2),))
        sol = solve_sdp(problem)
        self.assertEqual(sol.status, "optimal")
        self.assertAlmostEqual(sol.objective_value, 1.0, places=6)
        np.testing.assert_allclose(sol.primal, [1.0, 0.0], atol=1e-6)

    def test_maximize_with_free_and_psd_blocks(self) -> None:
        # max l s.t. [[1, 0], [0, 3]] - l I = S, S PSD: the answer is the smallest eigenvalue.
        sd = svec_dim(2)
        A = np.hstack([svec(np.eye(2))[:, None], np.eye(sd)])
        problem = ConicProblem(
            np.concatenate([[1.0], np.zeros(sd)]),
            A,
            svec(np.diag([1.0, 3.0])),
            (free(1), psd(2)),
            maximize=True,
        )
        sol = solve_sdp(problem)
        self.assertTrue(sol.ok)
        self.assertAlmostEqual(float(sol.primal[0]), 1.0, places=6)
        self.assertAlmostEqual(sol.objective_value, 1.0, places=6)

    def test_inconsistent_equalities_are_infeasible(self) -> None:
        problem = ConicProblem([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0], (nonneg(2),))
        self.assertEqual(solve_sdp(problem).status, "infeasible")

    def test_problem_shapes_are_validated(self) -> None:
        with self.assertRaises(ValueError):
            ConicProblem([1.0], [[1.0, 1.0]], [1.0], (nonneg(2),))
        with self.assertRaises(ValueError):
            get_backend("no-such-backend")


class LinearProgramTests(unittest.TestCase):
    def test_optimal_with_nonnegative_duals(self) -> None:
        sol = solve_lp([-1.0, -1.0], A_ub=np.eye(2), b_ub=[1.0, 2.0])
        self.assertEqual(sol.status, "optimal")
        self.assertAlmostEqual(sol.objective_value, -3.0)
        np.testing.assert_allclose(sol.dual, [1.0, 1.0], atol=1e-9)
        self.assertLess(sol.gap, 1e-9)

    def test_infeasible_and_unbounded(self) -> None:
        empty = solve_lp([0.0], A_ub=[[1.0], [-1.0]], b_ub=[0.0, -1.0])
        self.assertEqual(empty.status, "infeasible")
        self.assertEqual(solve_lp([-1.0], A_ub=[[-1.0]], b_ub=[0.0]).status, "unbounded")


class ConvexQpTests(unittest.TestCase):
    def test_separable_box_qp(self) -> None:
        lo, hi = np.zeros(2), np.ones(2)
        A = np.vstack([np.eye(2), -np.eye(2)])
        b = np.concatenate([hi, -lo])
        sol = solve_convex_qp(np.eye(2), np.array([-2.0, 0.5]), A, b)
        self.assertTrue(sol.ok)
        np.testing.assert_allclose(sol.primal, [1.0, 0.0], atol=1e-6)
        self.assertAlmostEqual(sol.objective_value, -3.0, places=6)

    def test_matches_projected_gradient_on_random_boxes(self) -> None:
        rng = philox_rng(11)
        for _ in range(3):
            n = 4
            B = rng.standard_normal((n, n))
            H = B.T @ B + 0.5 * np.eye(n)
            g = rng.standard_normal(n) * 3.0
            lo = -rng.random(n)
            hi = rng.random(n)
            A = np.vstack([np.eye(n), -np.eye(n)])
            b = np.concatenate([hi, -lo])
            sol = solve_convex_qp(H, g, A, b)
            ref = _projected_gradient(H, g, lo, hi)
            self.assertTrue(sol.ok)
            ref_value = float(ref @ H @ ref + 2.0 * g @ ref)
            self.assertAlmostEqual(sol.objective_value, ref_value, places=6)
            np.testing.assert_allclose(sol.primal, ref, atol=1e-5)

    def test_indefinite_matrix_is_rejected(self) -> None:
        with self.assertRaises(InvalidInstanceError):
            solve_convex_qp(np.diag([1.0, -1.0]), np.zeros(2), np.eye(2), np.ones(2))

    def test_empty_feasible_set(self) -> None:
        sol = solve_convex_qp(np.eye(1), np.zeros(1), [[1.0], [-1.0]], [0.0, -1.0])
        self.assertEqual(sol.status, "infeasible")


if __name__ == "__main__":
    unittest.main()
