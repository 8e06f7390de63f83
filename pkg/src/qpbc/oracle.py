#!/usr/bin/env python3
"""Brute-force reference optima used to check bounds and solver output.

Concave objectives attain their minimum at a vertex, so vertex enumeration is
exact for them. Other objectives get an approximate answer: a dense grid over
the bounding box of the (reduced) polytope plus every enumerable vertex, with
the best few candidates refined by SLSQP.
"""

from __future__ import annotations

import logging
import math
from itertools import combinations
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from qpbc.bounds import reduce_instance
from qpbc.config import (
    ENUMERATION_GUARD,
    ORACLE_GRID_POINTS,
    ORACLE_REFINE_STARTS,
    TOL_FEAS,
)
from qpbc.conic import solve_lp
from qpbc.exceptions import (
    EmptyPolytopeError,
    GuardExceededError,
    InvalidInstanceError,
    UnboundedPolytopeError,
)
from qpbc.geometry import chebyshev_center, check_bounded_fulldim, enumerate_vertices
from qpbc.model import QpInstance
from qpbc.utils import philox_rng, psd_tolerance

LOGGER = logging.getLogger(__name__)


class OracleResult(NamedTuple):
    value: float
    argmin: np.ndarray
    approximate: bool = False
    candidates: int = 0


def is_concave(Q: np.ndarray) -> bool:
    return float(np.linalg.eigvalsh(Q)[-1]) <= psd_tolerance(Q)


def _values(inst: QpInstance, X: np.ndarray) -> np.ndarray:
    return np.einsum("ij,jk,ik->i", X, inst.Q, X) + 2.0 * X @ inst.c


def brute_force_optimum(
    inst: QpInstance,
    guard: int = ENUMERATION_GUARD,
    grid_points: int = ORACLE_GRID_POINTS,
) -> OracleResult:
    """Global minimum of q over the polytope.

    Exact for negative semidefinite Q (raises GuardExceededError when C(m, n)
    exceeds ``guard``); otherwise the result carries ``approximate=True``.
    """
    check = check_bounded_fulldim(inst.polytope)
    if not check.bounded:
        raise UnboundedPolytopeError(f"polytope of '{inst.name}' is unbounded.")
    red = check.reduced
    if red.inner is None:
        x0 = red.origin.copy()
        return OracleResult(inst.objective(x0), x0, False, 1)

    if is_concave(inst.Q):
        vertices = enumerate_vertices(inst.polytope, guard=guard)
        if not vertices:
            raise EmptyPolytopeError(f"no vertices found for '{inst.name}'.")
        X = np.array([v.point for v in vertices])
        vals = _values(inst, X)
        k = int(np.argmin(vals))
        LOGGER.debug("%s: %d vertices, optimum %.10g", inst.name, len(vertices), vals[k])
        return OracleResult(float(vals[k]), X[k].copy(), False, len(vertices))

    if red.full_dimensional:
        work, offset = inst, 0.0
    else:
        work, offset, _ = reduce_instance(inst, red)
    value, z, count = _grid_search(work, guard, grid_points)
    x = red.embed(z) if not red.full_dimensional else z
    LOGGER.debug(
        "%s: approximate optimum %.10g from %d candidates", inst.name, value + offset, count
    )
    return OracleResult(value + offset, x, True, count)


def _bounding_box(inst: QpInstance) -> tuple[np.ndarray, np.ndarray]:
    n = inst.n
    lo, hi = np.empty(n), np.empty(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        low = solve_lp(e, A_ub=inst.A, b_ub=inst.b)
        high = solve_lp(-e, A_ub=inst.A, b_ub=inst.b)
        if not (low.ok and high.ok):
            raise InvalidInstanceError(f"could not bound coordinate {k} of '{inst.name}'.")
        lo[k], hi[k] = low.objective_value, -high.objective_value
    return lo, hi


def _grid(lo: np.ndarray, hi: np.ndarray, points: int) -> np.ndarray:
    d = lo.shape[0]
    per_axis = int(math.floor(points ** (1.0 / d)))
    if per_axis >= 2:
        axes = [np.linspace(lo[k], hi[k], per_axis) for k in range(d)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return lo + (hi - lo) * philox_rng(0).random((points, d))


def _grid_search(inst: QpInstance, guard: int, points: int) -> tuple[float, np.ndarray, int]:
    P = inst.polytope
    lo, hi = _bounding_box(inst)
    X = _grid(lo, hi, points)
    X = X[np.all(X @ P.A.T <= P.b + TOL_FEAS, axis=1)]
    try:
        verts = np.array([v.point for v in enumerate_vertices(P, guard=guard)])
    except GuardExceededError:
        verts = np.empty((0, inst.n))
    X = np.vstack([X, verts.reshape(-1, inst.n), chebyshev_center(P).center[None, :]])
    vals = _values(inst, X)
    order = np.argsort(vals)
    best, best_x = float(vals[order[0]]), X[order[0]].copy()

    cons = {
        "type": "ineq",
        "fun": lambda z: P.b - P.A @ z,
        "jac": lambda z: -P.A,
    }
    for idx in order[:ORACLE_REFINE_STARTS]:
        res = minimize(
            inst.objective,
            X[idx],
            jac=lambda z: 2.0 * (inst.Q @ z + inst.c),
            method="SLSQP",
            constraints=[cons],
            options={"ftol": 1e-12, "maxiter": 500},
        )
        z = np.asarray(res.x, dtype=float)
        if not P.contains(z, tol=1e-7):
            continue
        val = inst.objective(z)
        if val < best:
            best, best_x = val, z
    return best, best_x, int(X.shape[0])


def stqp_face_oracle(Q: np.ndarray, guard: int = ENUMERATION_GUARD) -> OracleResult:
    """min x^T Q x over the standard simplex by enumerating supports.

    On every support S the stationarity system Q_SS x = lam e, e^T x = 1 is
    solved; feasible solutions are candidates and the best one is returned.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise InvalidInstanceError(f"Q must be square, got shape {Q.shape}.")
    Q = 0.5 * (Q + Q.T)
    n = Q.shape[0]
    if 2**n - 1 > guard:
        raise GuardExceededError(f"2^{n} - 1 supports exceed the guard {guard}.")
    best, best_x, count = math.inf, np.full(n, np.nan), 0
    for size in range(1, n + 1):
        for support in combinations(range(n), size):
            S = list(support)
            K = np.zeros((size + 1, size + 1))
            K[:size, :size] = Q[np.ix_(S, S)]
            K[:size, size] = -1.0
            K[size, :size] = 1.0
            rhs = np.zeros(size + 1)
            rhs[size] = 1.0
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            if np.linalg.norm(K @ sol - rhs) > 1e-9 or np.any(sol[:size] < -1e-12):
                continue
            x = np.zeros(n)
            x[S] = np.clip(sol[:size], 0.0, None)
            x /= x.sum()
            count += 1
            val = float(x @ Q @ x)
            if val < best:
                best, best_x = val, x
    return OracleResult(best, best_x, False, count)
