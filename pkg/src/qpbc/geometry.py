#!/usr/bin/env python3
"""Polytope preprocessing and vertex machinery.

Every routine here works on the H-representation {x : A x <= b} and talks to
HiGHS through ``qpbc.conic.solve_lp``. Vertices are identified by their
active rows; a basis is always the lowest-index subset of active rows whose
matrix has full rank, so identical inputs produce identical vertices.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from qpbc.config import (
    BASIS_COND_LIMIT,
    ENUMERATION_BATCH,
    ENUMERATION_GUARD,
    MAX_DESCENT_PIVOTS,
    TOL_FEAS,
    TOL_IMPR,
    VERTEX_DEDUP_TOL,
)
from qpbc.conic import solve_lp
from qpbc.exceptions import (
    EmptyPolytopeError,
    GuardExceededError,
    LowerDimensionalError,
    UnboundedPolytopeError,
)
from qpbc.model import Polytope, QpInstance
from qpbc.utils import frozen

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Vertex:
    point: np.ndarray
    active_set: tuple[int, ...]
    basis: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "point", frozen(np.array(self.point, dtype=float)))
        object.__setattr__(self, "active_set", tuple(int(i) for i in self.active_set))
        object.__setattr__(self, "basis", tuple(int(i) for i in self.basis))

    @property
    def degenerate(self) -> bool:
        return len(self.active_set) > len(self.basis)


@dataclass(frozen=True)
class ReducedPolytope:
    """P written as {origin + basis @ z : inner.A z <= inner.b}.

    ``basis`` has orthonormal columns spanning the directions of the affine
    hull; ``inner`` is None when P is a single point. ``inner_rows`` maps each
    row of ``inner`` to its row in P.
    """

    inner: Polytope | None
    origin: np.ndarray
    basis: np.ndarray
    implicit_equalities: tuple[int, ...]
    inner_rows: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", frozen(np.array(self.origin, dtype=float)))
        object.__setattr__(self, "basis", frozen(np.array(self.basis, dtype=float)))
        object.__setattr__(self, "implicit_equalities", tuple(self.implicit_equalities))
        object.__setattr__(self, "inner_rows", tuple(int(i) for i in self.inner_rows))

    @property
    def dim(self) -> int:
        return int(self.basis.shape[1])

    @property
    def full_dimensional(self) -> bool:
        return not self.implicit_equalities

    def embed(self, z: np.ndarray) -> np.ndarray:
        return self.origin + self.basis @ np.asarray(z, dtype=float)

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.basis.T @ (np.asarray(x, dtype=float) - self.origin)

    @classmethod
    def identity(cls, P: Polytope) -> ReducedPolytope:
        return cls(P, np.zeros(P.n), np.eye(P.n), (), tuple(range(P.m)))


class GeometryCheck(NamedTuple):
    bounded: bool
    reduced: ReducedPolytope


class Ball(NamedTuple):
    center: np.ndarray
    radius: float


def _row_norms(A: np.ndarray) -> np.ndarray:
    return np.linalg.norm(A, axis=1)


def _slack_tol(P: Polytope, tol: float) -> np.ndarray:
    return tol * np.maximum(1.0, _row_norms(P.A))


def check_bounded_fulldim(P: Polytope, tol: float = TOL_FEAS) -> GeometryCheck:
    """Detect emptiness, boundedness and implicit equalities; reduce to full dimension."""
    norms = _row_norms(P.A)
    c = np.zeros(P.n + 1)
    c[-1] = -1.0
    ball = solve_lp(
        c,
        A_ub=np.hstack([P.A, norms[:, None]]),
        b_ub=P.b,
        bounds=[(None, None)] * P.n + [(None, 1.0)],
    )
    if ball.status != "optimal":
        raise EmptyPolytopeError(f"feasibility LP ended with status {ball.status}.")
    depth = float(ball.primal[-1])
    if depth < -tol:
        raise EmptyPolytopeError(f"polytope is empty (max uniform slack {depth:.3e}).")

    implicit: list[int] = []
    if depth <= tol:
        for i in range(P.m):
            if norms[i] <= tol:
                continue
            low = solve_lp(P.A[i], A_ub=P.A, b_ub=P.b)
            if low.status == "optimal" and low.objective_value >= P.b[i] - tol * max(1.0, norms[i]):
                implicit.append(i)

    bounded = True
    for k in range(P.n):
        for sign in (1.0, -1.0):
            e = np.zeros(P.n)
            e[k] = sign
            if solve_lp(e, A_ub=P.A, b_ub=P.b).status == "unbounded":
                bounded = False
                break
        if not bounded:
            break

    if not implicit:
        return GeometryCheck(bounded, ReducedPolytope.identity(P))

    E, f = P.A[implicit], P.b[implicit]
    N = sla.null_space(E)
    x0 = sla.lstsq(E, f)[0]
    rest = [i for i in range(P.m) if i not in implicit]
    inner: Polytope | None = None
    inner_rows: list[int] = []
    if N.shape[1] > 0:
        A_in = P.A[rest] @ N
        b_in = P.b[rest] - P.A[rest] @ x0
        keep = _row_norms(A_in) > tol
        inner = Polytope(A_in[keep], b_in[keep])
        inner_rows = [i for i, k in zip(rest, keep) if k]
    LOGGER.debug(
        "polytope has %d implicit equalities; reduced dimension %d", len(implicit), N.shape[1]
    )
    return GeometryCheck(bounded, ReducedPolytope(inner, x0, N, tuple(implicit), tuple(inner_rows)))


def chebyshev_center(P: Polytope, tol: float = TOL_FEAS) -> Ball:
    """Center and radius of the largest ball inside P."""
    norms = _row_norms(P.A)
    c = np.zeros(P.n + 1)
    c[-1] = -1.0
    sol = solve_lp(
        c,
        A_ub=np.hstack([P.A, norms[:, None]]),
        b_ub=P.b,
        bounds=[(None, None)] * P.n + [(0.0, None)],
    )
    if sol.status == "infeasible":
        raise EmptyPolytopeError("Chebyshev LP is infeasible: polytope is empty.")
    if sol.status == "unbounded":
        raise UnboundedPolytopeError(
            "Chebyshev LP is unbounded: polytope contains arbitrarily large balls."
        )
    if sol.status != "optimal":
        raise EmptyPolytopeError(f"Chebyshev LP ended with status {sol.status}.")
    radius = float(sol.primal[-1])
    if radius <= tol:
        raise LowerDimensionalError(f"Chebyshev radius {radius:.3e} <= {tol:g}: no interior.")
    return Ball(sol.primal[:-1].copy(), radius)


def _lowest_basis(A: np.ndarray, rows: list[int], n: int) -> list[int]:
    basis: list[int] = []
    for i in rows:
        trial = basis + [i]
        if np.linalg.matrix_rank(A[trial]) == len(trial):
            basis = trial
            if len(basis) == n:
                break
    return basis


def _active_rows(P: Polytope, x: np.ndarray, tol: float) -> list[int]:
    return [int(i) for i in np.flatnonzero(P.slack(x) <= _slack_tol(P, tol))]


def vertex_at(P: Polytope, point: np.ndarray, tol: float = TOL_FEAS) -> Vertex:
    """Build the vertex at ``point``; the point is snapped onto its basis rows."""
    x = np.asarray(point, dtype=float)
    active = _active_rows(P, x, tol)
    basis = _lowest_basis(P.A, active, P.n)
    if len(basis) < P.n:
        raise ValueError(
            f"point is not a vertex: active rows {active} have rank {len(basis)} < {P.n}."
        )
    snapped = np.linalg.solve(P.A[basis], P.b[basis])
    return Vertex(snapped, tuple(_active_rows(P, snapped, tol)), tuple(basis))


def _edge_directions(P: Polytope, basis: tuple[int, ...]) -> np.ndarray:
    """Columns d_k with A_B d_k = -e_k."""
    return -np.linalg.inv(P.A[list(basis)])


def _ratio_step(P: Polytope, x: np.ndarray, d: np.ndarray, rows: list[int], tol: float) -> float:
    step = math.inf
    slack = P.slack(x)
    for j in rows:
        rate = float(P.A[j] @ d)
        if rate > tol:
            t = max(float(slack[j]), 0.0) / rate
            if t < step:
                step = t
    return step


def _candidate_bases(P: Polytope, v: Vertex) -> Iterator[tuple[int, ...]]:
    if not v.degenerate:
        yield v.basis
        return
    if math.comb(len(v.active_set), P.n) > ENUMERATION_GUARD:
        raise GuardExceededError(
            f"degenerate vertex with {len(v.active_set)} active rows has too many bases."
        )
    for combo in itertools.combinations(v.active_set, P.n):
        if np.linalg.cond(P.A[list(combo)]) < BASIS_COND_LIMIT:
            yield combo


def adjacent_vertices(P: Polytope, v: Vertex, tol: float = TOL_FEAS) -> list[Vertex]:
    """Vertices reachable from v by one feasible pivot, in basis order."""
    inactive = [j for j in range(P.m) if j not in set(v.active_set)]
    out: list[Vertex] = []
    for basis in _candidate_bases(P, v):
        others = [j for j in v.active_set if j not in basis]
        D = _edge_directions(P, basis)
        for k in range(P.n):
            d = D[:, k]
            if others and np.any(P.A[others] @ d > tol):
                continue
            step = _ratio_step(P, v.point, d, inactive, tol)
            if not math.isfinite(step) or step <= tol:
                continue
            w = vertex_at(P, v.point + step * d, tol)
            if np.max(np.abs(w.point - v.point)) <= VERTEX_DEDUP_TOL:
                continue
            if any(np.max(np.abs(w.point - u.point)) <= VERTEX_DEDUP_TOL for u in out):
                continue
            out.append(w)
    return out


def _objective(inst: QpInstance, x: np.ndarray) -> float:
    return float(x @ inst.Q @ x + 2.0 * inst.c @ x)


def _push_to_vertex(inst: QpInstance, P: Polytope, x: np.ndarray, tol: float) -> np.ndarray:
    """Move along null directions of the active rows until n independent rows are active."""
    for _ in range(P.n + 1):
        active = _active_rows(P, x, tol)
        if active and np.linalg.matrix_rank(P.A[active]) == P.n:
            return x
        d = sla.null_space(P.A[active])[:, 0] if active else np.eye(P.n)[:, 0]
        rows = list(range(P.m))
        forward = _ratio_step(P, x, d, rows, tol)
        backward = _ratio_step(P, x, -d, rows, tol)
        if not (math.isfinite(forward) and math.isfinite(backward)):
            raise UnboundedPolytopeError("polytope is unbounded along a descent direction.")
        ahead, behind = x + forward * d, x - backward * d
        x = ahead if _objective(inst, ahead) <= _objective(inst, behind) else behind
    return x


def local_vertex_descent(inst: QpInstance, start: np.ndarray, tol: float = TOL_FEAS) -> Vertex:
    """Find a vertex of inst.polytope no adjacent vertex improves on.

    The start point is first moved to a vertex by the LP over the
    linearization of q at the start; when that does not decrease q, the point
    is pushed to a vertex along null directions instead. First-improvement
    pivoting follows. The value never exceeds q(start) when q is concave.
    """
    P = inst.polytope
    start = np.asarray(start, dtype=float)
    q_start = _objective(inst, start)
    grad = 2.0 * (inst.Q @ start + inst.c)
    lp = solve_lp(grad, A_ub=P.A, b_ub=P.b)
    if lp.status == "unbounded":
        raise UnboundedPolytopeError("linearized objective is unbounded on the polytope.")
    x = lp.primal if lp.status == "optimal" else start
    if lp.status != "optimal" or _objective(inst, x) > q_start + tol:
        x = start
    x = _push_to_vertex(inst, P, x, tol)
    v = vertex_at(P, x, tol)
    value = _objective(inst, v.point)

    for _ in range(MAX_DESCENT_PIVOTS):
        for w in adjacent_vertices(P, v, tol):
            w_value = _objective(inst, w.point)
            if w_value < value - TOL_IMPR:
                v, value = w, w_value
                break
        else:
            return v
    LOGGER.warning("vertex descent stopped after %d pivots", MAX_DESCENT_PIVOTS)
    return v


def partition_at(
    P: Polytope, point: np.ndarray, direction: np.ndarray
) -> tuple[Polytope, Polytope]:
    """Split P by the hyperplane through ``point`` with normal ``direction``."""
    d = np.asarray(direction, dtype=float)
    if not np.any(d):
        raise ValueError("partition direction must be nonzero.")
    level = float(d @ np.asarray(point, dtype=float))
    return P.with_rows(d, [level]), P.with_rows(-d, [-level])


def enumerate_vertices(
    P: Polytope, guard: int = ENUMERATION_GUARD, tol: float = TOL_FEAS
) -> list[Vertex]:
    """All vertices of P by brute force over n-row bases, in basis order."""
    m, n = P.m, P.n
    total = math.comb(m, n)
    if total > guard:
        raise GuardExceededError(f"C({m}, {n}) = {total} bases exceed the guard {guard}.")
    feas_tol = tol * (1.0 + np.abs(P.b))
    points: list[np.ndarray] = []
    bases: list[tuple[int, ...]] = []
    combos = itertools.combinations(range(m), n)
    while True:
        batch = list(itertools.islice(combos, ENUMERATION_BATCH))
        if not batch:
            break
        idx = np.array(batch, dtype=int)
        A_b = P.A[idx]
        ok = np.linalg.cond(A_b) < BASIS_COND_LIMIT
        if not np.any(ok):
            continue
        idx, A_b = idx[ok], A_b[ok]
        X = np.linalg.solve(A_b, P.b[idx][:, :, None])[:, :, 0]
        feasible = np.all(X @ P.A.T <= P.b + feas_tol, axis=1)
        for basis, x in zip(idx[feasible], X[feasible]):
            if points and np.min(np.max(np.abs(np.array(points) - x), axis=1)) <= VERTEX_DEDUP_TOL:
                continue
            points.append(x)
            bases.append(tuple(int(i) for i in basis))
    return [Vertex(x, tuple(_active_rows(P, x, tol)), basis) for x, basis in zip(points, bases)]
