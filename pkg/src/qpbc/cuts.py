#!/usr/bin/env python3
"""Concavity cuts at nondegenerate vertices.

At a vertex v with basis rows B, the edge directions are the columns of
-(A_B)^{-1}, and the local coordinates xi_k(x) = b_k - A_k x (k in B) vanish at
v. For a level u - eps not above q(v), the extension along edge k is the
largest step keeping q >= level, and

    sum_k xi_k(x) / ext_k >= 1

excludes v while keeping every point whose value is below the level.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from qpbc.config import BASIS_COND_LIMIT, TOL_FEAS
from qpbc.conic import solve_lp
from qpbc.geometry import Vertex
from qpbc.model import Polytope, QpInstance
from qpbc.utils import frozen

LOGGER = logging.getLogger(__name__)

CutKind = Literal["tuy", "konno"]


@dataclass(frozen=True)
class LocalFrame:
    vertex: Vertex
    basis_rows: tuple[int, ...]
    directions: np.ndarray
    A_B: np.ndarray
    b_B: np.ndarray

    @property
    def n(self) -> int:
        return len(self.basis_rows)

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        """xi_k(x) = b_k - A_k x over the basis rows."""
        return self.b_B - self.A_B @ np.asarray(x, dtype=float)


@dataclass(frozen=True)
class ConcavityCut:
    """sum_k coeffs_k (b_k - A_k x) >= 1, stored as the row a^T x <= rhs."""

    coeffs: np.ndarray
    a: np.ndarray
    rhs: float
    kind: CutKind = "tuy"

    @property
    def as_row(self) -> tuple[np.ndarray, float]:
        return self.a, self.rhs


class KonnoResult(NamedTuple):
    eligible: bool
    s: np.ndarray
    fallbacks: int


def local_frame(P: Polytope, v: Vertex) -> LocalFrame | None:
    """Edge directions at a nondegenerate vertex; None when v is degenerate."""
    if v.degenerate:
        return None
    rows = list(v.basis)
    A_B = P.A[rows]
    if np.linalg.cond(A_B) >= BASIS_COND_LIMIT:
        raise ValueError(f"basis {v.basis} is numerically singular.")
    D = -np.linalg.inv(A_B)
    return LocalFrame(v, v.basis, frozen(D), frozen(A_B.copy()), frozen(P.b[rows].copy()))


def _ray_coefficients(inst: QpInstance, x: np.ndarray, d: np.ndarray) -> tuple[float, float]:
    """q(x + s d) = q(x) + lin * s + quad * s^2."""
    return float(2.0 * (inst.Q @ x + inst.c) @ d), float(d @ inst.Q @ d)


def tuy_extension(inst: QpInstance, frame: LocalFrame, level: float) -> np.ndarray:
    """Largest steps along each edge keeping q >= level (inf when never reached)."""
    x = frame.vertex.point
    q0 = inst.objective(x)
    if q0 < level - TOL_FEAS * (1.0 + abs(level)):
        raise ValueError(f"vertex value {q0:.10g} is below the level {level:.10g}.")
    c0 = max(q0 - level, 0.0)
    out = np.empty(frame.n)
    for k in range(frame.n):
        d = frame.directions[:, k]
        lin, quad = _ray_coefficients(inst, x, d)
        scale = 1.0 + float(np.abs(inst.Q).max()) * float(d @ d)
        if abs(quad) <= 1e-14 * scale:
            out[k] = math.inf if lin >= 0 else c0 / -lin
            continue
        disc = lin * lin - 4.0 * quad * c0
        if quad > 0 and (lin >= 0 or disc < 0):
            out[k] = math.inf
            continue
        root = math.sqrt(max(disc, 0.0))
        if lin <= 0:
            denom = -lin + root
            out[k] = 2.0 * c0 / denom if denom > 0 else 0.0
        else:
            out[k] = (-lin - root) / (2.0 * quad)
    return out


def tuy_points(frame: LocalFrame, t: np.ndarray) -> list[np.ndarray]:
    """Points v + t_k d_k for the finite extensions."""
    x = frame.vertex.point
    return [x + t[k] * frame.directions[:, k] for k in range(frame.n) if math.isfinite(t[k])]


def make_concavity_cut(frame: LocalFrame, ext: np.ndarray, kind: CutKind = "tuy") -> ConcavityCut:
    ext = np.asarray(ext, dtype=float)
    if ext.shape != (frame.n,):
        raise ValueError(f"expected {frame.n} extensions, got shape {ext.shape}.")
    if np.any(ext <= 0):
        raise ValueError(f"extensions must be positive, got {ext}.")
    if not np.any(np.isfinite(ext)):
        raise ValueError("every extension is infinite; the cut would be vacuous.")
    coeffs = np.where(np.isfinite(ext), 1.0 / ext, 0.0)
    a = coeffs @ frame.A_B
    rhs = float(coeffs @ frame.b_B) - 1.0
    return ConcavityCut(frozen(coeffs), frozen(a), rhs, kind)


def cut_value(cut: ConcavityCut, x: np.ndarray) -> float:
    """Left-hand side sum_k coeffs_k xi_k(x); the cut keeps points with value >= 1."""
    return cut.rhs + 1.0 - float(cut.a @ np.asarray(x, dtype=float))


def konno_step(
    inst: QpInstance,
    frame: LocalFrame,
    t: np.ndarray,
    u: float,
    eps: float,
    tol: float = TOL_FEAS,
) -> KonnoResult:
    """Eligibility test and strengthened extensions s >= t.

    In local coordinates y (x = v + D y) write the bilinear form
    F(w, y) = w^T Qt y + ct^T (w + y) + q(v), with Qt = D^T Q D and
    ct = D^T (Q v + c), so that F(y, y) = q(v + D y). The vertex is eligible
    when F(t_i e_i, y) >= u - eps for every edge i and every y in the polytope
    beyond the Tuy cut. Then s_i is the largest theta with
    F(theta e_i, y) >= u - eps on that region, found through the LP dual of
    the inner minimization.
    """
    t = np.asarray(t, dtype=float)
    level = u - eps
    n = frame.n
    if not np.all(np.isfinite(t)) or np.any(t <= 0):
        return KonnoResult(False, t.copy(), 0)

    P = inst.polytope
    x = frame.vertex.point
    D = frame.directions
    Qt = D.T @ inst.Q @ D
    ct = D.T @ (inst.Q @ x + inst.c)
    q0 = inst.objective(x)
    A_loc = P.A @ D
    b_loc = P.b - P.A @ x
    t_inv = 1.0 / t
    A_region = np.vstack([A_loc, -t_inv[None, :]])
    b_region = np.concatenate([b_loc, [-1.0]])

    for i in range(n):
        obj = t[i] * Qt[i] + ct
        sol = solve_lp(obj, A_ub=A_region, b_ub=b_region)
        if sol.status == "infeasible":
            continue
        if sol.status != "optimal":
            LOGGER.debug("eligibility LP on edge %d ended with status %s", i, sol.status)
            return KonnoResult(False, t.copy(), 0)
        value = sol.objective_value + t[i] * ct[i] + q0
        if value < level - tol * (1.0 + abs(level)):
            return KonnoResult(False, t.copy(), 0)

    m = P.m
    s = t.copy()
    fallbacks = 0
    for i in range(n):
        # variables (lam, mu, theta): maximize theta
        c_lp = np.zeros(m + 2)
        c_lp[-1] = -1.0
        A_eq = np.hstack([-A_loc.T, t_inv[:, None], -Qt[:, [i]]])
        A_ub = np.concatenate([b_loc, [-1.0, -ct[i]]])[None, :]
        sol = solve_lp(
            c_lp,
            A_ub=A_ub,
            b_ub=[q0 - level],
            A_eq=A_eq,
            b_eq=ct,
            bounds=[(0.0, None)] * (m + 1) + [(None, None)],
        )
        theta = float(sol.primal[-1]) if sol.status == "optimal" else math.nan
        if not theta >= t[i]:
            fallbacks += 1
            continue
        s[i] = theta
    if fallbacks:
        LOGGER.warning("Konno extension fell back to the Tuy value on %d of %d edges", fallbacks, n)
    return KonnoResult(True, s, fallbacks)
