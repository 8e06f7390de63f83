#!/usr/bin/env python3
"""Affine-multiplier lower bounds and their semidefinite relaxations.

The central bound maximizes a level l such that

    q(x) - l + sum_i alpha_i(x) (A_i x - b_i)

is a nonnegative quadratic on R^n, where each multiplier is nonnegative on the
polytope. Nonnegative affine functions on a polytope are parametrized through
Farkas weights, alpha_i(x) = sum_j Y_ij (b_j - A_j x) + y_i with Y, y >= 0, so
the bound becomes one SDP in (Y, y, l) with a single PSD block of order n + 1:

    Gram = [[Q, c], [c^T, -l]] - sum Y_ij sym(a_i a_j^T) + sum y_i sym(a_i e^T)

with a_i = (A_i, -b_i) and e the last unit vector. Variants differ only in
which pairs (i, j) carry a weight:

* ``L``: symmetric pairs i <= j;
* ``L1``: ordered pairs, with the multiplier gradients restricted to the span
  of the negative eigenvectors of Q;
* ``BOX``: pairs of rows acting on the same coordinate of an axis-aligned box.

Rows are normalized and the objective scaled before every solve; returned
multipliers are in the caller's units. Polytopes that are not
full-dimensional are handled on their affine hull.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np
import scipy.linalg as sla

from qpbc.config import TOL_EIG_REL, TOL_FEAS
from qpbc.conic import (
    ConicBackend,
    ConicProblem,
    ConicSolution,
    free,
    nonneg,
    psd,
    solve_lp,
    solve_sdp,
    svec,
    svec_dim,
)
from qpbc.exceptions import (
    EmptyPolytopeError,
    InvalidInstanceError,
    LowerDimensionalError,
    NumericalFailure,
    RankDeficientError,
    UnboundedPolytopeError,
)
from qpbc.geometry import ReducedPolytope, check_bounded_fulldim
from qpbc.model import (
    AffineFunc,
    MultiplierCertificate,
    Polytope,
    QpInstance,
    lifted_rows,
    objective_gram,
)
from qpbc.utils import clip_psd, frozen, min_eig, psd_tolerance

LOGGER = logging.getLogger(__name__)

Variant = Literal["L", "L1", "BOX"]
VARIANTS: tuple[str, ...] = ("L", "L1", "BOX")


@dataclass(frozen=True)
class BoundResult:
    """Bound value and Farkas weights (Y, y) over the rows of the input polytope.

    When ``reduction`` is set the polytope was lower-dimensional and the
    Gram condition holds on its affine hull only.
    """

    value: float
    Y: np.ndarray
    y: np.ndarray
    variant: str
    status: str
    gap: float = 0.0
    reduction: ReducedPolytope | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "Y", frozen(np.array(self.Y, dtype=float)))
        object.__setattr__(self, "y", frozen(np.array(self.y, dtype=float)))


@dataclass(frozen=True)
class RelaxationResult:
    value: float
    X: np.ndarray
    x: np.ndarray
    status: str
    gap: float = 0.0

    @property
    def moment(self) -> np.ndarray:
        """[[X, x], [x^T, 1]]."""
        return objective_gram(self.X, self.x, 1.0)


@dataclass(frozen=True)
class Underestimator:
    """U(x) = x^T H x + 2 g^T x + const, convex and below q on the polytope."""

    H: np.ndarray
    g: np.ndarray
    const: float

    def __call__(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.H @ x + 2.0 * self.g @ x + self.const)


@dataclass(frozen=True)
class ExactnessCertificate:
    """Multipliers alpha_i = d_i^T x + f_i proving a point globally optimal."""

    d: tuple[np.ndarray, ...]
    f: tuple[float, ...]
    farkas: np.ndarray
    offsets: np.ndarray
    active_set: tuple[int, ...]
    psd_margin: float
    meta: dict[str, float] = field(default_factory=dict, compare=False)

    @property
    def alphas(self) -> tuple[AffineFunc, ...]:
        return tuple(AffineFunc(d, f) for d, f in zip(self.d, self.f))


class ReducedInstance(NamedTuple):
    instance: QpInstance
    offset: float
    reduction: ReducedPolytope


class BoxForm(NamedTuple):
    """Bounds lower <= x <= upper plus equalities E x = f."""

    lower: np.ndarray
    upper: np.ndarray
    E: np.ndarray
    f: np.ndarray


def _sym_outer(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return 0.5 * (np.outer(u, v) + np.outer(v, u))


def _unit(k: int, size: int) -> np.ndarray:
    e = np.zeros(size)
    e[k] = 1.0
    return e


def _corner(order: int) -> np.ndarray:
    E = np.zeros((order, order))
    E[-1, -1] = 1.0
    return E


def _check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ValueError(f"unknown bound variant '{variant}'; expected one of {VARIANTS}.")
    return variant


def _require_optimal(sol: ConicSolution, what: str) -> ConicSolution:
    if not sol.ok:
        raise NumericalFailure(f"{what} SDP ended with status {sol.status}.")
    return sol


@dataclass(frozen=True)
class _Scaled:
    """Normalized rows and scaled objective; zero rows are dropped."""

    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    rows: np.ndarray
    norms: np.ndarray
    sigma: float

    @classmethod
    def of(cls, Q: np.ndarray, c: np.ndarray, A: np.ndarray, b: np.ndarray) -> _Scaled:
        norms = np.linalg.norm(A, axis=1)
        rows = np.flatnonzero(norms > 0)
        sigma = max(1.0, float(np.abs(Q).max()), float(np.abs(c).max(initial=0.0)))
        return cls(
            Q / sigma,
            c / sigma,
            A[rows] / norms[rows, None],
            b[rows] / norms[rows],
            rows,
            norms[rows],
            sigma,
        )

    def unscale(self, Y_s: np.ndarray, y_s: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
        Y = np.zeros((m, m))
        y = np.zeros(m)
        Y[np.ix_(self.rows, self.rows)] = self.sigma * Y_s / np.outer(self.norms, self.norms)
        y[self.rows] = self.sigma * y_s / self.norms
        return np.maximum(Y, 0.0), np.maximum(y, 0.0)


def _negative_complement(Q: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of Q's negative eigenspace."""
    w, V = np.linalg.eigh(Q)
    scale = float(np.max(np.abs(w), initial=0.0))
    negative = w < -TOL_EIG_REL * scale
    return V[:, ~negative]


def _box_coordinates(A: np.ndarray, rows: Sequence[int]) -> np.ndarray:
    """Coordinate bounded by each listed inequality row; implicit equalities are not listed."""
    nonzero = np.abs(A[list(rows)]) > 0
    counts = nonzero.sum(axis=1)
    if np.any(counts != 1):
        k = int(np.flatnonzero(counts != 1)[0])
        raise InvalidInstanceError(
            f"BOX bound needs an axis-aligned box; row {rows[k]} has {int(counts[k])} nonzeros."
        )
    return np.argmax(nonzero, axis=1)


def _multiplier_pairs(
    variant: str, m: int, coords: np.ndarray | None
) -> tuple[list[tuple[int, int]], bool]:
    if variant == "L1":
        return [(i, j) for i in range(m) for j in range(m)], True
    pairs = [(i, j) for i in range(m) for j in range(i, m)]
    if variant == "BOX":
        assert coords is not None
        pairs = [(i, j) for i, j in pairs if coords[i] == coords[j]]
    return pairs, False


def _bound_core(
    Q: np.ndarray,
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    variant: str,
    cap: float | None,
    backend: ConicBackend | None,
    coords: np.ndarray | None = None,
) -> tuple[float, np.ndarray, np.ndarray, float]:
    s = _Scaled.of(Q, c, A, b)
    m, n = s.A.shape
    order = n + 1
    sd = svec_dim(order)
    pairs, ordered = _multiplier_pairs(variant, m, None if coords is None else coords[s.rows])
    L = lifted_rows(s.A, s.b)
    e = _unit(n, order)
    p = len(pairs)
    n_lin = p + m + (0 if cap is None else 1)
    total = 1 + n_lin + sd

    G = np.zeros((sd, total))
    G[:, 0] = svec(_corner(order))
    for k, (i, j) in enumerate(pairs):
        weight = 1.0 if ordered or i == j else 2.0
        G[:, 1 + k] = weight * svec(_sym_outer(L[i], L[j]))
    for i in range(m):
        G[:, 1 + p + i] = -svec(_sym_outer(L[i], e))
    G[:, 1 + n_lin :] = np.eye(sd)
    rows = [G]
    rhs = [svec(objective_gram(s.Q, s.c))]

    if cap is not None:
        cap_row = np.zeros((1, total))
        cap_row[0, 0] = 1.0
        cap_row[0, 1 + p + m] = 1.0
        rows.append(cap_row)
        rhs.append(np.array([cap / s.sigma]))

    if variant == "L1":
        W = _negative_complement(s.Q)
        if W.shape[1]:
            proj = s.A @ W
            block = np.zeros((m * W.shape[1], total))
            for k, (i, j) in enumerate(pairs):
                block[i * W.shape[1] : (i + 1) * W.shape[1], 1 + k] = proj[j]
            rows.append(block)
            rhs.append(np.zeros(block.shape[0]))

    objective = _unit(0, total)
    problem = ConicProblem(
        objective,
        np.vstack(rows),
        np.concatenate(rhs),
        (free(1), nonneg(n_lin), psd(order)),
        maximize=True,
    )
    sol = _require_optimal(solve_sdp(problem, backend), f"{variant} bound")
    Y_s = np.zeros((m, m))
    for k, (i, j) in enumerate(pairs):
        Y_s[i, j] = sol.primal[1 + k]
        if not ordered:
            Y_s[j, i] = sol.primal[1 + k]
    y_s = sol.primal[1 + p : 1 + p + m]
    Y, y = s.unscale(Y_s, y_s, A.shape[0])
    return s.sigma * float(sol.primal[0]), Y, y, s.sigma * sol.gap


def reduce_instance(inst: QpInstance, reduction: ReducedPolytope | None = None) -> ReducedInstance:
    """Rewrite inst on the affine hull of its polytope: x = origin + basis @ z.

    q(origin + N z) = z^T (N^T Q N) z + 2 (N^T (Q origin + c))^T z + q(origin).
    """
    if reduction is None:
        reduction = check_bounded_fulldim(inst.polytope).reduced
    if reduction.inner is None:
        raise LowerDimensionalError("polytope is a single point; nothing to reduce onto.")
    N, x0 = reduction.basis, reduction.origin
    Q_red = N.T @ inst.Q @ N
    reduced = QpInstance(
        0.5 * (Q_red + Q_red.T),
        N.T @ (inst.Q @ x0 + inst.c),
        reduction.inner,
        name=f"{inst.name}-reduced",
    )
    return ReducedInstance(reduced, inst.objective(x0), reduction)


def _bounded_reduction(inst: QpInstance) -> ReducedPolytope:
    check = check_bounded_fulldim(inst.polytope)
    if not check.bounded:
        raise UnboundedPolytopeError(
            f"polytope of '{inst.name}' is unbounded; the multiplier bound is infeasible there."
        )
    return check.reduced


def solve_bound(
    inst: QpInstance,
    variant: str = "L",
    cap: float | None = None,
    *,
    backend: ConicBackend | None = None,
) -> BoundResult:
    """Lower bound on min q over the polytope; with ``cap`` the level is also kept <= cap."""
    _check_variant(variant)
    red = _bounded_reduction(inst)
    m = inst.m
    if red.inner is None:
        value = inst.objective(red.origin)
        if cap is not None:
            value = min(value, cap)
        return BoundResult(value, np.zeros((m, m)), np.zeros(m), variant, "optimal", reduction=red)

    rows = list(red.inner_rows)
    # BOX pairs are read off the original rows; equalities are eliminated by the reduction.
    coords = _box_coordinates(inst.A, rows) if variant == "BOX" else None
    if red.full_dimensional:
        Q, c, P, offset = inst.Q, inst.c, inst.polytope, 0.0
    else:
        red_inst, offset, _ = reduce_instance(inst, red)
        Q, c, P = red_inst.Q, red_inst.c, red_inst.polytope
    value, Y_in, y_in, gap = _bound_core(
        Q, c, P.A, P.b, variant, None if cap is None else cap - offset, backend, coords
    )
    Y = np.zeros((m, m))
    y = np.zeros(m)
    Y[np.ix_(rows, rows)] = Y_in
    y[rows] = y_in
    LOGGER.debug("%s bound on %s: %.10g (gap %.2e)", variant, inst.name, value + offset, gap)
    return BoundResult(
        value + offset,
        Y,
        y,
        variant,
        "optimal",
        gap=gap,
        reduction=None if red.full_dimensional else red,
    )


def multiplier_certificate(inst: QpInstance, br: BoundResult) -> MultiplierCertificate:
    """alpha_i(x) = sum_j Y_ij (b_j - A_j x) + y_i with level = bound value."""
    if br.reduction is not None:
        raise LowerDimensionalError(
            "bound was solved on the affine hull; its Gram condition does not hold on R^n."
        )
    grads = -br.Y @ inst.A
    offsets = br.Y @ inst.b + br.y
    alphas = tuple(AffineFunc(g, f) for g, f in zip(grads, offsets))
    return MultiplierCertificate(alphas, br.value, meta={"variant": br.variant})


def _underestimator_parts(
    Q: np.ndarray, c: np.ndarray, A: np.ndarray, b: np.ndarray, Y: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    Ys = 0.5 * (Y + Y.T)
    H = Q - A.T @ Ys @ A
    g = c + A.T @ (Ys @ b + 0.5 * y)
    const = -float(y @ b) - float(b @ Ys @ b)
    return H, g, const


def extract_underestimator(inst: QpInstance, br: BoundResult) -> Underestimator:
    """q(x) + sum_i alpha_i(x) (A_i x - b_i) from an optimal bound."""
    if br.status != "optimal":
        raise ValueError(f"bound status is {br.status}; no underestimator available.")
    red = br.reduction
    if red is None:
        H, g, const = _underestimator_parts(inst.Q, inst.c, inst.A, inst.b, br.Y, br.y)
    elif red.inner is None:
        x0 = red.origin
        H = np.zeros((inst.n, inst.n))
        g = np.zeros(inst.n)
        const = inst.objective(x0)
    else:
        red_inst, offset, _ = reduce_instance(inst, red)
        rows = list(red.inner_rows)
        H_r, g_r, c_r = _underestimator_parts(
            red_inst.Q,
            red_inst.c,
            red_inst.A,
            red_inst.b,
            br.Y[np.ix_(rows, rows)],
            br.y[rows],
        )
        N, x0 = red.basis, red.origin
        H = N @ H_r @ N.T
        g = N @ g_r - H @ x0
        const = float(x0 @ H @ x0) - 2.0 * float(g_r @ (N.T @ x0)) + c_r + offset

    lam = min_eig(H)
    if lam < 0:
        if lam < -psd_tolerance(H):
            LOGGER.warning("underestimator Hessian has eigenvalue %.3e; clipping", lam)
        H = clip_psd(H)
    return Underestimator(0.5 * (H + H.T), g, const)


def _relax_core(
    Q: np.ndarray,
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    include_rows: bool,
    backend: ConicBackend | None,
) -> tuple[float, np.ndarray, float]:
    s = _Scaled.of(Q, c, A, b)
    m, n = s.A.shape
    order = n + 1
    sd = svec_dim(order)
    L = lifted_rows(s.A, s.b)
    e = _unit(n, order)
    pairs = [(i, j) for i in range(m) for j in range(i, m)]
    p = len(pairs)
    n_lin = p + (m if include_rows else 0)
    total = n_lin + sd

    rows: list[np.ndarray] = []
    for k, (i, j) in enumerate(pairs):
        row = np.zeros(total)
        row[n_lin:] = svec(_sym_outer(L[i], L[j]))
        row[k] = -1.0
        rows.append(row)
    if include_rows:
        for i in range(m):
            row = np.zeros(total)
            row[n_lin:] = -svec(_sym_outer(L[i], e))
            row[p + i] = -1.0
            rows.append(row)
    normal = np.zeros(total)
    normal[n_lin:] = svec(_corner(order))
    rows.append(normal)
    rhs = np.zeros(len(rows))
    rhs[-1] = 1.0

    objective = np.zeros(total)
    objective[n_lin:] = svec(objective_gram(s.Q, s.c))
    blocks = (nonneg(n_lin), psd(order)) if n_lin else (psd(order),)
    problem = ConicProblem(objective, np.array(rows), rhs, blocks)
    sol = _require_optimal(solve_sdp(problem, backend), "moment relaxation")
    M = sol.block(len(blocks) - 1)
    return s.sigma * sol.objective_value, M, s.sigma * sol.gap


def solve_relaxation(
    inst: QpInstance,
    include_Ax_leq_b: bool = False,
    *,
    backend: ConicBackend | None = None,
) -> RelaxationResult:
    """Moment relaxation with pairwise products of the constraints (dual of the L bound).

    Each pair i <= j contributes the linearization of (A_i x - b_i)(A_j x - b_j) >= 0;
    the rows A x <= b themselves are implied and only added on request.
    """
    red = _bounded_reduction(inst)
    if red.inner is None:
        x0 = red.origin
        return RelaxationResult(inst.objective(x0), np.outer(x0, x0), x0.copy(), "optimal")
    if red.full_dimensional:
        value, M, gap = _relax_core(inst.Q, inst.c, inst.A, inst.b, include_Ax_leq_b, backend)
        n = inst.n
        return RelaxationResult(value, M[:n, :n], M[:n, n], "optimal", gap)

    red_inst, offset, _ = reduce_instance(inst, red)
    value, M, gap = _relax_core(
        red_inst.Q, red_inst.c, red_inst.A, red_inst.b, include_Ax_leq_b, backend
    )
    k = red.dim
    Z, z = M[:k, :k], M[:k, k]
    N, x0 = red.basis, red.origin
    Nz = N @ z
    X = N @ Z @ N.T + np.outer(Nz, x0) + np.outer(x0, Nz) + np.outer(x0, x0)
    return RelaxationResult(value + offset, X, x0 + Nz, "optimal", gap)


def exact_representation(inst: QpInstance, c0: float) -> list[AffineFunc]:
    """Affine alpha_i with q(x) + c0 = sum_i alpha_i(x) (A_i x - b_i) identically."""
    L = lifted_rows(inst.A, inst.b)
    m, order = L.shape
    if np.linalg.matrix_rank(L) < order:
        raise RankDeficientError(
            f"rows (A_i, -b_i) have rank {np.linalg.matrix_rank(L)} < {order}; "
            "no exact representation."
        )
    target = objective_gram(inst.Q, inst.c, c0)
    K = np.empty((svec_dim(order), m * order))
    for i in range(m):
        for k in range(order):
            K[:, i * order + k] = svec(_sym_outer(_unit(k, order), L[i]))
    coef = sla.lstsq(K, svec(target))[0]
    D = coef.reshape(m, order)
    cross = D.T @ L
    resid = float(np.max(np.abs(0.5 * (cross + cross.T) - target)))
    if resid > 1e-8 * (1.0 + float(np.abs(target).max())):
        raise RankDeficientError(f"least-squares residual {resid:.3e} exceeds 1e-8.")
    return [AffineFunc(D[i, :-1], D[i, -1]) for i in range(m)]


def hgg_exactness_check(
    inst: QpInstance,
    xbar: np.ndarray,
    tol: float = TOL_FEAS,
    *,
    backend: ConicBackend | None = None,
) -> ExactnessCertificate | None:
    """Search for affine multipliers proving xbar globally optimal.

    The multipliers alpha_i = sum_j Lam_ij (b_j - A_j x) + lam0_i are nonnegative
    on the polytope by construction. A certificate needs

    * Q + (1/2) sum_i (d_i A_i + A_i^T d_i^T) PSD,
    * stationarity of q + sum_i alpha_i (A_i x - b_i) at xbar,
    * alpha_i(xbar) = 0 for rows inactive at xbar.

    The conditions are sufficient only, so None means "unknown".
    """
    x = np.asarray(xbar, dtype=float)
    if x.shape != (inst.n,):
        raise InvalidInstanceError(f"point has shape {x.shape}, expected ({inst.n},).")
    if not inst.polytope.contains(x, tol):
        raise InvalidInstanceError("point is not feasible for the polytope.")

    s = _Scaled.of(inst.Q, inst.c, inst.A, inst.b)
    m, n = s.A.shape
    slack = s.b - s.A @ x
    active = slack <= tol
    slack = np.where(active, 0.0, slack)
    lam_idx = [(i, j) for i in range(m) for j in range(m) if active[i] or active[j]]
    off_idx = [i for i in range(m) if active[i]]
    p, q0 = len(lam_idx), len(off_idx)
    sd = svec_dim(n)
    n_lin = p + q0 + 1
    total = n_lin + sd

    psd_rows = np.zeros((sd, total))
    grad_rows = np.zeros((n, total))
    for k, (i, j) in enumerate(lam_idx):
        psd_rows[:, k] = -svec(_sym_outer(s.A[i], s.A[j]))
        grad_rows[:, k] = 0.5 * (slack[j] * s.A[i] if active[i] else slack[i] * s.A[j])
    for k, i in enumerate(off_idx):
        grad_rows[:, p + k] = 0.5 * s.A[i]
    psd_rows[:, p + q0] = svec(np.eye(n))
    psd_rows[:, n_lin:] = -np.eye(sd)
    problem = ConicProblem(
        _unit(p + q0, total),
        np.vstack([psd_rows, grad_rows]),
        np.concatenate([svec(np.eye(n) - s.Q), -(s.Q @ x + s.c)]),
        (nonneg(n_lin), psd(n)),
    )
    sol = solve_sdp(problem, backend)
    if not sol.ok:
        LOGGER.debug("exactness SDP ended with status %s", sol.status)
        return None
    shift = float(sol.primal[p + q0]) - 1.0
    if shift > psd_tolerance(s.Q):
        LOGGER.debug("exactness certificate needs PSD shift %.3e", shift)
        return None

    lam_s = np.zeros((m, m))
    for k, (i, j) in enumerate(lam_idx):
        lam_s[i, j] = max(float(sol.primal[k]), 0.0)
    off_s = np.zeros(m)
    for k, i in enumerate(off_idx):
        off_s[i] = max(float(sol.primal[p + k]), 0.0)
    M = inst.m
    Lam = np.zeros((M, M))
    lam0 = np.zeros(M)
    Lam[np.ix_(s.rows, s.rows)] = s.sigma * lam_s / np.outer(s.norms, s.norms)
    lam0[s.rows] = s.sigma * off_s / s.norms

    d = -Lam @ inst.A
    f = Lam @ inst.b + lam0
    S = inst.Q + 0.5 * (d.T @ inst.A + inst.A.T @ d)
    margin = min_eig(S)
    alpha_at = d @ x + f
    resid = inst.b - inst.A @ x
    grad = inst.Q @ x + inst.c + 0.5 * (inst.A.T @ alpha_at - d.T @ resid)
    active_orig = tuple(int(i) for i in s.rows[active])
    inactive = np.setdiff1d(np.arange(M), active_orig)
    scale = s.sigma * (1.0 + float(np.abs(x).max(initial=0.0)))
    if (
        margin < -psd_tolerance(S)
        or float(np.abs(grad).max()) > 1e-6 * scale
        or float(np.abs(alpha_at[inactive]).max(initial=0.0)) > 1e-6 * scale
    ):
        LOGGER.debug("exactness certificate failed verification (margin %.3e)", margin)
        return None
    return ExactnessCertificate(
        d=tuple(frozen(row.copy()) for row in d),
        f=tuple(float(v) for v in f),
        farkas=frozen(Lam),
        offsets=frozen(lam0),
        active_set=active_orig,
        psd_margin=margin,
        meta={"objective": inst.objective(x)},
    )


def simplex_instance(Q: np.ndarray, name: str = "stqp") -> QpInstance:
    """The standard quadratic program min x^T Q x over {x >= 0, sum x = 1}."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    ones = np.ones((1, n))
    A = np.vstack([-np.eye(n), ones, -ones])
    b = np.concatenate([np.zeros(n), [1.0, -1.0]])
    return QpInstance(Q, np.zeros(n), Polytope(A, b), name=name)


def stqp_conv_bound(
    Q: np.ndarray,
    nonneg_shifted: bool = True,
    *,
    backend: ConicBackend | None = None,
) -> float:
    """Best convex quadratic underestimation bound of the standard quadratic program.

    Solves max l s.t. Q - l ee^T - N is PSD for some symmetric N >= 0. With
    ``nonneg_shifted`` the matrix is first shifted by t ee^T so that every
    entry is nonnegative, and t is subtracted from the result.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise InvalidInstanceError(f"Q must be square, got shape {Q.shape}.")
    n = Q.shape[0]
    Q = 0.5 * (Q + Q.T)
    shift = max(0.0, -float(Q.min())) if nonneg_shifted else 0.0
    Qs = Q + shift
    sigma = max(1.0, float(np.abs(Qs).max()))
    sd = svec_dim(n)
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    total = 1 + len(pairs) + sd
    G = np.zeros((sd, total))
    G[:, 0] = svec(np.ones((n, n)))
    for k, (i, j) in enumerate(pairs):
        G[:, 1 + k] = svec(_sym_outer(_unit(i, n), _unit(j, n)) * (1.0 if i == j else 2.0))
    G[:, 1 + len(pairs) :] = np.eye(sd)
    problem = ConicProblem(
        _unit(0, total),
        G,
        svec(Qs / sigma),
        (free(1), nonneg(len(pairs)), psd(n)),
        maximize=True,
    )
    sol = _require_optimal(solve_sdp(problem, backend), "StQP convex underestimation")
    return sigma * float(sol.primal[0]) - shift


def box_form(inst: QpInstance, tol: float = 1e-12) -> BoxForm:
    """Split the rows into coordinate bounds and equality pairs.

    Rows with a single nonzero become bounds; a row whose negation (with
    negated right-hand side) is also present becomes an equality. Anything
    else is rejected.
    """
    A, b = inst.A, inst.b
    m, n = A.shape
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    nonzero = np.abs(A) > tol
    used = np.zeros(m, dtype=bool)
    for i in np.flatnonzero(nonzero.sum(axis=1) == 1):
        k = int(np.argmax(nonzero[i]))
        bound = b[i] / A[i, k]
        if A[i, k] > 0:
            upper[k] = min(upper[k], bound)
        else:
            lower[k] = max(lower[k], bound)
        used[i] = True
    eq_rows: list[int] = []
    for i in range(m):
        if used[i]:
            continue
        for j in range(i + 1, m):
            if (
                not used[j]
                and np.allclose(A[j], -A[i], rtol=0.0, atol=tol)
                and abs(b[j] + b[i]) <= tol * (1.0 + abs(b[i]))
            ):
                eq_rows.append(i)
                used[i] = used[j] = True
                break
        else:
            raise InvalidInstanceError(
                f"row {i} of '{inst.name}' is neither a coordinate bound nor half of an equality."
            )
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise InvalidInstanceError(
            f"'{inst.name}' does not bound every coordinate from both sides."
        )
    if np.any(lower > upper + TOL_FEAS):
        raise EmptyPolytopeError(f"'{inst.name}' has crossing bounds.")
    return BoxForm(lower, upper, A[eq_rows].reshape(-1, n), b[eq_rows])


def srlt_bound(inst: QpInstance, *, backend: ConicBackend | None = None) -> RelaxationResult:
    """Shor relaxation with first-level products of the box bounds.

    The box is rescaled to [0, 1]^n; equalities are handled by restricting
    the moment matrix to the face they define, which enforces both E x = f
    and the products E X = f x^T exactly.
    """
    form = box_form(inst)
    n = inst.n
    lo, hi = form.lower, form.upper
    if form.E.size:
        feas = solve_lp(np.zeros(n), A_eq=form.E, b_eq=form.f, bounds=list(zip(lo, hi)))
        if feas.status != "optimal":
            raise EmptyPolytopeError(f"equalities of '{inst.name}' have no solution in the box.")
    D = hi - lo
    Qz = D[:, None] * inst.Q * D[None, :]
    cz = D * (inst.Q @ lo + inst.c)
    const = inst.objective(lo)
    sigma = max(1.0, float(np.abs(Qz).max()), float(np.abs(cz).max()))

    order = n + 1
    if form.E.size:
        Ez = form.E * D
        fz = form.f - form.E @ lo
        Nz = sla.null_space(Ez)
        z0 = sla.lstsq(Ez, fz)[0]
        V = np.zeros((order, Nz.shape[1] + 1))
        V[:n, :-1] = Nz
        V[:n, -1] = z0
        V[n, -1] = 1.0
    else:
        V = np.eye(order)
    k1 = V.shape[1]

    e = _unit(n, order)
    families: list[np.ndarray] = []
    for k in range(n):
        for l in range(k, n):
            families.append(_sym_outer(_unit(k, order), _unit(l, order)))
    for k in range(n):
        for l in range(n):
            families.append(
                _sym_outer(_unit(l, order), e) - _sym_outer(_unit(k, order), _unit(l, order))
            )
    for k in range(n):
        for l in range(k, n):
            families.append(
                _sym_outer(_unit(k, order), _unit(l, order))
                - _sym_outer(_unit(k, order), e)
                - _sym_outer(_unit(l, order), e)
                + _corner(order)
            )
    r = len(families)
    sd = svec_dim(k1)
    A_eq = np.zeros((r + 1, r + sd))
    for idx, G in enumerate(families):
        A_eq[idx, r:] = svec(V.T @ G @ V)
        A_eq[idx, idx] = -1.0
    A_eq[r, r:] = svec(V.T @ _corner(order) @ V)
    rhs = np.zeros(r + 1)
    rhs[r] = 1.0
    objective = np.zeros(r + sd)
    objective[r:] = svec(V.T @ objective_gram(Qz / sigma, cz / sigma) @ V)
    problem = ConicProblem(objective, A_eq, rhs, (nonneg(r), psd(k1)))
    sol = _require_optimal(solve_sdp(problem, backend), "SRLT")

    M = V @ sol.block(1) @ V.T
    Z, z = M[:n, :n], M[:n, n]
    Dz = D * z
    X = np.outer(lo, lo) + np.outer(Dz, lo) + np.outer(lo, Dz) + D[:, None] * Z * D[None, :]
    value = sigma * sol.objective_value + const
    return RelaxationResult(value, X, lo + Dz, "optimal", sigma * sol.gap)
