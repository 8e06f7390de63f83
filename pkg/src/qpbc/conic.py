#!/usr/bin/env python3
"""Small dense solver layer: LP, convex QP and SDP in one standard conic form.

Conic problems are stated in primal standard form

    min  c^T x   s.t.  A x = b,   x in K = F^f x R_+^k x S_+^{s_1} x ... ,

where F is a block of free scalars and every PSD block of order s occupies
s(s+1)/2 consecutive coordinates of x in ``svec`` order (upper triangle, row
by row, off-diagonal entries scaled by sqrt(2) so that inner products are
preserved). The dual is

    max  b^T y   s.t.  A^T y + s = c,   s in K*   (s = 0 on free blocks).

The shipped backend is an infeasible-start primal-dual path-following method
with Mehrotra's predictor-corrector and the HKM search direction. Free
variables enter the Newton system through an augmented block rather than
being split. Linear programs go through HiGHS (dual simplex), which returns
basic solutions; convex QPs have their own primal-dual method.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Protocol

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from qpbc.config import DEFAULT_IPM_OPTIONS, QP_MAX_ITER, TOL_FEAS, TOL_GAP_REL, IPMOptions
from qpbc.exceptions import InvalidInstanceError
from qpbc.utils import clip_psd, frozen, min_eig, psd_tolerance, sym

LOGGER = logging.getLogger(__name__)

Status = Literal["optimal", "infeasible", "unbounded", "numerical_failure", "iteration_limit"]
BlockKind = Literal["free", "nonneg", "psd"]

SQRT2 = math.sqrt(2.0)


@lru_cache(maxsize=None)
def _svec_layout(order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(order)
    scale = np.where(rows == cols, 1.0, SQRT2)
    return frozen(rows), frozen(cols), frozen(scale)


def svec_dim(order: int) -> int:
    return order * (order + 1) // 2


def svec(M: np.ndarray) -> np.ndarray:
    rows, cols, scale = _svec_layout(M.shape[0])
    return M[rows, cols] * scale


def smat(v: np.ndarray, order: int) -> np.ndarray:
    rows, cols, scale = _svec_layout(order)
    M = np.zeros((order, order))
    vals = v / scale
    M[rows, cols] = vals
    M[cols, rows] = vals
    return M


@lru_cache(maxsize=None)
def _svec_projection(order: int) -> np.ndarray:
    """Orthonormal U with svec(M) = U vec(M) for symmetric M."""
    rows, cols, _ = _svec_layout(order)
    U = np.zeros((rows.shape[0], order * order))
    for k, (i, j) in enumerate(zip(rows, cols)):
        if i == j:
            U[k, i * order + i] = 1.0
        else:
            U[k, i * order + j] = U[k, j * order + i] = 1.0 / SQRT2
    return frozen(U)


def skron(G: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Matrix of U -> svec((G U H + H U G) / 2) for symmetric G, H."""
    U = _svec_projection(G.shape[0])
    return U @ (0.5 * (np.kron(G, H) + np.kron(H, G))) @ U.T


@dataclass(frozen=True)
class ConeBlock:
    kind: BlockKind
    size: int

    @property
    def dim(self) -> int:
        return svec_dim(self.size) if self.kind == "psd" else self.size


def free(k: int) -> ConeBlock:
    return ConeBlock("free", k)


def nonneg(k: int) -> ConeBlock:
    return ConeBlock("nonneg", k)


def psd(order: int) -> ConeBlock:
    return ConeBlock("psd", order)


def _offsets(blocks: Sequence[ConeBlock]) -> list[int]:
    out = [0]
    for block in blocks:
        out.append(out[-1] + block.dim)
    return out


@dataclass(frozen=True)
class ConicProblem:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    blocks: tuple[ConeBlock, ...]
    maximize: bool = False

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float).ravel()
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        blocks = tuple(self.blocks)
        total = sum(block.dim for block in blocks)
        if c.shape[0] != total:
            raise ValueError(f"objective has {c.shape[0]} entries, cone blocks need {total}.")
        if A.shape != (b.shape[0], total):
            raise ValueError(f"equality map has shape {A.shape}, expected ({b.shape[0]}, {total}).")
        for block in blocks:
            if block.size < 1:
                raise ValueError(f"empty cone block {block}.")
        object.__setattr__(self, "c", frozen(c))
        object.__setattr__(self, "A", frozen(A))
        object.__setattr__(self, "b", frozen(b))
        object.__setattr__(self, "blocks", blocks)

    @property
    def size(self) -> int:
        return int(self.c.shape[0])

    def block_slice(self, i: int) -> slice:
        offsets = _offsets(self.blocks)
        return slice(offsets[i], offsets[i + 1])


@dataclass(frozen=True)
class ConicSolution:
    status: Status
    primal: np.ndarray
    dual: np.ndarray
    objective_value: float
    gap: float
    slack: np.ndarray = field(default_factory=lambda: np.zeros(0))
    blocks: tuple[ConeBlock, ...] = ()
    iterations: int = 0
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def _block(self, vec: np.ndarray, i: int) -> np.ndarray:
        offsets = _offsets(self.blocks)
        part = vec[offsets[i] : offsets[i + 1]]
        block = self.blocks[i]
        return smat(part, block.size) if block.kind == "psd" else part.copy()

    def block(self, i: int) -> np.ndarray:
        """Primal block i (a symmetric matrix for PSD blocks)."""
        return self._block(self.primal, i)

    def slack_block(self, i: int) -> np.ndarray:
        """Dual slack block i (a symmetric matrix for PSD blocks)."""
        return self._block(self.slack, i)


class ConicBackend(Protocol):
    name: str

    def solve(self, problem: ConicProblem) -> ConicSolution: ...


def _independent_rows(A: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, bool]:
    """Indices of a maximal independent row subset, and whether the dropped rows are consistent."""
    p = A.shape[0]
    if p == 0:
        return np.arange(0), True
    _, R, perm = sla.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > tol * max(scale, 1.0)))
    keep = np.sort(perm[:rank])
    if rank == p:
        return keep, True
    drop = np.setdiff1d(np.arange(p), keep)
    coef, *_ = sla.lstsq(A[keep].T, A[drop].T)
    resid = np.abs(coef.T @ b[keep] - b[drop])
    consistent = bool(np.all(resid <= 1e-8 * (1.0 + np.abs(b[drop]))))
    return keep, consistent


class _Breakdown(Exception):
    pass


@dataclass
class _Layout:
    free: np.ndarray
    lin: np.ndarray
    psd: list[tuple[slice, int]]
    cone: np.ndarray
    barrier: int

    @classmethod
    def of(cls, blocks: Sequence[ConeBlock]) -> _Layout:
        offsets = _offsets(blocks)
        free_idx: list[int] = []
        lin_idx: list[int] = []
        psd_blocks: list[tuple[slice, int]] = []
        for block, start, stop in zip(blocks, offsets[:-1], offsets[1:]):
            if block.kind == "free":
                free_idx.extend(range(start, stop))
            elif block.kind == "nonneg":
                lin_idx.extend(range(start, stop))
            else:
                psd_blocks.append((slice(start, stop), block.size))
        cone = np.array(
            sorted(lin_idx + [k for sl, _ in psd_blocks for k in range(sl.start, sl.stop)]),
            dtype=int,
        )
        barrier = len(lin_idx) + sum(order for _, order in psd_blocks)
        return cls(
            np.array(free_idx, dtype=int), np.array(lin_idx, dtype=int), psd_blocks, cone, barrier
        )


def _max_step(layout: _Layout, v: np.ndarray, dv: np.ndarray) -> float:
    """Largest step a with v + a dv in the cone (may be inf)."""
    step = math.inf
    if layout.lin.size:
        vl, dl = v[layout.lin], dv[layout.lin]
        neg = dl < 0
        if np.any(neg):
            step = min(step, float(np.min(-vl[neg] / dl[neg])))
    for sl, order in layout.psd:
        V = smat(v[sl], order)
        dV = smat(dv[sl], order)
        try:
            L = sla.cholesky(V, lower=True)
        except sla.LinAlgError as exc:
            raise _Breakdown("iterate left the PSD cone") from exc
        Z = sla.solve_triangular(L, dV, lower=True)
        Z = sla.solve_triangular(L, Z.T, lower=True).T
        lam = float(np.linalg.eigvalsh(sym(Z))[0])
        if lam < 0:
            step = min(step, -1.0 / lam)
    return step


def _is_interior(layout: _Layout, v: np.ndarray) -> bool:
    """Strict membership in the cone: positive linear part, PSD blocks that factor."""
    if layout.lin.size and np.any(v[layout.lin] <= 0.0):
        return False
    for sl, order in layout.psd:
        try:
            sla.cholesky(smat(v[sl], order), lower=True)
        except sla.LinAlgError:
            return False
    return True


def _interior_step(
    layout: _Layout, v: np.ndarray, dv: np.ndarray, step: float, shrink: float = 0.9
) -> float:
    """Back ``step`` off until v + step dv is a strictly interior point."""
    for _ in range(60):
        if _is_interior(layout, v + step * dv):
            return step
        step *= shrink
    raise _Breakdown("no interior point along the search direction")


@dataclass
class _NewtonSystem:
    """Reduced Newton system of one iterate under HKM scaling.

    A direction (dx, dy, ds) solves

        A dx = rp,   A^T dy + ds = rd,   dx + W ds = R  (on cone coordinates),

    with ds = 0 on free coordinates and W = x/s on R_+ blocks,
    W = skron(X, S^-1) on PSD blocks.
    """

    layout: _Layout
    A: np.ndarray
    d_lin: np.ndarray
    scalings: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    kkt: np.ndarray

    @classmethod
    def at(cls, layout: _Layout, A: np.ndarray, x: np.ndarray, s: np.ndarray) -> _NewtonSystem:
        p = A.shape[0]
        F = layout.free
        d_lin = x[layout.lin] / s[layout.lin]
        M = (A[:, layout.lin] * d_lin) @ A[:, layout.lin].T
        scalings = []
        for sl, order in layout.psd:
            X = smat(x[sl], order)
            S = smat(s[sl], order)
            try:
                S_inv = sla.cho_solve(sla.cho_factor(S, lower=True), np.eye(order))
            except sla.LinAlgError as exc:
                raise _Breakdown("dual slack lost definiteness") from exc
            S_inv = sym(S_inv)
            W = skron(X, S_inv)
            scalings.append((X, S_inv, W))
            M += A[:, sl] @ W @ A[:, sl].T
        kkt = np.zeros((p + F.size, p + F.size))
        kkt[:p, :p] = sym(M)
        kkt[:p, p:] = A[:, F]
        kkt[p:, :p] = A[:, F].T
        return cls(layout, A, d_lin, scalings, kkt)

    def apply_w(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        out[self.layout.lin] = self.d_lin * v[self.layout.lin]
        for (sl, _), (_, _, W) in zip(self.layout.psd, self.scalings):
            out[sl] = W @ v[sl]
        return out

    def direction(
        self, R: np.ndarray, rp: np.ndarray, rd: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        K, F = self.layout.cone, self.layout.free
        A = self.A
        p, N = A.shape
        rd_K = np.zeros(N)
        rd_K[K] = rd[K]
        base = R - self.apply_w(rd_K)
        rhs = np.concatenate([rp - A[:, K] @ base[K], rd[F]])
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", sla.LinAlgWarning)
                sol = sla.solve(self.kkt, rhs, assume_a="sym")
        except (sla.LinAlgError, sla.LinAlgWarning):
            sol = sla.lstsq(self.kkt, rhs)[0]
        dy = sol[:p]
        ds = np.zeros(N)
        ds[K] = rd[K] - A[:, K].T @ dy
        dx = np.zeros(N)
        dx[K] = (R - self.apply_w(ds))[K]
        dx[F] = sol[p:]
        return dx, dy, ds


class DenseIPMBackend:
    """Mehrotra predictor-corrector with HKM scaling over free, R_+ and PSD blocks."""

    name = "dense-ipm"

    def __init__(self, options: IPMOptions = DEFAULT_IPM_OPTIONS) -> None:
        self.options = options

    def solve(self, problem: ConicProblem) -> ConicSolution:
        sign = -1.0 if problem.maximize else 1.0
        c = sign * problem.c
        keep, consistent = _independent_rows(problem.A, problem.b)
        N = problem.size
        if not consistent:
            LOGGER.debug("equality system is inconsistent")
            return self._failed(problem, "infeasible", keep, sign)
        A = problem.A[keep]
        b = problem.b[keep]
        layout = _Layout.of(problem.blocks)
        try:
            return self._run(problem, c, A, b, keep, layout, sign)
        except _Breakdown as exc:
            LOGGER.warning("interior-point breakdown: %s", exc)
            return self._failed(problem, "numerical_failure", keep, sign)

    def _failed(
        self, problem: ConicProblem, status: Status, keep: np.ndarray, sign: float
    ) -> ConicSolution:
        z = np.zeros(problem.size)
        y = np.zeros(keep.shape[0])
        inf = math.inf
        return self._result(problem, status, z, y, z.copy(), keep, sign, inf, inf, inf, 0)

    def _result(
        self,
        problem: ConicProblem,
        status: Status,
        x: np.ndarray,
        y: np.ndarray,
        s: np.ndarray,
        keep: np.ndarray,
        sign: float,
        gap: float,
        pres: float,
        dres: float,
        iterations: int,
    ) -> ConicSolution:
        y_full = np.zeros(problem.A.shape[0])
        if y.shape[0] == keep.shape[0]:
            y_full[keep] = y
        objective = float(problem.c @ x) if status == "optimal" else math.nan
        return ConicSolution(
            status=status,
            primal=x,
            dual=sign * y_full,
            objective_value=objective,
            gap=gap,
            slack=sign * s,
            blocks=problem.blocks,
            iterations=iterations,
            primal_residual=pres,
            dual_residual=dres,
        )

    def _run(
        self,
        problem: ConicProblem,
        c: np.ndarray,
        A: np.ndarray,
        b: np.ndarray,
        keep: np.ndarray,
        layout: _Layout,
        sign: float,
    ) -> ConicSolution:
        opts = self.options
        p, N = A.shape
        K = layout.cone
        norm_b = float(np.linalg.norm(b))
        norm_c = float(np.linalg.norm(c))

        row_norms = np.linalg.norm(A[:, K], axis=1) if p else np.zeros(0)
        n_cone = max(K.size, 1)
        xi = max(10.0, math.sqrt(n_cone))
        eta = max(10.0, math.sqrt(n_cone), norm_c)
        if p:
            xi = max(xi, math.sqrt(n_cone) * float(np.max((1.0 + np.abs(b)) / (1.0 + row_norms))))
            eta = max(eta, float(np.max(row_norms)))

        x = np.zeros(N)
        s = np.zeros(N)
        y = np.zeros(p)
        x[layout.lin] = xi
        s[layout.lin] = eta
        for sl, order in layout.psd:
            eye = svec(np.eye(order))
            x[sl] = xi * eye
            s[sl] = eta * eye

        best: tuple[float, np.ndarray, np.ndarray, np.ndarray, float, float, float] | None = None
        since_best = 0
        status: Status = "iteration_limit"
        it = 0
        for it in range(1, opts.max_iter + 1):
            rp = b - A @ x
            rd = c - A.T @ y - s
            pobj = float(c @ x)
            dobj = float(b @ y)
            comp = float(x[K] @ s[K])
            mu = comp / max(layout.barrier, 1)
            pres = float(np.linalg.norm(rp)) / (1.0 + norm_b)
            dres = float(np.linalg.norm(rd)) / (1.0 + norm_c)
            gap = max(abs(pobj - dobj), comp)
            rel_gap = gap / (1.0 + abs(pobj))
            LOGGER.debug(
                "ipm it=%d pobj=%.10g dobj=%.10g pres=%.2e dres=%.2e gap=%.2e",
                it,
                pobj,
                dobj,
                pres,
                dres,
                rel_gap,
            )
            merit = max(pres, dres, rel_gap)
            if best is None or merit < 0.9 * best[0]:
                best = (merit, x.copy(), y.copy(), s.copy(), gap, pres, dres)
                since_best = 0
            else:
                since_best += 1
            if pres <= opts.feas_tol and dres <= opts.feas_tol and rel_gap <= opts.gap_tol:
                status = "optimal"
                break
            if dobj > 0 and float(np.linalg.norm(c - rd)) <= 1e-8 * dobj:
                status = "infeasible"
                break
            if pobj < 0 and float(np.linalg.norm(b - rp)) <= 1e-8 * -pobj:
                status = "unbounded"
                break
            if max(np.max(np.abs(x)), np.max(np.abs(y), initial=0.0)) > opts.blowup:
                status = "numerical_failure"
                break
            if since_best >= 15:
                status = "numerical_failure"
                break

            system = _NewtonSystem.at(layout, A, x, s)

            R_aff = np.zeros(N)
            R_aff[K] = -x[K]
            dx_a, dy_a, ds_a = system.direction(R_aff, rp, rd)
            ap = min(1.0, _max_step(layout, x, dx_a))
            ad = min(1.0, _max_step(layout, s, ds_a))
            mu_aff = float((x[K] + ap * dx_a[K]) @ (s[K] + ad * ds_a[K])) / max(layout.barrier, 1)
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

            R = np.zeros(N)
            if layout.lin.size:
                xl, sl_ = x[layout.lin], s[layout.lin]
                R[layout.lin] = sigma * mu / sl_ - xl - dx_a[layout.lin] * ds_a[layout.lin] / sl_
            for (sl, order), (X, S_inv, _) in zip(layout.psd, system.scalings):
                dXa = smat(dx_a[sl], order)
                dSa = smat(ds_a[sl], order)
                R[sl] = svec(sym(sigma * mu * S_inv - X - dXa @ dSa @ S_inv))
            dx, dy, ds = system.direction(R, rp, rd)
            ap = min(1.0, opts.step_fraction * _max_step(layout, x, dx))
            ad = min(1.0, opts.step_fraction * _max_step(layout, s, ds))
            ap = _interior_step(layout, x, dx, ap)
            ad = _interior_step(layout, s, ds, ad)
            x = x + ap * dx
            y = y + ad * dy
            s = s + ad * ds

        if status == "optimal":
            return self._result(problem, status, x, y, s, keep, sign, gap, pres, dres, it)
        if status in ("infeasible", "unbounded"):
            return self._result(problem, status, x, y, s, keep, sign, math.inf, pres, dres, it)
        assert best is not None
        merit, x, y, s, gap, pres, dres = best
        if merit <= opts.accept_tol:
            LOGGER.warning(
                "interior point stalled; accepting solution at reduced accuracy %.2e", merit
            )
            return self._result(problem, "optimal", x, y, s, keep, sign, gap, pres, dres, it)
        return self._result(problem, status, x, y, s, keep, sign, gap, pres, dres, it)


_BACKENDS: dict[str, type[DenseIPMBackend]] = {DenseIPMBackend.name: DenseIPMBackend}


def get_backend(
    name: str = DenseIPMBackend.name, options: IPMOptions | None = None
) -> ConicBackend:
    """Instantiate a registered backend by name."""
    try:
        cls = _BACKENDS[name]
    except KeyError as exc:
        raise ValueError(f"unknown conic backend '{name}'; known: {sorted(_BACKENDS)}") from exc
    return cls(options or DEFAULT_IPM_OPTIONS)


def solve_sdp(problem: ConicProblem, backend: ConicBackend | None = None) -> ConicSolution:
    """Solve a conic program (any mix of free, nonnegative and PSD blocks)."""
    backend = backend or get_backend()
    sol = backend.solve(problem)
    LOGGER.debug(
        "%s: status=%s obj=%.10g gap=%.2e it=%d",
        backend.name,
        sol.status,
        sol.objective_value,
        sol.gap,
        sol.iterations,
    )
    return sol


_LINPROG_STATUS: dict[int, Status] = {
    0: "optimal",
    1: "iteration_limit",
    2: "infeasible",
    3: "unbounded",
    4: "numerical_failure",
}


def solve_lp(
    c: np.ndarray,
    A_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    A_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    bounds: Sequence[tuple[float | None, float | None]] | None = None,
) -> ConicSolution:
    """min c^T x over {A_ub x <= b_ub, A_eq x = b_eq}.

    Variables are free unless ``bounds`` is given.

    ``dual`` holds nonnegative multipliers for the inequality rows followed by
    the multipliers of the equality rows.
    """
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    if bounds is None:
        bounds = [(None, None)] * n
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs-ds",
    )
    status = _LINPROG_STATUS.get(res.status, "numerical_failure")
    m_ub = 0 if A_ub is None else np.atleast_2d(A_ub).shape[0]
    m_eq = 0 if A_eq is None else np.atleast_2d(A_eq).shape[0]
    if status != "optimal":
        return ConicSolution(
            status=status,
            primal=np.full(n, np.nan),
            dual=np.full(m_ub + m_eq, np.nan),
            objective_value=math.nan,
            gap=math.inf,
        )
    x = np.asarray(res.x, dtype=float)
    lam = -np.asarray(res.ineqlin.marginals, dtype=float) if m_ub else np.zeros(0)
    nu = np.asarray(res.eqlin.marginals, dtype=float) if m_eq else np.zeros(0)
    dual_obj = 0.0
    if m_ub:
        dual_obj -= float(np.asarray(b_ub, dtype=float) @ lam)
    if m_eq:
        dual_obj += float(np.asarray(b_eq, dtype=float) @ nu)
    for (lo, hi), ml, mu in zip(bounds, res.lower.marginals, res.upper.marginals):
        if lo is not None and np.isfinite(lo):
            dual_obj += lo * ml
        if hi is not None and np.isfinite(hi):
            dual_obj += hi * mu
    return ConicSolution(
        status="optimal",
        primal=x,
        dual=np.concatenate([lam, nu]),
        objective_value=float(res.fun),
        gap=abs(float(res.fun) - dual_obj),
    )


def solve_convex_qp(
    H: np.ndarray,
    g: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    *,
    max_iter: int = QP_MAX_ITER,
    tol: float = TOL_FEAS,
) -> ConicSolution:
    """min x^T H x + 2 g^T x over {A x <= b} for PSD H (primal-dual, Mehrotra)."""
    H = sym(np.asarray(H, dtype=float))
    g = np.asarray(g, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    n = H.shape[0]
    lam_min = min_eig(H)
    if lam_min < -psd_tolerance(H):
        raise InvalidInstanceError(f"QP matrix is indefinite: min eigenvalue {lam_min:.3e}.")
    if lam_min < 0:
        H = clip_psd(H)

    feas = solve_lp(np.zeros(n), A_ub=A, b_ub=b)
    if feas.status == "infeasible":
        return ConicSolution(
            "infeasible", np.full(n, np.nan), np.zeros(A.shape[0]), math.nan, math.inf
        )

    m = A.shape[0]
    x = feas.primal.copy()
    w = np.maximum(b - A @ x, 1.0)
    z = np.ones(m)
    scale = 1.0 + float(np.abs(H).max()) + float(np.abs(g).max(initial=0.0))
    norm_b = 1.0 + float(np.linalg.norm(b))
    status: Status = "iteration_limit"
    it = 0

    def solve_newton(r_d: np.ndarray, r_p: np.ndarray, r_c: np.ndarray) -> tuple[np.ndarray, ...]:
        D = z / w
        lhs = 2.0 * H + (A.T * D) @ A
        rhs = -r_d - A.T @ ((r_c + z * r_p) / w)
        try:
            dx = sla.cho_solve(sla.cho_factor(lhs), rhs)
        except sla.LinAlgError:
            dx = sla.lstsq(lhs, rhs)[0]
        dw = -r_p - A @ dx
        dz = (r_c - z * dw) / w
        return dx, dw, dz

    def ratio(v: np.ndarray, dv: np.ndarray) -> float:
        neg = dv < 0
        return float(np.min(-v[neg] / dv[neg])) if np.any(neg) else math.inf

    for it in range(1, max_iter + 1):
        r_d = 2.0 * (H @ x + g) + A.T @ z
        r_p = A @ x + w - b
        mu = float(w @ z) / m
        obj = float(x @ H @ x + 2.0 * g @ x)
        if (
            np.linalg.norm(r_d) / scale <= tol
            and np.linalg.norm(r_p) / norm_b <= tol
            and float(w @ z) <= TOL_GAP_REL * (1.0 + abs(obj))
        ):
            status = "optimal"
            break
        dx_a, dw_a, dz_a = solve_newton(r_d, r_p, -w * z)
        ap = min(1.0, ratio(w, dw_a))
        ad = min(1.0, ratio(z, dz_a))
        mu_aff = float((w + ap * dw_a) @ (z + ad * dz_a)) / m
        sigma = min(1.0, (mu_aff / mu) ** 3) if mu > 0 else 0.0
        dx, dw, dz = solve_newton(r_d, r_p, sigma * mu - w * z - dw_a * dz_a)
        ap = min(1.0, 0.99 * ratio(w, dw))
        ad = min(1.0, 0.99 * ratio(z, dz))
        x = x + ap * dx
        w = w + ap * dw
        z = z + ad * dz

    obj = float(x @ H @ x + 2.0 * g @ x)
    if status != "optimal":
        LOGGER.warning("convex QP stopped with status %s after %d iterations", status, it)
    return ConicSolution(
        status=status,
        primal=x,
        dual=z,
        objective_value=obj,
        gap=float(w @ z),
        iterations=it,
        primal_residual=float(np.linalg.norm(A @ x + w - b)),
        dual_residual=float(np.linalg.norm(2.0 * (H @ x + g) + A.T @ z)),
    )
