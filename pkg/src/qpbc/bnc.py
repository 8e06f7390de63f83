#!/usr/bin/env python3
"""Branch and cut for concave quadratic programs over polytopes.

Nodes are processed level by level. Every node of a level is first
evaluated independently (optionally on a thread pool):

1. an LP feasibility test;
2. the capped multiplier bound, using the incumbent value from the start of
   the level as the cap;
3. the convex underestimator QP followed by vertex descent on the node
   polytope, giving a candidate incumbent.

The level is then resolved serially in node-id order: the incumbent is
updated, nodes within eps of it are fathomed, eligible nondegenerate vertices
contribute a Konno cut, and every surviving node is split through its
Chebyshev center along a random direction drawn from a counter-based
generator keyed by (seed, node id). Results therefore do not depend on
whether evaluation ran in parallel.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from joblib import Parallel, delayed

from qpbc.bounds import (
    VARIANTS,
    extract_underestimator,
    reduce_instance,
    solve_bound,
)
from qpbc.config import (
    DEFAULT_EPS,
    DEFAULT_MAX_NODES,
    DEFAULT_SEED,
    DEFAULT_TIME_LIMIT,
)
from qpbc.conic import solve_convex_qp, solve_lp
from qpbc.cuts import konno_step, local_frame, make_concavity_cut, tuy_extension
from qpbc.exceptions import (
    EmptyPolytopeError,
    InvalidInstanceError,
    LowerDimensionalError,
    NumericalFailure,
    UnboundedPolytopeError,
)
from qpbc.geometry import (
    Vertex,
    chebyshev_center,
    check_bounded_fulldim,
    local_vertex_descent,
    partition_at,
)
from qpbc.model import Polytope, QpInstance
from qpbc.utils import gaussian, philox_rng, psd_tolerance

LOGGER = logging.getLogger(__name__)

BnCStatus = Literal["optimal_within_eps", "time_limit", "node_limit"]
NodeAction = Literal["fathomed_gap", "fathomed_empty", "cut_added", "branched"]


@dataclass(frozen=True)
class BnCConfig:
    eps: float = DEFAULT_EPS
    time_limit_sec: float = DEFAULT_TIME_LIMIT
    max_nodes: int = DEFAULT_MAX_NODES
    seed: int = DEFAULT_SEED
    bound_variant: str = "L"
    parallel: bool = False
    n_jobs: int = -1
    use_cuts: bool = True

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}.")
        if not self.time_limit_sec > 0:
            raise ValueError(f"time_limit_sec must be positive, got {self.time_limit_sec}.")
        if self.max_nodes < 1:
            raise ValueError(f"max_nodes must be >= 1, got {self.max_nodes}.")
        if self.bound_variant not in VARIANTS:
            raise ValueError(
                f"bound_variant must be one of {VARIANTS}, got '{self.bound_variant}'."
            )


@dataclass
class BnCNode:
    id: int
    parent_id: int | None
    polytope: Polytope
    depth: int = 0
    lower: float = -math.inf


@dataclass(frozen=True)
class BnCResult:
    status: BnCStatus
    lower: float
    upper: float
    incumbent: np.ndarray
    nodes_processed: int
    cuts_added: int
    wall_time: float
    events: tuple[dict[str, Any], ...] = ()
    lower_history: tuple[float, ...] = ()

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "lower": self.lower,
            "upper": self.upper,
            "incumbent": self.incumbent.tolist(),
            "nodes": self.nodes_processed,
            "cuts": self.cuts_added,
            "time_sec": self.wall_time,
        }


@dataclass(frozen=True)
class _NodeEval:
    empty: bool
    lower: float | None = None
    vertex: Vertex | None = None
    value: float = math.inf


def update_lower_bound(fathomed: list[float], open_bounds: list[float]) -> float:
    """Smallest bound among fathomed and open nodes; -inf when there are none."""
    values = list(fathomed) + list(open_bounds)
    return min(values) if values else -math.inf


def branch_direction(seed: int, node_id: int, n: int) -> np.ndarray:
    """Uniform random unit vector from the Philox stream keyed by (seed, node id)."""
    d = gaussian(philox_rng(seed, node_id), n)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        d = np.ones(n)
        norm = math.sqrt(n)
    return d / norm


def _evaluate(inst: QpInstance, node: BnCNode, cap: float, variant: str) -> _NodeEval:
    P = node.polytope
    feas = solve_lp(np.zeros(inst.n), A_ub=P.A, b_ub=P.b)
    if feas.status == "infeasible":
        return _NodeEval(empty=True)
    node_inst = inst.with_polytope(P)
    lower: float | None = None
    start = feas.primal
    try:
        br = solve_bound(node_inst, variant, None if math.isinf(cap) else cap)
        lower = br.value
        under = extract_underestimator(node_inst, br)
        qp = solve_convex_qp(under.H, under.g, P.A, P.b)
        if qp.status == "infeasible":
            return _NodeEval(empty=True)
        if qp.ok:
            start = qp.primal
    except EmptyPolytopeError:
        return _NodeEval(empty=True)
    except NumericalFailure as exc:
        LOGGER.warning("node %d: bound failed (%s); inheriting parent bound", node.id, exc)
    vertex = local_vertex_descent(node_inst, start)
    value = node_inst.objective(vertex.point)
    return _NodeEval(empty=False, lower=lower, vertex=vertex, value=value)


def _split_point(P: Polytope) -> np.ndarray:
    try:
        return chebyshev_center(P).center
    except LowerDimensionalError:
        red = check_bounded_fulldim(P).reduced
        if red.inner is None:
            return red.origin.copy()
        return red.embed(chebyshev_center(red.inner).center)


def _try_cut(
    inst: QpInstance, P: Polytope, vertex: Vertex, value: float, u: float, eps: float
) -> Polytope | None:
    frame = local_frame(P, vertex)
    if frame is None:
        return None
    node_inst = inst.with_polytope(P)
    level = u - eps
    if value < level:
        return None
    t = tuy_extension(node_inst, frame, level)
    konno = konno_step(node_inst, frame, t, u, eps)
    if not konno.eligible:
        return None
    cut = make_concavity_cut(frame, konno.s, kind="konno")
    a, rhs = cut.as_row
    return P.with_rows(a, [rhs])


def _shift_event(event: dict[str, Any], offset: float) -> dict[str, Any]:
    shifted = dict(event)
    for key in ("lower", "upper", "global_lower"):
        shifted[key] = event[key] + offset
    return shifted


def _check_concave(inst: QpInstance) -> None:
    lam_max = float(np.linalg.eigvalsh(inst.Q)[-1])
    if lam_max > psd_tolerance(inst.Q):
        raise InvalidInstanceError(
            f"branch and cut needs a negative semidefinite Q; '{inst.name}' has "
            f"eigenvalue {lam_max:.3e}."
        )


def solve_bnc(inst: QpInstance, cfg: BnCConfig | None = None) -> BnCResult:
    """Globally minimize a concave quadratic over a bounded polytope to within cfg.eps."""
    cfg = cfg or BnCConfig()
    t0 = time.perf_counter()
    _check_concave(inst)
    check = check_bounded_fulldim(inst.polytope)
    if not check.bounded:
        raise UnboundedPolytopeError(f"polytope of '{inst.name}' is unbounded.")
    red = check.reduced
    if red.inner is None:
        x0 = red.origin.copy()
        value = inst.objective(x0)
        return BnCResult(
            "optimal_within_eps",
            value,
            value,
            x0,
            1,
            0,
            time.perf_counter() - t0,
            lower_history=(value,),
        )
    if not red.full_dimensional:
        red_inst, offset, _ = reduce_instance(inst, red)
        LOGGER.info("solving on the %d-dimensional affine hull of the polytope", red.dim)
        sub = solve_bnc(red_inst, cfg)
        return BnCResult(
            sub.status,
            sub.lower + offset,
            sub.upper + offset,
            red.embed(sub.incumbent),
            sub.nodes_processed,
            sub.cuts_added,
            time.perf_counter() - t0,
            events=tuple(_shift_event(e, offset) for e in sub.events),
            lower_history=tuple(v + offset for v in sub.lower_history),
        )
    return _run(inst, cfg, t0)


def _run(inst: QpInstance, cfg: BnCConfig, t0: float) -> BnCResult:
    u = math.inf
    incumbent: np.ndarray | None = None
    lower = -math.inf
    fathomed: list[float] = []
    events: list[dict[str, Any]] = []
    history: list[float] = []
    level = [BnCNode(0, None, inst.polytope)]
    next_id = 1
    processed = 0
    cuts = 0
    status: BnCStatus = "optimal_within_eps"

    while level:
        cap = u
        if cfg.parallel and len(level) > 1:
            evals = Parallel(n_jobs=cfg.n_jobs, prefer="threads")(
                delayed(_evaluate)(inst, node, cap, cfg.bound_variant) for node in level
            )
        else:
            evals = [_evaluate(inst, node, cap, cfg.bound_variant) for node in level]
        processed += len(level)

        next_level: list[BnCNode] = []
        pending: list[dict[str, Any]] = []
        for node, ev in zip(level, evals):
            action: NodeAction
            if ev.empty:
                action = "fathomed_empty"
                node_lower = node.lower
            else:
                assert ev.vertex is not None
                if ev.value < u:
                    u, incumbent = ev.value, ev.vertex.point.copy()
                bound_ok = ev.lower is not None
                node_lower = ev.lower if ev.lower is not None else node.lower
                action = "branched"
                P = node.polytope
                if bound_ok and node_lower + cfg.eps >= u:
                    action = "fathomed_gap"
                elif cfg.use_cuts:
                    cut_poly = _try_cut(inst, P, ev.vertex, ev.value, u, cfg.eps)
                    if cut_poly is not None:
                        cuts += 1
                        P = cut_poly
                        action = "cut_added"
                        if solve_lp(np.zeros(inst.n), A_ub=P.A, b_ub=P.b).status == "infeasible":
                            action = "fathomed_empty"
                if action in ("branched", "cut_added"):
                    center = _split_point(P)
                    d = branch_direction(cfg.seed, node.id, inst.n)
                    for child in partition_at(P, center, d):
                        next_level.append(
                            BnCNode(next_id, node.id, child, node.depth + 1, node_lower)
                        )
                        next_id += 1
            if action == "fathomed_gap":
                fathomed.append(node_lower)
            elif action == "fathomed_empty":
                fathomed.append(max(node_lower, u - cfg.eps))
            pending.append(
                {
                    "id": node.id,
                    "parent": node.parent_id,
                    "depth": node.depth,
                    "lower": node_lower,
                    "upper": u,
                    "action": action,
                }
            )

        open_bounds = [child.lower for child in next_level[::2]]
        lower = max(lower, update_lower_bound(fathomed, open_bounds))
        lower = min(lower, u)
        history.append(lower)
        for event in pending:
            event["global_lower"] = lower
            LOGGER.info(
                "node %d (parent %s, depth %d): %s lower=%.8g upper=%.8g global_lower=%.8g",
                event["id"],
                event["parent"],
                event["depth"],
                event["action"],
                event["lower"],
                event["upper"],
                lower,
            )
        events.extend(pending)

        level = next_level
        if not level or u - lower <= cfg.eps:
            status = "optimal_within_eps"
            level = []
            break
        if time.perf_counter() - t0 >= cfg.time_limit_sec:
            status = "time_limit"
            break
        if processed + len(level) > cfg.max_nodes:
            status = "node_limit"
            break

    if incumbent is None:
        raise EmptyPolytopeError(f"no feasible point found for '{inst.name}'.")
    wall = time.perf_counter() - t0
    LOGGER.info(
        "branch and cut finished: %s lower=%.10g upper=%.10g nodes=%d cuts=%d time=%.2fs",
        status,
        lower,
        u,
        processed,
        cuts,
        wall,
    )
    return BnCResult(
        status, lower, u, incumbent, processed, cuts, wall, tuple(events), tuple(history)
    )
