#!/usr/bin/env python3
"""Reproducible instance generators for concave and box-constrained QPs.

Given a ``GenSpec`` every generator is a pure function of (kind, n, seed,
params). Random numbers come from a Philox counter-based generator keyed by
the seed, with the regeneration attempt in the high key word; Gaussian draws
are inverse-CDF transforms of uniform draws, so the streams are fully
specified by the bit generator.

Kinds
-----
- ``dense_concave``  : A (n x n) standard normal, b ~ Uniform(0, 1); rows
                       A x <= 10 b, sum x <= 100, x >= 0. Q = -U^T D U with U
                       the left singular vectors of a Gaussian matrix and
                       D = diag(Uniform(0, 1)); c standard normal.
- ``norm_max``       : Q = -I, c = 0 over the box [lower, upper] given in
                       params, or over the dense polytope when
                       ``params["polytope"] == "dense"``.
- ``stqp``           : Q symmetric with Uniform(0, 1) entries over the standard
                       simplex.
- ``box_qp``         : Q symmetric Gaussian (indefinite), c Gaussian, over
                       [0, 1]^n with ``params["equalities"]`` rows a_i^T x = d_i,
                       a_i Gaussian and d_i = a_i^T x0 for a uniform interior x0.
- ``sparse_concave`` : sparse symmetric Gaussian S (density
                       ``params["density"]``, default 0.3) shifted by its largest
                       eigenvalue so Q = S - lambda_max I is negative
                       semidefinite; c Gaussian; unit box.

A candidate whose polytope is empty, unbounded or lower-dimensional is
discarded and the next attempt is drawn, up to ``MAX_REGENERATE_TRIES``.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from qpbc.bounds import simplex_instance
from qpbc.config import DEFAULT_SUITE_SIZES, GENERATOR_KINDS, MAX_REGENERATE_TRIES
from qpbc.exceptions import EmptyPolytopeError, InvalidInstanceError
from qpbc.geometry import check_bounded_fulldim
from qpbc.model import Polytope, QpInstance, save_instance
from qpbc.utils import PathLike, gaussian, philox_rng

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenSpec:
    kind: str
    n: int
    seed: int
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(
                f"unknown generator kind '{self.kind}'; expected one of {GENERATOR_KINDS}."
            )
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}.")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}.")

    @property
    def name(self) -> str:
        return f"{self.kind}-n{self.n}-s{self.seed}"


def _symmetric(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _dense_polytope(n: int, rng: np.random.Generator) -> Polytope:
    A = gaussian(rng, (n, n))
    b = rng.random(n)
    rows = np.vstack([A, np.ones((1, n)), -np.eye(n)])
    rhs = np.concatenate([10.0 * b, [100.0], np.zeros(n)])
    return Polytope(rows, rhs)


def _dense_concave(spec: GenSpec, rng: np.random.Generator) -> QpInstance:
    n = spec.n
    P = _dense_polytope(n, rng)
    U = np.linalg.svd(gaussian(rng, (n, n)))[0]
    d = rng.random(n)
    Q = -_symmetric((U.T * d) @ U)
    c = gaussian(rng, n)
    return QpInstance(Q, c, P, name=spec.name)


def _norm_max(spec: GenSpec, rng: np.random.Generator) -> QpInstance:
    n = spec.n
    if spec.params.get("polytope") == "dense":
        return QpInstance(-np.eye(n), np.zeros(n), _dense_polytope(n, rng), name=spec.name)
    lower = np.broadcast_to(np.asarray(spec.params.get("lower", 0.0), dtype=float), (n,))
    upper = np.broadcast_to(np.asarray(spec.params.get("upper", 1.0), dtype=float), (n,))
    known = -float(np.sum(np.maximum(lower**2, upper**2)))
    return QpInstance(
        -np.eye(n), np.zeros(n), Polytope.box(lower, upper), name=spec.name, known_optimum=known
    )


def _stqp(spec: GenSpec, rng: np.random.Generator) -> QpInstance:
    return simplex_instance(_symmetric(rng.random((spec.n, spec.n))), name=spec.name)


def _box_qp(spec: GenSpec, rng: np.random.Generator) -> QpInstance:
    n = spec.n
    k = int(spec.params.get("equalities", 0))
    if not 0 <= k < n:
        raise ValueError(f"box_qp needs 0 <= equalities < n, got {k}.")
    Q = _symmetric(gaussian(rng, (n, n)))
    c = gaussian(rng, n)
    P = Polytope.box(np.zeros(n), np.ones(n))
    if k:
        E = gaussian(rng, (k, n))
        x0 = rng.random(n)
        f = E @ x0
        P = P.with_rows(np.vstack([E, -E]), np.concatenate([f, -f]))
    return QpInstance(Q, c, P, name=spec.name)


def _sparse_concave(spec: GenSpec, rng: np.random.Generator) -> QpInstance:
    n = spec.n
    density = float(spec.params.get("density", 0.3))
    mask = np.triu(rng.random((n, n)) < density)
    S = np.triu(gaussian(rng, (n, n))) * mask
    S = S + np.triu(S, 1).T
    shift = max(float(np.linalg.eigvalsh(S)[-1]), 0.0)
    Q = _symmetric(S - shift * np.eye(n))
    c = gaussian(rng, n)
    return QpInstance(Q, c, Polytope.box(np.zeros(n), np.ones(n)), name=spec.name)


_GENERATORS: dict[str, Callable[[GenSpec, np.random.Generator], QpInstance]] = {
    "dense_concave": _dense_concave,
    "norm_max": _norm_max,
    "stqp": _stqp,
    "box_qp": _box_qp,
    "sparse_concave": _sparse_concave,
}


# Kinds whose polytopes carry equality rows and so may lack interior points.
_EQUALITY_KINDS: frozenset[str] = frozenset({"stqp", "box_qp"})


def _acceptable(inst: QpInstance, kind: str) -> bool:
    try:
        check = check_bounded_fulldim(inst.polytope)
    except EmptyPolytopeError:
        return False
    if kind in _EQUALITY_KINDS:
        return check.bounded
    return check.bounded and check.reduced.full_dimensional


def generate_instance(spec: GenSpec) -> QpInstance:
    """Draw an instance for ``spec``; deterministic in the seed."""
    make = _GENERATORS[spec.kind]
    for attempt in range(MAX_REGENERATE_TRIES):
        inst = make(spec, philox_rng(spec.seed, attempt))
        if _acceptable(inst, spec.kind):
            if attempt:
                LOGGER.debug("%s accepted after %d regenerations", spec.name, attempt)
            return inst
    raise InvalidInstanceError(
        f"{spec.name}: no acceptable instance after {MAX_REGENERATE_TRIES} attempts."
    )


def default_suite(
    kinds: tuple[str, ...] = ("dense_concave", "norm_max"),
    sizes: tuple[int, ...] = DEFAULT_SUITE_SIZES,
    seeds: tuple[int, ...] = (1,),
) -> list[GenSpec]:
    """Cartesian product of kinds, sizes and seeds in that order."""
    return [GenSpec(kind, n, seed) for kind in kinds for n in sizes for seed in seeds]


def write_instance(spec: GenSpec, path: PathLike) -> QpInstance:
    inst = generate_instance(spec)
    save_instance(inst, path)
    LOGGER.info("Wrote %s (n=%d, m=%d) to %s", inst.name, inst.n, inst.m, path)
    return inst
