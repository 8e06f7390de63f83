#!/usr/bin/env python3
"""Problem data model for quadratic programs over polytopes.

A ``QpInstance`` describes

    min  x^T Q x + 2 c^T x    s.t.  A x <= b,

with Q symmetric. Instances are immutable: every array is copied on
construction and marked read-only, so an instance can be shared between
threads and nodes of the branch-and-cut tree.

The module also hosts the quadratic nonnegativity test that every bound in the
package relies on. A quadratic in x is nonnegative on R^n exactly when its
(n+1)-order Gram matrix ``[[Q, c], [c^T, c0]]`` is positive semidefinite, and a
multiplier certificate is checked by assembling that matrix for

    q(x) - l + sum_i alpha_i(x) (A_i x - b_i).

Instance JSON schema
--------------------
``{"name", "n", "Q", "c", "A", "b", "equalities": {"E", "f"}?, "known_optimum"?}``
with dense row-major matrices. Equalities ``E x = f`` are stored as the row
pairs ``E x <= f`` and ``-E x <= -f``.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from qpbc.config import SYMMETRY_TOL, TOL_FEAS
from qpbc.exceptions import EmptyPolytopeError, InvalidInstanceError
from qpbc.utils import PathLike, as_float_array, frozen, load_json, save_json

LOGGER = logging.getLogger(__name__)


def _check_symmetric(Q: np.ndarray, name: str = "Q") -> None:
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise InvalidInstanceError(f"{name} must be square, got shape {Q.shape}.")
    if Q.shape[0] < 1:
        raise InvalidInstanceError(f"{name} must have order >= 1.")
    asym = float(np.max(np.abs(Q - Q.T)))
    if asym > SYMMETRY_TOL:
        raise InvalidInstanceError(
            f"{name} is not symmetric: max |{name} - {name}^T| = {asym:.3e} > {SYMMETRY_TOL:g}."
        )


@dataclass(frozen=True)
class Polytope:
    """The set {x : A x <= b}; boundedness is checked in ``qpbc.geometry``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        A = as_float_array(self.A, "A", ndim=2)
        b = as_float_array(self.b, "b", ndim=1)
        if A.shape[0] < 1 or A.shape[1] < 1:
            raise InvalidInstanceError(f"A must be m x n with m, n >= 1, got shape {A.shape}.")
        if b.shape[0] != A.shape[0]:
            raise InvalidInstanceError(f"b has length {b.shape[0]} but A has {A.shape[0]} rows.")
        object.__setattr__(self, "A", frozen(A))
        object.__setattr__(self, "b", frozen(b))

    @property
    def m(self) -> int:
        return int(self.A.shape[0])

    @property
    def n(self) -> int:
        return int(self.A.shape[1])

    def slack(self, x: np.ndarray) -> np.ndarray:
        return self.b - self.A @ x

    def contains(self, x: np.ndarray, tol: float = TOL_FEAS) -> bool:
        return bool(np.all(self.slack(np.asarray(x, dtype=float)) >= -tol))

    def with_rows(self, A_new: np.ndarray, b_new: np.ndarray | Sequence[float]) -> Polytope:
        """Return a new polytope with rows appended (rows are never removed)."""
        A_new = np.atleast_2d(np.asarray(A_new, dtype=float))
        b_new = np.atleast_1d(np.asarray(b_new, dtype=float))
        return Polytope(np.vstack([self.A, A_new]), np.concatenate([self.b, b_new]))

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> Polytope:
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        n = lo.shape[0]
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))


@dataclass(frozen=True)
class AffineFunc:
    """alpha(x) = grad^T x + offset."""

    grad: np.ndarray
    offset: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "grad", frozen(as_float_array(self.grad, "grad", ndim=1)))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def zero(cls, n: int) -> AffineFunc:
        return cls(np.zeros(n), 0.0)

    @property
    def n(self) -> int:
        return int(self.grad.shape[0])

    @property
    def norm(self) -> float:
        return max(abs(self.offset), float(np.max(np.abs(self.grad), initial=0.0)))

    def __call__(self, x: np.ndarray) -> float:
        return float(self.grad @ np.asarray(x, dtype=float) + self.offset)

    def __add__(self, other: AffineFunc) -> AffineFunc:
        return AffineFunc(self.grad + other.grad, self.offset + other.offset)

    def __mul__(self, scalar: float) -> AffineFunc:
        return AffineFunc(scalar * self.grad, scalar * self.offset)

    __rmul__ = __mul__


@dataclass(frozen=True)
class QpInstance:
    Q: np.ndarray
    c: np.ndarray
    polytope: Polytope
    name: str = "instance"
    known_optimum: float | None = None

    def __post_init__(self) -> None:
        Q = as_float_array(self.Q, "Q", ndim=2)
        _check_symmetric(Q)
        c = as_float_array(self.c, "c", ndim=1)
        n = Q.shape[0]
        if c.shape[0] != n:
            raise InvalidInstanceError(f"c has length {c.shape[0]} but Q has order {n}.")
        if self.polytope.n != n:
            raise InvalidInstanceError(
                f"A has {self.polytope.n} columns but Q has order {n} ({self.name})."
            )
        object.__setattr__(self, "Q", frozen(0.5 * (Q + Q.T)))
        object.__setattr__(self, "c", frozen(c))

    @property
    def n(self) -> int:
        return int(self.Q.shape[0])

    @property
    def m(self) -> int:
        return self.polytope.m

    @property
    def A(self) -> np.ndarray:
        return self.polytope.A

    @property
    def b(self) -> np.ndarray:
        return self.polytope.b

    def objective(self, x: np.ndarray) -> float:
        return eval_objective(self, x)

    def with_polytope(self, polytope: Polytope) -> QpInstance:
        return QpInstance(self.Q, self.c, polytope, self.name, self.known_optimum)


@dataclass(frozen=True)
class MultiplierCertificate:
    """Affine multipliers alpha_i (one per polytope row) and a level l."""

    alphas: tuple[AffineFunc, ...]
    level: float
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "alphas", tuple(self.alphas))
        object.__setattr__(self, "level", float(self.level))


def _check_point(inst: QpInstance, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != inst.n:
        raise InvalidInstanceError(f"point has shape {x.shape}, expected ({inst.n},).")
    return x


def eval_objective(inst: QpInstance, x: np.ndarray) -> float:
    """x^T Q x + 2 c^T x."""
    x = _check_point(inst, x)
    return float(x @ inst.Q @ x + 2.0 * inst.c @ x)


def objective_gram(Q: np.ndarray, c: np.ndarray, c0: float = 0.0) -> np.ndarray:
    """Gram matrix [[Q, c], [c^T, c0]] of x^T Q x + 2 c^T x + c0."""
    n = Q.shape[0]
    G = np.zeros((n + 1, n + 1))
    G[:n, :n] = Q
    G[:n, n] = c
    G[n, :n] = c
    G[n, n] = c0
    return G


def lifted_rows(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rows (A_i, -b_i), so that A_i x - b_i = row_i . (x, 1)."""
    return np.hstack([A, -b[:, None]])


def certificate_gram(inst: QpInstance, cert: MultiplierCertificate) -> np.ndarray:
    """Gram matrix of q(x) - l + sum_i alpha_i(x) (A_i x - b_i).

    The certificate is valid when the result is PSD (within ``psd_tolerance``)
    and every alpha_i is nonnegative on the polytope.
    """
    if len(cert.alphas) != inst.m:
        raise InvalidInstanceError(
            f"certificate has {len(cert.alphas)} multipliers for {inst.m} polytope rows."
        )
    for i, alpha in enumerate(cert.alphas):
        if alpha.n != inst.n:
            raise InvalidInstanceError(
                f"multiplier {i} has dimension {alpha.n}, expected {inst.n}."
            )
    G = objective_gram(inst.Q, inst.c, -cert.level)
    D = np.array([np.append(alpha.grad, alpha.offset) for alpha in cert.alphas])
    cross = D.T @ lifted_rows(inst.A, inst.b)
    return G + 0.5 * (cross + cross.T)


@dataclass(frozen=True)
class NonnegCheck:
    """Outcome of ``is_nonnegative_on``; truthy when the function is nonnegative."""

    nonnegative: bool
    minimum: float
    status: str

    def __bool__(self) -> bool:
        return self.nonnegative


def is_nonnegative_on(alpha: AffineFunc, P: Polytope, tol: float = TOL_FEAS) -> NonnegCheck:
    """Decide alpha(x) >= -tol on P with one LP."""
    from qpbc.conic import solve_lp

    if alpha.n != P.n:
        raise InvalidInstanceError(f"affine function has dimension {alpha.n}, polytope {P.n}.")
    sol = solve_lp(alpha.grad, A_ub=P.A, b_ub=P.b)
    if sol.status == "infeasible":
        raise EmptyPolytopeError("polytope is empty; nonnegativity is undefined.")
    if sol.status == "unbounded":
        return NonnegCheck(False, -np.inf, "unbounded")
    if sol.status != "optimal":
        return NonnegCheck(False, np.nan, sol.status)
    minimum = sol.objective_value + alpha.offset
    return NonnegCheck(minimum >= -tol, minimum, "optimal")


def instance_from_dict(data: dict[str, Any]) -> QpInstance:
    """Build and validate an instance from the JSON schema."""
    for key in ("n", "Q", "c", "A", "b"):
        if key not in data:
            raise InvalidInstanceError(f"instance JSON is missing '{key}'.")
    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InvalidInstanceError(f"'n' must be a positive integer, got {n!r}.")
    Q = as_float_array(data["Q"], "Q", ndim=2)
    if Q.shape != (n, n):
        raise InvalidInstanceError(f"Q has shape {Q.shape}, expected ({n}, {n}).")
    _check_symmetric(Q)
    A = as_float_array(data["A"], "A", ndim=2)
    b = as_float_array(data["b"], "b", ndim=1)
    if A.size == 0:
        A = np.zeros((0, n))
    eq = data.get("equalities")
    if eq:
        E = as_float_array(eq["E"], "E", ndim=2)
        f = as_float_array(eq["f"], "f", ndim=1)
        if E.shape[1] != n or E.shape[0] != f.shape[0]:
            raise InvalidInstanceError(f"equalities have shapes E{E.shape}, f{f.shape}.")
        A = np.vstack([A, E, -E])
        b = np.concatenate([b, f, -f])
    known = data.get("known_optimum")
    return QpInstance(
        Q=Q,
        c=data["c"],
        polytope=Polytope(A, b),
        name=str(data.get("name", "instance")),
        known_optimum=None if known is None else float(known),
    )


def instance_to_dict(inst: QpInstance) -> dict[str, Any]:
    out: dict[str, Any] = {
        "name": inst.name,
        "n": inst.n,
        "Q": inst.Q.tolist(),
        "c": inst.c.tolist(),
        "A": inst.A.tolist(),
        "b": inst.b.tolist(),
    }
    if inst.known_optimum is not None:
        out["known_optimum"] = inst.known_optimum
    return out


def load_instance(path: PathLike) -> QpInstance:
    data = load_json(path)
    if not isinstance(data, dict):
        raise InvalidInstanceError(f"{path}: instance JSON must be an object.")
    inst = instance_from_dict(data)
    LOGGER.debug("Loaded instance %s (n=%d, m=%d) from %s", inst.name, inst.n, inst.m, path)
    return inst


def save_instance(inst: QpInstance, path: PathLike) -> None:
    save_json(instance_to_dict(inst), path)
