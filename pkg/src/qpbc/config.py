#!/usr/bin/env python3
"""Central configuration for qpbc: tolerances, solver defaults and output names."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Final

PACKAGE_DIR: Final[Path] = Path(__file__).resolve().parent

# Positive-semidefiniteness of a Gram matrix G is accepted when
# min eig(G) >= -TOL_PSD_REL * (1 + ||G||_inf).
TOL_PSD_REL: Final[float] = 1e-7
# Absolute slack for LP feasibility, active sets and nonnegativity tests.
TOL_FEAS: Final[float] = 1e-8
# Duality gap target of the conic backend, relative to 1 + |objective|.
TOL_GAP_REL: Final[float] = 1e-8
# Agreement between two independently solved bound programs.
TOL_DUAL: Final[float] = 1e-5
# Minimum objective decrease for a vertex pivot to count as improving.
TOL_IMPR: Final[float] = 1e-9
# Eigenvalues below -TOL_EIG_REL * ||Q||_2 span the negative eigenspace.
TOL_EIG_REL: Final[float] = 1e-8
VERTEX_DEDUP_TOL: Final[float] = 1e-9
SYMMETRY_TOL: Final[float] = 1e-12

# Maximum number of candidate bases C(m, n) examined by vertex enumeration.
ENUMERATION_GUARD: Final[int] = 2_000_000
# Bases are solved in batches of this size.
ENUMERATION_BATCH: Final[int] = 20_000
# Condition-number ceiling for a basis submatrix to count as invertible.
BASIS_COND_LIMIT: Final[float] = 1e10

SDP_MAX_ITER: Final[int] = 200
QP_MAX_ITER: Final[int] = 200

# Branch-and-cut defaults (absolute gap and wall-clock limit).
DEFAULT_EPS: Final[float] = 1e-4
DEFAULT_TIME_LIMIT: Final[float] = 100.0
DEFAULT_MAX_NODES: Final[int] = 10_000
DEFAULT_SEED: Final[int] = 42
MAX_DESCENT_PIVOTS: Final[int] = 10_000

# Instance generation.
MAX_REGENERATE_TRIES: Final[int] = 100
DEFAULT_SUITE_SIZES: Final[tuple[int, ...]] = (5, 6, 7, 8)
GENERATOR_KINDS: Final[tuple[str, ...]] = (
    "dense_concave",
    "norm_max",
    "stqp",
    "box_qp",
    "sparse_concave",
)

# Approximate oracle for non-concave objectives.
ORACLE_GRID_POINTS: Final[int] = 200_000
ORACLE_REFINE_STARTS: Final[int] = 10

EXIT_OK: Final[int] = 0
EXIT_INVALID_INPUT: Final[int] = 2
EXIT_NUMERICAL_FAILURE: Final[int] = 3


@dataclass(frozen=True)
class IPMOptions:
    """Stopping rules of the dense interior-point backend."""

    max_iter: int = SDP_MAX_ITER
    gap_tol: float = TOL_GAP_REL
    feas_tol: float = TOL_FEAS
    # A stalled run within this accuracy is still reported as optimal.
    accept_tol: float = 1e-6
    step_fraction: float = 0.98
    # Iterate norms beyond this trigger the infeasibility certificates.
    blowup: float = 1e10


DEFAULT_IPM_OPTIONS: Final[IPMOptions] = IPMOptions()


@dataclass(frozen=True)
class OutputFiles:
    report_csv: str = "bench_report.csv"
    report_json: str = "bench_report.json"
    events: str = "events.jsonl"
    solve_result: str = "solve_result.json"


OUTPUT_FILES: Final[OutputFiles] = OutputFiles()
