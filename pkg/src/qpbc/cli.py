#!/usr/bin/env python3
"""Command-line surface: bounds, relaxations, global solves, oracles, generators, benchmarks.

Every subcommand prints a JSON document on stdout. Exit status is 0 on
success, 2 for invalid input (bad or missing files, malformed instances) and
3 when a numerical solve fails.
"""

from __future__ import annotations

import argparse
import logging
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from qpbc import __version__
from qpbc.bench import run_benchmark
from qpbc.bnc import BnCConfig, solve_bnc
from qpbc.bounds import (
    VARIANTS,
    simplex_instance,
    solve_bound,
    solve_relaxation,
    srlt_bound,
    stqp_conv_bound,
)
from qpbc.config import (
    DEFAULT_EPS,
    DEFAULT_MAX_NODES,
    DEFAULT_SEED,
    DEFAULT_SUITE_SIZES,
    DEFAULT_TIME_LIMIT,
    EXIT_INVALID_INPUT,
    EXIT_NUMERICAL_FAILURE,
    EXIT_OK,
    GENERATOR_KINDS,
)
from qpbc.exceptions import GuardExceededError, InvalidInstanceError, NumericalFailure, QpbcError
from qpbc.generate import GenSpec, default_suite, write_instance
from qpbc.model import QpInstance, load_instance
from qpbc.oracle import brute_force_optimum
from qpbc.utils import dumps, save_json, save_jsonl, setup_logging

LOGGER = logging.getLogger(__name__)


def _emit(payload: dict[str, Any]) -> None:
    print(dumps(payload))


def _is_standard_simplex(inst: QpInstance) -> bool:
    if np.any(inst.c != 0):
        return False
    ref = simplex_instance(inst.Q).polytope
    return ref.A.shape == inst.A.shape and np.allclose(ref.A, inst.A) and np.allclose(ref.b, inst.b)


def _optional(fn: Callable[[], float]) -> float | None:
    """Value of an optional comparison bound; None when it does not apply."""
    try:
        return float(fn())
    except (InvalidInstanceError, GuardExceededError) as exc:
        LOGGER.debug("comparison bound skipped: %s", exc)
        return None


def _bnc_config(args: argparse.Namespace) -> BnCConfig:
    return BnCConfig(
        eps=args.eps,
        time_limit_sec=args.time_limit,
        max_nodes=args.max_nodes,
        seed=args.seed,
        bound_variant=args.variant,
        parallel=args.parallel,
        use_cuts=not args.no_cuts,
    )


def cmd_bound(args: argparse.Namespace) -> None:
    inst = load_instance(args.input)
    br = solve_bound(inst, args.variant, args.cap)
    _emit(
        {
            "instance": inst.name,
            "variant": br.variant,
            "value": br.value,
            "status": br.status,
            "gap": br.gap,
        }
    )


def cmd_relax(args: argparse.Namespace) -> None:
    inst = load_instance(args.input)
    rel = solve_relaxation(inst, include_Ax_leq_b=args.with_rows)
    _emit({"instance": inst.name, "value": rel.value, "x": rel.x.tolist(), "status": rel.status})


def cmd_solve(args: argparse.Namespace) -> None:
    inst = load_instance(args.input)
    res = solve_bnc(inst, _bnc_config(args))
    payload = res.to_dict()
    if args.out:
        save_json(payload, args.out)
    if args.events:
        save_jsonl(pd.DataFrame(list(res.events)), args.events)
    _emit(payload)


def cmd_oracle(args: argparse.Namespace) -> None:
    inst = load_instance(args.input)
    res = brute_force_optimum(inst)
    _emit(
        {
            "instance": inst.name,
            "value": res.value,
            "argmin": res.argmin.tolist(),
            "approximate": res.approximate,
        }
    )


def _gen_params(args: argparse.Namespace) -> dict[str, Any]:
    params: dict[str, Any] = {}
    if args.equalities is not None:
        params["equalities"] = args.equalities
    if args.density is not None:
        params["density"] = args.density
    if args.lower is not None:
        params["lower"] = args.lower
    if args.upper is not None:
        params["upper"] = args.upper
    if args.dense_polytope:
        params["polytope"] = "dense"
    return params


def cmd_gen(args: argparse.Namespace) -> None:
    spec = GenSpec(args.kind, args.n, args.seed, _gen_params(args))
    inst = write_instance(spec, args.out)
    _emit({"instance": inst.name, "n": inst.n, "m": inst.m, "path": str(args.out)})


def cmd_compare(args: argparse.Namespace) -> None:
    inst = load_instance(args.input)
    out: dict[str, Any] = {"instance": inst.name}
    out["L"] = solve_bound(inst, "L").value
    out["L1"] = solve_bound(inst, "L1").value
    out["BOX"] = _optional(lambda: solve_bound(inst, "BOX").value)
    out["DD0"] = solve_relaxation(inst).value
    out["StQP_conv"] = stqp_conv_bound(inst.Q) if _is_standard_simplex(inst) else None
    out["SRLT"] = _optional(lambda: srlt_bound(inst).value)
    try:
        oracle = brute_force_optimum(inst)
        out["oracle"] = oracle.value
        out["oracle_approximate"] = oracle.approximate
    except GuardExceededError as exc:
        LOGGER.warning("oracle skipped: %s", exc)
        out["oracle"] = None
    _emit(out)


def _suite(args: argparse.Namespace) -> list[GenSpec | Path]:
    if args.files:
        return [Path(f) for f in args.files]
    return list(default_suite(tuple(args.kinds), tuple(args.sizes), tuple(args.seeds)))


def cmd_bench(args: argparse.Namespace) -> None:
    report = run_benchmark(
        _suite(args), _bnc_config(args), with_oracle=not args.no_oracle, n_jobs=args.n_jobs
    )
    csv_path, json_path = report.write(args.outdir)
    LOGGER.info("Reports written to %s and %s", csv_path, json_path)
    table = report.table
    _emit(
        {
            "rows": len(report),
            "within_eps": int((table["status"] == "optimal_within_eps").sum()),
            "errors": int((table["status"] == "error").sum()),
            "csv": str(csv_path),
            "json": str(json_path),
        }
    )


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, type=Path, help="Instance JSON file.")


def _add_bnc_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, default=DEFAULT_EPS, help="Absolute gap tolerance.")
    p.add_argument(
        "--time-limit", type=float, default=DEFAULT_TIME_LIMIT, help="Wall-clock limit in seconds."
    )
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Branching-direction seed.")
    p.add_argument(
        "--max-nodes",
        type=int,
        default=DEFAULT_MAX_NODES,
        help="Maximum number of processed nodes.",
    )
    p.add_argument("--variant", choices=VARIANTS, default="L", help="Node bound variant.")
    p.add_argument("--parallel", action="store_true", help="Bound the nodes of a level in threads.")
    p.add_argument("--no-cuts", action="store_true", help="Disable concavity cuts.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpbc",
        description="Affine-multiplier SDP bounds and branch and cut for quadratic programs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="Multiplier SDP lower bound.")
    _add_input(p)
    p.add_argument("--variant", choices=VARIANTS, default="L")
    p.add_argument("--cap", type=float, default=None, help="Upper cap on the bound level.")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("relax", help="Moment relaxation with pairwise constraint products.")
    _add_input(p)
    p.add_argument("--with-rows", action="store_true", help="Also impose A x <= b on the moments.")
    p.set_defaults(func=cmd_relax)

    p = sub.add_parser("solve", help="Global branch and cut for concave objectives.")
    _add_input(p)
    _add_bnc_options(p)
    p.add_argument("--events", type=Path, default=None, help="Write the node log as JSON lines.")
    p.add_argument("--out", type=Path, default=None, help="Write the result JSON here.")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="Brute-force reference optimum.")
    _add_input(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gen", help="Generate an instance file.")
    p.add_argument("--kind", choices=GENERATOR_KINDS, default="dense_concave")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--equalities", type=int, default=None, help="box_qp: number of equalities.")
    p.add_argument("--density", type=float, default=None, help="sparse_concave: nonzero density.")
    p.add_argument("--lower", type=float, default=None, help="norm_max: box lower bound.")
    p.add_argument("--upper", type=float, default=None, help="norm_max: box upper bound.")
    p.add_argument(
        "--dense-polytope", action="store_true", help="norm_max: use the dense polytope recipe."
    )
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("compare", help="Compare every applicable bound with the oracle.")
    _add_input(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="Run branch and cut over a suite and write reports.")
    p.add_argument("files", nargs="*", help="Instance files; overrides the generated suite.")
    p.add_argument(
        "--kinds", nargs="+", choices=GENERATOR_KINDS, default=["dense_concave", "norm_max"]
    )
    p.add_argument("--sizes", nargs="+", type=int, default=list(DEFAULT_SUITE_SIZES))
    p.add_argument("--seeds", nargs="+", type=int, default=[1])
    p.add_argument("--outdir", type=Path, default=Path("outputs"))
    p.add_argument("--n-jobs", type=int, default=1, help="Suite rows solved concurrently.")
    p.add_argument("--no-oracle", action="store_true", help="Skip reference optima.")
    _add_bnc_options(p)
    p.set_defaults(func=cmd_bench)
    return parser


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    setup_logging(args.verbose)
    try:
        args.func(args)
    except NumericalFailure as exc:
        LOGGER.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL_FAILURE
    except (QpbcError, ValueError, OSError) as exc:
        LOGGER.error("invalid input: %s", exc)
        return EXIT_INVALID_INPUT
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
