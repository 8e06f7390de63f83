#!/usr/bin/env python3
from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from scipy.special import ndtri

from qpbc.config import TOL_PSD_REL
from qpbc.exceptions import InvalidInstanceError

PathLike = str | Path


def setup_logging(verbose: bool = False) -> None:
    """Send qpbc records to stderr; third-party loggers stay at WARNING."""
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    logging.getLogger("qpbc").setLevel(logging.DEBUG if verbose else logging.INFO)


def ensure_outdir(path: PathLike) -> Path:
    """Ensure a directory exists and return it as a Path."""
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def to_jsonable(obj: Any) -> Any:
    """Plain-Python copy of ``obj``: arrays become lists, non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False)


def save_csv(df: pd.DataFrame, path: PathLike) -> Path:
    """Write a report table; floats keep ten significant digits."""
    out = Path(path)
    ensure_outdir(out.parent)
    df.to_csv(out, index=False, float_format="%.10g")
    return out


def save_jsonl(df: pd.DataFrame, path: PathLike) -> Path:
    """Write one JSON record per row (the node event log)."""
    out = Path(path)
    ensure_outdir(out.parent)
    df.to_json(out, orient="records", lines=True, double_precision=15)
    return out


def save_json(obj: Any, path: PathLike) -> Path:
    out = Path(path)
    ensure_outdir(out.parent)
    out.write_text(dumps(obj) + "\n", encoding="utf-8")
    return out


def load_json(path: PathLike) -> Any:
    """Parse a JSON file; malformed text is an invalid instance."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInstanceError(
            f"{path}: not valid JSON ({exc.msg} at line {exc.lineno}, column {exc.colno})."
        ) from exc


def as_float_array(value: Any, name: str, *, ndim: int) -> np.ndarray:
    """Convert to a finite float array of the given rank or raise InvalidInstanceError."""
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInstanceError(f"{name} is not numeric: {exc}") from exc
    if ndim == 2 and arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != ndim:
        raise InvalidInstanceError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        bad = int((~np.isfinite(arr)).sum())
        raise InvalidInstanceError(f"{name} has {bad} non-finite entr{'y' if bad == 1 else 'ies'}.")
    return arr


def frozen(arr: np.ndarray) -> np.ndarray:
    """Mark an array read-only and return it."""
    arr.setflags(write=False)
    return arr


def sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def psd_tolerance(G: np.ndarray) -> float:
    """Scale-aware slack for PSD tests: TOL_PSD_REL * (1 + ||G||_inf)."""
    norm = float(np.abs(G).sum(axis=1).max()) if G.size else 0.0
    return TOL_PSD_REL * (1.0 + norm)


def min_eig(G: np.ndarray) -> float:
    if G.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(sym(G))[0])


def is_psd(G: np.ndarray) -> bool:
    return min_eig(G) >= -psd_tolerance(G)


def clip_psd(G: np.ndarray) -> np.ndarray:
    """Project a nearly-PSD symmetric matrix onto the PSD cone by clipping eigenvalues."""
    w, V = np.linalg.eigh(sym(G))
    return (V * np.maximum(w, 0.0)) @ V.T


def philox_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; ``stream`` occupies the high key word so streams never overlap."""
    if not 0 <= seed < 2**64 or not 0 <= stream < 2**64:
        raise ValueError(f"seed and stream must fit in 64 bits, got {seed}, {stream}.")
    return np.random.Generator(np.random.Philox(key=seed + (stream << 64)))


def gaussian(rng: np.random.Generator, size: int | tuple[int, ...]) -> np.ndarray:
    """Standard normal draws by the inverse CDF of uniform draws."""
    u = np.clip(rng.random(size), 1e-16, 1.0 - 1e-16)
    return ndtri(u)
