"""Helpers for reading sweep results and formatting reports.

Scaling and monotonicity checks over sweep tables, plus the text and JSON
renderings used by the command line.
"""

import json
import math
from typing import Dict, Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from src.config import ACCEPTED_STATUSES


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x).

    Args:
        x: Positive abscissae, e.g. cell counts n1*n2*nT
        y: Positive ordinates, e.g. solve times

    Returns:
        The fitted exponent

    Examples:
        >>> round(loglog_slope([1, 2, 4], [3, 6, 12]), 6)
        1.0
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("Log-log fit needs at least two positive points")
    return float(stats.linregress(np.log(x), np.log(y)).slope)


def r_squared(x: Sequence[float], y: Sequence[float]) -> float:
    """Coefficient of determination of a straight-line fit of y on x."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.ptp(y) == 0:
        return 1.0
    return float(stats.linregress(x, y).rvalue ** 2)


def is_nondecreasing(values: Iterable[float], rel_tol: float = 1e-6) -> bool:
    """True when each value is at least the previous one up to ``rel_tol``."""
    values = [float(v) for v in values]
    return all(b >= a - rel_tol * max(1.0, abs(a)) for a, b in zip(values, values[1:]))


def cell_counts(df: pd.DataFrame) -> pd.Series:
    """Number of space-time cells per sweep row."""
    if "nX" in df.columns:
        return (2 * df["nX"] + 1) * df["nT"]
    return df["n1"] * df["n2"] * df["nT"]


def summarize_sweep(df: pd.DataFrame) -> pd.DataFrame:
    """Best bound and mean solve time per partition and degree, over repetitions."""
    keys = [k for k in ("n1", "n2", "nX", "nT", "d") if k in df.columns]
    solved = df[df["status"].isin(ACCEPTED_STATUSES)]
    summary = solved.groupby(keys, as_index=False).agg(LB=("LB", "max"), solve_time=("solve_time", "mean"))
    summary["cells"] = cell_counts(summary)
    return summary


def format_value(value: Optional[float], digits: int = 8) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "N/A"
    return f"{value:.{digits}g}"


def report_json(payload: Dict) -> str:
    """JSON text with NaN mapped to null."""

    def clean(value):
        if isinstance(value, float) and not math.isfinite(value):
            return None
        if isinstance(value, dict):
            return {k: clean(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [clean(v) for v in value]
        if isinstance(value, np.generic):
            return clean(value.item())
        return value

    return json.dumps(clean(payload), indent=2)
