"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np


def check_probability(x: float, name: str, *, closed_right: bool = False) -> float:
    x = float(x)
    ok = 0.0 < x <= 1.0 if closed_right else 0.0 < x < 1.0
    if not math.isfinite(x) or not ok:
        upper = "1]" if closed_right else "1)"
        raise ValueError(f"{name} must lie in (0, {upper}, got {x!r}")
    return x


def check_positive(x: float, name: str, *, allow_inf: bool = False) -> float:
    x = float(x)
    if math.isnan(x) or x <= 0.0 or (not allow_inf and math.isinf(x)):
        raise ValueError(f"{name} must be positive, got {x!r}")
    return x


def check_nonnegative(x: float, name: str) -> float:
    x = float(x)
    if not math.isfinite(x) or x < 0.0:
        raise ValueError(f"{name} must be finite and >= 0, got {x!r}")
    return x


def check_count(n: int, name: str, *, minimum: int = 1) -> int:
    if not float(n).is_integer():
        raise ValueError(f"{name} must be an integer, got {n!r}")
    n = int(n)
    if n < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {n}")
    return n


def as_sample_array(values: Iterable[float], name: str = "samples") -> np.ndarray:
    """Coerce observations to a 1-D finite float array; empty is rejected."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr
