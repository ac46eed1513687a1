"""Anytime (uniform-in-sample-size) confidence radii and sum boundaries.

Two families of closed forms live here:

* location-estimator radii — the iterated-logarithm radius
  ``(3.4 sigma / alpha) * sqrt((lnln(2n) + 0.72 ln(10.4/delta)) / n)``
  and the stitched union-bound radius it is compared against;

* boundaries for the running sum of t i.i.d. 1-sub-Gaussian variables
  (the ``jamieson`` / ``howard`` / ``maillard`` rows), together with the
  calibration map that converts a global confidence target ``nu`` into
  the per-boundary ``delta`` each row must be fed to actually deliver
  ``nu``.

All iterated logarithms are clamped at zero: that only binds for tiny n
(where ln ln is negative) and errs on the conservative side, so no
domain restrictions are needed.  Every function is pure double-precision
math, stateless, and safe to call concurrently; scalar or ndarray ``n``
and ``t`` are accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .validation import check_count, check_positive, check_probability

__all__ = [
    "LilParams",
    "BoundarySpec",
    "CurvatureEntryError",
    "lil_radius",
    "smallest_valid_n",
    "union_bound_radius",
    "zeta",
    "confidence_to_delta",
    "sum_boundary",
    "matched_delta",
]

BOUNDARY_METHODS = ("lil_thm1", "union_bound", "jamieson", "howard", "maillard")

# Per-boundary constants.  The jamieson row bakes in epsilon = 0.01:
# 1.57 ~ (1+sqrt(eps))*sqrt(2(1+eps)), 1.01 = 1+eps and the 21154 factor
# is (2+eps)/eps * (1/ln(1+eps))^(1+eps); they move together, so the row
# is not re-parameterised here.
_JAMIESON_EXPONENT = 1.01
_JAMIESON_CONFIDENCE = 21154.0


class CurvatureEntryError(RuntimeError):
    """The anytime radius never drops below the curvature radius r."""


@dataclass(frozen=True)
class LilParams:
    """Constants of the iterated-logarithm radius.

    sigma: sub-Gaussian scale of the loss increments (>= 0)
    alpha: curvature of the population risk near its minimiser (> 0)
    delta: confidence parameter in (0, 1)
    r:     radius of the curvature region (> 0, may be inf)
    """

    sigma: float
    alpha: float
    delta: float
    r: float = math.inf

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma!r}")
        check_positive(self.alpha, "alpha")
        check_probability(self.delta, "delta")
        check_positive(self.r, "r", allow_inf=True)


@dataclass(frozen=True)
class BoundarySpec:
    """A uniform sum boundary: which row, plus its free parameters.

    ``epsilon`` is only meaningful for ``union_bound`` (the n^(1+eps)
    stitching exponent); the other rows carry no free parameters.
    """

    method: str
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if self.method not in BOUNDARY_METHODS:
            raise ValueError(f"unknown boundary method {self.method!r}; expected one of {BOUNDARY_METHODS}")
        if self.method == "union_bound":
            if self.epsilon is None:
                raise ValueError("union_bound requires epsilon > 0")
            check_positive(self.epsilon, "epsilon")
        elif self.epsilon is not None:
            check_positive(self.epsilon, "epsilon")


def _lnln_clamped(x):
    """max(0, ln ln x) for x > 1, elementwise."""
    return np.maximum(0.0, np.log(np.log(x)))


def _check_n(n) -> np.ndarray:
    arr = np.asarray(n, dtype=np.float64)
    if arr.size == 0 or np.any(arr < 1):
        raise ValueError("n must be >= 1")
    return arr


def lil_radius(n, params: LilParams):
    """Anytime radius (3.4 sigma/alpha) sqrt((lnln 2n + 0.72 ln(10.4/delta))/n).

    Scalar in, scalar out; ndarray in, ndarray out.
    """
    arr = _check_n(n)
    body = (_lnln_clamped(2.0 * arr) + 0.72 * math.log(10.4 / params.delta)) / arr
    out = (3.4 * params.sigma / params.alpha) * np.sqrt(body)
    return float(out) if np.isscalar(n) or np.ndim(n) == 0 else out


def smallest_valid_n(params: LilParams, cap: int = 10**9) -> int:
    """Smallest n >= 1 with lil_radius(n) <= r, by upward linear scan.

    The radius is not guaranteed monotone for the first few n, so the
    scan walks every n from 1 (in vectorised chunks) instead of
    bisecting; it raises CurvatureEntryError past ``cap``.
    """
    if math.isinf(params.r):
        return 1
    start = 1
    chunk = 1 << 14
    while start <= cap:
        stop = min(start + chunk, cap + 1)
        ns = np.arange(start, stop, dtype=np.float64)
        hits = np.nonzero(lil_radius(ns, params) <= params.r)[0]
        if hits.size:
            return int(start + hits[0])
        start = stop
        chunk = min(chunk * 2, 1 << 22)
    raise CurvatureEntryError(
        f"radius never enters curvature region: lil_radius(n) > r={params.r} for all n <= {cap}"
    )


def union_bound_radius(n, delta: float, epsilon: float, sigma: float, alpha: float):
    """Stitched pointwise radius (2 sigma/alpha) sqrt(2 ln(2 n^(1+eps)/delta)/n).

    Holding it for every n simultaneously costs a zeta(1+eps) factor in
    confidence: the global coverage is 1 - zeta(1+eps)*delta.
    """
    arr = _check_n(n)
    check_probability(delta, "delta")
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon!r}")
    body = 2.0 * np.log(2.0 * arr ** (1.0 + epsilon) / delta) / arr
    out = (2.0 * sigma / alpha) * np.sqrt(body)
    return float(out) if np.isscalar(n) or np.ndim(n) == 0 else out


def zeta(s: float, n_terms: int = 100_000) -> float:
    """Riemann zeta for s > 1 via partial sum plus an Euler-Maclaurin tail.

    sum_{k<N} k^-s + N^(1-s)/(s-1) + N^-s/2; the first omitted correction
    is O(s N^(-s-1)), so the default N = 1e5 gives absolute error below
    1e-8 for every s bounded away from 1 by ~0.05.
    """
    s = float(s)
    if not s > 1.0:
        raise ValueError(f"zeta requires s > 1, got {s!r}")
    n_terms = check_count(n_terms, "n_terms", minimum=2)
    k = np.arange(1, n_terms, dtype=np.float64)
    head = float(np.sum(k ** (-s)))
    tail = n_terms ** (1.0 - s) / (s - 1.0) + 0.5 * n_terms ** (-s)
    return head + tail


def confidence_to_delta(nu: float) -> float:
    """Invert nu = 11*delta + 6*sqrt(delta): delta = ((sqrt(11 nu + 9) - 3)/11)^2.

    Evaluated via the conjugate form sqrt(delta) = nu/(sqrt(11 nu + 9) + 3),
    which avoids the cancellation of the textbook expression at tiny nu.
    """
    nu = check_probability(nu, "nu", closed_right=True)
    root = nu / (math.sqrt(11.0 * nu + 9.0) + 3.0)
    return root * root


def sum_boundary(spec: BoundarySpec, t, delta: float, sigma: float = 1.0):
    """Evaluate a uniform boundary for the sum of t i.i.d. sigma-sub-Gaussian terms.

    Rows (all iterated logs clamped at 0):
      jamieson:    1.57 sqrt(t (lnln(1.01 t) + ln(1/delta)))
      howard:      1.44 sqrt(t (1.4 lnln(2t) + ln(5.19/delta)))
      maillard:    1.42 sqrt((t+1) (ln sqrt(t+1) + ln(1/delta)))
      union_bound: sqrt(2 t ln(2 t^(1+eps)/delta))

    Note jamieson holds with global confidence 21154*delta^1.01 rather
    than delta; feed it matched_delta() output for honest comparisons.
    """
    arr = _check_n(t)
    check_probability(delta, "delta")
    if spec.method == "jamieson":
        body = arr * (_lnln_clamped(1.01 * arr) + math.log(1.0 / delta))
        out = 1.57 * np.sqrt(body)
    elif spec.method == "howard":
        body = arr * (1.4 * _lnln_clamped(2.0 * arr) + math.log(5.19 / delta))
        out = 1.44 * np.sqrt(body)
    elif spec.method == "maillard":
        body = (arr + 1.0) * (np.log(np.sqrt(arr + 1.0)) + math.log(1.0 / delta))
        out = 1.42 * np.sqrt(body)
    elif spec.method == "union_bound":
        out = np.sqrt(2.0 * arr * np.log(2.0 * arr ** (1.0 + spec.epsilon) / delta))
    else:
        raise ValueError(f"{spec.method!r} is not a sum boundary")
    out = sigma * out
    return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out


def matched_delta(spec: BoundarySpec, nu: float) -> float:
    """delta making the boundary's global confidence equal the target nu.

    jamieson solves 21154 delta^1.01 = nu; union_bound divides by
    zeta(1+eps); the remaining rows already hold at their own delta.
    """
    nu = check_probability(nu, "nu")
    if spec.method == "jamieson":
        return (nu / _JAMIESON_CONFIDENCE) ** (1.0 / _JAMIESON_EXPONENT)
    if spec.method == "union_bound":
        return nu / zeta(1.0 + spec.epsilon)
    return nu
