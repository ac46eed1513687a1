"""One-dimensional M-estimation for the square, absolute, quantile and
Huber loss families.

Each family carries the verified constants (sub-Gaussian scale sigma,
curvature alpha, curvature radius r, Lipschitz constant) that feed the
anytime radius; use the factory classmethods so the per-family
constraints are enforced rather than remembered.  Fitting conventions:

* square    -> sample mean
* absolute  -> middle order statistic (odd n) or midpoint of the two
               central ones (even n)
* quantile  -> the ceil(q*n)-th order statistic (lower convention)
* huber     -> unique root of the monotone map theta -> sum clip(theta - y, -c, c),
               found by bisection on [min y, max y]

Risks are evaluated with the losses recentred by phi(y, 0), which keeps
them finite under heavy tails without moving the minimiser.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .bounds import LilParams, lil_radius
from .validation import as_sample_array, check_positive, check_probability

__all__ = [
    "LossSpec",
    "SampleSet",
    "LocationMEstimator",
    "fit",
    "empirical_risk",
    "brute_force_fit",
]

FAMILIES = ("square", "absolute", "quantile", "huber")


@dataclass(frozen=True)
class LossSpec:
    """A 1-D loss family plus its verified constants.

    ``q`` is the quantile level (quantile family only) and ``c`` the
    clipping threshold (huber only).  ``alpha`` is data-dependent and
    always supplied by the caller; the remaining constants are pinned by
    the family:

      absolute:  sigma = 1,  lipschitz = 1
      quantile:  sigma = 1,  lipschitz = max(q, 1-q)
      huber(c):  sigma = 2c, lipschitz = 2c, r = 2c
      square:    sigma = 2s (s = sub-Gaussian scale of the data),
                 alpha = 2, r = inf, not Lipschitz
    """

    family: str
    sigma: float
    alpha: float
    r: float
    lipschitz: float
    q: float | None = None
    c: float | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown loss family {self.family!r}; expected one of {FAMILIES}")
        check_positive(self.alpha, "alpha")
        check_positive(self.r, "r", allow_inf=True)
        if self.family == "absolute":
            if self.sigma != 1.0 or self.lipschitz != 1.0:
                raise ValueError("absolute loss has sigma = lipschitz = 1")
        elif self.family == "quantile":
            if self.q is None:
                raise ValueError("quantile loss needs a level q")
            check_probability(self.q, "q")
            if self.sigma != 1.0 or not math.isclose(self.lipschitz, max(self.q, 1 - self.q)):
                raise ValueError("quantile loss has sigma = 1, lipschitz = max(q, 1-q)")
        elif self.family == "huber":
            if self.c is None:
                raise ValueError("huber loss needs a threshold c")
            check_positive(self.c, "c")
            if not (
                math.isclose(self.sigma, 2 * self.c)
                and math.isclose(self.lipschitz, 2 * self.c)
                and math.isclose(self.r, 2 * self.c)
            ):
                raise ValueError("huber(c) has sigma = lipschitz = r = 2c")
        else:  # square
            if self.sigma < 0:
                raise ValueError("square loss needs sigma = 2s >= 0")
            if self.alpha != 2.0 or not math.isinf(self.r):
                raise ValueError("square loss has alpha = 2 and r = inf")

    @classmethod
    def square(cls, sub_gaussian_scale: float) -> "LossSpec":
        s = float(sub_gaussian_scale)
        return cls("square", sigma=2 * s, alpha=2.0, r=math.inf, lipschitz=math.inf)

    @classmethod
    def absolute(cls, alpha: float, r: float = math.inf) -> "LossSpec":
        return cls("absolute", sigma=1.0, alpha=alpha, r=r, lipschitz=1.0)

    @classmethod
    def quantile(cls, q: float, alpha: float, r: float = math.inf) -> "LossSpec":
        return cls("quantile", sigma=1.0, alpha=alpha, r=r, lipschitz=max(q, 1 - q), q=q)

    @classmethod
    def huber(cls, c: float, alpha: float) -> "LossSpec":
        return cls("huber", sigma=2 * c, alpha=alpha, r=2 * c, lipschitz=2 * c, c=c)

    def lil_params(self, delta: float) -> LilParams:
        return LilParams(sigma=self.sigma, alpha=self.alpha, delta=delta, r=self.r)


class SampleSet:
    """Ordered multiset of observations, kept sorted.

    Single writer per instance: do not insert into one SampleSet from
    several threads.  Distinct instances are independent.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Iterable[float] = ()) -> None:
        vals = [float(v) for v in values]
        for v in vals:
            if not math.isfinite(v):
                raise ValueError("observations must be finite")
        vals.sort()
        self._values = vals

    def insert(self, x: float) -> None:
        x = float(x)
        if not math.isfinite(x):
            raise ValueError("observations must be finite")
        bisect.insort(self._values, x)

    def extend(self, xs: Iterable[float]) -> None:
        for x in xs:
            self.insert(x)

    def order_statistic(self, k: int) -> float:
        """k-th smallest value, 1-indexed."""
        if not 1 <= k <= len(self._values):
            raise IndexError(f"order statistic {k} out of range for n={len(self._values)}")
        return self._values[k - 1]

    def as_array(self) -> np.ndarray:
        return np.asarray(self._values, dtype=np.float64)

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self):
        return iter(self._values)

    def __repr__(self) -> str:
        return f"SampleSet(n={len(self._values)})"


def _sorted_values(samples) -> np.ndarray:
    if isinstance(samples, SampleSet):
        if len(samples) == 0:
            raise ValueError("samples must be nonempty")
        return samples.as_array()
    arr = as_sample_array(samples)
    return np.sort(arr)


def _huber_stationarity(theta: float, values: np.ndarray, c: float) -> float:
    return float(np.clip(theta - values, -c, c).sum())


def _huber_root(values: np.ndarray, c: float, theta0: float | None = None) -> float:
    """Bisection root of the non-decreasing clipped-residual sum."""
    lo = float(values[0])
    hi = float(values[-1])
    if lo == hi:
        return lo
    tol = 1e-10 * (1.0 + abs(hi - lo))
    f_lo = _huber_stationarity(lo, values, c)
    f_hi = _huber_stationarity(hi, values, c)
    # monotone map: the bracket must straddle zero and stay ordered
    assert f_lo <= 0.0 <= f_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = _huber_stationarity(mid, values, c)
        assert f_lo <= f_mid <= f_hi
        if f_mid < 0.0:
            lo, f_lo = mid, f_mid
        elif f_mid > 0.0:
            hi, f_hi = mid, f_mid
        else:
            # exact stationarity; when the zero set is an interval this
            # picks its midpoint-biased representative (0 for symmetric
            # data), still a global minimiser
            return mid
    return 0.5 * (lo + hi)


def quantile_rank(q: float, n: int) -> int:
    """ceil(q*n) with a guard against float fuzz, clipped to [1, n]."""
    k = math.ceil(q * n - 1e-9)
    return min(max(k, 1), n)


def fit(loss: LossSpec, samples) -> float:
    """Global minimiser of the empirical risk for the given family."""
    values = _sorted_values(samples)
    n = values.size
    if loss.family == "square":
        return float(values.mean())
    if loss.family == "absolute":
        if n % 2 == 1:
            return float(values[n // 2])
        return float(0.5 * (values[n // 2 - 1] + values[n // 2]))
    if loss.family == "quantile":
        return float(values[quantile_rank(loss.q, n) - 1])
    return _huber_root(values, loss.c)


def _per_sample_losses(loss: LossSpec, values: np.ndarray, theta) -> np.ndarray:
    """Recentred losses phi(y, theta) - phi(y, 0); shape broadcasts with theta."""
    y = values
    if loss.family == "square":
        return (y - theta) ** 2
    if loss.family == "absolute":
        return np.abs(y - theta) - np.abs(y)
    if loss.family == "quantile":
        q = loss.q

        def check(x):
            return np.where(x >= 0, q * x, (q - 1) * x)

        return check(y - theta) - check(y)
    c = loss.c

    def gc(x):
        ax = np.abs(x)
        return np.where(ax <= c, x * x, c * (2 * ax - c))

    return gc(y - theta) - gc(y)


def empirical_risk(loss: LossSpec, samples, theta: float) -> float:
    """Mean recentred loss at theta."""
    values = _sorted_values(samples)
    return float(_per_sample_losses(loss, values, float(theta)).mean())


def brute_force_fit(loss: LossSpec, samples, lo: float, hi: float, step: float) -> float:
    """Grid argmin of the empirical risk; ties go to the smallest theta.

    Test oracle: deliberately independent of fit() above.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    check_positive(step, "step")
    values = _sorted_values(samples)
    grid = np.arange(lo, hi + 0.5 * step, step)
    best_theta = math.nan
    best_risk = math.inf
    # chunk the grid so grid x samples stays small in memory
    for start in range(0, grid.size, 65536):
        block = grid[start : start + 65536]
        risks = _per_sample_losses(loss, values[:, None], block[None, :]).mean(axis=0)
        j = int(np.argmin(risks))
        if risks[j] < best_risk:
            best_risk = float(risks[j])
            best_theta = float(block[j])
    return best_theta


class LocationMEstimator(BaseEstimator):
    """sklearn-style wrapper around fit(): a constant location model.

    After ``fit(X)`` the estimate is in ``theta_``;  ``predict`` returns
    it broadcast to the input length, and ``anytime_radius`` gives the
    confidence radius valid simultaneously for every sample size at the
    fitted n (requires the loss constants to be valid for the data law).
    """

    def __init__(self, loss: LossSpec | None = None):
        self.loss = loss

    def fit(self, X, y=None):
        if self.loss is None:
            raise ValueError("LocationMEstimator needs a LossSpec")
        values = as_sample_array(np.ravel(X), "X")
        self.theta_ = fit(self.loss, values)
        self.n_samples_ = int(values.size)
        return self

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        return np.full(np.shape(np.ravel(X)), self.theta_, dtype=np.float64)

    def anytime_radius(self, delta: float, n: int | None = None) -> float:
        self._check_fitted()
        params = self.loss.lil_params(delta)
        return lil_radius(self.n_samples_ if n is None else n, params)

    def _check_fitted(self) -> None:
        if not hasattr(self, "theta_"):
            raise RuntimeError("estimator is not fitted")
