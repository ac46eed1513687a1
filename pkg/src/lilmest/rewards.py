"""Reward processes for the bandit benchmark and their problem instances.

Three scenario kinds, all location families centred (mean and median) at
theta:

* ``gaussian``            theta + scale * Z
* ``huber_contaminated``  gaussian draw w.p. 1 - contamination, else
                          theta + standard Cauchy
* ``student2``            theta + t-distributed noise, 2 d.o.f., unit scale

Draw paths are fixed so the seed -> stream contract is reproducible:
Cauchy via the tangent transform of a uniform, t(2) as Z / sqrt(E) with
E ~ Exp(1) (= chi-squared_2 / 2).  ``sample_block`` is the normative
stream; ``sample`` is a block of one.  Parallelism must come from
substream derivation (one generator per (trial, arm) key), never from
sharing one generator state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .validation import check_count, check_positive

__all__ = [
    "RewardModel",
    "ProblemInstance",
    "SCENARIOS",
    "sample",
    "sample_block",
    "alpha_model_means",
    "gaps_and_complexity",
    "derive_seed",
    "substream",
]

# bit-exact scenario names used in CSV output
SCENARIOS = ("gaussian", "huber", "student")

_KINDS = ("gaussian", "huber_contaminated", "student2")

_SCENARIO_TO_KIND = {
    "gaussian": "gaussian",
    "huber": "huber_contaminated",
    "student": "student2",
}


@dataclass(frozen=True)
class RewardModel:
    """One arm's reward law: a kind, its location, and nuisance scales."""

    kind: str
    theta: float
    scale: float = 0.5
    contamination: float = 0.05

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown reward kind {self.kind!r}; expected one of {_KINDS}")
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        if not (math.isfinite(self.scale) and self.scale >= 0.0):
            raise ValueError("scale must be finite and >= 0")
        if not 0.0 <= self.contamination < 1.0:
            raise ValueError("contamination must lie in [0, 1)")


def sample_block(model: RewardModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` rewards; this vectorised path defines the stream."""
    size = check_count(size, "size")
    if model.kind == "gaussian":
        return model.theta + model.scale * rng.standard_normal(size)
    if model.kind == "huber_contaminated":
        u = rng.random(size)
        z = rng.standard_normal(size)
        cauchy = np.tan(np.pi * (rng.random(size) - 0.5))
        clean = model.theta + model.scale * z
        return np.where(u < model.contamination, model.theta + cauchy, clean)
    z = rng.standard_normal(size)
    e = rng.standard_exponential(size)  # chi2(2)/2
    return model.theta + z / np.sqrt(e)


def sample(model: RewardModel, rng: np.random.Generator) -> float:
    return float(sample_block(model, rng, 1)[0])


def alpha_model_means(K: int, a_model: float) -> np.ndarray:
    """Exponentially decaying arm means theta_k = 1 - (k/K)^a, k = 1..K."""
    K = check_count(K, "K", minimum=2)
    check_positive(a_model, "a_model")
    k = np.arange(1, K + 1, dtype=np.float64)
    return 1.0 - (k / K) ** a_model


@dataclass(frozen=True)
class ProblemInstance:
    """Arm locations plus the reward law shared by every arm.

    ``c_h`` is the constant inside the iterated log of the complexity
    functional; it defaults to 2 e^2 max_k gap_k^2, which keeps the
    ln ln term bounded away from zero while obeying c > e^2 max gap^2.
    """

    means: tuple
    scenario: str
    scale: float = 0.5
    contamination: float = 0.05
    c_h: float | None = None

    def __post_init__(self) -> None:
        means = tuple(float(m) for m in self.means)
        object.__setattr__(self, "means", means)
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if len(means) < 1:
            raise ValueError("need at least one arm")
        arr = np.asarray(means)
        if not np.all(np.isfinite(arr)):
            raise ValueError("means must be finite")
        if len(means) > 1:
            top = arr.max()
            if int(np.sum(arr == top)) != 1:
                raise ValueError("best arm must be unique")
            gaps = top - arr
            max_gap_sq = float(np.max(gaps) ** 2)
            c_min = math.e**2 * max_gap_sq
            if self.c_h is None:
                object.__setattr__(self, "c_h", 2.0 * c_min)
            elif self.c_h <= c_min:
                raise ValueError(f"c_h must exceed e^2 * max gap^2 = {c_min}")
        elif self.c_h is None:
            object.__setattr__(self, "c_h", 2.0 * math.e**2)

    @property
    def n_arms(self) -> int:
        return len(self.means)

    @property
    def best_arm(self) -> int:
        return int(np.argmax(self.means))

    def arm_model(self, k: int) -> RewardModel:
        return RewardModel(
            kind=_SCENARIO_TO_KIND[self.scenario],
            theta=self.means[k],
            scale=self.scale,
            contamination=self.contamination,
        )

    @classmethod
    def from_alpha_model(cls, K: int, scenario: str, a_model: float = 0.3, **kw) -> "ProblemInstance":
        return cls(means=tuple(alpha_model_means(K, a_model)), scenario=scenario, **kw)


def gaps_and_complexity(instance: ProblemInstance) -> tuple[np.ndarray, float, float]:
    """Sub-optimality gaps and the complexity functionals (H1, H2).

    H1 = sum 1/gap^2 over suboptimal arms; H2 weights each term by
    ln ln(c_h / gap^2).
    """
    arr = np.asarray(instance.means)
    if arr.size < 2:
        raise ValueError("complexity needs at least two arms")
    top = arr.max()
    if int(np.sum(arr == top)) != 1:
        raise ValueError("best arm must be unique")
    gaps = top - arr
    sub = gaps[gaps > 0]
    h1 = float(np.sum(sub**-2.0))
    h2 = float(np.sum(np.log(np.log(instance.c_h / sub**2)) / sub**2))
    return gaps, h1, h2


def derive_seed(base_seed: int, *key: int) -> int:
    """Stable 64-bit substream seed for a (trial, arm, ...) key."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def substream(base_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a (trial, arm, ...) key."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)
