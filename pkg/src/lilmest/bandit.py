"""Best-arm identification with anytime confidence indices.

Two algorithms share one sample-estimate-index loop:

* ``mest_lilucb`` — per-arm location estimates from a robust loss
  (median, quantile, huber, or mean), exploration bonus from the
  iterated-logarithm radius;
* ``vanilla_lilucb`` — the original sample-mean algorithm with its
  finite-LIL index, used as the non-robust baseline.

Both stop with the pull-count rule
``max_k (T_k - lambda * sum_{l != k} T_l) >= 1`` and return the most
pulled arm.  A run is strictly single-threaded and fully reproducible
from its seed: every arm draws from its own substream, so pull
sequences are bitwise stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba.typed import List as NumbaList

from . import _engine
from .bounds import LilParams, confidence_to_delta, smallest_valid_n, BoundarySpec, matched_delta
from .mestimators import LossSpec
from .rewards import ProblemInstance, sample_block
from .validation import check_count, check_positive, check_probability

__all__ = [
    "BanditConfig",
    "BanditRun",
    "BanditNoStopError",
    "ucb_index",
    "vanilla_index",
    "stopping_check",
    "run_mest_lilucb",
    "run_vanilla_lilucb",
    "run_bandit",
    "theoretical_lambda",
]

ALGORITHMS = ("mest_lilucb", "vanilla_lilucb")

_FAMILY_TO_EST = {
    "square": _engine.EST_MEAN,
    "absolute": _engine.EST_MEDIAN,
    "quantile": _engine.EST_QUANTILE,
    "huber": _engine.EST_HUBER,
}


class BanditNoStopError(RuntimeError):
    """Round cap hit before the stopping rule fired; carries the state."""

    def __init__(self, message: str, run: "BanditRun"):
        super().__init__(message)
        self.run = run


@dataclass
class BanditConfig:
    """Algorithm parameters; unset derived fields are filled on creation.

    ``sigma``/``alpha``/``r`` are the exploration-scale constants used
    for gamma and the warm-up scan (they may deliberately differ from
    the theory constants carried by ``loss``; both are recorded in
    experiment metadata).  For ``vanilla_lilucb``, ``delta_v`` defaults
    to the delta at which the original boundary's global confidence
    equals ``nu``, i.e. ``matched_delta(jamieson, nu)``.
    """

    algorithm: str = "mest_lilucb"
    nu: float = 0.1
    lam: float | None = None  # stopping multiplier; default (1 + 2/beta)^2
    beta: float = 1.0
    sigma: float = 0.5
    alpha: float = 0.97
    r: float = 0.5
    loss: LossSpec | None = None
    gamma: float | None = None
    n0: int | None = None
    beta_v: float = 1.0
    eps_v: float = 0.01
    sigma_v: float = 0.5
    delta_v: float | None = None
    round_cap: int = 10**7

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        check_probability(self.nu, "nu")
        check_positive(self.beta, "beta")
        check_positive(self.sigma, "sigma")
        check_positive(self.alpha, "alpha")
        check_positive(self.r, "r", allow_inf=True)
        if self.lam is None:
            b = self.beta if self.algorithm == "mest_lilucb" else self.beta_v
            self.lam = (1.0 + 2.0 / b) ** 2
        check_positive(self.lam, "lam")
        if self.loss is None:
            self.loss = LossSpec.absolute(alpha=self.alpha, r=self.r)
        if self.gamma is None:
            self.gamma = 3.4 * (1.0 + self.beta) * self.sigma / self.alpha
        check_positive(self.gamma, "gamma")
        if self.n0 is None:
            if self.algorithm == "vanilla_lilucb":
                self.n0 = 1
            else:
                self.n0 = smallest_valid_n(LilParams(self.sigma, self.alpha, self.delta, self.r))
        self.n0 = check_count(self.n0, "n0")
        check_positive(self.eps_v, "eps_v")
        check_positive(self.sigma_v, "sigma_v")
        if self.delta_v is None:
            self.delta_v = matched_delta(BoundarySpec("jamieson"), self.nu)
        check_probability(self.delta_v, "delta_v")
        self.round_cap = check_count(self.round_cap, "round_cap")

    @property
    def delta(self) -> float:
        return confidence_to_delta(self.nu)

    @classmethod
    def benchmark_preset(cls, algorithm: str = "mest_lilucb", **overrides) -> "BanditConfig":
        """The benchmark configuration: nu=0.1, beta=1, lambda=9, sigma=0.5,
        alpha=0.97, r=0.5, median loss; vanilla uses sigma_v=0.5, eps_v=0.01."""
        kw = dict(
            algorithm=algorithm,
            nu=0.1,
            beta=1.0,
            sigma=0.5,
            alpha=0.97,
            r=0.5,
            beta_v=1.0,
            eps_v=0.01,
            sigma_v=0.5,
        )
        kw.update(overrides)
        return cls(**kw)


@dataclass
class BanditRun:
    """Terminal state of one run."""

    pulls: np.ndarray
    estimates: np.ndarray
    rounds: int
    terminated: bool
    returned_arm: int
    seed: int
    samples: Optional[list] = None
    pull_sequence: Optional[np.ndarray] = None

    @property
    def total_pulls(self) -> int:
        return int(self.pulls.sum())


def ucb_index(theta_hat: float, T: int, gamma: float, delta: float) -> float:
    """Iterated-log index theta + gamma*sqrt((max(0, lnln 2T) + 0.72 ln(10.4/delta))/T)."""
    T = check_count(T, "T")
    inner = max(0.0, math.log(math.log(2.0 * T))) + 0.72 * math.log(10.4 / delta)
    return theta_hat + gamma * math.sqrt(inner / T)


def vanilla_index(mu_hat: float, T: int, beta_v: float, eps_v: float, sigma_v: float, delta_v: float) -> float:
    """Original index mu + (1+b)(1+sqrt(e))*sqrt(2 s^2 (1+e) ln(ln((1+e)T + 2)/delta)/T).

    The +2 inside the inner log keeps it positive at T=1; it only makes
    the bonus (slightly) larger, so the boundary stays valid.
    """
    T = check_count(T, "T")
    scale = (1.0 + beta_v) * (1.0 + math.sqrt(eps_v)) * math.sqrt(2.0 * sigma_v**2 * (1.0 + eps_v))
    inner = math.log(math.log((1.0 + eps_v) * T + 2.0) / delta_v)
    return mu_hat + scale * math.sqrt(inner / T)


def stopping_check(pulls, lam: float) -> bool:
    """True (stop) iff max_k (T_k - lam * sum of the others) >= 1."""
    arr = np.asarray(pulls, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("pull counts must be >= 0")
    total = arr.sum()
    return bool(np.max((1.0 + lam) * arr - lam * total) >= 1.0)


def theoretical_lambda(beta: float, delta: float) -> float | None:
    """Stopping-multiplier threshold from the run-length analysis.

    c_b = ((2+beta)/beta)^2, rho = c_b * ln(2 ln(c_b/(2 delta))/delta) / ln(1/delta),
    threshold = rho / (1 - 10.4 delta - sqrt(delta^(1/4) ln(1/delta))).
    Returns None when the denominator is <= 0 (the regime where the
    guarantee says nothing); at practical delta this is usually the case,
    so this function is a diagnostic, not a default.
    """
    check_positive(beta, "beta")
    if not 0.0 < delta < 0.01:
        raise ValueError(f"delta must lie in (0, 0.01), got {delta!r}")
    c_b = ((2.0 + beta) / beta) ** 2
    rho = c_b * math.log(2.0 * math.log(c_b / (2.0 * delta)) / delta) / math.log(1.0 / delta)
    denom = 1.0 - 10.4 * delta - math.sqrt(delta**0.25 * math.log(1.0 / delta))
    if denom <= 0.0:
        return None
    return rho / denom


def _bonus_params(config: BanditConfig) -> tuple[int, float, float, float]:
    if config.algorithm == "mest_lilucb":
        return (
            _engine.BONUS_LIL,
            config.gamma,
            0.72 * math.log(10.4 / config.delta),
            0.0,
        )
    scale = (
        (1.0 + config.beta_v)
        * (1.0 + math.sqrt(config.eps_v))
        * math.sqrt(2.0 * config.sigma_v**2 * (1.0 + config.eps_v))
    )
    return (
        _engine.BONUS_VANILLA,
        scale,
        math.log(1.0 / config.delta_v),
        1.0 + config.eps_v,
    )


def run_bandit(
    config: BanditConfig,
    instance: ProblemInstance,
    seed: int | np.random.SeedSequence,
    *,
    keep_samples: bool = False,
    keep_trace: bool = False,
) -> BanditRun:
    """Execute one run: warm-up round-robin, then index-driven pulls.

    Warm-up does n0 passes over arms 1..K in order; afterwards each
    round checks the stopping rule, pulls the highest-index arm (lowest
    arm wins ties), refits only that arm, and updates its index.  The
    returned arm is the most pulled one.  Raises BanditNoStopError
    (carrying the state) if ``config.round_cap`` rounds pass without a
    stop.
    """
    K = instance.n_arms
    if config.algorithm == "mest_lilucb":
        est_kind = _FAMILY_TO_EST[config.loss.family]
        q = config.loss.q if config.loss.family == "quantile" else 0.5
        huber_c = config.loss.c if config.loss.family == "huber" else 1.0
    else:
        est_kind = _engine.EST_MEAN
        q = 0.5
        huber_c = 1.0
    bonus_kind, pa, pb, pc = _bonus_params(config)
    n0 = config.n0

    if isinstance(seed, np.random.SeedSequence):
        root = seed
        seed_repr = int(root.generate_state(1, np.uint64)[0])
    else:
        seed_repr = int(seed)
        root = np.random.SeedSequence(entropy=seed_repr)
    arm_rngs = [np.random.default_rng(s) for s in root.spawn(K)]
    models = [instance.arm_model(k) for k in range(K)]

    keep_raw = 1 if (keep_samples or est_kind == _engine.EST_HUBER) else 0
    heap_cap = max(16, n0 + 2)
    pulls = np.zeros(K, dtype=np.int64)
    est = np.zeros(K, dtype=np.float64)
    idx = np.zeros(K, dtype=np.float64)
    counters = np.zeros(3, dtype=np.int64)
    mean_sum = np.zeros(K, dtype=np.float64)
    nlo = np.zeros(K, dtype=np.int64)
    nhi = np.zeros(K, dtype=np.int64)
    nraw = np.zeros(K, dtype=np.int64)
    armlo = np.full(K, np.inf)
    armhi = np.full(K, -np.inf)
    lo = NumbaList()
    hi = NumbaList()
    raw = NumbaList()
    buffers = NumbaList()
    for _ in range(K):
        lo.append(np.empty(heap_cap, dtype=np.float64))
        hi.append(np.empty(heap_cap, dtype=np.float64))
        raw.append(np.empty(heap_cap if keep_raw else 1, dtype=np.float64))
        buffers.append(np.empty(0, dtype=np.float64))
    bpos = np.zeros(K, dtype=np.int64)
    blen = np.zeros(K, dtype=np.int64)
    trace_on = 1 if keep_trace else 0
    trace = np.empty(1 << 14 if keep_trace else 0, dtype=np.int32)

    # warm-up: n0 passes over arms 1..K; per-arm substreams make this
    # equivalent to pass-major interleaving
    for k in range(K):
        block = sample_block(models[k], arm_rngs[k], n0)
        _engine.warmup_arm(
            est_kind, q, huber_c, k, block, n0, mean_sum, lo, hi, nlo, nhi, raw, nraw, armlo, armhi, keep_raw, est
        )
        pulls[k] = n0
        idx[k] = est[k] + _engine._bonus(bonus_kind, pa, pb, pc, n0)
    counters[0] = K * n0
    counters[1] = n0
    if keep_trace:
        warm_trace = np.tile(np.arange(K, dtype=np.int32), n0)
    else:
        warm_trace = None

    while True:
        status, arm = _engine.run_chunk(
            est_kind, q, huber_c, bonus_kind, pa, pb, pc,
            float(config.lam), config.round_cap,
            pulls, est, idx, counters, mean_sum,
            lo, hi, nlo, nhi, raw, nraw, armlo, armhi, keep_raw,
            buffers, bpos, blen, trace, trace_on,
        )
        if status == _engine.STATUS_STOPPED or status == _engine.STATUS_CAP:
            break
        if status == _engine.STATUS_REFILL:
            size = int(min(max(256, pulls[arm]), 1 << 20))
            buffers[arm] = sample_block(models[arm], arm_rngs[arm], size)
            bpos[arm] = 0
            blen[arm] = size
        elif status == _engine.STATUS_GROW:
            if est_kind in (_engine.EST_MEDIAN, _engine.EST_QUANTILE):
                for hp, sizes in ((lo, nlo), (hi, nhi)):
                    old = hp[arm]
                    new = np.empty(max(32, old.size * 2), dtype=np.float64)
                    new[: sizes[arm]] = old[: sizes[arm]]
                    hp[arm] = new
            if keep_raw:
                old = raw[arm]
                new = np.empty(max(32, old.size * 2), dtype=np.float64)
                new[: nraw[arm]] = old[: nraw[arm]]
                raw[arm] = new
        elif status == _engine.STATUS_TRACE_FULL:
            new = np.empty(trace.size * 2, dtype=np.int32)
            new[: counters[2]] = trace[: counters[2]]
            trace = new

    returned = int(np.argmax(pulls))
    samples = None
    if keep_samples:
        samples = [np.array(raw[k][: nraw[k]]) for k in range(K)]
    sequence = None
    if keep_trace:
        sequence = np.concatenate([warm_trace, trace[: counters[2]]])
    run = BanditRun(
        pulls=pulls,
        estimates=est,
        rounds=int(counters[0]),
        terminated=status == _engine.STATUS_STOPPED,
        returned_arm=returned,
        seed=seed_repr,
        samples=samples,
        pull_sequence=sequence,
    )
    if status == _engine.STATUS_CAP:
        raise BanditNoStopError(
            f"no stop within {config.round_cap} rounds (pulls={pulls.tolist()})", run
        )
    return run


def run_mest_lilucb(config: BanditConfig, instance: ProblemInstance, seed, **kw) -> BanditRun:
    if config.algorithm != "mest_lilucb":
        raise ValueError("config.algorithm must be 'mest_lilucb'")
    return run_bandit(config, instance, seed, **kw)


def run_vanilla_lilucb(config: BanditConfig, instance: ProblemInstance, seed, **kw) -> BanditRun:
    if config.algorithm != "vanilla_lilucb":
        raise ValueError("config.algorithm must be 'vanilla_lilucb'")
    return run_bandit(config, instance, seed, **kw)
