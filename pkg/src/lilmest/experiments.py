"""Experiment orchestration: the best-arm benchmark, the two coverage
harnesses, the bound-comparison sweeps, and all CSV/JSON persistence.

Every experiment is a pure function of (config, base_seed): trials draw
from substreams keyed on (base_seed, cell, trial), rows are written in
trial order, and floats are serialized with 9 significant digits, so
repeated runs produce byte-identical files.  After writing, each
summary is audited against a recomputation from the rows it summarises.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import _engine
from .bandit import BanditConfig, BanditNoStopError, run_bandit
from .bounds import (
    BoundarySpec,
    LilParams,
    confidence_to_delta,
    lil_radius,
    matched_delta,
    smallest_valid_n,
    sum_boundary,
    union_bound_radius,
    zeta,
)
from .mestimators import LossSpec
from .multivariate import (
    LabeledData,
    MultivariateSpec,
    assert_radius_hypothesis,
    make_regression_law,
    population_minimizer_oracle,
    _fit_penalized_state,
)
from .rewards import SCENARIOS, ProblemInstance, derive_seed, sample_block, substream, gaps_and_complexity
from .validation import check_count, check_probability

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "run_bai_experiment",
    "run_coverage_1d",
    "run_coverage_multivariate",
    "run_bound_comparison",
    "load_config_file",
    "BENCHMARK_PRESET",
]

ALGORITHM_NAMES = ("lilucb", "median_lilucb", "huber_lilucb")

# benchmark parameter set: alpha-model 0.3, shared sigma 0.5, beta 1,
# lambda (1+2/beta)^2, vanilla eps 0.01, confidence 0.1, curvature
# r=0.5 / alpha=0.97, 200 trials over K in {2,...,32}
BENCHMARK_PRESET = {
    "a_model": 0.3,
    "sigma": 0.5,
    "sigma_v": 0.5,
    "beta": 1.0,
    "beta_v": 1.0,
    "lam": 9.0,
    "eps_v": 0.01,
    "nu": 0.1,
    "r": 0.5,
    "alpha": 0.97,
    "trials": 200,
    "k_list": (2, 4, 8, 16, 32),
    "scenarios": SCENARIOS,
    "algorithms": ("lilucb", "median_lilucb"),
}


class ConfigError(ValueError):
    """Bad experiment configuration (exit code 2 at the CLI)."""


def _as_tuple(value) -> tuple:
    """Wrap scalars (including strings) so single-item configs work."""
    if isinstance(value, tuple):
        return value
    if isinstance(value, (list, np.ndarray)):
        return tuple(value)
    return (value,)


@dataclass
class ExperimentConfig:
    """Knobs shared by all experiment kinds; unused fields are ignored."""

    trials: int = 200
    base_seed: int = 20240901
    scenarios: tuple = SCENARIOS
    algorithms: tuple = ("lilucb", "median_lilucb")
    k_list: tuple = (2, 4, 8, 16, 32)
    a_model: float = 0.3
    nu: float = 0.1
    lam: float = 9.0
    beta: float = 1.0
    sigma: float = 0.5
    alpha: float = 0.97
    r: float = 0.5
    beta_v: float = 1.0
    eps_v: float = 0.01
    sigma_v: float = 0.5
    n0_override: int | None = None
    round_cap: int = 10**7
    quantile_q: float = 0.5
    huber_c: float = 0.5
    # coverage (1-d)
    coverage_loss: str = "absolute"
    coverage_delta: float = 0.1
    coverage_n_max: int = 5000
    coverage_refit: str = "every_n"  # or "checkpoints"
    coverage_data_scale: float = 1.0
    coverage_sigma: float | None = None
    coverage_alpha: float | None = None
    coverage_r: float = 0.5
    # coverage (multivariate)
    mv_dim: int = 2
    mv_penalty: float = 0.1
    mv_delta: float = 0.1
    mv_sweep_start: int = 50
    mv_sweep_stop: int = 2000
    mv_sweep_step: int = 50
    mv_noise_scale: float = 1.0
    mv_theta0: tuple = (1.0, -0.5)
    mv_oracle_n: int = 1_000_000
    # bound comparison
    nu_list: tuple = (0.05, 0.1, 0.2)
    ub_epsilon: float = 0.1
    n_grid_points: int = 25
    t_grid_points: int = 40
    out_dir: str = "results"
    strict: bool = False

    def __post_init__(self) -> None:
        try:
            self.trials = check_count(self.trials, "trials")
            check_probability(self.nu, "nu")
            self.scenarios = _as_tuple(self.scenarios)
            self.algorithms = _as_tuple(self.algorithms)
            self.k_list = tuple(int(k) for k in _as_tuple(self.k_list))
            self.nu_list = tuple(float(v) for v in _as_tuple(self.nu_list))
            self.mv_theta0 = tuple(float(v) for v in _as_tuple(self.mv_theta0))
            for s in self.scenarios:
                if s not in SCENARIOS:
                    raise ValueError(f"unknown scenario {s!r}")
            for a in self.algorithms:
                if a not in ALGORITHM_NAMES:
                    raise ValueError(f"unknown algorithm {a!r}")
            for k in self.k_list:
                if k < 1:
                    raise ValueError("K must be >= 1")
            if self.coverage_refit not in ("every_n", "checkpoints"):
                raise ValueError("coverage_refit must be every_n or checkpoints")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def benchmark(cls, **overrides) -> "ExperimentConfig":
        merged = dict(BENCHMARK_PRESET)
        merged.update(overrides)
        return cls(**merged)


def _fmt(x) -> str:
    """CSV field: floats at 9 significant digits, ints as-is."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _bandit_config(cfg: ExperimentConfig, algorithm: str) -> BanditConfig:
    if algorithm == "lilucb":
        return BanditConfig(
            algorithm="vanilla_lilucb",
            nu=cfg.nu,
            lam=cfg.lam,
            beta=cfg.beta,
            sigma=cfg.sigma,
            alpha=cfg.alpha,
            r=cfg.r,
            beta_v=cfg.beta_v,
            eps_v=cfg.eps_v,
            sigma_v=cfg.sigma_v,
            round_cap=cfg.round_cap,
        )
    if algorithm == "median_lilucb":
        loss = LossSpec.absolute(alpha=cfg.alpha, r=cfg.r)
    else:
        loss = LossSpec.huber(c=cfg.huber_c, alpha=cfg.alpha)
    return BanditConfig(
        algorithm="mest_lilucb",
        nu=cfg.nu,
        lam=cfg.lam,
        beta=cfg.beta,
        sigma=cfg.sigma,
        alpha=cfg.alpha,
        r=cfg.r,
        loss=loss,
        n0=cfg.n0_override,
        round_cap=cfg.round_cap,
    )


def run_bai_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> Path:
    """Best-arm benchmark: one row per (scenario, algorithm, K, trial).

    Row schema: scenario,algorithm,K,trial,correct,total_pulls,seed with
    correct = NA when the round cap fired.  The summary JSON adds
    per-cell correct proportions, pull statistics and the gap
    complexities needed to plot pulls in units of H1.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    rows = []
    summary_cells = []
    no_stop_total = 0
    bandit_configs = {a: _bandit_config(cfg, a) for a in cfg.algorithms}
    cell_index = 0
    for scenario in cfg.scenarios:
        for algorithm in cfg.algorithms:
            bconfig = bandit_configs[algorithm]
            for K in cfg.k_list:
                instance = ProblemInstance.from_alpha_model(
                    K, scenario, a_model=cfg.a_model, scale=cfg.sigma
                )
                _, h1, h2 = gaps_and_complexity(instance)
                best = instance.best_arm
                correct_count = 0
                decided = 0
                no_stop = 0
                pull_stats = []
                for trial in range(cfg.trials):
                    trial_seed = derive_seed(cfg.base_seed, 0, cell_index, trial)
                    try:
                        run = run_bandit(bconfig, instance, np.random.SeedSequence(trial_seed))
                        correct = int(run.returned_arm == best)
                        decided += 1
                        correct_count += correct
                        total = run.total_pulls
                        rows.append((scenario, algorithm, K, trial, correct, total, trial_seed))
                        pull_stats.append(total)
                    except BanditNoStopError as exc:
                        no_stop += 1
                        no_stop_total += 1
                        rows.append(
                            (scenario, algorithm, K, trial, "NA", exc.run.total_pulls, trial_seed)
                        )
                pulls = np.asarray(pull_stats, dtype=np.float64)
                summary_cells.append(
                    {
                        "scenario": scenario,
                        "algorithm": algorithm,
                        "K": K,
                        "trials": cfg.trials,
                        "no_stop": no_stop,
                        "correct_proportion": (correct_count / decided) if decided else None,
                        "pulls_mean": float(pulls.mean()) if pulls.size else None,
                        "pulls_min": float(pulls.min()) if pulls.size else None,
                        "pulls_max": float(pulls.max()) if pulls.size else None,
                        "h1": h1,
                        "h2": h2,
                    }
                )
                cell_index += 1
    csv_path = out / "bai_results.csv"
    _write_csv(csv_path, ["scenario", "algorithm", "K", "trial", "correct", "total_pulls", "seed"], rows)
    meta = {
        "base_seed": cfg.base_seed,
        "nu": cfg.nu,
        "lam": cfg.lam,
        "sigma_exploration": cfg.sigma,
        "alpha": cfg.alpha,
        "r": cfg.r,
        "n0": {a: bandit_configs[a].n0 for a in cfg.algorithms},
        "delta": confidence_to_delta(cfg.nu),
        "delta_vanilla": bandit_configs.get("lilucb").delta_v if "lilucb" in bandit_configs else None,
        "loss_sigma_theory": 1.0,
        "no_stop_trials": no_stop_total,
    }
    _write_json(out / "bai_summary.json", {"cells": summary_cells, "meta": meta})
    _audit_bai(csv_path, out / "bai_summary.json")
    if cfg.strict and no_stop_total:
        raise RuntimeError(f"{no_stop_total} trials hit the round cap")
    return csv_path


def _audit_bai(csv_path: Path, summary_path: Path) -> None:
    """Recompute the summary from rows; mismatch means a write bug."""
    per_cell: dict[tuple, list] = {}
    with csv_path.open() as fh:
        header = fh.readline().strip().split(",")
        assert header == ["scenario", "algorithm", "K", "trial", "correct", "total_pulls", "seed"]
        for line in fh:
            scenario, algorithm, k, _trial, correct, pulls, _seed = line.strip().split(",")
            per_cell.setdefault((scenario, algorithm, int(k)), []).append((correct, int(pulls)))
    summary = json.loads(summary_path.read_text())
    for cell in summary["cells"]:
        rows = per_cell[(cell["scenario"], cell["algorithm"], cell["K"])]
        decided = [(c, p) for c, p in rows if c != "NA"]
        if decided:
            prop = sum(int(c) for c, _ in decided) / len(decided)
            if abs(prop - cell["correct_proportion"]) > 1e-12:
                raise RuntimeError(f"summary audit failed for cell {cell}")
            pulls = [p for _, p in decided]
            if cell["pulls_mean"] is not None and abs(np.mean(pulls) - cell["pulls_mean"]) > 1e-9:
                raise RuntimeError(f"pull audit failed for cell {cell}")
        if cell["no_stop"] != len(rows) - len(decided):
            raise RuntimeError(f"no-stop audit failed for cell {cell}")


def _coverage_loss_constants(cfg: ExperimentConfig):
    """LossSpec + (sigma, alpha) used for the radius in 1-d coverage.

    For the default (median of a centred normal with scale s), a valid
    curvature on [-r, r] is alpha = 2(Phi(r/s) - 1/2)/r; the loss scale
    is the theory value sigma = 1.
    """
    from scipy.stats import norm

    scale = cfg.coverage_data_scale
    if cfg.coverage_loss == "absolute":
        alpha = cfg.coverage_alpha
        if alpha is None:
            alpha = 2.0 * (norm.cdf(cfg.coverage_r / scale) - 0.5) / cfg.coverage_r
        sigma = cfg.coverage_sigma if cfg.coverage_sigma is not None else 1.0
        loss = LossSpec.absolute(alpha=alpha, r=cfg.coverage_r)
        theta_star = 0.0
        est_kind, q, c = _engine.EST_MEDIAN, 0.5, 1.0
    elif cfg.coverage_loss == "quantile":
        qlevel = cfg.quantile_q
        alpha = cfg.coverage_alpha
        theta_star = float(norm.ppf(qlevel, scale=scale))
        if alpha is None:
            # curvature of the check-loss risk: alpha/2 <= |F(t)-q|/|t-q_level_point|
            lo = norm.cdf((theta_star - cfg.coverage_r) / scale)
            hi = norm.cdf((theta_star + cfg.coverage_r) / scale)
            alpha = 2.0 * min(qlevel - lo, hi - qlevel) / cfg.coverage_r
        sigma = cfg.coverage_sigma if cfg.coverage_sigma is not None else 1.0
        loss = LossSpec.quantile(q=qlevel, alpha=alpha, r=cfg.coverage_r)
        est_kind, q, c = _engine.EST_QUANTILE, qlevel, 1.0
    elif cfg.coverage_loss == "huber":
        ch = cfg.huber_c
        dens_min = float(norm.pdf((abs(0.0) + 2 * ch) / scale) / scale)
        alpha = cfg.coverage_alpha if cfg.coverage_alpha is not None else 4.0 * ch * dens_min
        sigma = cfg.coverage_sigma if cfg.coverage_sigma is not None else 2.0 * ch
        loss = LossSpec.huber(c=ch, alpha=alpha)
        theta_star = 0.0
        est_kind, q, c = _engine.EST_HUBER, 0.5, ch
    else:
        raise ConfigError(f"unsupported coverage loss {cfg.coverage_loss!r}")
    return loss, sigma, alpha, theta_star, est_kind, q, c


def run_coverage_1d(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> Path:
    """Anytime coverage of the 1-d radius on synthetic centred data.

    Each trial walks one sequence of N_max draws, refitting at every n
    (default) or at checkpoints {n0, 2 n0, ...}, and records the first n
    in [n0, N_max] where |estimate - theta*| exceeds the radius.
    Row schema: trial,violated,first_violation_n.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    loss, sigma, alpha, theta_star, est_kind, q, c = _coverage_loss_constants(cfg)
    delta = cfg.coverage_delta
    params = LilParams(sigma=sigma, alpha=alpha, delta=delta, r=cfg.coverage_r)
    n0 = smallest_valid_n(params)
    n_max = cfg.coverage_n_max
    ns = np.arange(1, n_max + 1, dtype=np.float64)
    radii = lil_radius(ns, params)
    if cfg.coverage_refit == "checkpoints":
        checkpoints = np.arange(n0, n_max + 1, n0, dtype=np.int64)
    else:
        checkpoints = np.empty(0, dtype=np.int64)
    rows = []
    violations = 0
    for trial in range(cfg.trials):
        rng = substream(cfg.base_seed, 1, 0, trial)
        # centred data law; theta_star is its analytic location functional
        # (0 for the median and huber, scale*quantile(q) for quantiles)
        data = cfg.coverage_data_scale * rng.standard_normal(n_max)
        first = int(_engine.coverage_walk(est_kind, q, c, data, radii, n0, theta_star, checkpoints))
        violated = int(first > 0)
        violations += violated
        rows.append((trial, violated, first))
    csv_path = out / "coverage1d.csv"
    _write_csv(csv_path, ["trial", "violated", "first_violation_n"], rows)
    payload = {
        "loss": cfg.coverage_loss,
        "delta": delta,
        "sigma": sigma,
        "alpha": alpha,
        "r": cfg.coverage_r,
        "n0": n0,
        "n_max": n_max,
        "trials": cfg.trials,
        "refit": cfg.coverage_refit,
        "refit_exact": cfg.coverage_refit == "every_n",
        "theta_star": theta_star,
        "violation_rate": violations / cfg.trials,
        "base_seed": cfg.base_seed,
    }
    _write_json(out / "coverage1d_summary.json", payload)
    _audit_rate(csv_path, payload["violation_rate"])
    return csv_path


def run_coverage_multivariate(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> Path:
    """One-sided anytime coverage of the directional multivariate radius.

    For each sequence the penalized fit is recomputed on the checkpoint
    grid and a violation is recorded when a.(theta_hat - theta*) exceeds
    the radius at any checkpoint.  Row schema matches the 1-d harness.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    theta0 = np.asarray(cfg.mv_theta0, dtype=np.float64)
    if theta0.size != cfg.mv_dim:
        raise ConfigError("mv_theta0 must have length mv_dim")
    direction = tuple(1.0 if i == 0 else 0.0 for i in range(cfg.mv_dim))
    spec = MultivariateSpec(
        loss="absolute",
        penalty=cfg.mv_penalty,
        feature_bound=1.0,
        direction=direction,
        alpha_n=cfg.mv_penalty,
    )
    sweep = np.arange(cfg.mv_sweep_start, cfg.mv_sweep_stop + 1, cfg.mv_sweep_step, dtype=np.int64)
    assert_radius_hypothesis(spec, sweep)
    law = make_regression_law(theta0, noise_scale=cfg.mv_noise_scale, feature_bound=1.0)
    oracle = population_minimizer_oracle(
        spec, law, cfg.mv_oracle_n, substream(cfg.base_seed, 2, 0, 0), tol=1e-8
    )
    theta_star = oracle.theta
    a = np.asarray(direction)
    radii = np.array([_radius_mv(int(n), cfg.mv_delta, spec) for n in sweep])
    rows = []
    violations = 0
    for trial in range(cfg.trials):
        rng = substream(cfg.base_seed, 2, 1, trial)
        X, y = law(rng, int(sweep[-1]))
        first = 0
        warm = None
        for i, n in enumerate(sweep):
            data = LabeledData(X[:n], y[:n], spec.feature_bound)
            theta, gap, _, warm = _fit_penalized_state(spec, data, 1e-8, 200_000, warm)
            if gap > 1e-8:
                raise RuntimeError(f"solver missed tolerance at trial {trial}, n={n} (gap {gap:.2e})")
            if float(a @ (theta - theta_star)) > radii[i]:
                first = int(n)
                break
        violated = int(first > 0)
        violations += violated
        rows.append((trial, violated, first))
    csv_path = out / "coverage_mv.csv"
    _write_csv(csv_path, ["trial", "violated", "first_violation_n"], rows)
    payload = {
        "loss": "absolute",
        "dim": cfg.mv_dim,
        "penalty": cfg.mv_penalty,
        "alpha_n": spec.alpha_n,
        "delta": cfg.mv_delta,
        "sweep": [int(n) for n in sweep],
        "trials": cfg.trials,
        "theta_star": [float(v) for v in theta_star],
        "oracle_note": oracle.note,
        "violation_rate": violations / cfg.trials,
        "base_seed": cfg.base_seed,
    }
    _write_json(out / "coverage_mv_summary.json", payload)
    _audit_rate(csv_path, payload["violation_rate"])
    return csv_path


def _radius_mv(n: int, delta: float, spec: MultivariateSpec) -> float:
    from .multivariate import directional_radius

    return directional_radius(n, delta, spec)


def _audit_rate(csv_path: Path, claimed_rate: float) -> None:
    with csv_path.open() as fh:
        fh.readline()
        flags = [int(line.split(",")[1]) for line in fh if line.strip()]
    if abs(np.mean(flags) - claimed_rate) > 1e-12:
        raise RuntimeError("violation-rate audit failed")


def run_bound_comparison(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> tuple[Path, Path]:
    """Radius-ratio sweep and the scaled sum-boundary comparison.

    bounds.csv: nu,n,t_lil,t_ub,ratio at matched global confidence (the
    union bound runs at delta' = nu/zeta(1+eps), eps = 0.1 by default).
    sum_bounds.csv: t,jamieson,howard,maillard, each at its
    matched_delta(nu=0.1) and divided by the union-bound sum threshold
    at the same global confidence.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    eps = cfg.ub_epsilon
    n_grid = np.unique(np.logspace(2, 6, cfg.n_grid_points).astype(np.int64))
    rows = []
    for nu in cfg.nu_list:
        check_probability(nu, "nu")
        d_lil = matched_delta(BoundarySpec("lil_thm1"), nu)
        d_ub = matched_delta(BoundarySpec("union_bound", epsilon=eps), nu)
        t_lil = lil_radius(n_grid, LilParams(sigma=1.0, alpha=1.0, delta=d_lil))
        t_ub = union_bound_radius(n_grid, d_ub, eps, 1.0, 1.0)
        for i, n in enumerate(n_grid):
            rows.append((nu, int(n), float(t_lil[i]), float(t_ub[i]), float(t_lil[i] / t_ub[i])))
    bounds_path = out / "bounds.csv"
    _write_csv(bounds_path, ["nu", "n", "t_lil", "t_ub", "ratio"], rows)

    nu0 = 0.1
    t_grid = np.unique(np.logspace(0, 6, cfg.t_grid_points).astype(np.int64))
    scale = sum_boundary(
        BoundarySpec("union_bound", epsilon=eps),
        t_grid,
        matched_delta(BoundarySpec("union_bound", epsilon=eps), nu0),
    )
    cols = {}
    for method in ("jamieson", "howard", "maillard"):
        spec = BoundarySpec(method)
        cols[method] = sum_boundary(spec, t_grid, matched_delta(spec, nu0)) / scale
    sum_rows = [
        (int(t), float(cols["jamieson"][i]), float(cols["howard"][i]), float(cols["maillard"][i]))
        for i, t in enumerate(t_grid)
    ]
    sum_path = out / "sum_bounds.csv"
    _write_csv(sum_path, ["t", "jamieson", "howard", "maillard"], sum_rows)
    return bounds_path, sum_path


def load_config_file(path: str | Path) -> dict:
    """Flat key=value config format; '#' starts a comment.

    Values are parsed as int, float, bool, or comma-separated tuples of
    those; unknown keys are rejected so typos fail fast.
    """
    known = set(ExperimentConfig.__dataclass_fields__)
    out: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _parse_value(value)
    return out


def _parse_value(value: str):
    if "," in value:
        return tuple(_parse_value(v.strip()) for v in value.split(",") if v.strip())
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", ""):
        return None
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value
