"""Command-line harness.

Subcommands:
  bounds compare         radius-ratio and sum-boundary sweeps
  bandit run             one bandit run, printed as JSON
  bandit bai             the best-arm benchmark grid
  coverage mest          1-d anytime coverage
  coverage multivariate  directional multivariate coverage

Exit codes: 0 success, 2 configuration error, 3 when --strict is set
and any trial failed to stop or converge.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .bandit import BanditNoStopError, run_bandit
from .experiments import (
    ConfigError,
    ExperimentConfig,
    load_config_file,
    run_bai_experiment,
    run_bound_comparison,
    run_coverage_1d,
    run_coverage_multivariate,
    _bandit_config,
)
from .rewards import ProblemInstance


def _build_config(config_path, preset, overrides) -> ExperimentConfig:
    values: dict = {}
    if preset == "paper":
        values.update({k: v for k, v in ExperimentConfig.benchmark().__dict__.items()})
    elif preset is not None:
        raise ConfigError(f"unknown preset {preset!r}")
    if config_path is not None:
        values.update(load_config_file(config_path))
    values.update({k: v for k, v in overrides.items() if v is not None})
    allowed = set(ExperimentConfig.__dataclass_fields__)
    values = {k: v for k, v in values.items() if k in allowed}
    return ExperimentConfig(**values)


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="flat key=value config file")(fn)
    fn = click.option("--preset", type=str, default=None, help="named parameter preset ('paper')")(fn)
    fn = click.option("--seed", "base_seed", type=int, default=None, help="base seed")(fn)
    fn = click.option("--trials", type=int, default=None)(fn)
    fn = click.option("--out", "out_dir", type=str, default=None, help="output directory")(fn)
    fn = click.option("--strict", is_flag=True, default=False, help="exit 3 on any no-stop / non-convergence trial")(fn)
    return fn


@click.group()
def main() -> None:
    """Anytime confidence sequences for M-estimators: experiment harness."""


@main.group()
def bounds() -> None:
    """Bound comparison sweeps."""


@bounds.command("compare")
@common_options
def bounds_compare(config_path, preset, base_seed, trials, out_dir, strict):
    cfg = _make(config_path, preset, base_seed, trials, out_dir, strict)
    bounds_path, sum_path = run_bound_comparison(cfg)
    click.echo(f"wrote {bounds_path} and {sum_path}")


@main.group()
def bandit() -> None:
    """Best-arm identification."""


@bandit.command("run")
@common_options
@click.option("--scenario", type=str, default="gaussian")
@click.option("--algorithm", type=str, default="median_lilucb")
@click.option("--arms", "n_arms", type=int, default=4)
@click.option("--n0-override", type=int, default=None)
def bandit_run(config_path, preset, base_seed, trials, out_dir, strict, scenario, algorithm, n_arms, n0_override):
    cfg = _make(config_path, preset, base_seed, trials, out_dir, strict, n0_override=n0_override)
    bconfig = _bandit_config(cfg, algorithm)
    instance = ProblemInstance.from_alpha_model(n_arms, scenario, a_model=cfg.a_model, scale=cfg.sigma)
    try:
        run = run_bandit(bconfig, instance, np.random.SeedSequence(cfg.base_seed))
    except BanditNoStopError as exc:
        click.echo(json.dumps({"stopped": False, "pulls": exc.run.pulls.tolist()}))
        sys.exit(3 if cfg.strict else 0)
    click.echo(
        json.dumps(
            {
                "stopped": True,
                "returned_arm": run.returned_arm,
                "best_arm": instance.best_arm,
                "pulls": run.pulls.tolist(),
                "total_pulls": run.total_pulls,
                "estimates": [float(v) for v in run.estimates],
            }
        )
    )


@bandit.command("bai")
@common_options
@click.option("--n0-override", type=int, default=None)
def bandit_bai(config_path, preset, base_seed, trials, out_dir, strict, n0_override):
    cfg = _make(config_path, preset, base_seed, trials, out_dir, strict, n0_override=n0_override)
    try:
        path = run_bai_experiment(cfg)
    except RuntimeError as exc:
        click.echo(str(exc), err=True)
        sys.exit(3)
    click.echo(f"wrote {path}")


@main.group()
def coverage() -> None:
    """Anytime coverage experiments."""


@coverage.command("mest")
@common_options
@click.option("--loss", "coverage_loss", type=str, default=None)
@click.option("--n-max", "coverage_n_max", type=int, default=None)
@click.option("--delta", "coverage_delta", type=float, default=None)
@click.option("--refit", "coverage_refit", type=str, default=None)
def coverage_mest(config_path, preset, base_seed, trials, out_dir, strict, **overrides):
    cfg = _make(config_path, preset, base_seed, trials, out_dir, strict, **overrides)
    path = run_coverage_1d(cfg)
    click.echo(f"wrote {path}")


@coverage.command("multivariate")
@common_options
@click.option("--penalty", "mv_penalty", type=float, default=None)
@click.option("--delta", "mv_delta", type=float, default=None)
def coverage_multivariate(config_path, preset, base_seed, trials, out_dir, strict, **overrides):
    cfg = _make(config_path, preset, base_seed, trials, out_dir, strict, **overrides)
    try:
        path = run_coverage_multivariate(cfg)
    except RuntimeError as exc:
        click.echo(str(exc), err=True)
        sys.exit(3 if strict else 1)
    click.echo(f"wrote {path}")


def _make(config_path, preset, base_seed, trials, out_dir, strict, **extra) -> ExperimentConfig:
    try:
        overrides = dict(base_seed=base_seed, trials=trials, out_dir=out_dir, **extra)
        cfg = _build_config(config_path, preset, overrides)
        if strict:
            cfg.strict = True
        return cfg
    except (ConfigError, TypeError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
