import math

import numpy as np
import pytest

from lilmest.rewards import (
    ProblemInstance,
    RewardModel,
    alpha_model_means,
    derive_seed,
    gaps_and_complexity,
    sample,
    sample_block,
    substream,
)


def ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample empirical-CDF sup distance."""
    a = np.sort(a)
    b = np.sort(b)
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


class TestSampling:
    def test_degenerate_gaussian(self):
        model = RewardModel("gaussian", theta=1.7, scale=0.0)
        draws = sample_block(model, np.random.default_rng(0), 100)
        assert np.all(draws == 1.7)

    def test_scalar_sample_matches_block_of_one(self):
        model = RewardModel("student2", theta=0.3)
        a = sample(model, np.random.default_rng(42))
        b = sample_block(model, np.random.default_rng(42), 1)[0]
        assert a == b

    def test_determinism_per_kind(self):
        for kind in ("gaussian", "huber_contaminated", "student2"):
            model = RewardModel(kind, theta=-0.4, scale=0.7, contamination=0.1)
            x = sample_block(model, np.random.default_rng(7), 1000)
            y = sample_block(model, np.random.default_rng(7), 1000)
            assert np.array_equal(x, y)

    def test_zero_contamination_matches_gaussian_in_distribution(self):
        contaminated = RewardModel("huber_contaminated", theta=0.2, scale=0.5, contamination=0.0)
        clean = RewardModel("gaussian", theta=0.2, scale=0.5)
        a = sample_block(contaminated, np.random.default_rng(1), 10_000)
        b = sample_block(clean, np.random.default_rng(2), 10_000)
        assert ks_distance(a, b) < 0.05

    def test_student2_median_centred(self):
        model = RewardModel("student2", theta=1.25)
        draws = sample_block(model, np.random.default_rng(3), 100_000)
        assert abs(np.median(draws) - 1.25) < 0.02

    def test_all_kinds_median_centred(self):
        for kind in ("gaussian", "huber_contaminated", "student2"):
            model = RewardModel(kind, theta=-0.8, scale=0.5)
            draws = sample_block(model, np.random.default_rng(11), 100_000)
            assert abs(np.median(draws) + 0.8) < 0.02

    def test_gaussian_and_student_mean_centred(self):
        for kind in ("gaussian", "student2"):
            model = RewardModel(kind, theta=0.6, scale=0.5)
            draws = sample_block(model, np.random.default_rng(13), 100_000)
            assert abs(np.mean(draws) - 0.6) < 0.05

    def test_validation(self):
        with pytest.raises(ValueError):
            RewardModel("weibull", theta=0.0)
        with pytest.raises(ValueError):
            RewardModel("gaussian", theta=0.0, scale=-1.0)
        with pytest.raises(ValueError):
            RewardModel("huber_contaminated", theta=0.0, contamination=1.0)


class TestAlphaModel:
    def test_frozen_values(self):
        means = alpha_model_means(4, 0.3)
        assert means == pytest.approx([0.34024604, 0.1877476, 0.082685245, 0.0], abs=1e-8)

    def test_last_arm_always_zero(self):
        for a in (0.1, 0.3, 2.0):
            assert alpha_model_means(7, a)[-1] == 0.0

    def test_decreasing(self):
        means = alpha_model_means(32, 0.3)
        assert np.all(np.diff(means) < 0)


class TestComplexity:
    def test_two_arm_frozen(self):
        inst = ProblemInstance(means=(1.0, 0.0), scenario="gaussian", c_h=2 * math.e**2)
        gaps, h1, h2 = gaps_and_complexity(inst)
        assert gaps == pytest.approx([0.0, 1.0])
        assert h1 == 1.0
        assert h2 == pytest.approx(0.9907104653, abs=1e-9)

    def test_three_arm_unit_gaps(self):
        inst = ProblemInstance(means=(1.0, 0.0, 0.0), scenario="gaussian")
        _, h1, _ = gaps_and_complexity(inst)
        assert h1 == 2.0

    def test_tie_rejected(self):
        with pytest.raises(ValueError):
            ProblemInstance(means=(1.0, 1.0), scenario="gaussian")

    def test_default_c_h_keeps_h2_positive(self):
        inst = ProblemInstance.from_alpha_model(8, "student")
        _, h1, h2 = gaps_and_complexity(inst)
        assert h1 > 0 and h2 > 0

    def test_c_h_floor_enforced(self):
        with pytest.raises(ValueError):
            ProblemInstance(means=(1.0, 0.0), scenario="gaussian", c_h=math.e**2 * 0.9)


class TestSubstreams:
    def test_disjoint_keys_uncorrelated_but_deterministic(self):
        a1 = substream(99, 0, 1).standard_normal(8)
        a2 = substream(99, 0, 1).standard_normal(8)
        b = substream(99, 0, 2).standard_normal(8)
        assert np.array_equal(a1, a2)
        assert not np.array_equal(a1, b)

    def test_derive_seed_stable(self):
        assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)
        assert derive_seed(5, 1, 2) != derive_seed(5, 2, 1)
