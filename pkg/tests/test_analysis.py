"""Tests for the collision and loss models."""
import itertools
import math

import numpy as np
import pytest

from addrhop.analysis import (
    CollisionScenario,
    LossModel,
    StatSummary,
    collision_mc,
    collision_prob,
    expected_loss,
    summarize,
)


def collision_by_enumeration(m: int, k: int, h: int) -> float:
    """Brute-force oracle: enumerate all m**k ordered assignments."""
    flagged = 0
    for draws in itertools.product(range(m), repeat=k):
        if len(set(draws)) < k or any(d < h for d in draws):
            flagged += 1
    return flagged / m**k


def collision_log_domain(m: int, k: int, h: int) -> float:
    """Independent log-domain evaluation: sums log1p terms instead of
    multiplying ratios, immune to overflow of m**k."""
    log_no = sum(math.log1p(-(h + i) / m) for i in range(k))
    return -math.expm1(log_no)


class TestCollisionProb:
    def test_single_node_never_collides(self):
        for m in (1, 4, 256):
            assert collision_prob(CollisionScenario(m=m, k=1, h=0)) == 0.0

    def test_tiny_case_against_enumeration(self):
        assert collision_prob(CollisionScenario(m=4, k=2, h=0)) == pytest.approx(0.25, abs=1e-15)
        assert collision_by_enumeration(4, 2, 0) == 0.25

    def test_enumeration_grid(self):
        for m, k, h in itertools.product((3, 4, 5, 6), (1, 2, 3), (0, 1, 2)):
            if h + k > m:
                continue
            got = collision_prob(CollisionScenario(m=m, k=k, h=h))
            assert got == pytest.approx(collision_by_enumeration(m, k, h), abs=1e-12)

    def test_log_domain_agreement(self):
        for m, k, h in itertools.product((8, 64, 256, 65536), (1, 2, 8, 32), (0, 5)):
            if h + k > m:
                continue
            p = collision_prob(CollisionScenario(m=m, k=k, h=h))
            q = collision_log_domain(m, k, h)
            assert p == pytest.approx(q, rel=1e-12, abs=1e-14)

    def test_monotone_in_k(self):
        probs = [collision_prob(CollisionScenario(m=256, k=k, h=0)) for k in range(1, 12)]
        assert all(a < b for a, b in zip(probs, probs[1:]))

    def test_monotone_in_h(self):
        probs = [collision_prob(CollisionScenario(m=256, k=4, h=h)) for h in (0, 1, 5, 20)]
        assert all(a < b for a, b in zip(probs, probs[1:]))

    def test_monotone_in_m(self):
        probs = [collision_prob(CollisionScenario(m=m, k=4, h=5)) for m in (16, 64, 256, 1024)]
        assert all(a > b for a, b in zip(probs, probs[1:]))

    def test_overfull_subnet_rejected(self):
        with pytest.raises(ValueError):
            collision_prob(CollisionScenario(m=8, k=4, h=5))

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            CollisionScenario(m=0, k=1, h=0)
        with pytest.raises(ValueError):
            CollisionScenario(m=4, k=0, h=0)
        with pytest.raises(ValueError):
            CollisionScenario(m=4, k=1, h=-1)


class TestCollisionMC:
    def test_deterministic_for_seed(self):
        sc = CollisionScenario(m=16, k=3, h=1)
        assert collision_mc(sc, 50_000, seed=7) == collision_mc(sc, 50_000, seed=7)

    def test_single_node_zero(self):
        assert collision_mc(CollisionScenario(m=64, k=1, h=0), 10_000, seed=3) == 0.0

    def test_matches_analytic_within_3_sigma(self):
        trials = 1_000_000
        sc = CollisionScenario(m=4, k=2, h=0)
        est = collision_mc(sc, trials, seed=11)
        se = math.sqrt(0.25 * 0.75 / trials)
        assert abs(est - 0.25) < 3 * se

    def test_larger_case_within_3_sigma(self):
        sc = CollisionScenario(m=256, k=10, h=0)
        p = collision_prob(sc)
        # exact rational value of the product form, frozen:
        # 1 - (256*255*...*247)/256**10 = 0.16305487791028817
        assert p == pytest.approx(0.16305487791028817, abs=1e-15)
        trials = 100_000
        est = collision_mc(sc, trials, seed=5)
        se = math.sqrt(p * (1 - p) / trials)
        assert abs(est - p) < 3 * se

    def test_zero_trials_rejected(self):
        with pytest.raises(ValueError):
            collision_mc(CollisionScenario(m=4, k=2, h=0), 0, seed=1)


class TestExpectedLoss:
    def test_retention_covers_delay(self):
        assert expected_loss(LossModel(d=0.2, lam=0.3, zeta=1.0)) == 0.0
        assert expected_loss(LossModel(d=0.3, lam=0.3, zeta=1.0)) == 0.0

    def test_basic_value(self):
        assert expected_loss(LossModel(d=0.5, lam=0.3, zeta=1.0)) == pytest.approx(0.2)
        assert expected_loss(LossModel(d=0.5, lam=0.3, zeta=2.0)) == pytest.approx(0.1)

    def test_invalid_domain_rejected(self):
        with pytest.raises(ValueError):
            expected_loss(LossModel(d=1.5, lam=0.3, zeta=1.0))

    def test_model_validation(self):
        with pytest.raises(ValueError):
            LossModel(d=-0.1, lam=0.0, zeta=1.0)
        with pytest.raises(ValueError):
            LossModel(d=0.1, lam=1.0, zeta=1.0)

    def test_monotonicity(self):
        base = expected_loss(LossModel(d=0.5, lam=0.3, zeta=1.0))
        assert expected_loss(LossModel(d=0.5, lam=0.4, zeta=1.0)) < base
        assert expected_loss(LossModel(d=0.5, lam=0.3, zeta=2.0)) < base
        assert expected_loss(LossModel(d=0.6, lam=0.3, zeta=1.0)) > base


class TestSummarize:
    def test_constant_samples(self):
        s = summarize([0.2, 0.2, 0.2])
        assert s.mean == pytest.approx(0.2, abs=1e-15)
        assert s.ci_high - s.ci_low == pytest.approx(0.0, abs=1e-15)
        assert s.min == s.max == 0.2
        assert s.n == 3

    def test_two_samples(self):
        s = summarize([0.0, 0.4])
        assert s.mean == pytest.approx(0.2)
        assert s.min == 0.0
        assert s.max == 0.4

    def test_single_sample_has_no_ci(self):
        s = summarize([0.3])
        assert s.mean == 0.3
        assert s.ci_low is None and s.ci_high is None

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            summarize([])

    def test_ci_ordering(self):
        s = summarize([0.1, 0.5, 0.3, 0.2])
        assert s.ci_low <= s.mean <= s.ci_high
        assert s.min <= s.mean <= s.max

    def test_coverage_experiment(self):
        # ~95 of 100 seeded meta-trials must cover the true mean
        rng = np.random.default_rng(2024)
        true_mean = 0.3
        covered = 0
        for _ in range(100):
            samples = rng.normal(true_mean, 0.05, size=30).tolist()
            s = summarize(samples)
            if s.ci_low <= true_mean <= s.ci_high:
                covered += 1
        assert 87 <= covered <= 100, f"coverage {covered}/100"
