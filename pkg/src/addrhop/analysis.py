"""Closed-form collision and loss models with Monte Carlo counterparts.

Collision: with k hopping nodes and h fixed-address nodes sharing a subnet of
m addresses, and each hop drawing uniformly from the m addresses, the
per-period probability that some hopping node lands on another hopping node's
draw or on a fixed address is

    p = 1 - (m-h)(m-h-1)...(m-h-k+1) / m**k

evaluated as a product of ratios (never as factorial quotients, which
overflow). Per this formula a hop landing on a fixed node's address counts as
a collision.

Loss: a packet delayed by d and addressed to the generation current when it
was sent is lost iff it arrives after that generation's retention ended; for
delay d, retention lambda and hop period zeta the expected loss fraction is
max(0, d - lambda) / zeta — zero whenever retention covers the delay, and
matching what the simulator measures otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CollisionScenario:
    """m addresses in the subnet, k hopping nodes, h fixed-address nodes."""

    m: int
    k: int
    h: int = 0

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"address count m must be >= 1, got {self.m}")
        if self.k < 1:
            raise ValueError(f"hopping node count k must be >= 1, got {self.k}")
        if self.h < 0:
            raise ValueError(f"fixed node count h must be >= 0, got {self.h}")


def collision_prob(sc: CollisionScenario) -> float:
    """Exact per-period collision probability (full double precision)."""
    if sc.h + sc.k > sc.m:
        raise ValueError(
            f"{sc.h} fixed + {sc.k} hopping nodes exceed {sc.m} addresses; collision certain, "
            "formula undefined"
        )
    no_collision = 1.0
    for i in range(sc.k):
        no_collision *= (sc.m - sc.h - i) / sc.m
    return 1.0 - no_collision


def collision_mc(sc: CollisionScenario, trials: int, seed: int) -> float:
    """Monte Carlo estimate of collision_prob; deterministic for a fixed seed.

    Each trial draws k uniform addresses and is flagged when any two coincide
    or any draw hits one of the h reserved addresses (taken as ids 0..h-1,
    which is no loss of generality under uniform draws).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    flagged = 0
    chunk = 1 << 16
    remaining = trials
    while remaining > 0:
        size = min(chunk, remaining)
        draws = rng.integers(0, sc.m, size=(size, sc.k), dtype=np.int64)
        hit_static = (draws < sc.h).any(axis=1)
        if sc.k > 1:
            srt = np.sort(draws, axis=1)
            dup = (srt[:, 1:] == srt[:, :-1]).any(axis=1)
            flagged += int((hit_static | dup).sum())
        else:
            flagged += int(hit_static.sum())
        remaining -= size
    return flagged / trials


@dataclass(frozen=True)
class LossModel:
    """Network delay d, retention lambda and hop period zeta."""

    d: float
    lam: float
    zeta: float

    def __post_init__(self) -> None:
        if self.d < 0:
            raise ValueError(f"delay must be non-negative, got {self.d}")
        if not 0 <= self.lam < self.zeta:
            raise ValueError(f"need 0 <= lambda < zeta, got lambda={self.lam} zeta={self.zeta}")


def expected_loss(lm: LossModel) -> float:
    """Expected in-transit loss fraction max(0, d - lambda) / zeta.

    Only valid while stale packets span at most one generation
    (d - lambda < zeta); beyond that the one-overlap model breaks down.
    """
    stale = lm.d - lm.lam
    if stale >= lm.zeta:
        raise ValueError(
            f"d - lambda = {stale} >= zeta = {lm.zeta}: stale packets span multiple generations, "
            "loss model invalid"
        )
    return max(0.0, stale) / lm.zeta


@dataclass(frozen=True)
class StatSummary:
    """Mean / 95% CI / extremes of a list of loss fractions."""

    mean: float
    ci_low: float | None
    ci_high: float | None
    min: float
    max: float
    n: int


def summarize(samples: list[float]) -> StatSummary:
    """Mean, normal-approximation 95% CI, min and max of the samples.

    A single sample yields no CI (fields are None). The CI uses
    mean +- 1.96 * s / sqrt(n) with the sample standard deviation s.
    """
    if not samples:
        raise ValueError("cannot summarize an empty sample list")
    arr = np.asarray(samples, dtype=np.float64)
    mean = float(arr.mean())
    if len(arr) >= 2:
        half = 1.96 * float(arr.std(ddof=1)) / math.sqrt(len(arr))
        ci_low, ci_high = mean - half, mean + half
    else:
        ci_low = ci_high = None
    return StatSummary(
        mean=mean,
        ci_low=ci_low,
        ci_high=ci_high,
        min=float(arr.min()),
        max=float(arr.max()),
        n=len(arr),
    )
