"""Clock-drift model and timestamp-agreement safety bounds.

Timestamps advance once per zeta seconds, so two drifting clocks keep equal
integer timestamps as long as their divergence within one sync period stays
below a full period. With maximum drift rate delta (sec/sec) and eta hops per
sync period, the worst-case skew in timestamp units is S = 2 * delta * eta;
safety requires S < 1, i.e. eta < 1/(2*delta). Real synchronization leaves a
residual offset e, which tightens the budget to 2*delta*eta*zeta + 2e < zeta;
`agreement_check` exposes that residual explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction as ExactFraction

import numpy as np


@dataclass(frozen=True)
class DriftClock:
    """A clock reading offset + (1 + drift) * t at true time t."""

    drift: float
    offset: float = 0.0

    def read(self, true_time: float) -> float:
        return self.offset + (1.0 + self.drift) * true_time

    def shifted(self, delta_offset: float) -> "DriftClock":
        return replace(self, offset=self.offset + delta_offset)

    def resynced(self, true_time: float) -> "DriftClock":
        """A copy whose reading coincides with true time at the given instant."""
        return replace(self, offset=-self.drift * true_time)


@dataclass(frozen=True)
class SyncPolicy:
    """Hops per sync period (eta) and the sync period tau = zeta * eta."""

    eta: int
    tau: float

    def __post_init__(self) -> None:
        if self.eta < 1:
            raise ValueError(f"eta must be >= 1, got {self.eta}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @classmethod
    def for_zeta(cls, zeta: float, eta: int) -> "SyncPolicy":
        return cls(eta=eta, tau=zeta * eta)

    def check_drift_bound(self, delta_max: float) -> bool:
        """True iff eta lies strictly inside the safety bound 1/(2*delta_max)."""
        return worst_skew(delta_max, self.eta) < 1.0


def max_eta(delta: float) -> int:
    """Largest integer eta strictly below 1/(2*delta).

    delta is interpreted as the decimal number it prints as (1e-6 means
    exactly 10**-6) and the bound is evaluated in exact rational arithmetic,
    so boundary cases like 1/(2*10**-6) = 500000 honor the strict inequality
    instead of drowning in float rounding.
    """
    if delta <= 0:
        raise ValueError(f"drift rate must be positive, got {delta}")
    bound = 1 / (2 * ExactFraction(str(delta)))
    eta = math.floor(bound)
    if eta == bound:
        eta -= 1
    return eta


def worst_skew(delta: float, eta: int) -> float:
    """Worst-case timestamp skew 2 * delta * eta accumulated over one sync period."""
    if delta < 0 or eta < 0:
        raise ValueError("delta and eta must be non-negative")
    return 2.0 * delta * eta


@dataclass(frozen=True)
class CoarseSyncResult:
    client: DriftClock
    applied_offset: float


def coarse_sync(
    server_clock: DriftClock,
    client_clock: DriftClock,
    one_way_delays: tuple[float, float],
    start_time: float = 0.0,
) -> CoarseSyncResult:
    """One four-timestamp offset exchange; returns the corrected client clock.

    The client sends at true time start_time (reading t1), the server receives
    after d1 (reading t2) and replies immediately (t3 = t2), the client
    receives after d2 more (reading t4). The applied correction is
    ((t2 - t1) + (t3 - t4)) / 2; the residual offset error after correction is
    bounded by half the delay asymmetry, |d1 - d2| / 2.
    """
    d1, d2 = one_way_delays
    if d1 < 0 or d2 < 0:
        raise ValueError("one-way delays must be non-negative")
    t1 = client_clock.read(start_time)
    t2 = server_clock.read(start_time + d1)
    t3 = t2
    t4 = client_clock.read(start_time + d1 + d2)
    applied = ((t2 - t1) + (t3 - t4)) / 2.0
    return CoarseSyncResult(client=client_clock.shifted(applied), applied_offset=applied)


def agreement_check(
    clocks: list[DriftClock],
    policy: SyncPolicy,
    zeta: float,
    horizon: int,
    residual: float = 0.0,
) -> bool:
    """Whether integer timestamps of all clocks agree across `horizon` sync periods.

    Each period starts with a resynchronization that realigns every clock to
    true time, up to +-`residual` applied in the adversarial direction (ahead
    for fast clocks, behind for slow ones). Timestamps are compared at the
    midpoint of every hop interval; exact hop boundaries are the overlap
    window's job, not the clock model's.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if zeta <= 0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    if residual < 0:
        raise ValueError(f"residual must be non-negative, got {residual}")
    if abs(policy.tau - zeta * policy.eta) > 1e-9 * max(1.0, policy.tau):
        raise ValueError(f"policy tau {policy.tau} does not equal zeta*eta = {zeta * policy.eta}")

    drifts = np.array([c.drift for c in clocks], dtype=np.float64)
    resid = np.where(drifts >= 0, residual, -residual)
    mids = (np.arange(policy.eta, dtype=np.float64) + 0.5) * zeta
    for p in range(horizon):
        t_sync = p * policy.tau
        local = (t_sync + resid)[:, None] + (1.0 + drifts)[:, None] * mids[None, :]
        stamps = np.floor(local / zeta)
        if not (stamps == stamps[0]).all():
            return False
    return True
