"""Tests for the clock-drift model and agreement bounds."""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from addrhop.timesync import (
    DriftClock,
    SyncPolicy,
    agreement_check,
    coarse_sync,
    max_eta,
    worst_skew,
)


class TestMaxEta:
    def test_paper_example(self):
        assert max_eta(1e-6) == 499_999

    def test_half_drift(self):
        assert max_eta(0.5) == 0

    def test_milli_drift(self):
        assert max_eta(1e-3) == 499

    def test_non_integral_bound(self):
        # 1/(2*0.3) = 1.666..., largest integer strictly below is 1
        assert max_eta(0.3) == 1

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            max_eta(0.0)
        with pytest.raises(ValueError):
            max_eta(-1e-6)

    @given(delta=st.floats(min_value=1e-9, max_value=0.49))
    @settings(max_examples=100)
    def test_strictness(self, delta):
        eta = max_eta(delta)
        assert worst_skew(delta, eta) < 1.0


class TestWorstSkew:
    def test_formula(self):
        assert worst_skew(1e-6, 250_000) == pytest.approx(0.5, rel=1e-12)
        assert worst_skew(1e-6, 500_000) == pytest.approx(1.0, rel=1e-12)

    def test_zero_cases(self):
        assert worst_skew(0.0, 10) == 0.0
        assert worst_skew(1e-3, 0) == 0.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            worst_skew(-1e-6, 10)


class TestDriftClock:
    def test_read(self):
        c = DriftClock(drift=1e-3, offset=2.0)
        assert c.read(1000.0) == pytest.approx(2.0 + 1001.0)

    def test_resynced(self):
        c = DriftClock(drift=1e-3, offset=5.0).resynced(1000.0)
        assert c.read(1000.0) == pytest.approx(1000.0)
        assert c.drift == 1e-3


class TestCoarseSync:
    def test_symmetric_delays_cancel(self):
        server = DriftClock(0.0)
        client = DriftClock(0.0, offset=3.7)
        result = coarse_sync(server, client, (0.020, 0.020))
        t = 0.04
        assert result.client.read(t) - server.read(t) == pytest.approx(0.0, abs=1e-12)

    def test_asymmetry_bound(self):
        # residual offset error <= |d1 - d2| / 2, by direct simulation of the exchange
        server = DriftClock(0.0)
        client = DriftClock(0.0, offset=-1.2)
        result = coarse_sync(server, client, (0.010, 0.030))
        t = 0.04
        residual = abs(result.client.read(t) - server.read(t))
        assert residual <= 0.010 + 1e-12

    def test_exact_client_unchanged(self):
        client = DriftClock(0.0, offset=0.0)
        result = coarse_sync(DriftClock(0.0), client, (0.015, 0.015))
        assert result.applied_offset == pytest.approx(0.0, abs=1e-12)
        assert result.client == client.shifted(result.applied_offset)

    @given(
        offset=st.floats(min_value=-10, max_value=10),
        d1=st.floats(min_value=0, max_value=0.2),
        d2=st.floats(min_value=0, max_value=0.2),
    )
    @settings(max_examples=200)
    def test_residual_bound_property(self, offset, d1, d2):
        server = DriftClock(0.0)
        client = DriftClock(0.0, offset=offset)
        result = coarse_sync(server, client, (d1, d2))
        t = d1 + d2
        residual = abs(result.client.read(t) - server.read(t))
        assert residual <= abs(d1 - d2) / 2 + 1e-9

    def test_rejects_negative_delay(self):
        with pytest.raises(ValueError):
            coarse_sync(DriftClock(0.0), DriftClock(0.0), (-0.01, 0.02))


class TestSyncPolicy:
    def test_for_zeta(self):
        p = SyncPolicy.for_zeta(2.0, 100)
        assert p.tau == 200.0
        assert p.check_drift_bound(1e-4)
        assert not p.check_drift_bound(0.01)

    def test_validation(self):
        with pytest.raises(ValueError):
            SyncPolicy(eta=0, tau=1.0)
        with pytest.raises(ValueError):
            SyncPolicy(eta=5, tau=0.0)


class TestAgreementCheck:
    def test_perfect_clocks_agree(self):
        clocks = [DriftClock(0.0), DriftClock(0.0)]
        assert agreement_check(clocks, SyncPolicy.for_zeta(1.0, 10), 1.0, 5)

    def test_within_bound_agrees(self):
        # delta = 1e-4, eta = 4000 < 5000 bound: skew 0.8 < 1
        clocks = [DriftClock(1e-4), DriftClock(-1e-4)]
        assert agreement_check(clocks, SyncPolicy.for_zeta(1.0, 4000), 1.0, 1000)

    def test_bound_violation_detected(self):
        # eta = 1e6 with the adversarial +-delta pair must disagree
        clocks = [DriftClock(1e-4), DriftClock(-1e-4)]
        assert not agreement_check(clocks, SyncPolicy.for_zeta(1.0, 10**6), 1.0, 1)

    def test_residual_budget(self):
        clocks = [DriftClock(1e-4), DriftClock(-1e-4)]
        policy = SyncPolicy.for_zeta(1.0, 4000)
        # 2*delta*eta*zeta + 2e = 0.8 + 0.1 < 1: safe
        assert agreement_check(clocks, policy, 1.0, 20, residual=0.05)
        # 0.8 + 0.3 > 1: the adversarial residual pushes a midpoint across
        assert not agreement_check(clocks, policy, 1.0, 20, residual=0.15)

    def test_tau_mismatch_rejected(self):
        with pytest.raises(ValueError):
            agreement_check([DriftClock(0.0)], SyncPolicy(eta=10, tau=5.0), 1.0, 3)

    @given(
        delta=st.floats(min_value=1e-6, max_value=1e-3),
        frac=st.floats(min_value=0.05, max_value=0.95),
        drift_signs=st.lists(st.sampled_from([-1.0, -0.5, 0.0, 0.5, 1.0]), min_size=2, max_size=4),
    )
    @settings(max_examples=60, deadline=None)
    def test_safety_property(self, delta, frac, drift_signs):
        # any drift assignment within +-delta and eta under the bound must agree
        eta = max(1, min(int(max_eta(delta) * frac), 2000))
        clocks = [DriftClock(delta * s) for s in drift_signs]
        assert agreement_check(clocks, SyncPolicy.for_zeta(1.0, eta), 1.0, 3)
