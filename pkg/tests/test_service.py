"""Tests for the HTTP service endpoints."""
import pytest
from fastapi.testclient import TestClient

from addrhop.analysis import CollisionScenario, collision_mc, collision_prob
from addrhop.service import create_app
from addrhop.sim import CentralNode, DeterministicDelay, ParamBundle, SimConfig, auth_response, run, sweep
from addrhop.tracking import SubnetSpec, TFParams, address_at
from tests.test_chaos import GOLDEN_DIGEST_3000000


@pytest.fixture(scope="module")
def client() -> TestClient:
    return TestClient(create_app())


@pytest.fixture(scope="module")
def central_client() -> TestClient:
    params = TFParams(epoch=9.0, zeta=1.0, subnet=SubnetSpec.parse("10.7.0.0/24"))
    central = CentralNode(b"\x01\x02secret", ParamBundle(params=params, lam=0.4), seed=7)
    return TestClient(create_app(central))


class TestHashEndpoint:
    def test_timestamp_digest(self, client):
        resp = client.post("/hash", json={"timestamp": 3_000_000})
        assert resp.status_code == 200
        body = resp.json()
        assert body["digest_hex"] == f"{GOLDEN_DIGEST_3000000:08x}"
        assert body["digest_decimal"] == str(GOLDEN_DIGEST_3000000)
        assert body["width_bits"] == 32

    def test_message_hex(self, client):
        resp = client.post("/hash", json={"message_hex": "deadbeef"})
        assert resp.status_code == 200

    def test_requires_exactly_one_input(self, client):
        assert client.post("/hash", json={}).status_code == 422
        assert (
            client.post("/hash", json={"timestamp": 1, "message_hex": "00"}).status_code == 422
        )

    def test_bad_params_rejected(self, client):
        resp = client.post("/hash", json={"timestamp": 1, "l": 4})
        assert resp.status_code == 422


class TestTfEndpoint:
    def test_rows_match_library(self, client):
        resp = client.post(
            "/tf",
            json={"subnet": "129.110.242.0/24", "start_timestamp": 3_000_000, "count": 3},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["host_bits"] == 8
        params = TFParams(epoch=0.0, zeta=1.0, subnet=SubnetSpec.parse("129.110.242.0/24"))
        for i, row in enumerate(body["rows"]):
            ts = 3_000_000 + i
            assert row["timestamp"] == ts
            assert row["address"] == str(address_at(params, ts))
            assert int(row["host_id_binary"], 2) == row["host_id"]
            assert len(row["host_id_binary"]) == 8

    def test_zero_count(self, client):
        resp = client.post("/tf", json={"subnet": "10.0.0.0/24", "count": 0})
        assert resp.status_code == 200
        assert resp.json()["rows"] == []

    def test_bad_subnet(self, client):
        assert client.post("/tf", json={"subnet": "10.0.0.1/24"}).status_code == 422


class TestCollisionEndpoint:
    def test_values_match_library_exactly(self, client):
        resp = client.post(
            "/collision", json={"m": [4, 256], "k": [2], "h": [0], "trials": 5000, "seed": 3}
        )
        assert resp.status_code == 200
        rows = resp.json()["rows"]
        for row in rows:
            sc = CollisionScenario(m=row["m"], k=row["k"], h=row["h"])
            assert row["p_analytic"] == collision_prob(sc)
            assert row["p_mc"] == collision_mc(sc, 5000, 3)

    def test_overfull_rows_flagged_not_fatal(self, client):
        resp = client.post("/collision", json={"m": [4], "k": [2], "h": [0, 5], "trials": 100})
        assert resp.status_code == 200
        rows = resp.json()["rows"]
        assert rows[0]["p_analytic"] == 0.25
        assert rows[1]["p_analytic"] is None
        assert "collision certain" in rows[1]["note"]

    def test_empty_grid_rejected(self, client):
        assert client.post("/collision", json={"m": [], "k": [1]}).status_code == 422


class TestLossEndpoints:
    def test_sweep_matches_library(self, client):
        payload = {
            "zetas": [1.0],
            "lambdas": [0.3],
            "replications": 2,
            "gamma": 50.0,
            "cycles": 20,
            "delay": {"kind": "deterministic", "d": 0.5},
            "seed": 99,
        }
        resp = client.post("/loss/sweep", json=payload)
        assert resp.status_code == 200
        cell = resp.json()["cells"][0]
        base = SimConfig(
            zeta=1.0, lam=0.0, gamma=50.0, duration=20.0, delay=DeterministicDelay(0.5), seed=99
        )
        expected = sweep(base, [1.0], [0.3], 2)[0]
        assert cell["mean"] == expected.stats.mean
        assert cell["ci_low"] == expected.stats.ci_low
        assert cell["min"] == expected.stats.min

    def test_coupled_scan_reports_knee(self, client):
        payload = {
            "zetas": [0.5, 0.7, 1.0],
            "couple_lambda": 0.2,
            "replications": 1,
            "gamma": 100.0,
            "cycles": 50,
            "delay": {"kind": "deterministic", "d": 0.14},
        }
        resp = client.post("/loss/sweep", json=payload)
        assert resp.status_code == 200
        assert resp.json()["knee_zeta"] == 0.7

    def test_lambda_modes_are_exclusive(self, client):
        payload = {
            "zetas": [1.0],
            "lambdas": [0.3],
            "couple_lambda": 0.2,
            "delay": {"kind": "deterministic", "d": 0.1},
        }
        assert client.post("/loss/sweep", json=payload).status_code == 422

    def test_run_with_trace(self, client):
        payload = {
            "zeta": 1.0,
            "lam": 0.3,
            "gamma": 5.0,
            "cycles": 3,
            "delay": {"kind": "deterministic", "d": 0.2},
            "trace": True,
        }
        resp = client.post("/loss/run", json=payload)
        assert resp.status_code == 200
        body = resp.json()
        assert body["sent"] == body["delivered"] + body["lost_stale_address"]
        kinds = [e[1] for e in body["trace"]]
        assert kinds.count("hop") == 3

    def test_unauthorized_run(self, client):
        payload = {
            "zeta": 1.0,
            "lam": 0.3,
            "gamma": 50.0,
            "cycles": 20,
            "delay": {"kind": "deterministic", "d": 0.05},
            "authorized": False,
        }
        resp = client.post("/loss/run", json=payload)
        assert resp.status_code == 200
        body = resp.json()
        assert body["loss_fraction"] > 0.9

    def test_bad_delay_kind_rejected(self, client):
        payload = {"zetas": [1.0], "lambdas": [0.3], "delay": {"kind": "gaussian", "d": 1.0}}
        assert client.post("/loss/sweep", json=payload).status_code == 422

    def test_analytic_grid(self, client):
        payload = {"zetas": [1.0, 2.0], "lambdas": [0.3, 0.8], "d_model": 0.5}
        resp = client.post("/loss/analytic", json=payload)
        assert resp.status_code == 200
        rows = resp.json()["rows"]
        values = {(r["zeta"], r["lam"]): r["loss_analytic"] for r in rows}
        assert values[(1.0, 0.3)] == pytest.approx(0.2)
        assert values[(1.0, 0.8)] == 0.0
        assert values[(2.0, 0.3)] == pytest.approx(0.1)

    def test_analytic_invalid_cells_flagged(self, client):
        payload = {"zetas": [0.1], "lambdas": [0.0], "d_model": 0.5}
        rows = client.post("/loss/analytic", json=payload).json()["rows"]
        assert rows[0]["loss_analytic"] is None
        assert "span multiple generations" in rows[0]["note"]


class TestAutocorrEndpoint:
    def test_small_sample_report(self, client):
        resp = client.post("/autocorr", json={"count": 5000, "max_lag": 20})
        assert resp.status_code == 200
        body = resp.json()
        assert body["autocorr"][0] == 1.0
        assert len(body["autocorr"]) == 21
        assert body["bins"] == 256
        assert body["autocorr_pass"] is True
        assert body["chi2_pass"] is True
        assert 0.0 <= body["chi2_pvalue"] <= 1.0

    def test_too_few_samples(self, client):
        assert client.post("/autocorr", json={"count": 100}).status_code == 422


class TestSyncCheckEndpoint:
    def test_drift_example(self, client):
        resp = client.post("/sync-check", json={"delta": 1e-6, "eta": 4000, "horizon": 5})
        assert resp.status_code == 200
        body = resp.json()
        assert body["eta_bound"] == 499_999
        assert body["within_bound"] is True
        assert body["agreed"] is True

    def test_violation_detected(self, client):
        resp = client.post(
            "/sync-check", json={"delta": 1e-4, "eta": 10**6, "horizon": 1, "zeta": 1.0}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["within_bound"] is False
        assert body["agreed"] is False

    def test_bad_delta(self, client):
        assert client.post("/sync-check", json={"delta": 0.0, "eta": 10}).status_code == 422


class TestHandshakeEndpoints:
    def test_not_configured(self, client):
        assert client.post("/handshake/challenge").status_code == 503

    def test_full_exchange(self, central_client):
        challenge = central_client.post("/handshake/challenge").json()
        assert isinstance(challenge["server_time"], float)
        nonce_hex = challenge["nonce_hex"]
        response = auth_response(b"\x01\x02secret", bytes.fromhex(nonce_hex))
        resp = central_client.post(
            "/handshake/redeem",
            json={"nonce_hex": nonce_hex, "response_hex": f"{response:x}"},
        )
        assert resp.status_code == 200
        body = resp.json()
        bundle = ParamBundle.from_text(body["bundle_text"])
        assert bundle.lam == 0.4
        assert bundle.params.epoch == 9.0
        assert isinstance(body["server_time"], float)

    def test_wrong_psk_403(self, central_client):
        nonce_hex = central_client.post("/handshake/challenge").json()["nonce_hex"]
        bad = auth_response(b"not-it", bytes.fromhex(nonce_hex))
        resp = central_client.post(
            "/handshake/redeem", json={"nonce_hex": nonce_hex, "response_hex": f"{bad:x}"}
        )
        assert resp.status_code == 403

    def test_replay_403(self, central_client):
        nonce_hex = central_client.post("/handshake/challenge").json()["nonce_hex"]
        response = auth_response(b"\x01\x02secret", bytes.fromhex(nonce_hex))
        payload = {"nonce_hex": nonce_hex, "response_hex": f"{response:x}"}
        assert central_client.post("/handshake/redeem", json=payload).status_code == 200
        assert central_client.post("/handshake/redeem", json=payload).status_code == 403

    def test_health_reports_central(self, client, central_client):
        assert client.get("/health").json()["central_node"] is False
        assert central_client.get("/health").json()["central_node"] is True
