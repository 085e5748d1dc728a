"""Pydantic request/response models for the HTTP service."""
from __future__ import annotations

from typing import Annotated, Literal, Union

from pydantic import BaseModel, Field

from ..chaos import DEFAULT_S0, DEFAULT_T0
from ..sim import (
    DEFAULT_SEED,
    DelayModel,
    DeterministicDelay,
    EmpiricalDelay,
    ShiftedExponentialDelay,
)


# --- delay models -----------------------------------------------------------


class DeterministicDelaySchema(BaseModel):
    kind: Literal["deterministic"] = "deterministic"
    d: float

    def to_model(self) -> DeterministicDelay:
        return DeterministicDelay(self.d)


class ShiftedExponentialDelaySchema(BaseModel):
    kind: Literal["sexp"] = "sexp"
    d_min: float
    mean_extra: float

    def to_model(self) -> ShiftedExponentialDelay:
        return ShiftedExponentialDelay(self.d_min, self.mean_extra)


class EmpiricalDelaySchema(BaseModel):
    kind: Literal["empirical"] = "empirical"
    samples: list[float]

    def to_model(self) -> EmpiricalDelay:
        return EmpiricalDelay(tuple(self.samples))


DelaySchema = Annotated[
    Union[DeterministicDelaySchema, ShiftedExponentialDelaySchema, EmpiricalDelaySchema],
    Field(discriminator="kind"),
]


def delay_schema_from_model(model: DelayModel) -> dict:
    if isinstance(model, DeterministicDelay):
        return {"kind": "deterministic", "d": model.d}
    if isinstance(model, ShiftedExponentialDelay):
        return {"kind": "sexp", "d_min": model.d_min, "mean_extra": model.mean_extra}
    return {"kind": "empirical", "samples": list(model.samples)}


# --- hash / tracking --------------------------------------------------------


class HashParamsMixin(BaseModel):
    l: int = 16
    n: int = 75
    s0_hex: str = DEFAULT_S0.to_hex()
    t0_hex: str = DEFAULT_T0.to_hex()


class HashRequest(HashParamsMixin):
    timestamp: int | None = None
    message_hex: str | None = None


class HashResponse(BaseModel):
    digest_hex: str
    digest_decimal: str
    width_bits: int


class TrackingRequest(HashParamsMixin):
    subnet: str
    epoch: float = 0.0
    zeta: float = 1.0
    start_timestamp: int = 3_000_000
    count: int = 6


class TrackingRow(BaseModel):
    timestamp: int
    host_id_binary: str
    host_id: int
    address: str


class TrackingResponse(BaseModel):
    host_bits: int
    rows: list[TrackingRow]


# --- collision --------------------------------------------------------------


class CollisionRequest(BaseModel):
    m: list[int]
    k: list[int]
    h: list[int] = [0]
    trials: int = 100_000
    seed: int = DEFAULT_SEED


class CollisionRow(BaseModel):
    m: int
    k: int
    h: int
    p_analytic: float | None = None
    p_mc: float | None = None
    trials: int
    seed: int
    note: str | None = None


class CollisionResponse(BaseModel):
    rows: list[CollisionRow]


# --- loss sweep / single run -----------------------------------------------


class SimBaseRequest(BaseModel):
    gamma: float = 100.0
    cycles: int = 100  # duration = cycles * zeta in every cell
    delay: DelaySchema
    subnet: str = "10.0.0.0/24"
    delta: float = 0.0
    eta: int = 0
    static_count: int = 0
    addr_change_lag: float = 0.0
    seed: int = DEFAULT_SEED


class SweepRequest(SimBaseRequest):
    zetas: list[float]
    lambdas: list[float] | None = None
    couple_lambda: float | None = None
    replications: int = 5
    loss_floor: float = 0.01


class SweepCellSchema(BaseModel):
    zeta: float
    lam: float
    replications: int
    mean: float
    ci_low: float | None
    ci_high: float | None
    min: float
    max: float


class SweepResponse(BaseModel):
    cells: list[SweepCellSchema]
    knee_zeta: float | None = None


class RunRequest(SimBaseRequest):
    zeta: float = 1.0
    lam: float = 0.3
    authorized: bool = True
    trace: bool = False


class AnalyticLossRequest(BaseModel):
    zetas: list[float]
    lambdas: list[float]
    d_model: float


class AnalyticLossRow(BaseModel):
    zeta: float
    lam: float
    d_model: float
    loss_analytic: float | None = None
    note: str | None = None


class AnalyticLossResponse(BaseModel):
    rows: list[AnalyticLossRow]


class RunResponse(BaseModel):
    sent: int
    delivered: int
    lost_stale_address: int
    collision_periods: int
    loss_fraction: float
    trace: list[tuple[float, str, str, str]] | None = None


# --- diagnostics ------------------------------------------------------------


class AutocorrRequest(HashParamsMixin):
    x: int = 8
    count: int = 100_000
    max_lag: int = 100
    start_timestamp: int = 3_000_000


class AutocorrResponse(BaseModel):
    count: int
    band: float
    max_abs_autocorr: float
    autocorr_pass: bool
    autocorr: list[float]
    bins: int
    chi2_stat: float
    chi2_dof: int
    chi2_pvalue: float
    chi2_pass: bool  # at significance 1e-3


class SyncCheckRequest(BaseModel):
    delta: float
    eta: int
    zeta: float = 1.0
    horizon: int = 1000
    drifts: list[float] | None = None  # default: the worst-case pair [+delta, -delta]
    residual: float = 0.0


class SyncCheckResponse(BaseModel):
    eta_bound: int
    skew: float
    within_bound: bool
    agreed: bool


# --- handshake --------------------------------------------------------------


class ChallengeResponse(BaseModel):
    nonce_hex: str
    server_time: float


class RedeemRequest(BaseModel):
    nonce_hex: str
    response_hex: str


class BundleResponse(BaseModel):
    bundle_text: str
    # receive/reply stamp for the client's four-timestamp offset estimate
    server_time: float
