"""Seeded discrete-event simulation of the full hopping scheme.

One run models a corresponding node (CN) streaming Poisson traffic at a
monitored node whose address hops every zeta seconds with a lambda retention
window. The CN stamps each packet with the destination address derived from
its OWN drifting clock, packets arrive after a sampled network delay, and the
monitored node accepts or drops them against its own clock's view of the
active address set. Event ordering at a hop boundary is hop-first (windows
are half-open), and everything is deterministic for a fixed seed: per-purpose
RNG streams are derived by hashing (seed, node id, stream id), so adding a
node or stream never perturbs another's draws.

Also here: the parameter-distribution handshake (challenge-response against a
pre-shared key, replay-safe), grid sweeps in the mean/CI/min/max reporting
format, per-period collision tracing against the analytic collision model,
and the loss-versus-zeta threshold scan.
"""
from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .analysis import StatSummary, summarize
from .chaos import DEFAULT_HASH_PARAMS, HashParams, digest
from .timesync import DriftClock, coarse_sync, worst_skew
from .tracking import SubnetSpec, TFParams, derive_width, host_id_at, host_id_sequence, parse_kv_block

DEFAULT_SEED = 12345

# spawn-key namespaces for deterministic per-purpose RNG streams
_NODE_CN = 0
_NODE_IOT = 1
_NODE_TOPOLOGY = 2
_NODE_CENTRAL = 3
_NODE_REPLICATION = 4
_STREAM_TRAFFIC = 0
_STREAM_DELAY = 1
_STREAM_GUESS = 2
_STREAM_STATIC = 3
_STREAM_EPOCHS = 4
_STREAM_NONCE = 5


def _stream_rng(seed: int, node: int, stream: int) -> random.Random:
    ss = np.random.SeedSequence(seed, spawn_key=(node, stream))
    return random.Random(int(ss.generate_state(1, np.uint64)[0]))


def _derived_seed(seed: int, node: int, stream: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(node, stream))
    return int(ss.generate_state(1, np.uint64)[0])


# --- delay models ---------------------------------------------------------


@dataclass(frozen=True)
class DeterministicDelay:
    d: float

    def __post_init__(self) -> None:
        if self.d < 0:
            raise ValueError(f"delay must be non-negative, got {self.d}")

    def sample(self, rng: random.Random) -> float:
        return self.d

    def spec_string(self) -> str:
        return f"deterministic:{self.d!r}"


@dataclass(frozen=True)
class ShiftedExponentialDelay:
    """d_min plus an exponential tail with the given mean."""

    d_min: float
    mean_extra: float

    def __post_init__(self) -> None:
        if self.d_min < 0 or self.mean_extra < 0:
            raise ValueError("delay parameters must be non-negative")

    def sample(self, rng: random.Random) -> float:
        if self.mean_extra == 0:
            return self.d_min
        return self.d_min - self.mean_extra * math.log(1.0 - rng.random())

    def spec_string(self) -> str:
        return f"sexp:{self.d_min!r},{self.mean_extra!r}"


@dataclass(frozen=True)
class EmpiricalDelay:
    """Resamples uniformly from a recorded delay list."""

    samples: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("empirical delay model needs at least one sample")
        if any(s < 0 for s in self.samples):
            raise ValueError("delays must be non-negative")

    def sample(self, rng: random.Random) -> float:
        return self.samples[int(rng.random() * len(self.samples))]

    def spec_string(self) -> str:
        return "empirical:" + ",".join(repr(s) for s in self.samples)


DelayModel = DeterministicDelay | ShiftedExponentialDelay | EmpiricalDelay


def parse_delay_model(text: str) -> DelayModel:
    """Parse 'deterministic:D', 'sexp:DMIN,MEAN' or 'empirical:D1,D2,...'."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "deterministic":
            return DeterministicDelay(float(rest))
        if kind == "sexp":
            d_min, mean_extra = (float(v) for v in rest.split(","))
            return ShiftedExponentialDelay(d_min, mean_extra)
        if kind == "empirical":
            return EmpiricalDelay(tuple(float(v) for v in rest.split(",")))
    except (ValueError, TypeError) as exc:
        raise ValueError(f"bad delay model {text!r}: {exc}") from None
    raise ValueError(f"unknown delay model kind {kind!r} (expected deterministic/sexp/empirical)")


# --- configuration and metrics -------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """One simulation cell: traffic, timing, drift and topology parameters."""

    zeta: float
    lam: float
    gamma: float
    duration: float
    delay: DelayModel
    subnet: SubnetSpec = field(default_factory=lambda: SubnetSpec.parse("10.0.0.0/24"))
    hash: HashParams = field(default=DEFAULT_HASH_PARAMS)
    delta: float = 0.0
    eta: int = 0
    iot_count: int = 1
    static_count: int = 0
    addr_change_lag: float = 0.0
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.zeta <= 0:
            raise ValueError(f"zeta must be positive, got {self.zeta}")
        if not 0 <= self.lam < self.zeta:
            raise ValueError(f"need 0 <= lambda < zeta, got {self.lam} vs {self.zeta}")
        if self.gamma < 0:
            raise ValueError(f"packet rate must be non-negative, got {self.gamma}")
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        cycles = self.duration / self.zeta
        if abs(cycles - round(cycles)) > 1e-9 or round(cycles) < 1:
            raise ValueError(f"duration {self.duration} is not a positive multiple of zeta {self.zeta}")
        if self.delta < 0:
            raise ValueError(f"drift rate must be non-negative, got {self.delta}")
        if self.delta > 0:
            if self.eta < 1:
                raise ValueError("drifting clocks need a sync period: set eta >= 1")
            if worst_skew(self.delta, self.eta) >= 1.0:
                raise ValueError(
                    f"eta {self.eta} violates the sync safety bound for delta {self.delta}"
                )
        if self.iot_count < 1:
            raise ValueError(f"need at least one hopping node, got {self.iot_count}")
        if self.static_count < 0:
            raise ValueError(f"static node count must be non-negative, got {self.static_count}")
        m = 1 << derive_width(self.subnet)
        if self.iot_count + self.static_count > m:
            raise ValueError(
                f"{self.iot_count} hopping + {self.static_count} static nodes exceed "
                f"{m} subnet addresses"
            )
        if not 0 <= self.addr_change_lag < self.zeta:
            raise ValueError(f"addr_change_lag must lie in [0, zeta), got {self.addr_change_lag}")

    @property
    def cycles(self) -> int:
        return round(self.duration / self.zeta)


@dataclass(frozen=True)
class Metrics:
    """Counters from one run; sent = delivered + lost_stale_address always."""

    sent: int
    delivered: int
    lost_stale_address: int
    collision_periods: int
    sent_per_period: tuple[int, ...]
    lost_per_period: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.sent != self.delivered + self.lost_stale_address:
            raise ValueError("packet conservation violated")

    @property
    def loss_fraction(self) -> float:
        return self.lost_stale_address / self.sent if self.sent else 0.0


def _local_time(true_time: float, drift: float, tau: float) -> float:
    """Clock reading under periodic exact resynchronization every tau seconds."""
    if drift == 0.0:
        return true_time
    t_sync = math.floor(true_time / tau) * tau
    return t_sync + (1.0 + drift) * (true_time - t_sync)


def run(config: SimConfig, cn_has_bundle: bool = True, trace_sink: list | None = None) -> Metrics:
    """Execute one simulation run; deterministic for a fixed (config, seed).

    The CN emits Poisson traffic stamped with its own clock's view of the
    target's current address (or uniform random guesses if it never received
    the parameter bundle); the monitored node accepts a packet iff its
    destination is in the active address set at the arrival instant on the
    monitored node's clock. With drift enabled the CN runs fast (+delta) and
    the monitored node slow (-delta), the worst-case pair; both snap exactly
    to true time every eta hops.

    If `trace_sink` is given, (time, event, node, address) tuples for every
    hop, send, deliver and drop are appended to it in deterministic order.
    """
    if config.iot_count != 1:
        raise ValueError("run() models a single monitored node; use collision_trace for k >= 2")
    zeta = config.zeta
    c = config.cycles
    params = TFParams(epoch=0.0, zeta=zeta, hash=config.hash, subnet=config.subnet)
    x = params.host_bits
    m = 1 << x

    # generation -> host id table; extended lazily for stragglers with huge delays
    slack = 3 + math.ceil(config.delta * config.duration / zeta)
    table = host_id_sequence(params, 0, c + slack)
    extra: dict[int, int] = {}

    def hid(g: int) -> int:
        if g < len(table):
            return int(table[g])
        v = extra.get(g)
        if v is None:
            v = host_id_at(params, g)
            extra[g] = v
        return v

    topo = _stream_rng(config.seed, _NODE_TOPOLOGY, _STREAM_STATIC)
    static_ids = frozenset(topo.sample(range(m), config.static_count))
    collision_periods = sum(1 for g in range(c) if hid(g) in static_ids)

    tau = zeta * config.eta if config.eta > 0 else math.inf
    cn_drift = config.delta
    iot_drift = -config.delta

    traffic = _stream_rng(config.seed, _NODE_CN, _STREAM_TRAFFIC)
    delay_rng = _stream_rng(config.seed, _NODE_CN, _STREAM_DELAY)
    guess = _stream_rng(config.seed, _NODE_CN, _STREAM_GUESS)

    sent = delivered = lost = 0
    sent_pp = [0] * c
    lost_pp = [0] * c
    events: list[tuple[float, int, str, str, int]] = []

    t = 0.0
    while config.gamma > 0:
        t += -math.log(1.0 - traffic.random()) / config.gamma
        if t >= config.duration:
            break
        d = config.delay.sample(delay_rng)
        if cn_has_bundle:
            g = math.floor(_local_time(t, cn_drift, tau) / zeta)
            dst = hid(g)
        else:
            dst = guess.randrange(m)
        t_arr = t + d

        iot_local = _local_time(t_arr, iot_drift, tau)
        k = math.floor(iot_local / zeta)
        into = iot_local - k * zeta
        if dst == hid(k) and into >= config.addr_change_lag:
            ok = True
        elif k >= 1 and into < config.lam and dst == hid(k - 1):
            ok = True
        else:
            ok = False

        period = min(int(t // zeta), c - 1)
        sent += 1
        sent_pp[period] += 1
        if ok:
            delivered += 1
        else:
            lost += 1
            lost_pp[period] += 1
        if trace_sink is not None:
            events.append((t, 1, "send", "cn", dst))
            events.append((t_arr, 2, "deliver" if ok else "drop", "iot", dst))

    if trace_sink is not None:
        for g in range(c):
            events.append((g * zeta, 0, "hop", "iot", hid(g)))
        events.sort(key=lambda e: (e[0], e[1]))
        for when, _, event, node, host in events:
            trace_sink.append((when, event, node, str(config.subnet.base + host)))

    return Metrics(
        sent=sent,
        delivered=delivered,
        lost_stale_address=lost,
        collision_periods=collision_periods,
        sent_per_period=tuple(sent_pp),
        lost_per_period=tuple(lost_pp),
    )


# --- sweeps ----------------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
    zeta: float
    lam: float
    stats: StatSummary


def _rep_seed(master: int, rep: int) -> int:
    # shared across grid cells so (zeta, lambda) comparisons are seed-paired
    return _derived_seed(master, _NODE_REPLICATION, rep)


def sweep(
    base: SimConfig,
    zetas: list[float],
    lambdas: list[float],
    replications: int,
) -> list[SweepCell]:
    """Run the (zeta, lambda) grid; each cell summarized over `replications` runs.

    Cell durations keep the base config's cycle count, so duration scales with
    zeta. Replication r uses the same derived seed in every cell (paired
    seeds); different replications are independent.
    """
    if not zetas or not lambdas:
        raise ValueError("zeta and lambda grids must be non-empty")
    if replications < 1:
        raise ValueError(f"need at least one replication, got {replications}")
    cells = []
    for z in zetas:
        for lam in lambdas:
            losses = []
            for r in range(replications):
                cfg = replace(
                    base,
                    zeta=z,
                    lam=lam,
                    duration=base.cycles * z,
                    seed=_rep_seed(base.seed, r),
                )
                losses.append(run(cfg).loss_fraction)
            cells.append(SweepCell(zeta=z, lam=lam, stats=summarize(losses)))
    return cells


@dataclass(frozen=True)
class ThresholdScanResult:
    zetas: tuple[float, ...]
    mean_loss: tuple[float, ...]
    knee_zeta: float | None
    floor: float
    cells: tuple[SweepCell, ...]


def threshold_scan(
    base: SimConfig,
    zetas: list[float],
    couple: float = 0.2,
    floor: float = 0.01,
    replications: int = 1,
) -> ThresholdScanResult:
    """Loss-versus-zeta curve with lambda coupled as couple * zeta.

    Returns the per-zeta mean loss and the smallest zeta whose mean loss falls
    below `floor` (None if the curve never does).
    """
    if not zetas:
        raise ValueError("zeta grid must be non-empty")
    if not 0 < couple < 1:
        raise ValueError(f"coupling ratio must lie in (0, 1), got {couple}")
    order = sorted(zetas)
    cells = tuple(sweep(base, [z], [couple * z], replications)[0] for z in order)
    means = tuple(c.stats.mean for c in cells)
    knee = next((z for z, loss in zip(order, means) if loss < floor), None)
    return ThresholdScanResult(
        zetas=tuple(order), mean_loss=means, knee_zeta=knee, floor=floor, cells=cells
    )


# --- multi-node collision tracing -----------------------------------------


@dataclass(frozen=True)
class CollisionTrace:
    periods: int
    collision_periods: int

    @property
    def frequency(self) -> float:
        return self.collision_periods / self.periods if self.periods else 0.0


def collision_trace(config: SimConfig) -> CollisionTrace:
    """Observed per-timestamp collision frequency among k hopping nodes.

    Each node runs its own tracking stream from a distinct secret timestamp
    offset; the h static nodes hold distinct fixed host ids drawn once. A
    period counts as a collision when two hopping nodes share an address or a
    hopping node lands on a static address; the frequency converges to the
    analytic collision probability for m = 2**x.
    """
    c = config.cycles
    x = derive_width(config.subnet)
    m = 1 << x
    k = config.iot_count
    h = config.static_count

    topo = _stream_rng(config.seed, _NODE_TOPOLOGY, _STREAM_STATIC)
    static_ids = np.array(sorted(topo.sample(range(m), h)), dtype=np.uint64)
    eprng = _stream_rng(config.seed, _NODE_TOPOLOGY, _STREAM_EPOCHS)
    starts = eprng.sample(range(1 << 40), k)
    params = TFParams(epoch=0.0, zeta=config.zeta, hash=config.hash, subnet=config.subnet)

    ids = np.stack([host_id_sequence(params, s, c) for s in starts])
    if k > 1:
        srt = np.sort(ids, axis=0)
        dup = (srt[1:] == srt[:-1]).any(axis=0)
    else:
        dup = np.zeros(c, dtype=bool)
    if h > 0:
        static_hit = np.isin(ids, static_ids).any(axis=0)
    else:
        static_hit = np.zeros(c, dtype=bool)
    return CollisionTrace(periods=c, collision_periods=int((dup | static_hit).sum()))


# --- parameter-distribution handshake --------------------------------------

HANDSHAKE_HASH_PARAMS = HashParams(l=32, n=75)


@dataclass(frozen=True)
class ParamBundle:
    """Tracking parameters plus the retention window, as distributed to peers."""

    params: TFParams
    lam: float

    def __post_init__(self) -> None:
        if not 0 <= self.lam < self.params.zeta:
            raise ValueError(f"need 0 <= lambda < zeta, got {self.lam} vs {self.params.zeta}")

    def to_text(self) -> str:
        return self.params.to_text() + f"lambda={self.lam!r}\n"

    @classmethod
    def from_text(cls, text: str) -> "ParamBundle":
        fields = parse_kv_block(text)
        if "lambda" not in fields:
            raise ValueError("parameter block is missing key 'lambda'")
        return cls(params=TFParams.from_text(text), lam=float(fields["lambda"]))


class HandshakeError(Exception):
    """Authentication failed; no parameter material was released."""


def auth_response(psk: bytes, nonce: bytes, hash_params: HashParams = HANDSHAKE_HASH_PARAMS) -> int:
    """The expected challenge response: digest of psk || nonce."""
    return digest(psk + nonce, hash_params).value


class CentralNode:
    """Coordinator that authenticates peers and hands out the parameter bundle.

    Challenge-response against a pre-shared key: the peer must return the
    digest of psk || nonce for a nonce this node issued. Nonces are single
    use, so observed responses cannot be replayed. The node also anchors
    coarse clock sync: it carries the reference clock peers sync against,
    and a time source for stamping protocol messages. Instances hold mutable
    nonce state and are not safe for unsynchronized concurrent use.
    """

    def __init__(
        self,
        psk: bytes,
        bundle: ParamBundle,
        seed: int = DEFAULT_SEED,
        hash_params: HashParams = HANDSHAKE_HASH_PARAMS,
        clock: DriftClock = DriftClock(0.0),
        time_source: Callable[[], float] = time.time,
    ) -> None:
        if not psk:
            raise ValueError("pre-shared key must be non-empty")
        self._psk = bytes(psk)
        self._bundle = bundle
        self.hash_params = hash_params
        self.clock = clock
        self.now = time_source
        self._rng = _stream_rng(seed, _NODE_CENTRAL, _STREAM_NONCE)
        self._outstanding: set[bytes] = set()

    def challenge(self) -> bytes:
        nonce = self._rng.randbytes(16)
        self._outstanding.add(nonce)
        return nonce

    def redeem(self, nonce: bytes, response: int) -> ParamBundle:
        if nonce not in self._outstanding:
            raise HandshakeError("unknown or already-used nonce")
        self._outstanding.discard(nonce)
        if response != auth_response(self._psk, nonce, self.hash_params):
            raise HandshakeError("challenge response mismatch")
        return self._bundle


@dataclass(frozen=True)
class HandshakeResult:
    bundle: ParamBundle
    client_clock: DriftClock


def handshake(
    central: CentralNode,
    psk: bytes,
    client_clock: DriftClock = DriftClock(0.0),
    one_way_delays: tuple[float, float] = (0.0, 0.0),
    at_time: float = 0.0,
) -> HandshakeResult:
    """Client side of the exchange: challenge, response, bundle, coarse sync.

    After successful authentication the client clock is corrected against the
    central node's reference clock with a four-timestamp offset exchange over
    the given one-way delays.
    """
    nonce = central.challenge()
    bundle = central.redeem(nonce, auth_response(psk, nonce, central.hash_params))
    synced = coarse_sync(central.clock, client_clock, one_way_delays, start_time=at_time).client
    return HandshakeResult(bundle=bundle, client_clock=synced)
