"""Tracking function and hop schedule: timestamp -> subnet address.

The tracking function hashes an integer timestamp (which advances once every
zeta seconds from a secret epoch) and grafts the x lowest digest bits onto a
subnet base address. A hop schedule additionally retains the previous address
for lambda seconds after each hop, so in-flight packets addressed to the old
generation are still accepted.

All functions here are pure: the schedule holds no clock, callers pass local
time explicitly.
"""
from __future__ import annotations

import ipaddress
import math
from dataclasses import dataclass, field

import numpy as np

from .chaos import DEFAULT_HASH_PARAMS, BinaryFraction, HashParams, digest, digest_sequence, encode_timestamp, h_x

Address = ipaddress.IPv4Address | ipaddress.IPv6Address
Network = ipaddress.IPv4Network | ipaddress.IPv6Network


@dataclass(frozen=True)
class SubnetSpec:
    """A subnet given as base address + prefix length; host bits must be zero."""

    network: Network

    @classmethod
    def parse(cls, text: str) -> "SubnetSpec":
        try:
            return cls(ipaddress.ip_network(text, strict=True))
        except ValueError as exc:
            raise ValueError(f"invalid subnet {text!r}: {exc}") from None

    @property
    def base(self) -> Address:
        return self.network.network_address

    @property
    def prefix_len(self) -> int:
        return self.network.prefixlen

    @property
    def address_width(self) -> int:
        return self.network.max_prefixlen

    def __str__(self) -> str:
        return str(self.network)


def derive_width(subnet: SubnetSpec) -> int:
    """Host-bit width x of the subnet: address width minus prefix length."""
    return subnet.address_width - subnet.prefix_len


def assemble(subnet: SubnetSpec, host_id: int) -> Address:
    """Base address with its host bits set to host_id."""
    x = derive_width(subnet)
    if not 0 <= host_id < (1 << x):
        raise ValueError(f"host id {host_id} does not fit in {x} host bits")
    return subnet.base + host_id


@dataclass(frozen=True)
class TFParams:
    """The shared secret parameter bundle defining one node's hop sequence.

    `epoch` anchors the timestamp counter (this offset is the secret the
    scheme rests on), `zeta` is the hop period in seconds. The hash seed pair
    and round count travel in the same bundle even though the secret proper
    is the timestamp anchor.
    """

    epoch: float
    zeta: float
    hash: HashParams = field(default=DEFAULT_HASH_PARAMS)
    subnet: SubnetSpec = field(default_factory=lambda: SubnetSpec.parse("10.0.0.0/24"))

    def __post_init__(self) -> None:
        if not self.zeta > 0:
            raise ValueError(f"zeta must be positive, got {self.zeta}")
        x = derive_width(self.subnet)
        if x > self.hash.digest_bits:
            raise ValueError(
                f"subnet needs {x} host bits but the digest is only {self.hash.digest_bits} bits wide"
            )
        if x > 64:
            raise ValueError(f"host widths beyond 64 bits are not supported (got {x})")

    @property
    def host_bits(self) -> int:
        return derive_width(self.subnet)

    def to_text(self) -> str:
        """Serialize to the key=value block used by the CLI and the handshake."""
        return (
            f"epoch={self.epoch!r}\n"
            f"zeta={self.zeta!r}\n"
            f"l={self.hash.l}\n"
            f"n={self.hash.n}\n"
            f"s0_hex={self.hash.s0.to_hex()}\n"
            f"t0_hex={self.hash.t0.to_hex()}\n"
            f"subnet={self.subnet}\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "TFParams":
        fields = parse_kv_block(text)
        try:
            return cls(
                epoch=float(fields["epoch"]),
                zeta=float(fields["zeta"]),
                hash=HashParams(
                    l=int(fields["l"]),
                    n=int(fields["n"]),
                    s0=BinaryFraction.from_hex(fields["s0_hex"]),
                    t0=BinaryFraction.from_hex(fields["t0_hex"]),
                ),
                subnet=SubnetSpec.parse(fields["subnet"]),
            )
        except KeyError as exc:
            raise ValueError(f"parameter block is missing key {exc.args[0]!r}") from None


def parse_kv_block(text: str) -> dict[str, str]:
    """Parse a UTF-8 key=value block; blank lines and '#' comments ignored."""
    fields: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    return fields


def timestamp_at(local_time: float, params: TFParams) -> int:
    """Integer timestamp at a local clock reading: floor((t - epoch) / zeta)."""
    if local_time < params.epoch:
        raise ValueError(
            f"local time {local_time} precedes the epoch {params.epoch}; counter undefined"
        )
    return math.floor((local_time - params.epoch) / params.zeta)


def host_id_at(params: TFParams, ts: int) -> int:
    return h_x(digest(encode_timestamp(ts), params.hash), params.host_bits)


def address_at(params: TFParams, ts: int) -> Address:
    """The tracking function: subnet base + h_x(digest(timestamp))."""
    return assemble(params.subnet, host_id_at(params, ts))


def host_id_sequence(params: TFParams, start_ts: int, count: int) -> np.ndarray:
    """Host ids for `count` consecutive timestamps (batch form of address_at)."""
    seq = digest_sequence(start_ts, count, params.hash)
    mask = (1 << params.host_bits) - 1
    if isinstance(seq, list):
        return np.array([v & mask for v in seq], dtype=np.uint64)
    return seq & np.uint64(mask)


def address_sequence(params: TFParams, start_ts: int, count: int) -> list[Address]:
    return [assemble(params.subnet, int(h)) for h in host_id_sequence(params, start_ts, count)]


@dataclass(frozen=True)
class HopSchedule:
    """Hop parameters plus the old-address retention window lambda.

    lambda must be shorter than one hop period: behavior with three
    simultaneously valid addresses is undefined by the scheme and rejected.
    """

    params: TFParams
    lam: float

    def __post_init__(self) -> None:
        if not 0 <= self.lam < self.params.zeta:
            raise ValueError(
                f"retention lambda must satisfy 0 <= lambda < zeta, got {self.lam} vs zeta={self.params.zeta}"
            )


def active_addresses(sched: HopSchedule, local_time: float) -> frozenset[Address]:
    """The set of currently valid addresses (one, or two during the overlap).

    Windows are half-open: at exactly epoch + k*zeta generation k becomes
    current and generation k-1 enters its retention, which ends at
    epoch + k*zeta + lambda. During the first period there is no previous
    generation, so the set is a singleton.
    """
    p = sched.params
    k = timestamp_at(local_time, p)
    current = address_at(p, k)
    if k >= 1:
        into_period = local_time - (p.epoch + k * p.zeta)
        if into_period < sched.lam:
            return frozenset((address_at(p, k - 1), current))
    return frozenset((current,))


def accepts(sched: HopSchedule, local_time: float, dst: Address) -> bool:
    """Whether a packet addressed to dst is accepted at this local time."""
    return dst in active_addresses(sched, local_time)
