"""Fixed-point tent-map chaotic hash: the keyed PRNG behind address hopping.

The hash absorbs a message in l-bit blocks into a pair of 64-bit binary
fractions (s, t), runs n tent-map rounds per block, and emits a 2l-bit digest.
Everything on the digest path is 64-bit integer arithmetic with
round-to-nearest-even division, so digests are bit-identical across platforms
and runs; floats never enter the computation.

The construction's contract is statistical, pinned by the test suite:
determinism, uniform output, white-noise autocorrelation, and avalanche on
both input and seed bits. The skew tent map preserves the uniform
distribution on [0, 1] for any peak position, which is what makes the
truncated state suitable as a host-id generator.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _tentcore

SCALE = 1 << 64  # fixed-point unit: a fraction's value is raw / SCALE
MASK = SCALE - 1
CLAMP_LO = 1 << 48  # tent peak clamped to [2**-16, 1 - 2**-16]
CLAMP_HI = SCALE - (1 << 48)
RESCUE = 0x5A5A5A5A5A5A5A5A  # XORed in when the state hits a 0/1 fixed point

DEFAULT_SAMPLE_START = 3_000_000  # first timestamp for statistical sampling


def _jit_enabled() -> bool:
    return _tentcore.AVAILABLE and not os.environ.get("ADDRHOP_NO_JIT")


@dataclass(frozen=True)
class BinaryFraction:
    """A binary fraction in [0, 1] stored as raw / 2**64.

    Exactly 1.0 has no representation of its own; divisions that reach it
    saturate to the all-ones word (1 - 2**-64), which the tent map treats as
    "one". All arithmetic on these values is integer-only.
    """

    raw: int

    def __post_init__(self) -> None:
        if not 0 <= self.raw <= MASK:
            raise ValueError(f"fraction raw value out of range: {self.raw:#x}")

    @classmethod
    def from_float(cls, value: float) -> "BinaryFraction":
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"fraction must lie in [0, 1], got {value}")
        return cls(min(round(value * SCALE), MASK))

    @classmethod
    def from_hex(cls, text: str) -> "BinaryFraction":
        return cls(int(text, 16))

    def to_hex(self) -> str:
        return f"{self.raw:016x}"

    @property
    def value(self) -> float:
        """Float approximation, for display only; never used in the digest path."""
        return self.raw / SCALE


FRACTION_ONE = BinaryFraction(MASK)
DEFAULT_S0 = BinaryFraction(0xAAAA_AAAA_AAAA_AAAA)  # 0.1010...10
DEFAULT_T0 = BinaryFraction(0x5555_5555_5555_5555)  # 0.0101...01


@dataclass(frozen=True)
class HashParams:
    """Block size l, round count n and seed pair of the hash (digest width 2l)."""

    l: int = 16
    n: int = 75
    s0: BinaryFraction = field(default=DEFAULT_S0)
    t0: BinaryFraction = field(default=DEFAULT_T0)

    def __post_init__(self) -> None:
        if not 8 <= self.l <= 64:
            raise ValueError(f"block size l must be in [8, 64], got {self.l}")
        if self.n < 1:
            raise ValueError(f"round count n must be >= 1, got {self.n}")
        for name, frac in (("s0", self.s0), ("t0", self.t0)):
            if not 0 < frac.raw < MASK:
                raise ValueError(f"{name} must lie strictly inside (0, 1)")

    @property
    def digest_bits(self) -> int:
        return 2 * self.l


DEFAULT_HASH_PARAMS = HashParams()


class Digest(NamedTuple):
    """A 2l-bit hash output."""

    value: int
    width: int


def _div_rne(num: int, den: int) -> int:
    """num / den rounded to nearest (ties to even), saturating at the top word."""
    q, r = divmod(num, den)
    r2 = 2 * r
    if r2 > den or (r2 == den and q & 1):
        q += 1
    return q if q <= MASK else MASK


def _clamp_alpha(a: int) -> int:
    return min(max(a, CLAMP_LO), CLAMP_HI)


def _tent_raw(y: int, a: int) -> int:
    a = _clamp_alpha(a)
    if y == a:
        return MASK
    if y < a:
        return _div_rne(y << 64, a) if y else 0
    return _div_rne((SCALE - y) << 64, SCALE - a)


def tent_step(y: BinaryFraction, alpha: BinaryFraction) -> BinaryFraction:
    """One application of the skew tent map with peak alpha.

    Rises linearly from 0 to 1 on [0, alpha], falls back to 0 on (alpha, 1].
    The peak is clamped away from 0 and 1 so both slopes stay finite; the
    result is exact fixed-point evaluation with round-to-nearest-even.
    """
    return BinaryFraction(_tent_raw(y.raw, alpha.raw))


def _pad_blocks(message: bytes, l: int) -> list[int]:
    """Split message into l-bit blocks: append a 1 bit, zero-fill to a block
    boundary, then an l-bit big-endian length block (bit length mod 2**l)."""
    nbits = len(message) * 8
    stream = (int.from_bytes(message, "big") << 1) | 1
    total = nbits + 1
    pad = (-total) % l
    stream <<= pad
    total += pad
    stream = (stream << l) | (nbits & ((1 << l) - 1))
    total += l
    return [(stream >> (total - l * (i + 1))) & ((1 << l) - 1) for i in range(total // l)]


def _spread(block: int, l: int) -> int:
    # replicate the block bits across the 64-bit word, high bits first
    rep = 0
    shift = 64 - l
    while shift > -l:
        rep |= (block << shift) if shift >= 0 else (block >> -shift)
        shift -= l
    return rep & MASK


def _absorb_py(s: int, t: int, block: int, l: int, n: int) -> tuple[int, int]:
    a = _clamp_alpha(_spread(block, l) ^ t)
    ca = SCALE - a
    for i in range(n):
        s = _tent_raw(s, a)
        t = _tent_raw(t, ca)
        r1 = (7 * i + 1) % 64
        r2 = (13 * i + 29) % 64
        if r1:
            s ^= ((t << r1) | (t >> (64 - r1))) & MASK
        else:
            s ^= t
        if r2:
            t ^= ((s << r2) | (s >> (64 - r2))) & MASK
        else:
            t ^= s
        if s == 0 or s == MASK:
            s ^= RESCUE
        if t == 0 or t == MASK:
            t ^= RESCUE
    return s, t


def _digest_blocks_py(blocks: list[int], params: HashParams) -> int:
    s, t = params.s0.raw, params.t0.raw
    for block in blocks:
        s, t = _absorb_py(s, t, block, params.l, params.n)
    l = params.l
    return ((s >> (64 - l)) << l) | (t >> (64 - l))


def digest(message: bytes, params: HashParams = DEFAULT_HASH_PARAMS) -> Digest:
    """Hash an arbitrary-length message to a 2l-bit digest.

    Deterministic in (message, params); the same input yields a bit-identical
    digest on every platform.
    """
    if not message:
        raise ValueError("cannot digest an empty message")
    blocks = _pad_blocks(message, params.l)
    if params.l <= 32 and _jit_enabled():
        arr = np.array([blocks], dtype=np.uint64)
        value = int(
            _tentcore.digest_batch(
                arr, params.l, params.n, np.uint64(params.s0.raw), np.uint64(params.t0.raw)
            )[0]
        )
    else:
        value = _digest_blocks_py(blocks, params)
    return Digest(value=value, width=params.digest_bits)


def encode_timestamp(ts: int) -> bytes:
    """Fixed-width message encoding of a timestamp: 64-bit big-endian unsigned."""
    if not 0 <= ts < SCALE:
        raise ValueError(f"timestamp out of 64-bit range: {ts}")
    return ts.to_bytes(8, "big")


def _timestamp_blocks(start_ts: int, count: int, l: int) -> np.ndarray:
    """Padded block matrix for `count` consecutive timestamp messages."""
    nbits = 64
    total = nbits + 1
    pad = (-total) % l
    total += pad + l
    nb = total // l
    lmask = (1 << l) - 1
    tail = (nbits & lmask) | (1 << (pad + l))  # the 1 bit, zero pad, length block
    out = np.empty((count, nb), dtype=np.uint64)
    for idx in range(count):
        stream = ((start_ts + idx) << (1 + pad + l)) | tail
        for i in range(nb):
            out[idx, i] = (stream >> (total - l * (i + 1))) & lmask
    return out


def digest_sequence(
    start_ts: int, count: int, params: HashParams = DEFAULT_HASH_PARAMS
) -> np.ndarray | list[int]:
    """Digests of `count` consecutive timestamps starting at `start_ts`.

    Returns a uint64 array when the digest fits one word (l <= 32), else a
    list of Python ints. Identical, element for element, to calling
    :func:`digest` on each timestamp.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if not 0 <= start_ts <= SCALE - count:
        raise ValueError("timestamp range exceeds 64 bits")
    if params.l <= 32:
        blocks = _timestamp_blocks(start_ts, count, params.l)
        if _jit_enabled():
            return _tentcore.digest_batch(
                blocks, params.l, params.n, np.uint64(params.s0.raw), np.uint64(params.t0.raw)
            )
        return np.array(
            [_digest_blocks_py([int(b) for b in row], params) for row in blocks],
            dtype=np.uint64,
        )
    return [digest(encode_timestamp(start_ts + i), params).value for i in range(count)]


def h_x(d: Digest, x: int) -> int:
    """The x least significant bits of a digest, as the host-id integer."""
    if x < 0:
        raise ValueError(f"bit count must be non-negative, got {x}")
    if x > d.width:
        raise ValueError(f"cannot take {x} bits from a {d.width}-bit digest")
    return d.value & ((1 << x) - 1)


@dataclass(frozen=True, eq=False)
class WhitenessReport:
    """Autocorrelation and uniformity diagnostics of the host-id stream."""

    autocorr: np.ndarray  # index 0..max_lag; autocorr[0] == 1
    band: float  # +-4/sqrt(count), the white-noise acceptance band
    chi2_stat: float
    chi2_dof: int
    bins: int
    count: int

    @property
    def max_abs_autocorr(self) -> float:
        return float(np.max(np.abs(self.autocorr[1:]))) if len(self.autocorr) > 1 else 0.0

    @property
    def autocorr_within_band(self) -> bool:
        return self.max_abs_autocorr < self.band


def whiteness_report(
    params: HashParams,
    x: int,
    count: int,
    max_lag: int = 100,
    start_ts: int = DEFAULT_SAMPLE_START,
) -> WhitenessReport:
    """Sample autocorrelation and chi-square uniformity of h_x over consecutive timestamps.

    Uses 2**x bins for the chi-square statistic, halving the bin count while
    the expected count per bin falls below 5.
    """
    if count < 1_000:
        raise ValueError(f"need at least 1000 samples for diagnostics, got {count}")
    if not 1 <= x <= params.digest_bits:
        raise ValueError(f"bit count x must be in [1, {params.digest_bits}], got {x}")
    if max_lag < 1 or max_lag >= count:
        raise ValueError("max_lag must be in [1, count)")

    seq = digest_sequence(start_ts, count, params)
    if isinstance(seq, list):
        values = np.array([v & ((1 << x) - 1) for v in seq], dtype=np.float64)
        ints = np.array([v & ((1 << x) - 1) for v in seq], dtype=object)
    else:
        values = (seq & np.uint64((1 << x) - 1)).astype(np.float64)
        ints = seq & np.uint64((1 << x) - 1)

    bins = 1 << x
    while bins > count / 5 and bins > 2:
        bins //= 2
    if bins > count / 5:
        raise ValueError(f"{count} samples are too few even for {bins} bins")
    shift = x - bins.bit_length() + 1
    if isinstance(ints, np.ndarray) and ints.dtype == np.uint64:
        idx = (ints >> np.uint64(shift)).astype(np.int64)
    else:
        idx = np.array([int(v) >> shift for v in ints], dtype=np.int64)
    counts = np.bincount(idx, minlength=bins)
    expected = count / bins
    chi2_stat = float(((counts - expected) ** 2 / expected).sum())

    centered = values - values.mean()
    denom = float(np.dot(centered, centered))
    if denom == 0.0:
        raise ValueError("degenerate constant sequence; cannot compute autocorrelation")
    ac = np.empty(max_lag + 1)
    ac[0] = 1.0
    for lag in range(1, max_lag + 1):
        ac[lag] = float(np.dot(centered[:-lag], centered[lag:])) / denom

    return WhitenessReport(
        autocorr=ac,
        band=4.0 / math.sqrt(count),
        chi2_stat=chi2_stat,
        chi2_dof=bins - 1,
        bins=bins,
        count=count,
    )
