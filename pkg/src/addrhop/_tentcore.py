"""Compiled batch kernel for the fixed-point tent-map digest.

Implements exactly the same 64-bit integer rounds as the pure-Python path in
:mod:`addrhop.chaos` (verified bit-for-bit by the test suite) and exists only
for speed: statistical diagnostics and simulator runs need 1e5+ digests.
The 128-by-64-bit division inside every tent step is done with the classic
two-digit normalized long division (Hacker's Delight divlu), since neither
numpy nor numba has a 128-bit integer type.

Only digest widths that fit one machine word are handled here (block size
l <= 32, digest 2l <= 64 bits); wider digests take the pure-Python path.
"""
from __future__ import annotations

import numpy as np

try:
    import numba
    from numba import njit, prange, uint64

    # skip the TBB probe (noisy warning on older TBB); layer choice does not
    # affect results, every output element is computed independently
    numba.config.THREADING_LAYER = "workqueue"

    AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only on numba-less installs
    AVAILABLE = False

_U = np.uint64
_MASK = _U(0xFFFFFFFFFFFFFFFF)
_B32 = _U(0x100000000)
_CLAMP_LO = _U(1 << 48)
_CLAMP_HI = _U((1 << 64) - (1 << 48))
_RESCUE = _U(0x5A5A5A5A5A5A5A5A)
_ZERO = _U(0)
_ONE = _U(1)

if AVAILABLE:

    @njit(uint64(uint64), cache=True)
    def _nlz(x):
        n = _ZERO
        while (x & _U(0x8000000000000000)) == _ZERO:
            x = x << _ONE
            n += _ONE
        return n

    @njit(uint64(uint64, uint64), cache=True)
    def _div_rne(hi, d):
        # round-to-nearest-even of (hi:0) / d, 0 < hi < d, saturating at 2**64-1
        s = _nlz(d)
        dn = d << s
        vn1 = dn >> _U(32)
        vn0 = dn & _U(0xFFFFFFFF)
        un64 = hi << s  # low word of the numerator is zero
        un1 = _ZERO
        un0 = _ZERO

        q1 = un64 // vn1
        rhat = un64 - q1 * vn1
        while True:
            if q1 >= _B32 or q1 * vn0 > (rhat << _U(32)) + un1:
                q1 -= _ONE
                rhat += vn1
                if rhat >= _B32:
                    break
            else:
                break
        un21 = (un64 << _U(32)) + un1 - q1 * dn
        q0 = un21 // vn1
        rhat = un21 - q0 * vn1
        while True:
            if q0 >= _B32 or q0 * vn0 > (rhat << _U(32)) + un0:
                q0 -= _ONE
                rhat += vn1
                if rhat >= _B32:
                    break
            else:
                break
        q = (q1 << _U(32)) | q0
        r = ((un21 << _U(32)) + un0 - q0 * dn) >> s

        rem2 = d - r
        if r > rem2 or (r == rem2 and (q & _ONE) == _ONE):
            if q == _MASK:
                return _MASK
            q += _ONE
        return q

    @njit(uint64(uint64, uint64), cache=True)
    def _tent(y, a):
        if a < _CLAMP_LO:
            a = _CLAMP_LO
        elif a > _CLAMP_HI:
            a = _CLAMP_HI
        if y == a:
            return _MASK
        if y < a:
            if y == _ZERO:
                return _ZERO
            return _div_rne(y, a)
        return _div_rne(_ZERO - y, _ZERO - a)

    @njit(cache=True)
    def _absorb(s, t, block, l, n):
        # replicate the l block bits across the word, high bits first
        rep = _ZERO
        shift = 64 - l
        while shift > -l:
            if shift >= 0:
                rep |= block << _U(shift)
            else:
                rep |= block >> _U(-shift)
            shift -= l
        a = rep ^ t
        if a < _CLAMP_LO:
            a = _CLAMP_LO
        elif a > _CLAMP_HI:
            a = _CLAMP_HI
        ca = _ZERO - a
        for i in range(n):
            s = _tent(s, a)
            t = _tent(t, ca)
            r1 = (7 * i + 1) % 64
            r2 = (13 * i + 29) % 64
            if r1:
                s ^= (t << _U(r1)) | (t >> _U(64 - r1))
            else:
                s ^= t
            if r2:
                t ^= (s << _U(r2)) | (s >> _U(64 - r2))
            else:
                t ^= s
            if s == _ZERO or s == _MASK:
                s ^= _RESCUE
            if t == _ZERO or t == _MASK:
                t ^= _RESCUE
        return s, t

    @njit(parallel=True, cache=True)
    def digest_batch(blocks, l, n, s0, t0):
        """Digest one message per row of `blocks`; valid for l <= 32."""
        count = blocks.shape[0]
        nb = blocks.shape[1]
        out = np.empty(count, dtype=np.uint64)
        for j in prange(count):
            s = s0
            t = t0
            for bi in range(nb):
                s, t = _absorb(s, t, blocks[j, bi], l, n)
            out[j] = ((s >> _U(64 - l)) << _U(l)) | (t >> _U(64 - l))
        return out

else:  # pragma: no cover
    digest_batch = None
