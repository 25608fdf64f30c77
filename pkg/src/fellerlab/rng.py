"""Counter-based random streams for reproducible parallel Monte Carlo.

Every random quantity consumed by the simulators is a pure function of

    (seed, domain, path index, step index, slot index)

computed with the Philox4x32-10 block cipher (Salmon et al., "Parallel
random numbers: as easy as 1, 2, 3").  No generator state is carried
between calls, so path i's randomness is identical whether the ensemble
is generated step-major (vectorized), path-major (the compiled kernel)
or split across workers in any order.

The implementation here is vectorized over paths; the compiled kernel
re-implements the identical mapping in C.  The verification suite pins
the cipher against the published Random123 known-answer vectors.

Uniforms are odd 53-bit integers times 2^-53 (exact, never 0 or 1).
Normals are inverse-CDF transforms (scipy's ndtri, the same cephes
routine the compiled kernel calls), which keeps the two backends
bit-identical.
"""

import numpy as np
from scipy.special import ndtri

__all__ = [
    "philox4x32",
    "uniforms",
    "normals",
    "uniform_serial",
    "exponential_kill_times",
    "DOMAIN_GAUSS",
    "DOMAIN_JUMP_COUNT",
    "DOMAIN_JUMP_SIZE",
    "DOMAIN_KILL",
    "DOMAIN_GENERIC",
]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = 0xFFFFFFFF

# stream domains: separate, never-overlapping purposes per (seed, path)
DOMAIN_GAUSS = 0
DOMAIN_JUMP_COUNT = 1
DOMAIN_JUMP_SIZE = 2
DOMAIN_KILL = 3
DOMAIN_GENERIC = 4


def philox4x32(c0, c1, c2, c3, k0, k1, rounds=10):
    """Philox4x32 block function on uint32 arrays; returns four words."""
    c0 = np.asarray(c0, dtype=np.uint32).copy()
    c1 = np.asarray(c1, dtype=np.uint32).copy()
    c2 = np.asarray(c2, dtype=np.uint32).copy()
    c3 = np.asarray(c3, dtype=np.uint32).copy()
    k0 = int(k0) & _MASK32
    k1 = int(k1) & _MASK32
    for _ in range(rounds):
        p0 = c0.astype(np.uint64) * _M0
        p1 = c2.astype(np.uint64) * _M1
        hi0 = (p0 >> np.uint64(32)).astype(np.uint32)
        lo0 = p0.astype(np.uint32)
        hi1 = (p1 >> np.uint64(32)).astype(np.uint32)
        lo1 = p1.astype(np.uint32)
        c0, c1, c2, c3 = (
            hi1 ^ c1 ^ np.uint32(k0),
            lo1,
            hi0 ^ c3 ^ np.uint32(k1),
            lo0,
        )
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def _key(seed):
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return seed & _MASK32, seed >> 32


def _u53_pair(w0, w1, w2, w3):
    """Two uniforms in (0, 1) from one 128-bit block.

    With v the 52-bit integer (w_lo | low 20 bits of w_hi << 32), the
    draw is (2v + 1) * 2^-53: an odd 53-bit integer times a power of two,
    hence exactly representable, never 0 and never 1.
    """
    v0 = w0.astype(np.uint64) | ((w1.astype(np.uint64) & np.uint64(0xFFFFF)) << np.uint64(32))
    v1 = w2.astype(np.uint64) | ((w3.astype(np.uint64) & np.uint64(0xFFFFF)) << np.uint64(32))
    scale = 2.0**-53
    u0 = ((v0 << np.uint64(1)) | np.uint64(1)).astype(np.float64) * scale
    u1 = ((v1 << np.uint64(1)) | np.uint64(1)).astype(np.float64) * scale
    return u0, u1


def uniforms(seed, domain, paths, step, slots):
    """(n_paths, slots) uniforms in (0, 1) for a given step.

    Counter layout: (path, step, slot block, domain); each block yields
    two lanes, lane = slot % 2.
    """
    paths = np.asarray(paths, dtype=np.uint32)
    n = paths.shape[0]
    nblocks = (slots + 1) // 2
    c0 = np.repeat(paths, nblocks)
    c1 = np.full(n * nblocks, step, dtype=np.uint32)
    c2 = np.tile(np.arange(nblocks, dtype=np.uint32), n)
    c3 = np.full(n * nblocks, domain, dtype=np.uint32)
    k0, k1 = _key(seed)
    w0, w1, w2, w3 = philox4x32(c0, c1, c2, c3, k0, k1)
    u0, u1 = _u53_pair(w0, w1, w2, w3)
    out = np.empty((n, 2 * nblocks))
    out[:, 0::2] = u0.reshape(n, nblocks)
    out[:, 1::2] = u1.reshape(n, nblocks)
    return out[:, :slots]


def normals(seed, domain, paths, step, slots):
    """(n_paths, slots) standard normals via inverse CDF."""
    return ndtri(uniforms(seed, domain, paths, step, slots))


def uniform_serial(seed, domain, paths, serials):
    """One uniform per (path, serial) pair; used for jump-size draws.

    ``paths`` and ``serials`` are equal-length integer arrays; the serial
    is a per-path running index, so the draw is independent of how work
    is batched.
    """
    paths = np.asarray(paths, dtype=np.uint32)
    serials = np.asarray(serials, dtype=np.uint64)
    c0 = paths
    c1 = (serials & np.uint64(_MASK32)).astype(np.uint32)
    c2 = (serials >> np.uint64(32)).astype(np.uint32)
    c3 = np.full(paths.shape, domain, dtype=np.uint32)
    k0, k1 = _key(seed)
    w0, w1, w2, w3 = philox4x32(c0, c1, c2, c3, k0, k1)
    u0, _ = _u53_pair(w0, w1, w2, w3)
    return u0


def exponential_kill_times(seed, paths, rate):
    """Exp(rate) killing clocks, one per path, drawn up front."""
    u = uniforms(seed, DOMAIN_KILL, np.asarray(paths), 0, 1)[:, 0]
    return -np.log(u) / float(rate)
