"""Reproducible Mersenne-Twister random number streams.

The generator is the reference MT19937 (Matsumoto & Nishimura): 624-word
state, ``init_by_array`` seeding, standard tempering, 53-bit doubles.  It is
implemented here directly (rather than through ``numpy.random``) so the hot
integration kernels can draw numbers inside compiled code with a sequence
that is fixed by this file alone.

Parallel streams
----------------
MT19937 has no native notion of streams.  Distinct trajectories get
independently seeded generators via a documented 64-bit splitting rule::

    key(seed, stream_id) = mix64(seed + GOLDEN * (stream_id + 1))  mod 2^64

where ``mix64`` is the splitmix64 finalizer and GOLDEN = 0x9E3779B97F4A7C15.
The 64-bit key is fed to ``init_by_array`` as two 32-bit words (low first).
Identical (seed, stream_id) always reproduce the identical sequence.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["RngStream", "split_seed", "mix64"]

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15

# MT19937 constants
_N = 624
_M = 397
_MATRIX_A = np.uint32(0x9908B0DF)
_UPPER = np.uint32(0x80000000)
_LOWER = np.uint32(0x7FFFFFFF)

# state layout: words 0..623 hold the register, word 624 the read index
STATE_WORDS = _N + 1


def mix64(x):
    """splitmix64 finalizer on 64-bit integers."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def split_seed(seed, stream_id):
    """64-bit sub-stream key for (seed, stream_id); see module docstring."""
    if seed < 0 or stream_id < 0:
        raise ValueError("seed and stream_id must be non-negative")
    return mix64((seed + _GOLDEN * (stream_id + 1)) & _MASK64)


@njit(cache=True)
def _mt_init_genrand(state, s):
    state[0] = np.uint32(s)
    for i in range(1, _N):
        prev = np.uint64(state[i - 1] ^ (state[i - 1] >> np.uint32(30)))
        state[i] = np.uint32((np.uint64(1812433253) * prev + np.uint64(i))
                             & np.uint64(0xFFFFFFFF))
    state[_N] = _N


@njit(cache=True)
def _mt_init_by_array(state, key_lo, key_hi):
    """Reference init_by_array with the two-word key (key_lo, key_hi)."""
    _mt_init_genrand(state, np.uint32(19650218))
    key = np.empty(2, dtype=np.uint64)
    key[0] = key_lo
    key[1] = key_hi
    i = 1
    j = 0
    for _ in range(max(_N, 2)):
        prev = np.uint64(state[i - 1] ^ (state[i - 1] >> np.uint32(30)))
        mixed = (np.uint64(state[i]) ^ (prev * np.uint64(1664525))) + key[j] \
            + np.uint64(j)
        state[i] = np.uint32(mixed & np.uint64(0xFFFFFFFF))
        i += 1
        j += 1
        if i >= _N:
            state[0] = state[_N - 1]
            i = 1
        if j >= 2:
            j = 0
    for _ in range(_N - 1):
        prev = np.uint64(state[i - 1] ^ (state[i - 1] >> np.uint32(30)))
        mixed = (np.uint64(state[i]) ^ (prev * np.uint64(1566083941))) \
            - np.uint64(i)
        state[i] = np.uint32(mixed & np.uint64(0xFFFFFFFF))
        i += 1
        if i >= _N:
            state[0] = state[_N - 1]
            i = 1
    state[0] = np.uint32(0x80000000)
    state[_N] = _N


@njit(cache=True)
def _mt_next_u32(state):
    idx = np.int64(state[_N])
    if idx >= _N:
        # twist
        for k in range(_N):
            y = (state[k] & _UPPER) | (state[(k + 1) % _N] & _LOWER)
            val = state[(k + _M) % _N] ^ (y >> np.uint32(1))
            if y & np.uint32(1):
                val ^= _MATRIX_A
            state[k] = val
        idx = 0
    y = state[idx]
    state[_N] = np.uint32(idx + 1)
    y ^= y >> np.uint32(11)
    y ^= (y << np.uint32(7)) & np.uint32(0x9D2C5680)
    y ^= (y << np.uint32(15)) & np.uint32(0xEFC60000)
    y ^= y >> np.uint32(18)
    return y


@njit(cache=True)
def _mt_next_double(state):
    """53-bit double in [0, 1) (genrand_res53)."""
    a = _mt_next_u32(state) >> np.uint32(5)
    b = _mt_next_u32(state) >> np.uint32(6)
    return (np.float64(a) * 67108864.0 + np.float64(b)) / 9007199254740992.0


@njit(cache=True)
def _mt_normal(state):
    """Standard normal via Box-Muller (two uniforms per draw)."""
    u1 = _mt_next_double(state)
    u2 = _mt_next_double(state)
    return np.sqrt(-2.0 * np.log(1.0 - u1)) * np.cos(2.0 * np.pi * u2)


@njit(cache=True)
def _mt_poisson(state, lam):
    """Poisson draw; Knuth inversion for small means, normal tail otherwise."""
    if lam <= 0.0:
        return 0
    if lam > 50.0:
        n = int(round(lam + np.sqrt(lam) * _mt_normal(state)))
        return max(n, 0)
    limit = np.exp(-lam)
    k = 0
    p = 1.0
    while True:
        p *= _mt_next_double(state)
        if p <= limit:
            return k
        k += 1


@njit(cache=True)
def _mt_trunc_gauss(state, mean, sigma):
    """Gaussian truncated at zero (redraw); returns ``mean`` for sigma = 0."""
    if sigma <= 0.0:
        return mean
    for _ in range(1000):
        v = mean + sigma * _mt_normal(state)
        if v >= 0.0:
            return v
    return 0.0


@njit(cache=True)
def _mt_recoil_direction(state):
    """Unit recoil direction from the sigma+ dipole pattern about z.

    The polar cosine c = u_z has density (3/8)(1 + c^2) on [-1, 1]; inverting
    the CDF leads to the depressed cubic c^3 + 3c = 8u - 4 solved in closed
    form.  Second moments are (3/10, 3/10, 2/5) on (x, y, z).
    """
    u = _mt_next_double(state)
    w = 4.0 * u - 2.0
    s = np.sqrt(w * w + 1.0)
    cz = np.cbrt(w + s) + np.cbrt(w - s)
    if cz > 1.0:
        cz = 1.0
    elif cz < -1.0:
        cz = -1.0
    st = np.sqrt(1.0 - cz * cz)
    phi = 2.0 * np.pi * _mt_next_double(state)
    return st * np.cos(phi), st * np.sin(phi), cz


@njit(cache=True)
def _mt_recoil_batch(state, out):
    for i in range(out.shape[0]):
        ux, uy, uz = _mt_recoil_direction(state)
        out[i, 0] = ux
        out[i, 1] = uy
        out[i, 2] = uz


def _fresh_state(seed, stream_id):
    state = np.zeros(STATE_WORDS, dtype=np.uint32)
    key = split_seed(seed, stream_id)
    _mt_init_by_array(state, np.uint64(key & 0xFFFFFFFF), np.uint64(key >> 32))
    return state


class RngStream:
    """One MT19937 stream, addressed by (seed, stream_id).

    The instance owns the raw state array used by the compiled kernels; the
    Python-facing methods draw from the same sequence.
    """

    algorithm = "MT19937"

    def __init__(self, seed, stream_id=0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.state = _fresh_state(self.seed, self.stream_id)

    def spawn(self, stream_id):
        """Independent stream with the same base seed."""
        return RngStream(self.seed, stream_id)

    def next_u32(self):
        return int(_mt_next_u32(self.state))

    def uniform(self):
        """53-bit double in [0, 1)."""
        return float(_mt_next_double(self.state))

    def normal(self, mean=0.0, sigma=1.0):
        return mean + sigma * float(_mt_normal(self.state))

    def poisson(self, lam):
        return int(_mt_poisson(self.state, float(lam)))

    def trunc_gauss(self, mean, sigma):
        """Gaussian with mean/width, truncated at zero."""
        return float(_mt_trunc_gauss(self.state, mean, sigma))

    def recoil_direction(self):
        return np.array(_mt_recoil_direction(self.state))

    def recoil_directions(self, n):
        """(n, 3) array of emission directions; same sequence as n single draws."""
        out = np.empty((int(n), 3))
        _mt_recoil_batch(self.state, out)
        return out

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"
