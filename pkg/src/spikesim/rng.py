"""Counter-based random numbers keyed on (seed, pixel, frame, source).

Every random variate in the simulator is a pure function of the master seed
and the tuple ``(pixel, frame, source, attempt)``, computed with the
Philox4x32-10 block cipher. No generator state is carried between pixels or
frames, so the result never depends on evaluation order or on how pixels
are split across workers.

``pixel`` is the row-major flat index, ``frame`` the readout step (or the
redraw round for fixed-pattern maps) and ``attempt`` counts blocks consumed
by one variate (rejection samplers need more than one). Normal variates come
in Box-Muller pairs: frames ``2j`` and ``2j + 1`` share the block keyed on
``j`` and take its cosine and sine outputs respectively.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

SOURCE_SHOT = 1
SOURCE_THERMAL = 2
SOURCE_ALPHA = 3
SOURCE_DARK = 4
SOURCE_CAP = 5
SOURCE_BIAS = 6

#: Above this photon mean Poisson draws use a rounded Gaussian.
POISSON_EXACT_LIMIT = 1e4

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_U32 = np.uint64(32)
_U11 = np.uint64(11)
_TWO_M53 = 2.0 ** -53


@nb.njit(cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 on a counter of four and a key of two 32-bit words.

    Arguments and results are ``uint64`` values holding 32-bit words.
    """
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = ((p1 >> _U32) ^ c1 ^ k0, p1 & _MASK,
                          (p0 >> _U32) ^ c3 ^ k1, p0 & _MASK)
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@nb.njit(cache=True)
def _uniform_pair(seed, pixel, frame, source, attempt):
    # two doubles in the open interval (0, 1), 53 random bits each
    s = np.uint64(seed)
    w0, w1, w2, w3 = philox4x32(np.uint64(pixel) & _MASK, np.uint64(frame) & _MASK,
                                np.uint64(source) & _MASK, np.uint64(attempt) & _MASK,
                                s & _MASK, s >> _U32)
    x = (w0 << _U32) | w1
    y = (w2 << _U32) | w3
    return (np.float64(x >> _U11) + 0.5) * _TWO_M53, (np.float64(y >> _U11) + 0.5) * _TWO_M53


@nb.njit(cache=True)
def normal_pair(seed, pixel, pair, source):
    """Standard normals of frames ``2 * pair`` and ``2 * pair + 1``."""
    u1, u2 = _uniform_pair(seed, pixel, pair, source, 0)
    r = math.sqrt(-2.0 * math.log(u1))
    return r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)


@nb.njit(cache=True)
def normal_variate(seed, pixel, frame, source):
    z0, z1 = normal_pair(seed, pixel, frame >> 1, source)
    return z0 if frame & 1 == 0 else z1


@nb.njit(cache=True)
def poisson_inversion(lam, exp_neg_lam, seed, pixel, frame, source):
    """Sequential-search inversion for small ``lam``; ``exp_neg_lam`` is ``exp(-lam)``."""
    u, _ = _uniform_pair(seed, pixel, frame, source, 0)
    p = exp_neg_lam
    cdf = p
    k = 0
    while u > cdf and k < 200:
        k += 1
        p *= lam / k
        cdf += p
    return np.float64(k)


@nb.njit(cache=True)
def poisson_variate(lam, seed, pixel, frame, source):
    """Poisson(lam) draw; inversion below 10, PTRS up to the exact limit."""
    if lam <= 0.0:
        return 0.0
    if lam > POISSON_EXACT_LIMIT:
        u1, u2 = _uniform_pair(seed, pixel, frame, source, 0)
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return max(math.floor(lam + math.sqrt(lam) * z + 0.5), 0.0)
    if lam < 10.0:
        return poisson_inversion(lam, math.exp(-lam), seed, pixel, frame, source)
    slam, loglam, b, a, log_inv_alpha, vr = ptrs_constants(lam)
    return poisson_ptrs(lam, slam, loglam, b, a, log_inv_alpha, vr, seed, pixel, frame, source)


@nb.njit(cache=True)
def ptrs_constants(lam):
    """Per-mean constants of the PTRS sampler (reusable while ``lam`` is fixed)."""
    slam = math.sqrt(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    log_inv_alpha = math.log(1.1239 + 1.1328 / (b - 3.4))
    vr = 0.9277 - 3.6224 / (b - 2.0)
    return slam, math.log(lam), b, a, log_inv_alpha, vr


@nb.njit(cache=True)
def poisson_ptrs(lam, slam, loglam, b, a, log_inv_alpha, vr, seed, pixel, frame, source):
    """Transformed rejection with squeeze (Hormann 1993), valid for ``lam >= 10``."""
    attempt = 0
    while True:
        u, v = _uniform_pair(seed, pixel, frame, source, attempt)
        attempt += 1
        u -= 0.5
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return k
        if k < 0.0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + log_inv_alpha - math.log(a / (us * us) + b)
                <= -lam + k * loglam - math.lgamma(k + 1.0)):
            return k


@nb.njit(cache=True)
def _normal_field(seed, frame, source, pixels, out):
    for i in range(pixels.shape[0]):
        out[i] = normal_variate(seed, pixels[i], frame, source)


@nb.njit(cache=True)
def _poisson_field(seed, frame, source, lam, out):
    for i in range(lam.shape[0]):
        out[i] = poisson_variate(lam[i], seed, i, frame, source)


@dataclass(frozen=True)
class KeyedStream:
    """Random state for one (seed, source, frame) triple.

    Two samplers given equal streams return identical values; pixel ``i`` of
    a field depends only on the triple and ``i``.
    """

    seed: int
    source: int
    frame: int = 0

    def standard_normal(self, shape, pixels=None):
        """Normals for every pixel of ``shape`` (or for the flat indices ``pixels``)."""
        if pixels is None:
            pixels = np.arange(int(np.prod(shape)), dtype=np.int64)
        pixels = np.asarray(pixels, dtype=np.int64)
        out = np.empty(pixels.shape[0])
        _normal_field(self.seed, self.frame, self.source, pixels, out)
        return out if shape is None else out.reshape(shape)

    def poisson(self, lam):
        lam = np.asarray(lam, dtype=np.float64)
        flat = np.ascontiguousarray(lam.ravel())
        out = np.empty(flat.shape[0])
        _poisson_field(self.seed, self.frame, self.source, flat, out)
        return out.reshape(lam.shape)
