"""Numpy fallback for the hot kernels.

Bit-identical twin of the compiled core in ``_corefast``: same Q6.10
saturation, rounding, and shift semantics, expressed with vectorized
integer ops instead of C loops.  Selected automatically when the extension
is not built (see ``_backend``).
"""

import numpy as np

NAME = "numpy"

FX_MIN = -32768
FX_MAX = 32767


def _sat16(v):
    return np.clip(v, FX_MIN, FX_MAX)


def mul_log2e_i16(x):
    x32 = x.astype(np.int32)
    t = _sat16(x32 + (x32 >> 1))
    return _sat16(t - (x32 >> 4)).astype(np.int16)


def _exp2_i32(x32, k, b):
    ip = x32 >> 10
    fr = x32 & 1023
    seg = fr >> 7
    kk = k.astype(np.int32)[seg]
    bb = b.astype(np.int32)[seg]
    m = _sat16(((kk * fr + 512) >> 10) + bb)
    left = _sat16(m << np.clip(ip, 0, 4))
    right = m >> np.clip(-ip, 0, 15)
    out = np.where(ip >= 0, left, right)
    out = np.where(ip > 4, FX_MAX, out)
    out = np.where(ip < -15, 0, out)
    return out


def exp2_i16(x, k, b):
    return _exp2_i32(x.astype(np.int32), k, b).astype(np.int16)


def _lod_i32(f):
    # bit_length via frexp; exact for f < 2**24
    bl = np.frexp(f.astype(np.float64))[1].astype(np.int32)
    w = bl - 11
    m = np.where(w > 0, f >> np.clip(w, 0, 31), f << np.clip(-w, 0, 31))
    return w, m


def _divexp_i32(f1, f2):
    w1, m1 = _lod_i32(f1)
    w2, m2 = _lod_i32(f2)
    e1 = _sat16(m1 + (w1 << 10))
    e2 = _sat16(m2 + (w2 << 10))
    return _sat16(e1 - e2)


def gelu_i16(x, k, b):
    x32 = x.astype(np.int32)
    ax = np.where(x32 < 0, np.minimum(-x32, FX_MAX), x32)
    sq = _sat16((ax * ax + 512) >> 10)
    cu = _sat16((sq * ax + 512) >> 10)
    c2 = _sat16((cu >> 5) + (cu >> 6))
    u = _sat16(ax + c2)
    s = _sat16(-_sat16(u << 1))
    s = _sat16(s - (u >> 2))
    s = _sat16(s - (u >> 4))
    den = _sat16(_exp2_i32(s, k, b) + 1024)
    e = _divexp_i32(np.maximum(ax, 1), den)
    mag = _exp2_i32(e, k, b)
    out = np.where(x32 > 0, mag, _sat16(x32 + mag))
    return np.where(x32 == 0, 0, out).astype(np.int16)


def softmax_rows_i16(x, k, b):
    x32 = x.astype(np.int32)
    xm = x32.max(axis=1, keepdims=True)
    d = _sat16(x32 - xm)
    v = _sat16(_sat16(d + (d >> 1)) - (d >> 4))
    num = _exp2_i32(v, k, b)
    total = _sat16(num.sum(axis=1, dtype=np.int64)).astype(np.int32)
    if np.any(total <= 0):
        raise ValueError("softmax denominator underflowed to zero")
    w1, m1 = _lod_i32(np.maximum(num, 1))
    w2, m2 = _lod_i32(total)
    e1 = _sat16(m1 + (w1 << 10))
    e2 = _sat16(m2 + (w2 << 10))[:, None]
    out = _exp2_i32(_sat16(e1 - e2), k, b)
    return np.where(num == 0, 0, out).astype(np.int16)
