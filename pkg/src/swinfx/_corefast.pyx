"""Compiled kernel core: scalar C loops for the Q6.10 datapaths.

Bit-identical twin of the numpy fallback in ``_corepy``; the parity test
sweeps both over the full 16-bit input space.  Built optionally by setup.py.
"""

import numpy as np

from libc.stdint cimport int16_t, int32_t, int64_t

NAME = "compiled"

cdef int32_t _FX_MAX = 32767
cdef int32_t _FX_MIN = -32768


cdef inline int32_t csat16(int64_t v) nogil:
    if v > 32767:
        return 32767
    if v < -32768:
        return -32768
    return <int32_t> v


cdef inline int32_t cmul_log2e(int32_t x) nogil:
    cdef int32_t t = csat16(x + (x >> 1))
    return csat16(t - (x >> 4))


cdef inline int32_t cexp2(int32_t x, const int16_t[:] k, const int16_t[:] b) nogil:
    cdef int32_t ip = x >> 10
    cdef int32_t fr = x & 1023
    cdef int32_t s, m
    if ip > 4:
        return _FX_MAX
    if ip < -15:
        return 0
    s = fr >> 7
    m = csat16(((k[s] * fr + 512) >> 10) + b[s])
    if ip >= 0:
        return csat16(<int64_t> m << ip)
    return m >> (-ip)


cdef inline void clod(int32_t f, int32_t* w, int32_t* m) nogil:
    cdef int32_t bl = 0
    cdef int32_t t = f
    while t > 0:
        bl += 1
        t >>= 1
    w[0] = bl - 11
    if w[0] > 0:
        m[0] = f >> w[0]
    else:
        m[0] = f << (-w[0])


cdef inline int32_t cdivexp(int32_t f1, int32_t f2) nogil:
    cdef int32_t w1, m1, w2, m2, e1, e2
    clod(f1, &w1, &m1)
    clod(f2, &w2, &m2)
    e1 = csat16(m1 + (w1 << 10))
    e2 = csat16(m2 + (w2 << 10))
    return csat16(e1 - e2)


cdef inline int32_t cgelu(int32_t x, const int16_t[:] k, const int16_t[:] b) nogil:
    cdef int32_t ax, sq, cu, c2, u, s, den, mag
    if x == 0:
        return 0
    ax = -x if x < 0 else x
    if ax > _FX_MAX:
        ax = _FX_MAX
    sq = csat16((<int64_t> ax * ax + 512) >> 10)
    cu = csat16((<int64_t> sq * ax + 512) >> 10)
    c2 = csat16((cu >> 5) + (cu >> 6))
    u = csat16(ax + c2)
    s = csat16(-csat16(u << 1))
    s = csat16(s - (u >> 2))
    s = csat16(s - (u >> 4))
    den = csat16(cexp2(s, k, b) + 1024)
    mag = cexp2(cdivexp(ax, den), k, b)
    if x > 0:
        return mag
    return csat16(x + mag)


def mul_log2e_i16(const int16_t[:] x):
    cdef Py_ssize_t n = x.shape[0]
    out = np.empty(n, dtype=np.int16)
    cdef int16_t[:] o = out
    cdef Py_ssize_t i
    for i in range(n):
        o[i] = <int16_t> cmul_log2e(x[i])
    return out


def exp2_i16(const int16_t[:] x, const int16_t[:] k, const int16_t[:] b):
    cdef Py_ssize_t n = x.shape[0]
    out = np.empty(n, dtype=np.int16)
    cdef int16_t[:] o = out
    cdef Py_ssize_t i
    for i in range(n):
        o[i] = <int16_t> cexp2(x[i], k, b)
    return out


def gelu_i16(const int16_t[:] x, const int16_t[:] k, const int16_t[:] b):
    cdef Py_ssize_t n = x.shape[0]
    out = np.empty(n, dtype=np.int16)
    cdef int16_t[:] o = out
    cdef Py_ssize_t i
    for i in range(n):
        o[i] = <int16_t> cgelu(x[i], k, b)
    return out


def softmax_rows_i16(const int16_t[:, :] x, const int16_t[:] k, const int16_t[:] b):
    cdef Py_ssize_t rows = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    out = np.empty((rows, n), dtype=np.int16)
    nums = np.empty(n, dtype=np.int32)
    cdef int16_t[:, :] o = out
    cdef int32_t[:] num = nums
    cdef Py_ssize_t r, j
    cdef int32_t xm, d, total_s
    cdef int64_t total
    cdef bint underflow = False
    for r in range(rows):
        xm = x[r, 0]
        for j in range(1, n):
            if x[r, j] > xm:
                xm = x[r, j]
        total = 0
        for j in range(n):
            d = csat16(<int64_t> x[r, j] - xm)
            num[j] = cexp2(cmul_log2e(d), k, b)
            total += num[j]
        total_s = csat16(total)
        if total_s <= 0:
            underflow = True
            break
        for j in range(n):
            if num[j] == 0:
                o[r, j] = 0
            else:
                o[r, j] = <int16_t> cexp2(cdivexp(num[j], total_s), k, b)
    if underflow:
        raise ValueError("softmax denominator underflowed to zero")
    return out
