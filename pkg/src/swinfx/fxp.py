"""Q6.10 saturating fixed-point arithmetic.

Every value in the device path is a 16-bit two's-complement raw word
interpreted at scale 2**-10: one sign-weighted bit, 5 integer bits, 10
fraction bits.  Representable range is [-32, 32 - 2**-10].  All constructors
and arithmetic saturate instead of wrapping; multiplication rounds half-up;
right shifts are arithmetic (round toward -inf), matching hardware shifters.

Dot products accumulate raw products at scale 2**-20 in a 32-bit
two's-complement accumulator (wraparound, like a DSP accumulator register)
and fold down to Q6.10 once per output element with round-half-up followed
by saturation.

Scalar functions here operate on plain Python ints holding the raw word;
the *_arr variants operate elementwise on numpy int16 arrays with identical
bit-level results.  All functions are pure and thread-safe.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

FRAC_BITS = 10
ONE = 1 << FRAC_BITS            # raw value of 1.0
HALF_ULP = 1 << (FRAC_BITS - 1)  # rounding bias for the 2**-20 -> 2**-10 fold
FX_MAX = 32767                  # 32 - 2**-10
FX_MIN = -32768                 # -32
ACC_BITS = 32


def sat(v: int) -> int:
    """Clamp an integer to the 16-bit raw range."""
    if v > FX_MAX:
        return FX_MAX
    if v < FX_MIN:
        return FX_MIN
    return v


def wrap32(v: int) -> int:
    """Reduce an integer to 32-bit two's-complement (accumulator width)."""
    return ((v + (1 << 31)) & 0xFFFFFFFF) - (1 << 31)


def from_real(v: float) -> int:
    """Nearest Q6.10 raw word for a real value (round-half-up, saturating)."""
    if not math.isfinite(v):
        raise DomainError(f"cannot quantize non-finite value {v!r}")
    return sat(math.floor(v * ONE + 0.5))


def from_real_strict(v: float) -> int:
    """Like from_real but raises instead of silently saturating."""
    raw = math.floor(v * ONE + 0.5) if math.isfinite(v) else None
    if raw is None or raw > FX_MAX or raw < FX_MIN:
        raise DomainError(f"value {v!r} out of Q6.10 range [-32, 32)")
    return raw


def to_real(raw: int) -> float:
    return raw / ONE


def add_sat(a: int, b: int) -> int:
    return sat(a + b)


def sub_sat(a: int, b: int) -> int:
    return sat(a - b)


def neg_sat(a: int) -> int:
    return sat(-a)


def abs_sat(a: int) -> int:
    return sat(-a) if a < 0 else a


def mul(a: int, b: int) -> int:
    """Q6.10 product: 32-bit product at 2**-20, round-half-up fold, saturate."""
    return sat((a * b + HALF_ULP) >> FRAC_BITS)


def shift(a: int, k: int) -> int:
    """Arithmetic shift by k (left saturating for k>0, floor right for k<0)."""
    if abs(k) > 15:
        raise DomainError(f"shift amount {k} exceeds |15|")
    if k >= 0:
        return sat(a << k)
    return a >> -k


def fold_acc(acc: int) -> int:
    """Fold a 2**-20 scale accumulator down to a Q6.10 raw word."""
    return sat((wrap32(acc) + HALF_ULP) >> FRAC_BITS)


# ---------------------------------------------------------------------------
# Array variants (int16 in, int16 out; intermediate math in int32/int64)
# ---------------------------------------------------------------------------

def _as_i16(a) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype != np.int16:
        raise DomainError(f"expected int16 raw array, got {a.dtype}")
    return a


def sat_arr(v: np.ndarray) -> np.ndarray:
    return np.clip(v, FX_MIN, FX_MAX).astype(np.int16)


def from_real_arr(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise DomainError("cannot quantize non-finite values")
    return sat_arr(np.floor(v * ONE + 0.5).astype(np.int64))


def to_real_arr(raw) -> np.ndarray:
    return _as_i16(raw).astype(np.float64) / ONE


def add_sat_arr(a, b) -> np.ndarray:
    return sat_arr(_as_i16(a).astype(np.int32) + _as_i16(b).astype(np.int32))


def sub_sat_arr(a, b) -> np.ndarray:
    return sat_arr(_as_i16(a).astype(np.int32) - _as_i16(b).astype(np.int32))


def mul_arr(a, b) -> np.ndarray:
    p = _as_i16(a).astype(np.int32) * _as_i16(b).astype(np.int32)
    return sat_arr((p + HALF_ULP) >> FRAC_BITS)


def fold_acc_arr(acc) -> np.ndarray:
    """Vector fold of 2**-20 accumulators (int64 in) to Q6.10 int16."""
    acc = np.asarray(acc, dtype=np.int64)
    wrapped = ((acc + (1 << 31)) % (1 << 32)) - (1 << 31)
    return sat_arr((wrapped + HALF_ULP) >> FRAC_BITS)
