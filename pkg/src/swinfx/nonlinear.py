"""Approximate softmax (SCU) and GELU (GCU) pipelines plus exact references.

The softmax unit runs four stages: max search, base-2 exponentiation of the
max-subtracted inputs (via the shift-add log2(e) multiplier), an exact adder
tree, and a log-domain division whose exponent feeds the exponential unit a
second time.  The GELU unit evaluates the odd cubic polynomial with shift-add
constant multipliers, exponentiates, and reuses the same division unit with
1 added to the denominator.

``softmax_row`` and ``gelu`` are the scalar, stage-by-stage definitions;
``softmax_rows`` and ``gelu_arr`` are the batch kernels dispatched to the
active backend and are bit-identical to the scalar path (parity-tested).

Negative GELU inputs use the reflection gelu(x) = x + gelu(|x|), which is
exact for the reference function and keeps the division numerator positive
as the leading-one detector requires.
"""

from __future__ import annotations

import numpy as np

from . import approx, fxp
from .approx import DEFAULT_TABLE, SegmentTable
from .errors import DomainError

SOFTMAX_MAX_LEN = 64
MASK_OFF_RAW = fxp.from_real(-16.0)   # additive mask for disallowed positions


def softmax_reference(row) -> np.ndarray:
    """Exact max-subtracted softmax in double precision (the oracle)."""
    row = np.asarray(row, dtype=np.float64)
    if row.size < 1:
        raise DomainError("softmax needs at least one element")
    e = np.exp(row - row.max())
    return e / e.sum()


def gelu_reference(x: float) -> float:
    """Tanh-form GELU in double precision (the oracle)."""
    return 0.5 * x * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (x + 0.044715 * x ** 3)))


def softmax_row(values, mask=None, table: SegmentTable = DEFAULT_TABLE) -> np.ndarray:
    """One softmax row through the four-stage fixed-point pipeline.

    ``values`` (and the optional additive ``mask``) are raw Q6.10 words;
    the masked row is formed with saturating adds before the max search, so
    a constant shift of all inputs cancels exactly in stage two.
    """
    vals = [int(v) for v in np.asarray(values).ravel()]
    n = len(vals)
    if not 1 <= n <= SOFTMAX_MAX_LEN:
        raise DomainError(f"softmax row length {n} outside [1, {SOFTMAX_MAX_LEN}]")
    if mask is not None:
        mvals = [int(m) for m in np.asarray(mask).ravel()]
        if len(mvals) != n:
            raise DomainError("mask length must match row length")
        vals = [fxp.add_sat(v, m) for v, m in zip(vals, mvals)]

    x_max, _ = approx.find_max(vals)
    nums = [approx.exp2(approx.mul_log2e(fxp.sub_sat(v, x_max)), table) for v in vals]
    total = fxp.sat(sum(nums))   # exact adder tree, folded to Q6.10
    if total <= 0:
        raise DomainError("softmax denominator underflowed to zero")
    out = [0 if num == 0
           else approx.exp2(approx.div_exponent(num, total), table)
           for num in nums]
    return np.array(out, dtype=np.int16)


def softmax_rows(x, mask=None, table: SegmentTable = DEFAULT_TABLE) -> np.ndarray:
    """Batch softmax over the rows of a raw [r, n] matrix (backend kernel)."""
    from ._backend import kernels
    x = np.ascontiguousarray(x, dtype=np.int16)
    if x.ndim != 2 or not 1 <= x.shape[1] <= SOFTMAX_MAX_LEN:
        raise DomainError("softmax_rows expects [rows, n] with 1 <= n <= 64")
    if mask is not None:
        x = fxp.add_sat_arr(x, np.ascontiguousarray(mask, dtype=np.int16))
    try:
        return kernels.softmax_rows_i16(x, table.k, table.b)
    except ValueError as e:
        raise DomainError(str(e)) from None


def gelu_poly_s(x: int) -> int:
    """Cubic exponent polynomial s(x) = C1*(x + C2*x**3), all shift-add.

    C2 = 0.000011b = (t >> 5) + (t >> 6); C1 = -10.0101b applied as
    -(t << 1) - (t >> 2) - (t >> 4).  Evaluated on the magnitude with the
    sign restored afterwards, which keeps the function exactly odd (the
    round-half-up product is not).
    """
    ax = fxp.abs_sat(x)
    sq = fxp.mul(ax, ax)
    cu = fxp.mul(sq, ax)
    c2 = fxp.add_sat(fxp.shift(cu, -5), fxp.shift(cu, -6))
    u = fxp.add_sat(ax, c2)
    s = fxp.neg_sat(fxp.shift(u, 1))
    s = fxp.sub_sat(s, fxp.shift(u, -2))
    s = fxp.sub_sat(s, fxp.shift(u, -4))
    return s if x >= 0 else fxp.neg_sat(s)


def gelu(x: int, table: SegmentTable = DEFAULT_TABLE) -> int:
    """Fixed-point GELU: x / (1 + 2**s(x)) evaluated through the division
    unit on the magnitude, reflected for negative inputs."""
    if x == 0:
        return 0
    ax = fxp.abs_sat(x)
    d = approx.exp2(gelu_poly_s(ax), table)
    e = approx.div_exponent(ax, d, add_one_to_denominator=True)
    mag = approx.exp2(e, table)
    return mag if x > 0 else fxp.add_sat(x, mag)


def gelu_arr(x, table: SegmentTable = DEFAULT_TABLE) -> np.ndarray:
    """Elementwise GELU over a raw array (backend kernel)."""
    from ._backend import kernels
    x = np.ascontiguousarray(x, dtype=np.int16)
    return kernels.gelu_i16(x.ravel(), table.k, table.b).reshape(x.shape)
