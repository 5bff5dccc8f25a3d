"""Batch-norm freezing, linear fusion, and full quantization.

Frozen BN is a per-channel affine map, i.e. a 1x1 convolution with a
diagonal weight matrix; it folds into the following linear layer in double
precision and only the fused result is quantized.  Inference never executes
BN separately.

Conventions: activations are row vectors, so a linear layer is y = x @ w + b
with w shaped [C_in, C_out].  Quantization maps every weight and bias entry
to the Q6.10 grid with a single global scale (no per-channel scale factors
and no intermediate requantization), trading flexibility for bit-exact
composability across the kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fxp
from .errors import DomainError


@dataclass
class BNParams:
    """Frozen batch-norm statistics and affine parameters, length C each."""

    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    eps: float = 1e-5

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.var = np.asarray(self.var, dtype=np.float64)
        c = self.gamma.shape
        if not (self.beta.shape == c and self.mean.shape == c and self.var.shape == c):
            raise DomainError("BN parameter vectors must share one length")
        if np.any(self.var < 0):
            raise DomainError("variances must be nonnegative")
        if self.eps <= 0:
            raise DomainError("eps must be positive")

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]


@dataclass
class LinearParams:
    """Real-valued linear layer: w [C_in, C_out], b [C_out]."""

    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[1],):
            raise DomainError(f"inconsistent linear shapes {self.w.shape} / {self.b.shape}")


@dataclass
class FusedLinear:
    """Quantized layer: raw weight matrix, raw bias vector, provenance note,
    and the count of entries that saturated during quantization."""

    w: np.ndarray
    b: np.ndarray
    note: str = ""
    saturated: int = 0


def freeze_bn(bn: BNParams) -> tuple[np.ndarray, np.ndarray]:
    """Frozen BN as a 1x1 convolution: diagonal weight gamma/sqrt(var+eps)
    and bias beta - gamma*mean/sqrt(var+eps)."""
    inv = 1.0 / np.sqrt(bn.var + bn.eps)
    return np.diag(bn.gamma * inv), bn.beta - bn.gamma * bn.mean * inv


def fuse_bn_linear(bn: BNParams, lin: LinearParams) -> tuple[np.ndarray, np.ndarray]:
    """Fold BN into the following linear layer (double precision).

    Row-vector form of W = W_linear . W_bn and b = W_linear . b_bn + b_linear:
    the diagonal scales the rows of w, and the BN bias propagates through w.
    """
    if bn.channels != lin.w.shape[0]:
        raise DomainError(
            f"BN width {bn.channels} does not match linear input {lin.w.shape[0]}")
    w_bn, b_bn = freeze_bn(bn)
    scale = np.diag(w_bn)
    return lin.w * scale[:, None], b_bn @ lin.w + lin.b


def fold_q_scale(wq: LinearParams, head_dim: int) -> LinearParams:
    """Pre-scale the Q projection by 1/sqrt(head_dim) so attention scores
    need no scaling stage."""
    if head_dim < 1:
        raise DomainError("head_dim must be positive")
    s = 1.0 / np.sqrt(float(head_dim))
    return LinearParams(w=wq.w * s, b=wq.b * s)


def quantize_linear(w, b, note: str = "") -> FusedLinear:
    """Quantize weights and biases to Q6.10 (round-half-up, saturating).

    Saturated entries are counted and reported, not rejected; callers decide
    whether a nonzero count is acceptable.
    """
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
        raise DomainError("parameters must be finite")
    sat = int(np.sum(np.floor(w * fxp.ONE + 0.5) > fxp.FX_MAX)
              + np.sum(np.floor(w * fxp.ONE + 0.5) < fxp.FX_MIN)
              + np.sum(np.floor(b * fxp.ONE + 0.5) > fxp.FX_MAX)
              + np.sum(np.floor(b * fxp.ONE + 0.5) < fxp.FX_MIN))
    return FusedLinear(w=fxp.from_real_arr(w), b=fxp.from_real_arr(b),
                       note=note, saturated=sat)


def fuse_and_quantize(bn: BNParams | None, lin: LinearParams,
                      note: str = "") -> FusedLinear:
    """Convenience path: fold BN (when present) then quantize."""
    if bn is None:
        return quantize_linear(lin.w, lin.b, note=note)
    w, b = fuse_bn_linear(bn, lin)
    return quantize_linear(w, b, note=note or "bn-fused")
