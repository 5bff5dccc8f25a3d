"""Tiled matrix multiplication engine and layout transforms.

Matrices are dense row-major numpy int16 arrays of Q6.10 raw words.  The
engine computes blocked products: every output element accumulates its full
inner dimension in a 32-bit accumulator (ascending k, tile by tile) and
folds to Q6.10 exactly once, so the result is bit-identical to a naive
triple loop regardless of tile sizes or scheduling.  Inner and output
dimensions that do not divide the tile sizes are zero padded (the K-transpose
policy applied uniformly); padding never changes the valid region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fxp
from .errors import DomainError


@dataclass(frozen=True)
class TileConfig:
    """MMU tile geometry: m2 rows per block (window size squared), ci inner
    width, co output width.  The hardware configuration is (49, 32, 32)."""

    m2: int = 49
    ci: int = 32
    co: int = 32

    def __post_init__(self):
        if self.m2 < 1 or self.ci < 1 or self.co < 1:
            raise DomainError(f"tile sizes must be positive, got {self}")

    @property
    def multipliers(self) -> int:
        return self.m2 * self.co


def _check_mat(m, name: str) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.dtype != np.int16:
        raise DomainError(f"{name} must be a 2-D int16 raw matrix, got "
                          f"ndim={m.ndim} dtype={m.dtype}")
    return m


def _pad_to(n: int, step: int) -> int:
    return -(-n // step) * step


def matmul_tiled(a, b, cfg: TileConfig) -> np.ndarray:
    """Blocked product of raw matrices a [m2 x K] and b [K x N].

    Zero pads K up to a ci multiple and N up to a co multiple, accumulates
    ceil(K/ci) partial tile products per output tile in ascending k order,
    folds once, and trims the padding.  Output tiles are independent, so any
    tile schedule gives bit-identical results.
    """
    a = _check_mat(a, "a")
    b = _check_mat(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DomainError(f"inner dims differ: {a.shape} x {b.shape}")
    if a.shape[0] != cfg.m2:
        raise DomainError(f"a has {a.shape[0]} rows but cfg.m2 = {cfg.m2}")
    k_pad = _pad_to(a.shape[1], cfg.ci)
    n_pad = _pad_to(b.shape[1], cfg.co)
    a64 = np.zeros((cfg.m2, k_pad), dtype=np.int64)
    a64[:, : a.shape[1]] = a
    b64 = np.zeros((k_pad, n_pad), dtype=np.int64)
    b64[: b.shape[0], : b.shape[1]] = b

    acc = np.zeros((cfg.m2, n_pad), dtype=np.int64)
    for k0 in range(0, k_pad, cfg.ci):
        a_tile = a64[:, k0 : k0 + cfg.ci]
        for j0 in range(0, n_pad, cfg.co):
            acc[:, j0 : j0 + cfg.co] += a_tile @ b64[k0 : k0 + cfg.ci, j0 : j0 + cfg.co]
    return fxp.fold_acc_arr(acc)[:, : b.shape[1]]


def pad_kt(kt, co: int) -> np.ndarray:
    """Widen a K-transpose matrix [d x n] with zero columns to a co multiple."""
    kt = _check_mat(kt, "kt")
    n_pad = _pad_to(kt.shape[1], co)
    if n_pad == kt.shape[1]:
        return kt.copy()
    out = np.zeros((kt.shape[0], n_pad), dtype=np.int16)
    out[:, : kt.shape[1]] = kt
    return out


def attention_scores(q, kt, cfg: TileConfig) -> np.ndarray:
    """Q [m2 x d] times zero-padded K-transpose [d x n]; returns the valid
    [m2 x n] region.  Any 1/sqrt(d) scaling is folded into the Q weights
    upstream, never applied here."""
    q = _check_mat(q, "q")
    kt = _check_mat(kt, "kt")
    if q.shape[1] != kt.shape[0]:
        raise DomainError(f"head dims differ: {q.shape} x {kt.shape}")
    scores = matmul_tiled(q, pad_kt(kt, cfg.co), cfg)
    return scores[:, : kt.shape[1]]


def im2col_patch_embed(image, patch: int = 4) -> np.ndarray:
    """Flatten non-overlapping patch x patch tiles of a [C, H, W] image into
    rows of a [(H/patch)*(W/patch) x patch*patch*C] matrix.

    Column order is channel-major, then the patch pixels row-major, so a
    weight matrix flattened the same way reproduces the stride-patch
    convolution exactly.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.dtype != np.int16:
        raise DomainError("image must be [C, H, W] int16")
    c, h, w = image.shape
    if h % patch or w % patch:
        raise DomainError(f"spatial dims {h}x{w} not divisible by patch {patch}")
    tiles = image.reshape(c, h // patch, patch, w // patch, patch)
    tiles = tiles.transpose(1, 3, 0, 2, 4)  # [gh, gw, C, patch, patch]
    return np.ascontiguousarray(
        tiles.reshape((h // patch) * (w // patch), c * patch * patch))
