"""Window-attention block assembly on the fixed-point kernels.

Feature maps are [h, w, c] int16 arrays of Q6.10 raw words.  Blocks follow
the standard alternating pattern: window partition (after a cyclic shift on
the shifted variant), per-window multi-head attention with additive masks,
shortcut add, then the position-wise FFN with its own shortcut.  All heavy
math routes through the mmu/nonlinear kernels; everything here is layout,
masking, and composition.

Double-precision twins (``*_ref``) run the same structure with exact
softmax/GELU on the dequantized weights; the block runner executes both
paths in lockstep and reports per-block divergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fxp, mmu, nonlinear
from .errors import ConfigError, DomainError
from .fusion import FusedLinear, LinearParams, fold_q_scale, quantize_linear
from .mmu import TileConfig
from .nonlinear import MASK_OFF_RAW


@dataclass(frozen=True)
class BlockConfig:
    """One Swin block: window size M, channels C, head count, FFN ratio Mr,
    and whether the window grid is cyclically shifted by M//2."""

    m: int = 7
    c: int = 96
    heads: int = 3
    mr: int = 4
    shifted: bool = False

    def __post_init__(self):
        if self.c % self.heads:
            raise DomainError(f"C={self.c} not divisible by heads={self.heads}")
        if self.m < 1 or self.mr < 1:
            raise DomainError("window size and FFN ratio must be positive")

    @property
    def head_dim(self) -> int:
        return self.c // self.heads

    @property
    def shift(self) -> int:
        return self.m // 2 if self.shifted else 0


@dataclass
class BlockParams:
    """Fused, quantized parameters for one block.  wq must already carry the
    1/sqrt(head_dim) fold.  rel_bias, when present, is a raw [heads, M*M, M*M]
    additive score bias (off by default)."""

    wq: FusedLinear
    wk: FusedLinear
    wv: FusedLinear
    proj: FusedLinear
    fc1: FusedLinear
    fc2: FusedLinear
    rel_bias: np.ndarray | None = None


def window_partition(fm, m: int) -> np.ndarray:
    """[h, w, c] -> [num_windows, m*m, c], windows row-major over the grid."""
    fm = np.asarray(fm)
    if fm.ndim != 3:
        raise DomainError("feature map must be [h, w, c]")
    h, w, c = fm.shape
    if h % m or w % m:
        raise DomainError(f"spatial dims {h}x{w} not divisible by window {m}")
    x = fm.reshape(h // m, m, w // m, m, c).transpose(0, 2, 1, 3, 4)
    return np.ascontiguousarray(x.reshape(-1, m * m, c))


def window_reverse(windows, m: int, h: int, w: int) -> np.ndarray:
    """Inverse of window_partition; lossless for any contents."""
    windows = np.asarray(windows)
    if windows.shape != ((h // m) * (w // m), m * m, windows.shape[2]):
        raise DomainError("window array inconsistent with target dims")
    c = windows.shape[2]
    x = windows.reshape(h // m, w // m, m, m, c).transpose(0, 2, 1, 3, 4)
    return np.ascontiguousarray(x.reshape(h, w, c))


def cyclic_shift(fm, dy: int, dx: int) -> np.ndarray:
    """Toroidal roll of the spatial axes; (-dy, -dx) inverts it."""
    return np.roll(np.asarray(fm), (dy, dx), axis=(0, 1))


def build_shift_mask(h: int, w: int, m: int, shift: int) -> np.ndarray:
    """Additive attention masks for a shifted window grid.

    Positions originating from the same pre-shift region attend normally
    (0); cross-region pairs get -16.0, enough to push their exponentials
    below one Q6.10 ulp for realistic score spreads.  Returns raw int16
    [num_windows, m*m, m*m]; all zeros when shift == 0.
    """
    if h % m or w % m:
        raise DomainError(f"spatial dims {h}x{w} not divisible by window {m}")
    num_windows = (h // m) * (w // m)
    if shift == 0:
        return np.zeros((num_windows, m * m, m * m), dtype=np.int16)
    labels = np.zeros((h, w), dtype=np.int32)
    bounds = (slice(0, h - m), slice(h - m, h - shift), slice(h - shift, h))
    wbounds = (slice(0, w - m), slice(w - m, w - shift), slice(w - shift, w))
    region = 0
    for hs in bounds:
        for ws in wbounds:
            labels[hs, ws] = region
            region += 1
    win_labels = window_partition(labels[:, :, None].astype(np.int16), m)[:, :, 0]
    same = win_labels[:, :, None] == win_labels[:, None, :]
    return np.where(same, 0, MASK_OFF_RAW).astype(np.int16)


def _linear(x, layer: FusedLinear, tile: TileConfig) -> np.ndarray:
    out = mmu.matmul_tiled(x, layer.w, tile)
    return fxp.add_sat_arr(out, layer.b.reshape(1, -1))


def msa_block(x, params: BlockParams, cfg: BlockConfig, mask=None,
              tile: TileConfig | None = None) -> np.ndarray:
    """Window multi-head self-attention on one [M*M, C] window, shortcut
    included.  The per-head pipeline is QKV projection, scores against the
    zero-padded K-transpose, mask/bias add, softmax, weighting of V, head
    concat, output projection, then the saturating shortcut add."""
    x = np.asarray(x)
    n, c = cfg.m * cfg.m, cfg.c
    if x.shape != (n, c):
        raise DomainError(f"window shape {x.shape} != ({n}, {c})")
    tile = tile or TileConfig(m2=n)
    q = _linear(x, params.wq, tile)
    k = _linear(x, params.wk, tile)
    v = _linear(x, params.wv, tile)
    d = cfg.head_dim
    heads_out = []
    for hd in range(cfg.heads):
        sl = slice(hd * d, (hd + 1) * d)
        kt = np.ascontiguousarray(k[:, sl].T)
        scores = mmu.attention_scores(q[:, sl], kt, tile)
        if params.rel_bias is not None:
            scores = fxp.add_sat_arr(scores, params.rel_bias[hd])
        if mask is not None:
            scores = fxp.add_sat_arr(scores, mask)
        weights = nonlinear.softmax_rows(scores)
        heads_out.append(mmu.matmul_tiled(weights, np.ascontiguousarray(v[:, sl]), tile))
    merged = np.concatenate(heads_out, axis=1)
    return fxp.add_sat_arr(x, _linear(merged, params.proj, tile))


def ffn(x, params: BlockParams, cfg: BlockConfig,
        tile: TileConfig | None = None) -> np.ndarray:
    """Position-wise FFN: expand by Mr, GELU, contract, shortcut add."""
    x = np.asarray(x)
    n = cfg.m * cfg.m
    if x.shape != (n, cfg.c):
        raise DomainError(f"window shape {x.shape} != ({n}, {cfg.c})")
    tile = tile or TileConfig(m2=n)
    hidden = nonlinear.gelu_arr(_linear(x, params.fc1, tile))
    return fxp.add_sat_arr(x, _linear(hidden, params.fc2, tile))


def swin_block(fm, params: BlockParams, cfg: BlockConfig) -> np.ndarray:
    """One full block over a [h, w, c] map: optional cyclic shift, windowed
    attention with the matching shift masks, FFN, and the inverse shift."""
    fm = np.asarray(fm)
    h, w, _ = fm.shape
    s = cfg.shift
    shifted = cyclic_shift(fm, -s, -s) if s else fm
    masks = build_shift_mask(h, w, cfg.m, s)
    windows = window_partition(shifted, cfg.m)
    out = np.empty_like(windows)
    for i in range(windows.shape[0]):
        y = msa_block(windows[i], params, cfg, mask=masks[i] if s else None)
        out[i] = ffn(y, params, cfg)
    merged = window_reverse(out, cfg.m, h, w)
    return cyclic_shift(merged, s, s) if s else merged


def patch_embed(image, layer: FusedLinear, patch: int = 4,
                tile: TileConfig | None = None) -> np.ndarray:
    """Stride-patch convolution as im2col plus one tiled matmul; returns the
    [H/patch, W/patch, C_out] map.  Bit-identical to direct convolution."""
    cols = mmu.im2col_patch_embed(image, patch)
    if layer.w.shape[0] != cols.shape[1]:
        raise DomainError(
            f"embed weights expect {layer.w.shape[0]} inputs, got {cols.shape[1]}")
    t = TileConfig(m2=cols.shape[0], ci=tile.ci if tile else 32,
                   co=tile.co if tile else 32)
    out = _linear(cols, layer, t)
    gh = image.shape[1] // patch
    gw = image.shape[2] // patch
    return out.reshape(gh, gw, -1)


def patch_merging(fm, layer: FusedLinear,
                  tile: TileConfig | None = None) -> np.ndarray:
    """Concatenate each 2x2 neighbourhood channelwise (top-left, bottom-left,
    top-right, bottom-right) and apply the [4C, 2C] reduction."""
    fm = np.asarray(fm)
    h, w, c = fm.shape
    if h % 2 or w % 2:
        raise DomainError(f"patch merging needs even dims, got {h}x{w}")
    cat = np.concatenate(
        [fm[0::2, 0::2], fm[1::2, 0::2], fm[0::2, 1::2], fm[1::2, 1::2]], axis=2)
    rows = cat.reshape(-1, 4 * c)
    if layer.w.shape[0] != 4 * c:
        raise DomainError(f"merge weights expect {layer.w.shape[0]} inputs, got {4 * c}")
    t = TileConfig(m2=rows.shape[0], ci=tile.ci if tile else 32,
                   co=tile.co if tile else 32)
    out = _linear(rows, layer, t)
    return out.reshape(h // 2, w // 2, -1)


# ---------------------------------------------------------------------------
# Double-precision reference path (exact softmax/GELU on dequantized weights)
# ---------------------------------------------------------------------------

def _linear_ref(x, layer: FusedLinear):
    return x @ fxp.to_real_arr(layer.w) + fxp.to_real_arr(layer.b.reshape(1, -1))


def msa_block_ref(x, params: BlockParams, cfg: BlockConfig, mask=None):
    q = _linear_ref(x, params.wq)
    k = _linear_ref(x, params.wk)
    v = _linear_ref(x, params.wv)
    d = cfg.head_dim
    heads_out = []
    for hd in range(cfg.heads):
        sl = slice(hd * d, (hd + 1) * d)
        scores = q[:, sl] @ k[:, sl].T
        if params.rel_bias is not None:
            scores = scores + fxp.to_real_arr(params.rel_bias[hd])
        if mask is not None:
            scores = scores + mask
        weights = np.apply_along_axis(nonlinear.softmax_reference, 1, scores)
        heads_out.append(weights @ v[:, sl])
    merged = np.concatenate(heads_out, axis=1)
    return x + _linear_ref(merged, params.proj)


def ffn_ref(x, params: BlockParams, cfg: BlockConfig):
    hidden = nonlinear.gelu_reference(_linear_ref(x, params.fc1))
    return x + _linear_ref(hidden, params.fc2)


def swin_block_ref(fm, params: BlockParams, cfg: BlockConfig):
    h, w, _ = fm.shape
    s = cfg.shift
    shifted = np.roll(fm, (-s, -s), axis=(0, 1)) if s else fm
    masks = fxp.to_real_arr(build_shift_mask(h, w, cfg.m, s))
    windows = fm_ref_partition(shifted, cfg.m)
    out = np.empty_like(windows)
    for i in range(windows.shape[0]):
        y = msa_block_ref(windows[i], params, cfg, mask=masks[i] if s else None)
        out[i] = ffn_ref(y, params, cfg)
    merged = ref_window_reverse(out, cfg.m, h, w)
    return np.roll(merged, (s, s), axis=(0, 1)) if s else merged


def fm_ref_partition(fm, m):
    h, w, c = fm.shape
    x = fm.reshape(h // m, m, w // m, m, c).transpose(0, 2, 1, 3, 4)
    return x.reshape(-1, m * m, c)


def ref_window_reverse(windows, m, h, w):
    c = windows.shape[2]
    x = windows.reshape(h // m, w // m, m, m, c).transpose(0, 2, 1, 3, 4)
    return x.reshape(h, w, c)


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunSpec:
    """Block-runner configuration: token grid, channels, heads, window, FFN
    ratio, block count, and the W-MSA/SW-MSA alternation pattern."""

    h: int = 14
    w: int = 14
    c: int = 32
    heads: int = 1
    m: int = 7
    mr: int = 4
    blocks: int = 2
    shift_pattern: str = "alternate"   # alternate | none

    def block_config(self, index: int) -> BlockConfig:
        shifted = self.shift_pattern == "alternate" and index % 2 == 1
        return BlockConfig(m=self.m, c=self.c, heads=self.heads,
                           mr=self.mr, shifted=shifted)


_RUNSPEC_KEYS = {"h", "w", "c", "heads", "m", "mr", "blocks", "shift_pattern"}


def parse_run_config(text: str) -> RunSpec:
    """key = value lines (ints except shift_pattern); '#' comments."""
    kwargs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"run config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _RUNSPEC_KEYS:
            raise ConfigError(f"run config line {lineno}: unknown key {key!r}")
        kwargs[key] = value if key == "shift_pattern" else int(value)
    spec = RunSpec(**kwargs)
    if spec.shift_pattern not in ("alternate", "none"):
        raise ConfigError(f"bad shift_pattern {spec.shift_pattern!r}")
    if spec.h % spec.m or spec.w % spec.m:
        raise ConfigError(f"grid {spec.h}x{spec.w} not divisible by window {spec.m}")
    return spec


def random_block_params(rng: np.random.Generator, cfg: BlockConfig,
                        qk_scale: float = 1.0,
                        w_scale: float = 0.1) -> BlockParams:
    """Seeded synthetic parameters: Gaussian weights, small biases, Q folded
    and everything quantized, mirroring what cmd_fuse would emit.

    The default scales keep toy activations well inside the Q6.10 range and
    give attention scores enough spread that softmax denominators stay far
    from saturation (Q/K draw wider than V/proj/FFN because the 1/sqrt(d)
    fold shrinks them afterwards).
    """

    def lin(cin, cout, s):
        return LinearParams(w=rng.normal(0.0, s, size=(cin, cout)),
                            b=rng.normal(0.0, 0.02, size=cout))

    def quant(layer, note):
        return quantize_linear(layer.w, layer.b, note=note)

    c = cfg.c
    return BlockParams(
        wq=quant(fold_q_scale(lin(c, c, qk_scale), cfg.head_dim), "wq"),
        wk=quant(lin(c, c, qk_scale), "wk"),
        wv=quant(lin(c, c, w_scale), "wv"),
        proj=quant(lin(c, c, w_scale), "proj"),
        fc1=quant(lin(c, cfg.mr * c, w_scale), "fc1"),
        fc2=quant(lin(cfg.mr * c, c, w_scale), "fc2"),
    )


def run_blocks(fm, params_list, spec: RunSpec):
    """Run the fixed and reference paths in lockstep.

    Returns (final fixed map, final reference map, divergence) where
    divergence is a list of (max_abs, mean_abs) across the map after each
    block.
    """
    fx = np.asarray(fm)
    ref = fxp.to_real_arr(fx)
    divergence = []
    for i, params in enumerate(params_list):
        cfg = spec.block_config(i)
        fx = swin_block(fx, params, cfg)
        ref = swin_block_ref(ref, params, cfg)
        diff = np.abs(fxp.to_real_arr(fx) - ref)
        divergence.append((float(diff.max()), float(diff.mean())))
    return fx, ref, divergence
