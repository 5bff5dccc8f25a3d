"""Complexity formulas and hardware accounting.

Implemented verbatim for a single block on an h x w token grid with C
channels and an M x M window:

    wmsa        = 4*h*w*C**2 + 2*M**2*h*w*C
    ffn         = 8*h*w*C**2                  (expansion ratio 4 baked in)
    qk          = M**2*h*w*C                  (scores against K-transpose)
    qk_padded   = 2*co*h*w*C                  (after zero padding K-transpose)
    U           = (qk_padded - qk) / (12*h*w*C**2 + 2*M**2*h*w*C)

U cancels h and w, so the headline ratio reported for a preset is the
base-stage evaluation (the published calculation); the report also carries
the per-stage values and the whole-model aggregate (total invalid MACs over
total linear MACs across every block), which is strictly smaller because
later stages widen C.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .approx import fmu_cycles
from .errors import ConfigError, DomainError
from .mmu import TileConfig

__all__ = [
    "ModelShape", "StageCost", "CostReport", "PRESETS",
    "complexity_wmsa", "complexity_ffn", "complexity_qk",
    "complexity_qk_padded", "invalid_ratio_single", "invalid_ratio",
    "mmu_multipliers", "mmu_cycles", "fmu_cycles", "cost_report",
]


def _check_positive(**kwargs):
    for name, v in kwargs.items():
        if v < 1:
            raise DomainError(f"{name} must be positive, got {v}")


def complexity_wmsa(h: int, w: int, c: int, m: int) -> int:
    _check_positive(h=h, w=w, c=c, m=m)
    return 4 * h * w * c * c + 2 * m * m * h * w * c


def complexity_ffn(h: int, w: int, c: int) -> int:
    _check_positive(h=h, w=w, c=c)
    return 8 * h * w * c * c


def complexity_qk(h: int, w: int, c: int, m: int) -> int:
    _check_positive(h=h, w=w, c=c, m=m)
    return m * m * h * w * c


def complexity_qk_padded(h: int, w: int, c: int, co: int) -> int:
    _check_positive(h=h, w=w, c=c, co=co)
    return 2 * co * h * w * c


def invalid_ratio_single(h: int, w: int, c: int, m: int, co: int) -> Fraction:
    """Invalid-computation ratio for one block (exact rational)."""
    num = complexity_qk_padded(h, w, c, co) - complexity_qk(h, w, c, m)
    den = 12 * h * w * c * c + 2 * m * m * h * w * c
    return Fraction(num, den)


@dataclass(frozen=True)
class ModelShape:
    """Whole-model geometry: per-stage depths on a halving token grid with
    doubling channels, plus the shared window and tile parameters."""

    name: str
    depths: tuple[int, ...]
    c: int                      # base (stage-1) channels
    h: int = 56                 # base token grid for 224x224 input, patch 4
    w: int = 56
    m: int = 7
    mr: int = 4
    co: int = 32

    def stages(self):
        """Yields (depth, h, w, c) per stage."""
        for s, depth in enumerate(self.depths):
            yield depth, self.h >> s, self.w >> s, self.c << s


PRESETS = {
    "swin-t": ModelShape("swin-t", (2, 2, 6, 2), 96),
    "swin-s": ModelShape("swin-s", (2, 2, 18, 2), 96),
    "swin-b": ModelShape("swin-b", (2, 2, 18, 2), 128),
}


def invalid_ratio(shape: ModelShape) -> Fraction:
    """Whole-model aggregate: total invalid MACs over total linear MACs."""
    invalid = 0
    total = 0
    for depth, h, w, c in shape.stages():
        invalid += depth * (complexity_qk_padded(h, w, c, shape.co)
                            - complexity_qk(h, w, c, shape.m))
        total += depth * (12 * h * w * c * c + 2 * shape.m * shape.m * h * w * c)
    return Fraction(invalid, total)


def mmu_multipliers(cfg: TileConfig) -> int:
    """DSP budget of the multiply array: one 16x16 multiplier per (row, col)
    of the m2 x co output tile."""
    return cfg.m2 * cfg.co


def mmu_cycles(c_i: int, c_o: int, cfg: TileConfig) -> int:
    """Cycle estimate for one [m2 x C_I] x [C_I x C_O] product: ceil(C_I/ci)
    tile passes per output tile, ci MAC columns per pass."""
    _check_positive(c_i=c_i, c_o=c_o)
    return -(-c_i // cfg.ci) * -(-c_o // cfg.co) * cfg.ci


@dataclass(frozen=True)
class StageCost:
    stage: int
    depth: int
    h: int
    w: int
    c: int
    wmsa: int
    ffn: int
    qk: int
    qk_padded: int
    invalid_ratio: Fraction
    mmu_cycles_linear: int


@dataclass(frozen=True)
class CostReport:
    shape: ModelShape
    stages: tuple[StageCost, ...]
    invalid_ratio: Fraction            # base-stage evaluation (headline)
    invalid_ratio_aggregate: Fraction  # all blocks, all stages
    multipliers: int
    fmu_cycles_window: int
    total_ops: int

    def to_text(self) -> str:
        s = self.shape
        lines = [
            f"model: {s.name}",
            f"depths: {','.join(map(str, s.depths))}",
            f"base_channels: {s.c}",
            f"token_grid: {s.h}x{s.w}",
            f"window: {s.m}",
            f"ffn_ratio: {s.mr}",
            f"co: {s.co}",
            f"multipliers: {self.multipliers}",
            f"fmu_cycles_window: {self.fmu_cycles_window}",
            f"total_linear_ops: {self.total_ops}",
            f"invalid_ratio: {float(self.invalid_ratio):.6f}",
            f"invalid_ratio_pct: {float(self.invalid_ratio) * 100:.4f}",
            f"invalid_ratio_aggregate: {float(self.invalid_ratio_aggregate):.6f}",
            f"invalid_ratio_aggregate_pct: {float(self.invalid_ratio_aggregate) * 100:.4f}",
        ]
        for st in self.stages:
            lines.append(
                f"stage{st.stage}: depth={st.depth} grid={st.h}x{st.w} c={st.c} "
                f"wmsa={st.wmsa} ffn={st.ffn} qk={st.qk} qk_padded={st.qk_padded} "
                f"u={float(st.invalid_ratio):.6f} mmu_cycles_linear={st.mmu_cycles_linear}")
        return "\n".join(lines) + "\n"

    def csv_rows(self):
        yield ("stage", "depth", "h", "w", "c", "wmsa", "ffn", "qk",
               "qk_padded", "invalid_ratio", "mmu_cycles_linear")
        for st in self.stages:
            yield (st.stage, st.depth, st.h, st.w, st.c, st.wmsa, st.ffn,
                   st.qk, st.qk_padded, f"{float(st.invalid_ratio):.8f}",
                   st.mmu_cycles_linear)


def cost_report(shape: ModelShape, cfg: TileConfig | None = None) -> CostReport:
    cfg = cfg or TileConfig(m2=shape.m * shape.m, co=shape.co)
    if cfg.co != shape.co:
        raise ConfigError(f"tile co={cfg.co} disagrees with shape co={shape.co}")
    stages = []
    total = 0
    for s, (depth, h, w, c) in enumerate(shape.stages(), 1):
        wmsa = complexity_wmsa(h, w, c, shape.m)
        ffn = complexity_ffn(h, w, c)
        stages.append(StageCost(
            stage=s, depth=depth, h=h, w=w, c=c, wmsa=wmsa, ffn=ffn,
            qk=complexity_qk(h, w, c, shape.m),
            qk_padded=complexity_qk_padded(h, w, c, shape.co),
            invalid_ratio=invalid_ratio_single(h, w, c, shape.m, shape.co),
            mmu_cycles_linear=mmu_cycles(c, c, cfg)))
        total += depth * (wmsa + ffn)
    return CostReport(
        shape=shape,
        stages=tuple(stages),
        invalid_ratio=invalid_ratio_single(shape.h, shape.w, shape.c,
                                           shape.m, shape.co),
        invalid_ratio_aggregate=invalid_ratio(shape),
        multipliers=mmu_multipliers(cfg),
        fmu_cycles_window=fmu_cycles(shape.m * shape.m),
        total_ops=total)
