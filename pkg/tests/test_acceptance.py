"""Acceptance criteria, one test per criterion (sub-lettered where a
criterion bundles several checks).  Each prints a PASS/FAIL line; run with
`pytest tests/test_acceptance.py -v -s` to see them inline.

Two assertions are intentionally red and documented in README "Honest
reds": the swin-b invalid-ratio window (criterion 1) and the softmax sum
tolerance (criterion 7b).  Both reflect defects in the published numbers,
not in the implementation; the measured values are regression-locked
elsewhere so drift still fails loudly.
"""

import io
import os
import time
from contextlib import redirect_stdout

import numpy as np
import pytest

from oracles import direct_conv, fmu_event_sim, naive_matmul
from swinfx import costmodel, fxp, locks, mmu, model, nonlinear
from swinfx.cli import main
from swinfx.fusion import BNParams, LinearParams, freeze_bn, fuse_bn_linear
from swinfx.mmu import TileConfig

README = os.path.join(os.path.dirname(__file__), os.pardir, "README.md")


class _limit:
    """Asserts the criterion body finished inside its stated budget."""

    def __init__(self, seconds):
        self.budget = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, *rest):
        elapsed = time.perf_counter() - self.t0
        if exc_type is None:
            assert elapsed < self.budget, f"took {elapsed:.2f}s, budget {self.budget}s"
        return False


def _line(tag, name, ok):
    print(f"[criterion {tag}] {name}: {'PASS' if ok else 'FAIL'}")
    return ok


def _run_cli(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(argv)
    return code, buf.getvalue()


@pytest.mark.parametrize("preset", ["swin-t", "swin-s", "swin-b"])
def test_criterion_1_invalid_ratio(preset):
    with _limit(1.0):
        code, text = _run_cli(["cost", "--preset", preset])
        assert code == 0
        pct = float(next(ln.split()[1] for ln in text.splitlines()
                         if ln.startswith("invalid_ratio_pct:")))
    ok = 1.1 <= pct <= 1.3
    _line("1", f"invalid-computation ratio {preset} = 1.2% +- 0.1pp "
               f"(reported {pct:.4f}%)", ok)
    assert ok, (
        f"{preset}: base-stage evaluation of the invalid-ratio formula gives "
        f"{pct:.4f}%. The published 1.2% only falls out for base channel "
        f"width 96 (swin-t/s); swin-b's 128 channels give 15/1634 = 0.918%. "
        f"See the honest-reds note in README.")


def test_criterion_2_multiplier_budget():
    with _limit(1.0):
        cfg = TileConfig(m2=49, ci=32, co=32)
        got = costmodel.mmu_multipliers(cfg)
        report = costmodel.cost_report(costmodel.PRESETS["swin-t"])
    ok = got == 1568 and report.multipliers == 1568
    _line("2", "multiplier budget (m2=49, co=32) = 1568", ok)
    assert ok


def test_criterion_3_fmu_latency():
    with _limit(1.0):
        six = costmodel.fmu_cycles(49)
        mismatches = [n for n in range(1, 65)
                      if costmodel.fmu_cycles(n) != fmu_event_sim(n)]
    ok = six == 6 and not mismatches
    _line("3", "FMU latency: 6 cycles at n=49, event-sim equal on [1,64]", ok)
    assert ok, mismatches


def test_criterion_4_tiling_exactness():
    with _limit(10.0):
        rng = np.random.default_rng(404)
        cases = 0
        ok = True
        for _ in range(100):
            m = int(rng.integers(1, 11))
            k = int(rng.integers(1, 15))
            n = int(rng.integers(1, 15))
            a = rng.integers(-8192, 8192, size=(m, k), dtype=np.int16)
            b = rng.integers(-8192, 8192, size=(k, n), dtype=np.int16)
            cfg = TileConfig(m2=m, ci=int(rng.integers(1, 9)),
                             co=int(rng.integers(1, 9)))
            ok &= np.array_equal(mmu.matmul_tiled(a, b, cfg), naive_matmul(a, b))
            cases += 1
        a = rng.integers(-2048, 2048, size=(49, 96), dtype=np.int16)
        b = rng.integers(-2048, 2048, size=(96, 32), dtype=np.int16)
        ok &= np.array_equal(mmu.matmul_tiled(a, b, TileConfig()), naive_matmul(a, b))
        cases += 1
        q = rng.integers(-2048, 2048, size=(49, 32), dtype=np.int16)
        kt = rng.integers(-2048, 2048, size=(32, 49), dtype=np.int16)
        ok &= np.array_equal(mmu.attention_scores(q, kt, TileConfig()),
                             naive_matmul(q, kt))
    _line("4", f"tiled matmul bit-identical to naive Acc32 loop "
               f"({cases} cases incl. 49x96 by 96x32) and padded "
               f"attention scores match the unpadded oracle", ok)
    assert ok


def test_criterion_5_convolution_equivalence():
    with _limit(10.0):
        rng = np.random.default_rng(505)
        ok = True
        for _ in range(20):
            cin = int(rng.integers(1, 4))
            side = int(rng.choice([4, 8, 12]))
            cout = int(rng.integers(1, 7))
            img = rng.integers(-2048, 2048, size=(cin, side, side), dtype=np.int16)
            w = rng.integers(-2048, 2048, size=(16 * cin, cout), dtype=np.int16)
            b = rng.integers(-512, 512, size=cout, dtype=np.int16)
            got = model.patch_embed(img, model.FusedLinear(w=w, b=b))
            ok &= np.array_equal(got, direct_conv(img, w, b))
        shape = mmu.im2col_patch_embed(np.zeros((1, 224, 224), dtype=np.int16)).shape
        ok &= shape == (3136, 16)
    _line("5", "patch embed bit-identical to direct stride-4 convolution "
               "(20 images); 224x224 im2col is 3136x16 per channel", ok)
    assert ok


def test_criterion_6_bn_fusion():
    with _limit(5.0):
        rng = np.random.default_rng(606)
        worst = 0.0
        for _ in range(1000):
            c = int(rng.integers(1, 16))
            cout = int(rng.integers(1, 16))
            bn = BNParams(gamma=rng.uniform(0.25, 2.0, c),
                          beta=rng.normal(0, 1, c),
                          mean=rng.normal(0, 1, c),
                          var=rng.uniform(0.1, 4.0, c), eps=1e-5)
            lin = LinearParams(w=rng.normal(0, 1, (c, cout)),
                               b=rng.normal(0, 1, cout))
            x = rng.normal(0, 2, c)
            w_bn, b_bn = freeze_bn(bn)
            seq = (x @ w_bn + b_bn) @ lin.w + lin.b
            wf, bf = fuse_bn_linear(bn, lin)
            rel = np.max(np.abs(x @ wf + bf - seq)) / max(1.0, float(np.max(np.abs(seq))))
            worst = max(worst, float(rel))
    ok = worst <= 1e-9
    _line("6", f"BN fusion matches sequential path within 1e-9 relative "
               f"(worst {worst:.3g})", ok)
    assert ok


def test_criterion_7a_exp2_quality():
    with _limit(120.0):
        raws = np.arange(-32768, 32768, dtype=np.int16)
        from swinfx import approx
        got = approx.exp2_arr(raws).astype(np.float64) / 1024.0
        true = np.exp2(raws.astype(np.float64) / 1024.0)
        ip = raws.astype(np.int32) >> 10
        dom = (ip >= locks.EXP2_REL_DOMAIN[0]) & (ip <= locks.EXP2_REL_DOMAIN[1])
        rel = float(np.max(np.abs(got[dom] - true[dom]) / true[dom]))
    ok = rel <= locks.EXP2_REL_TARGET
    _line("7a", f"exhaustive exp2 sweep max rel err {rel:.4%} <= 2%", ok)
    assert ok


def test_criterion_7b_softmax_sum():
    with _limit(120.0):
        rng = np.random.default_rng(locks.SOFTMAX_SWEEP_SEED)
        rows = fxp.from_real_arr(rng.uniform(-locks.SOFTMAX_SWEEP_RANGE,
                                             locks.SOFTMAX_SWEEP_RANGE,
                                             size=(locks.SOFTMAX_SWEEP_ROWS,
                                                   locks.SOFTMAX_SWEEP_N)))
        out = nonlinear.softmax_rows(rows)
        dev_raw = int(np.max(np.abs(out.astype(np.int64).sum(axis=1) - 1024)))
        dev = dev_raw / 1024.0
    ok = dev <= locks.SOFTMAX_SUM_TARGET
    _line("7b", f"softmax sums within +-0.05 of 1 on 1e5 rows "
                f"(measured {dev:.6f})", ok)
    assert ok, (
        f"max |sum - 1| = {dev:.6f} > 0.05: the log-domain division "
        f"approximates log2(m) by m - 1, which deflates or inflates a whole "
        f"row coherently by up to 2**0.0861 (6.2%), and the output fold "
        f"truncates up to one ulp per element; 0.05 is unattainable for any "
        f"tested input distribution. Measured value is regression-locked "
        f"(raw {dev_raw} = {locks.SOFTMAX_SUM_MAX_DEV_RAW}). "
        f"See the honest-reds note in README.")


def test_criterion_7c_gelu_quality():
    with _limit(120.0):
        xs = np.arange(-8 * 1024, 8 * 1024 + 1, dtype=np.int16)
        out = fxp.to_real_arr(nonlinear.gelu_arr(xs))
        x = fxp.to_real_arr(xs)
        monotone = bool(np.all(np.diff(out[xs >= 0]) >= -1e-12))
        enveloped = bool(np.all(out >= np.minimum(0, x) - locks.GELU_MAX_ABS)
                         and np.all(out <= np.maximum(0, x) + locks.GELU_MAX_ABS))
    ok = monotone and enveloped
    _line("7c", "gelu sweep on [-8,8]: monotone on [0,8] and inside the "
                "sign envelope", ok)
    assert ok


def test_criterion_7d_regression_locks():
    with _limit(120.0):
        from swinfx import approx
        raws = np.arange(-32768, 32768, dtype=np.int16)
        got = approx.exp2_arr(raws).astype(np.float64) / 1024.0
        true = np.exp2(raws.astype(np.float64) / 1024.0)
        ip = raws.astype(np.int32) >> 10
        dom = (ip >= -4) & (ip <= 4)
        rel = float(np.max(np.abs(got[dom] - true[dom]) / true[dom]))
        xs = np.arange(-8 * 1024, 8 * 1024 + 1, dtype=np.int16)
        gerr = float(np.max(np.abs(
            fxp.to_real_arr(nonlinear.gelu_arr(xs))
            - nonlinear.gelu_reference(fxp.to_real_arr(xs)))))
        rng = np.random.default_rng(locks.SOFTMAX_SWEEP_SEED)
        rows = fxp.from_real_arr(rng.uniform(-8, 8, size=(locks.SOFTMAX_SWEEP_ROWS, 49)))
        out = nonlinear.softmax_rows(rows)
        dev_raw = int(np.max(np.abs(out.astype(np.int64).sum(axis=1) - 1024)))
        ref = np.apply_along_axis(nonlinear.softmax_reference, 1,
                                  fxp.to_real_arr(rows))
        smax = float(np.max(np.abs(fxp.to_real_arr(out) - ref)))
    checks = {
        "exp2_max_rel": abs(rel - locks.EXP2_MAX_REL) <= locks.FLOAT_LOCK_TOL,
        "gelu_max_abs": abs(gerr - locks.GELU_MAX_ABS) <= locks.FLOAT_LOCK_TOL,
        "softmax_sum_raw": dev_raw == locks.SOFTMAX_SUM_MAX_DEV_RAW,
        "softmax_max_abs": abs(smax - locks.SOFTMAX_MAX_ABS) <= locks.FLOAT_LOCK_TOL,
    }
    ok = all(checks.values())
    _line("7d", f"measured maxima equal their regression locks {checks}", ok)
    assert ok, checks


def test_criterion_8_block_identity_and_determinism(tmp_path):
    with _limit(30.0):
        rng = np.random.default_rng(808)
        fm = rng.integers(-8192, 8192, size=(14, 14, 32), dtype=np.int16)

        def zeros(ci, co):
            return model.FusedLinear(w=np.zeros((ci, co), dtype=np.int16),
                                     b=np.zeros(co, dtype=np.int16))

        identity_ok = True
        for shifted in (False, True):
            cfg = model.BlockConfig(m=7, c=32, heads=1, shifted=shifted)
            params = model.BlockParams(
                wq=zeros(32, 32), wk=zeros(32, 32), wv=zeros(32, 32),
                proj=zeros(32, 32), fc1=zeros(32, 128), fc2=zeros(128, 32))
            identity_ok &= np.array_equal(model.swin_block(fm, params, cfg), fm)

        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert _run_cli(["block", "--out", str(out1), "--random", "--seed", "1234"])[0] == 0
        assert _run_cli(["block", "--out", str(out2), "--random", "--seed", "1234"])[0] == 0
        b1 = (out1 / "block_report.txt").read_bytes()
        b2 = (out2 / "block_report.txt").read_bytes()
        deterministic = b1 == b2 and b"block 2:" in b1
    ok = identity_ok and deterministic
    _line("8", "zero-weight block is the bit-exact identity; seeded "
               "2-block divergence report is byte-identical across runs", ok)
    assert ok


def test_criterion_9_out_of_scope_statement():
    with open(README) as f:
        text = f.read()
    ok = ("80.7" in text and "82.7" in text and "82.8" in text
          and "not reproducible" in text.lower())
    _line("9", "README states that accuracy/frame-rate/power replication "
               "is out of desk scope and names the replaced figures", ok)
    assert ok
