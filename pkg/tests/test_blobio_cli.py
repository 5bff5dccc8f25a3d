"""Blob/manifest formats and the four CLI subcommands."""

import os

import numpy as np
import pytest

from swinfx import blobio
from swinfx.cli import main
from swinfx.errors import ConfigError


class TestBlobs:
    def test_fx16_round_trip(self, tmp_path):
        rng = np.random.default_rng(50)
        arr = rng.integers(-32768, 32768, size=(7, 5), dtype=np.int16)
        p = tmp_path / "a.fx16"
        blobio.write_blob(p, arr)
        assert np.array_equal(blobio.read_blob(p), arr)

    def test_f64_round_trip(self, tmp_path):
        rng = np.random.default_rng(51)
        arr = rng.normal(0, 1, size=(3, 9))
        p = tmp_path / "a.f64"
        blobio.write_blob(p, arr)
        assert np.array_equal(blobio.read_blob(p), arr)

    def test_vector_written_as_row(self, tmp_path):
        p = tmp_path / "v.fx16"
        blobio.write_blob(p, np.arange(4, dtype=np.int16))
        assert blobio.read_blob(p).shape == (1, 4)

    def test_header_is_text_payload_binary(self, tmp_path):
        p = tmp_path / "h.fx16"
        blobio.write_blob(p, np.zeros((2, 2), dtype=np.int16))
        raw = p.read_bytes()
        assert raw.startswith(b"fx16 2 2\n")
        assert len(raw) == len(b"fx16 2 2\n") + 8

    def test_truncated_payload_rejected(self, tmp_path):
        p = tmp_path / "t.fx16"
        p.write_bytes(b"fx16 2 2\n\x00\x00")
        with pytest.raises(ConfigError):
            blobio.read_blob(p)

    def test_bad_header_rejected(self, tmp_path):
        p = tmp_path / "b.fx16"
        p.write_bytes(b"fx32 2 2\n" + b"\x00" * 16)
        with pytest.raises(ConfigError):
            blobio.read_blob(p)


class TestManifest:
    def test_round_trip_with_comments(self, tmp_path):
        entries = [blobio.ManifestEntry("b0", str(tmp_path / "w.fx16"), "W_Q")]
        mpath = tmp_path / "manifest.txt"
        blobio.write_manifest(mpath, entries)
        with open(mpath, "a") as f:
            f.write("# trailing comment\n\n")
        back = blobio.read_manifest(mpath)
        assert back == entries

    def test_malformed_line_rejected(self, tmp_path):
        mpath = tmp_path / "manifest.txt"
        mpath.write_text("name path\n")
        with pytest.raises(ConfigError):
            blobio.read_manifest(mpath)


def _write_real_manifest(dirpath, seed=42, c=32):
    rng = np.random.default_rng(seed)
    entries = []

    def put(name, role, arr):
        path = os.path.join(dirpath, f"{name}.{role}.f64")
        blobio.write_blob(path, np.asarray(arr, dtype=np.float64))
        entries.append(blobio.ManifestEntry(name, path, role))

    put("b0.fc1", "fc1", rng.normal(0, 0.2, (c, 4 * c)))
    put("b0.fc1", "fc1.bias", rng.normal(0, 0.05, (1, 4 * c)))
    put("b0.fc1", "fc1.bn.gamma", rng.uniform(0.5, 1.5, (1, c)))
    put("b0.fc1", "fc1.bn.beta", rng.normal(0, 0.1, (1, c)))
    put("b0.fc1", "fc1.bn.mean", rng.normal(0, 0.3, (1, c)))
    put("b0.fc1", "fc1.bn.var", rng.uniform(0.5, 2.0, (1, c)))
    put("b0.wq", "W_Q", rng.normal(0, 0.5, (c, c)))
    put("b0.wq", "W_Q.bias", rng.normal(0, 0.05, (1, c)))
    put("ident", "proj", np.eye(c))
    mpath = os.path.join(dirpath, "manifest.txt")
    blobio.write_manifest(mpath, entries)
    return mpath


class TestCli:
    def test_cost_stdout_and_files(self, tmp_path, capsys):
        out = tmp_path / "cost"
        assert main(["cost", "--preset", "swin-t", "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "invalid_ratio_pct: 1.2000" in text
        assert "multipliers: 1568" in text
        assert (out / "cost_swin-t.txt").exists()
        csv = (out / "cost_swin-t.csv").read_text().splitlines()
        assert csv[0].startswith("# swinfx")
        assert csv[1].startswith("stage,")

    def test_cost_unknown_preset_exits_2(self, tmp_path):
        assert main(["cost", "--preset", "swin-x"]) == 2

    def test_kernels_small_sweep(self, tmp_path, capsys):
        out = tmp_path / "k"
        assert main(["kernels", "--out", str(out), "--rows", "200"]) == 0
        capsys.readouterr()
        for name in ("exp2_sweep.csv", "gelu_sweep.csv", "softmax_sweep.csv",
                     "kernels_summary.txt", "segment_table.txt"):
            assert (out / name).exists(), name
        sweep = (out / "softmax_sweep.csv").read_text().splitlines()
        assert sweep[1] == "row,n,max_abs_err,sum_dev"
        assert len(sweep) == 2 + 200

    def test_kernels_check_requires_default_sweep(self, tmp_path, capsys):
        out = tmp_path / "k"
        assert main(["kernels", "--out", str(out), "--rows", "10",
                     "--check"]) == 2
        capsys.readouterr()

    def test_exp2_sweep_row_count_and_zero_rows(self, tmp_path, capsys):
        out = tmp_path / "k"
        main(["kernels", "--out", str(out), "--rows", "10"])
        capsys.readouterr()
        lines = (out / "exp2_sweep.csv").read_text().splitlines()
        assert len(lines) == 2 + 65536  # header comment + column row + domain
        gelu = (out / "gelu_sweep.csv").read_text().splitlines()
        zero_row = gelu[2 + 8 * 1024]
        assert zero_row.startswith("0,0,0,0,")

    def test_block_random_deterministic(self, tmp_path, capsys):
        out1, out2 = tmp_path / "b1", tmp_path / "b2"
        assert main(["block", "--out", str(out1), "--random", "--seed", "7"]) == 0
        assert main(["block", "--out", str(out2), "--random", "--seed", "7"]) == 0
        capsys.readouterr()
        r1 = (out1 / "block_report.txt").read_bytes()
        r2 = (out2 / "block_report.txt").read_bytes()
        assert r1 == r2
        assert b"shape_check: ok" in r1

    def test_block_requires_source(self, tmp_path, capsys):
        assert main(["block", "--out", str(tmp_path / "b")]) == 2
        capsys.readouterr()

    def test_block_run_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("h = 7\nw = 7\nc = 16\nheads = 2\nblocks = 1\n"
                       "shift_pattern = none\n")
        out = tmp_path / "b"
        assert main(["block", "--out", str(out), "--random",
                     "--config", str(cfg)]) == 0
        capsys.readouterr()
        report = (out / "block_report.txt").read_text()
        assert "spec: h=7 w=7 c=16 heads=2" in report
        assert "block 1: shifted=0" in report
        assert "block 2" not in report

    def test_block_bad_config_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("h = 9\n")  # not divisible by the default window
        assert main(["block", "--out", str(tmp_path / "b"), "--random",
                     "--config", str(cfg)]) == 2
        capsys.readouterr()

    def test_fuse_then_block_manifest(self, tmp_path, capsys):
        src = tmp_path / "real"
        src.mkdir()
        mpath = _write_real_manifest(str(src))
        out = tmp_path / "fused"
        assert main(["fuse", "--manifest", mpath, "--out", str(out)]) == 0
        capsys.readouterr()
        fused = blobio.read_manifest(out / "manifest.txt")
        roles = {(e.name, e.role) for e in fused}
        assert ("b0.fc1", "fc1") in roles
        assert ("b0.fc1", "fc1.bias") in roles
        report = (out / "fuse_report.txt").read_text()
        assert "fused_vs_sequential_max_abs" in report
        # identity proj quantizes exactly to 1024 on the diagonal
        ident = blobio.read_blob([e.path for e in fused
                                  if e.name == "ident" and e.role == "proj"][0])
        assert np.array_equal(ident, (np.eye(32) * 1024).astype(np.int16))

    def test_fuse_missing_manifest_exits_3(self, tmp_path, capsys):
        code = main(["fuse", "--manifest", str(tmp_path / "nope.txt"),
                     "--out", str(tmp_path / "o")])
        capsys.readouterr()
        assert code == 3

    def test_fuse_gamma_zero_zeros_fused_rows(self, tmp_path, capsys):
        src = tmp_path / "real"
        src.mkdir()
        c = 8
        entries = []

        def put(name, role, arr):
            path = os.path.join(str(src), f"{name}.{role}.f64")
            blobio.write_blob(path, np.asarray(arr, dtype=np.float64))
            entries.append(blobio.ManifestEntry(name, path, role))

        rng = np.random.default_rng(52)
        gamma = np.ones(c)
        gamma[3] = 0.0
        put("l", "fc2", rng.normal(0, 0.3, (c, c)))
        put("l", "fc2.bn.gamma", gamma.reshape(1, -1))
        put("l", "fc2.bn.beta", np.zeros((1, c)))
        put("l", "fc2.bn.mean", rng.normal(0, 1, (1, c)))
        put("l", "fc2.bn.var", np.ones((1, c)))
        mpath = os.path.join(str(src), "manifest.txt")
        blobio.write_manifest(mpath, entries)
        out = tmp_path / "fused"
        assert main(["fuse", "--manifest", mpath, "--out", str(out)]) == 0
        capsys.readouterr()
        fused = blobio.read_manifest(out / "manifest.txt")
        w = blobio.read_blob([e.path for e in fused if e.role == "fc2"][0])
        assert not w[3].any()  # zero-gamma channel contributes nothing
