"""Tensor blob and manifest file formats shared by the kernels and the CLI.

A blob is one matrix: a text header line ``fx16 <rows> <cols>\\n`` (or
``f64`` for real-valued parameters) followed by the raw little-endian
payload, row-major.  A manifest is a text file of whitespace-separated
``<name> <path> <role>`` lines ('#' starts a comment; paths are relative to
the manifest's directory).

Weight roles: embed, merge, W_Q, W_K, W_V, proj, fc1, fc2.  Companion
entries for the same layer name use the weight role plus a suffix:
``.bias`` for the bias row, and ``.bn.gamma`` / ``.bn.beta`` / ``.bn.mean``
/ ``.bn.var`` / ``.bn.eps`` for a batch-norm preceding that layer (real
manifests only; fusion removes them).
"""

from __future__ import annotations

import os
from typing import NamedTuple

import numpy as np

from .errors import ConfigError

WEIGHT_ROLES = ("embed", "merge", "W_Q", "W_K", "W_V", "proj", "fc1", "fc2")
BN_SUFFIXES = (".bn.gamma", ".bn.beta", ".bn.mean", ".bn.var", ".bn.eps")

_DTYPES = {"fx16": np.dtype("<i2"), "f64": np.dtype("<f8")}


def write_blob(path, arr) -> None:
    arr = np.asarray(arr)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ConfigError(f"blobs hold 2-D matrices, got ndim={arr.ndim}")
    if arr.dtype == np.int16:
        kind = "fx16"
    elif arr.dtype == np.float64:
        kind = "f64"
    else:
        raise ConfigError(f"blob dtype must be int16 or float64, got {arr.dtype}")
    with open(path, "wb") as f:
        f.write(f"{kind} {arr.shape[0]} {arr.shape[1]}\n".encode("ascii"))
        f.write(np.ascontiguousarray(arr, dtype=_DTYPES[kind]).tobytes())


def read_blob(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().decode("ascii", errors="replace").split()
        if len(header) != 3 or header[0] not in _DTYPES:
            raise ConfigError(f"{path}: bad blob header {header!r}")
        kind, rows, cols = header[0], int(header[1]), int(header[2])
        payload = f.read()
    dt = _DTYPES[kind]
    expected = rows * cols * dt.itemsize
    if len(payload) != expected:
        raise ConfigError(f"{path}: payload is {len(payload)} bytes, need {expected}")
    arr = np.frombuffer(payload, dtype=dt).reshape(rows, cols)
    return arr.astype(np.int16 if kind == "fx16" else np.float64)


class ManifestEntry(NamedTuple):
    name: str
    path: str
    role: str


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    base = os.path.dirname(os.path.abspath(path))
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: need '<name> <path> <role>'")
            name, rel, role = parts
            entries.append(ManifestEntry(name, os.path.join(base, rel), role))
    return entries


def write_manifest(path, entries) -> None:
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w") as f:
        for e in entries:
            rel = os.path.relpath(e.path, base)
            f.write(f"{e.name} {rel} {e.role}\n")
