"""Deterministic file outputs: CSV tables, plain PGM heatmaps, run manifests."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["atomic_write", "write_csv", "write_pgm", "write_manifest", "fmt", "sha256_file"]


def fmt(value) -> str:
    """Shortest round-trip text for numbers; str() for everything else."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header, rows) -> Path:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return atomic_write(path, "\n".join(lines) + "\n")


def write_pgm(path, values: np.ndarray, label: str = "value") -> Path:
    """Write a plain (P2) 8-bit PGM, linearly mapping ``values`` onto 0-255.

    Rows of ``values`` become image rows.  Non-finite entries clip to 255.
    The mapping range goes to a ``<name>.txt`` sidecar.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 2:
        raise ValueError("heatmap must be 2-D")
    finite = np.isfinite(v)
    lo = float(v[finite].min()) if finite.any() else 0.0
    hi = float(v[finite].max()) if finite.any() else 0.0
    span = hi - lo
    if span > 0:
        scaled = np.where(finite, (v - lo) / span, 1.0)
    else:
        scaled = np.where(finite, 0.0, 1.0)
    pix = np.clip(np.rint(scaled * 255.0), 0, 255).astype(int)
    h, w = pix.shape
    body = [f"P2", f"{w} {h}", "255"]
    body.extend(" ".join(str(p) for p in row) for row in pix)
    out = atomic_write(path, "\n".join(body) + "\n")
    atomic_write(Path(str(path) + ".txt"),
                 f"quantity={label}\nmin={fmt(lo)}\nmax={fmt(hi)}\nrows={h}\ncols={w}\n")
    return out


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, payload: dict) -> Path:
    return atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
