"""Self-describing checkpoint files.

Layout::

    SPARSEGRASP-CHECKPOINT\\n
    <one line of JSON: format version, architecture, config, seed, array index>\\n
    END_HEADER\\n
    <arrays, little-endian float32, in index order>

The header is written with sorted keys and no timestamps, so identical
states produce identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

MAGIC = b"SPARSEGRASP-CHECKPOINT\n"
END = b"END_HEADER\n"
FORMAT_VERSION = 1
_LE_F32 = np.dtype("<f4")


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, arrays: dict, header: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    index, offset = [], 0
    for name in sorted(arrays):
        a = np.asarray(arrays[name])
        nbytes = a.size * _LE_F32.itemsize
        index.append({"name": name, "shape": list(a.shape), "offset": offset, "nbytes": nbytes})
        offset += nbytes
    meta = dict(header, format_version=FORMAT_VERSION, arrays=index)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(json.dumps(meta, sort_keys=True).encode("utf-8") + b"\n")
        f.write(END)
        for entry in index:
            f.write(np.ascontiguousarray(arrays[entry["name"]], dtype=_LE_F32).tobytes())
    tmp.replace(path)
    return path


def read_header(path) -> dict:
    with open(path, "rb") as f:
        return _read_header(f, path)[0]


def _read_header(f, path) -> tuple[dict, int]:
    if f.readline() != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    line = f.readline()
    if f.readline() != END:
        raise CheckpointError(f"{path}: malformed header")
    try:
        header = json.loads(line)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: header is not valid JSON ({e})") from e
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    return header, f.tell()


def load_checkpoint(path) -> tuple[dict, dict]:
    """Return ``(header, arrays)``; arrays come back as native float32."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            header, start = _read_header(f, path)
            body = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    arrays = {}
    for entry in header["arrays"]:
        lo, n = entry["offset"], entry["nbytes"]
        if lo + n > len(body):
            raise CheckpointError(f"{path}: truncated at array {entry['name']}")
        a = np.frombuffer(body, dtype=_LE_F32, count=n // 4, offset=lo)
        arrays[entry["name"]] = a.astype(np.float32).reshape(entry["shape"])
    return header, arrays


def describe(header: Optional[dict]) -> str:
    if not header:
        return "<none>"
    arch = header.get("architecture", {})
    return f"{arch.get('name', '?')} (input {arch.get('input_size', '?')}, scale {arch.get('scale_factor', '?')})"
