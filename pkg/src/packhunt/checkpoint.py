"""Versioned training checkpoints with bit-exact resume.

A checkpoint is a zip container holding ``meta.json`` (format name,
version, config echo, counters, RNG states, and the object tree with
array placeholders) plus one ``.npy`` entry per array, stored as 64-bit
little-endian floats.  Loading validates the format and version before
touching anything else.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np

CHECKPOINT_FORMAT = "packhunt-checkpoint"
CHECKPOINT_VERSION = 1
_ARRAY_KEY = "__array__"


class CheckpointError(RuntimeError):
    """The file is not a readable checkpoint of a supported version."""


def _encode(node, arrays: dict):
    if isinstance(node, np.ndarray):
        name = f"a{len(arrays)}"
        arrays[name] = np.ascontiguousarray(node, dtype="<f8")
        return {_ARRAY_KEY: name}
    if isinstance(node, dict):
        return {k: _encode(v, arrays) for k, v in node.items()}
    if isinstance(node, (list, tuple)):
        return [_encode(v, arrays) for v in node]
    if isinstance(node, (np.integer,)):
        return int(node)
    if isinstance(node, (np.floating,)):
        return float(node)
    return node


def _decode(node, arrays: dict):
    if isinstance(node, dict):
        if set(node.keys()) == {_ARRAY_KEY}:
            return arrays[node[_ARRAY_KEY]]
        return {k: _decode(v, arrays) for k, v in node.items()}
    if isinstance(node, list):
        return [_decode(v, arrays) for v in node]
    return node


def save_checkpoint(snapshot: dict, path) -> Path:
    """Write a trainer snapshot (see MaddpgTrainer.snapshot) to disk."""
    path = Path(path)
    arrays: dict[str, np.ndarray] = {}
    tree = _encode(snapshot, arrays)
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "state": tree,
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("meta.json", json.dumps(meta))
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.save(buf, arr)
            zf.writestr(f"arrays/{name}.npy", buf.getvalue())
    return path


def load_checkpoint(path) -> dict:
    """Read a checkpoint back into a snapshot dict; bit-exact round trip."""
    path = Path(path)
    try:
        with zipfile.ZipFile(path) as zf:
            with zf.open("meta.json") as fh:
                meta = json.load(fh)
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise CheckpointError(
                    f"{path} is not a {CHECKPOINT_FORMAT} file"
                )
            if meta.get("version") != CHECKPOINT_VERSION:
                raise CheckpointError(
                    f"{path} has checkpoint version {meta.get('version')}, "
                    f"this build reads version {CHECKPOINT_VERSION}"
                )
            arrays = {}
            for info in zf.namelist():
                if info.startswith("arrays/") and info.endswith(".npy"):
                    with zf.open(info) as fh:
                        arrays[info[len("arrays/") : -len(".npy")]] = np.load(fh)
    except CheckpointError:
        raise
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return _decode(meta["state"], arrays)
