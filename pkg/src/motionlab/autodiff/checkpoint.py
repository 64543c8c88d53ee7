"""Versioned checkpoint files: named float64 arrays with shapes.

The container is numpy's npz (raw little-endian buffers), so round trips
are bit-exact. A JSON metadata entry carries the format version plus any
caller-supplied fields (skeleton hash, action vocabulary, config, ...).
"""

import json

import numpy as np

FORMAT_VERSION = 1


def save_checkpoint(path, arrays, meta=None):
    payload = {f"param/{k}": np.asarray(v, dtype=np.float64) for k, v in arrays.items()}
    header = {"format_version": FORMAT_VERSION, "meta": meta or {}}
    payload["__header__"] = np.frombuffer(
        json.dumps(header, sort_keys=True).encode(), dtype=np.uint8
    )
    np.savez(path, **payload)


def load_checkpoint(path):
    """Returns (arrays, meta). Rejects unknown format versions."""
    with np.load(path) as data:
        header = json.loads(bytes(data["__header__"]).decode())
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"unsupported checkpoint version {header.get('format_version')}"
            )
        arrays = {
            k[len("param/"):]: data[k].copy()
            for k in data.files
            if k.startswith("param/")
        }
    return arrays, header["meta"]
