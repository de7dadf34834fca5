"""Binary weight container.

Byte layout (little-endian)::

    0   4   magic b"NLML"
    4   4   uint32 format version
    8   4   uint32 header length H
    12  H   UTF-8 JSON header
    12+H    parameter blocks, float64, C order, back to back

The header holds ``manifest`` (model kind, layer list, config), ``blocks``
(name, shape, byte offset relative to the first block) and any extra
metadata the caller stores (normalization stats, label scales, training
history, config hash).
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"NLML"
VERSION = 1


class WeightFileError(ValueError):
    pass


def dumps(weights: dict, manifest: dict, meta: dict | None = None) -> bytes:
    blocks, offset, raw = [], 0, []
    for name, arr in weights.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        blocks.append({"name": name, "shape": list(a.shape), "offset": offset})
        raw.append(a.tobytes())
        offset += a.nbytes
    header = {"manifest": manifest, "blocks": blocks, "meta": meta or {}}
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + struct.pack("<II", VERSION, len(hb)) + hb + b"".join(raw)


def loads(data: bytes):
    """Return ``(weights, manifest, meta)``."""
    if len(data) < 12 or data[:4] != MAGIC:
        raise WeightFileError("not a weight file (bad magic)")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise WeightFileError(f"unsupported weight file version {version}")
    try:
        header = json.loads(data[12:12 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise WeightFileError(f"corrupt weight file header: {e}") from None
    base = 12 + hlen
    weights = {}
    for b in header["blocks"]:
        n = int(np.prod(b["shape"], dtype=np.int64))
        start = base + b["offset"]
        if start + 8 * n > len(data):
            raise WeightFileError(f"truncated weight file at block {b['name']}")
        weights[b["name"]] = np.frombuffer(data, dtype="<f8", count=n, offset=start).reshape(b["shape"]).copy()
    return weights, header["manifest"], header["meta"]


def save(path, weights: dict, manifest: dict, meta: dict | None = None):
    with open(path, "wb") as fh:
        fh.write(dumps(weights, manifest, meta))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
