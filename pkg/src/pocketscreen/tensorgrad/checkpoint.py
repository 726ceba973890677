"""Flat named-tensor checkpoint container.

Layout: magic ``PSNT`` | u32 version | u64 header length | header JSON
(UTF-8) | payload.  The header lists entries as {name, shape, offset};
payload values are little-endian float64 in row-major order.  A free-form
``meta`` dict rides along in the header.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from .tensor import Tensor

MAGIC = b"PSNT"
VERSION = 1

__all__ = ["save_checkpoint", "load_checkpoint"]


def save_checkpoint(path, tensors: Dict[str, Tensor], meta: dict | None = None):
    entries = []
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name].data, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({"meta": meta or {}, "entries": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path, requires_grad: bool = False) -> Tuple[Dict[str, Tensor], dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16 : 16 + hlen].decode("utf-8"))
    payload = raw[16 + hlen :]
    tensors: Dict[str, Tensor] = {}
    for e in header["entries"]:
        shape = tuple(e["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=e["offset"]).reshape(shape)
        tensors[e["name"]] = Tensor(arr.astype(np.float64), requires_grad=requires_grad)
    return tensors, header["meta"]
