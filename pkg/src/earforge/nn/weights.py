"""Versioned binary tensor container ("EARN" format).

Layout, all little-endian: magic b"EARN", u32 version, u32 tensor count,
then per tensor: u32 name length, name bytes (utf-8), u32 rank, u64 extents,
float32 data.  The same container stores network weights, descriptor stores,
score matrices and the BSIF filter asset.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"EARN"
VERSION = 1


def save_weights(path, tensors):
    """Write a name -> array mapping; arrays are stored as float32."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(tensors)))
        for name, arr in tensors.items():
            data = np.ascontiguousarray(arr, dtype="<f4")
            raw_name = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw_name)))
            fh.write(raw_name)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}Q", *data.shape))
            fh.write(data.tobytes())


def load_weights(path):
    """Read a container back into a dict of float32 arrays."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not an EARN container")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    pos = 12
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        name = raw[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        shape = struct.unpack_from(f"<{rank}Q", raw, pos)
        pos += 8 * rank
        size = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(raw, dtype="<f4", count=size, offset=pos)
        pos += 4 * size
        tensors[name] = data.reshape(shape).copy()
    return tensors
