"""Single-file binary checkpoint format.

Layout (all integers little-endian):

    bytes 0..3    magic b"MVCK"
    bytes 4..7    uint32 format version (currently 1)
    bytes 8..15   uint64 length of the UTF-8 JSON header
    header        JSON object:
                    tensors   list of {name, shape, offset} (offset into blob)
                    step      optimizer step counter
                    epoch     completed training epochs
                    rng_state numpy bit-generator state dict or null
                    meta      free-form dict (architecture, hyperparameters)
    blob          tensor data, C-order float64 little-endian, concatenated

Round-trips bit-exactly: values are written as raw float64 bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import CheckpointError

MAGIC = b"MVCK"
VERSION = 1


def save_tensors(
    path,
    tensors: dict[str, np.ndarray],
    step: int = 0,
    epoch: int = 0,
    rng_state: dict | None = None,
    meta: dict | None = None,
) -> None:
    entries = []
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "tensors": entries,
        "step": int(step),
        "epoch": int(epoch),
        "rng_state": rng_state,
        "meta": meta or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)


def load_tensors(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint; returns (tensors, header)."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 16:
        raise CheckpointError(f"file truncated at {len(raw)} bytes", offset=len(raw))
    if raw[:4] != MAGIC:
        raise CheckpointError(f"bad magic {raw[:4]!r}", offset=0)
    (version,) = struct.unpack("<I", raw[4:8])
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}", offset=4)
    (header_len,) = struct.unpack("<Q", raw[8:16])
    if len(raw) < 16 + header_len:
        raise CheckpointError("file truncated inside header", offset=len(raw))
    try:
        header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt header: {e}", offset=16) from e
    blob = raw[16 + header_len :]
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * 8
        if end > len(blob):
            raise CheckpointError(
                f"tensor {entry['name']!r} extends past end of file",
                offset=16 + header_len + start,
            )
        arr = np.frombuffer(blob[start:end], dtype="<f8").reshape(shape)
        tensors[entry["name"]] = np.array(arr, dtype=np.float64)  # writable copy
    return tensors, header
