"""Binary tensor container used by feature and checkpoint files.

Layout: 8-byte magic ``MODF0001``, an 8-byte little-endian header length,
a JSON header, then raw little-endian tensor data.  The header maps each
tensor name to its dtype, shape and byte offset (relative to the start of
the data section) and carries an arbitrary ``meta`` dict.

Writing is deterministic: sorted tensor names, canonical JSON.  Two files
written from identical contents are byte-identical.
"""

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MODF0001"

_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}


class ContainerError(IOError):
    """Malformed or truncated container file."""


def write_tensors(path, tensors: dict, meta: dict | None = None) -> None:
    """Write named numpy arrays plus a JSON-able ``meta`` dict to ``path``."""
    entries = {}
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        dt = arr.dtype.newbyteorder("<")
        if dt.str not in _DTYPES:
            raise ContainerError(f"unsupported dtype {arr.dtype} for tensor {name!r}")
        blob = np.ascontiguousarray(arr, dtype=dt).tobytes()
        entries[name] = {"dtype": dt.str, "shape": list(arr.shape), "offset": offset}
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps(
        {"meta": meta or {}, "tensors": entries},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def read_tensors(path) -> tuple[dict, dict]:
    """Read a container; returns (tensors, meta)."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MAGIC:
        raise ContainerError(f"{path}: not a tensor container (bad magic)")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    if len(raw) < 16 + hlen:
        raise ContainerError(f"{path}: truncated header")
    try:
        header = json.loads(raw[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ContainerError(f"{path}: bad header: {e}") from None
    data = raw[16 + hlen :]
    tensors = {}
    for name, ent in header["tensors"].items():
        dt = _DTYPES.get(ent["dtype"])
        if dt is None:
            raise ContainerError(f"{path}: unsupported dtype {ent['dtype']!r}")
        shape = tuple(ent["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = ent["offset"]
        end = start + count * dt.itemsize
        if end > len(data):
            raise ContainerError(f"{path}: tensor {name!r} runs past end of file")
        tensors[name] = np.frombuffer(data[start:end], dtype=dt).reshape(shape).copy()
    return tensors, header.get("meta", {})
