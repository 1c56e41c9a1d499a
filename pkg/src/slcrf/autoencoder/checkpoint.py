"""Binary checkpoint container.

Layout::

    b"SLCRF001"
    u32 little-endian manifest length
    manifest (UTF-8 JSON): architecture, dtype, array names and shapes
    raw little-endian IEEE-754 arrays, in manifest order

Extra named arrays (classifier head, coding state, ...) follow the network
arrays and are listed in the same manifest.
"""

import json
import struct

import numpy as np

from ..errors import FormatError, LengthMismatchError
from .network import Architecture, Network

MAGIC = b"SLCRF001"


def _le(dtype):
    return np.dtype(dtype).newbyteorder("<")


def save_checkpoint(path, network, extras=None):
    """Write ``network`` (and optional ``extras`` name->array) to ``path``."""
    dtype = np.dtype(network.dtype)
    entries = []
    blobs = []
    for name, arr in network.named_arrays():
        entries.append({"name": name, "shape": list(arr.shape), "dtype": dtype.name})
        blobs.append(np.ascontiguousarray(arr, dtype=_le(dtype)).tobytes())
    for name, arr in (extras or {}).items():
        arr = np.asarray(arr)
        dt = np.dtype(arr.dtype)
        if dt.kind not in "fiu":
            raise FormatError(f"extra array {name!r} has unsupported dtype {dt}")
        entries.append({"name": f"extra.{name}", "shape": list(arr.shape), "dtype": dt.name})
        blobs.append(np.ascontiguousarray(arr, dtype=_le(dt)).tobytes())
    manifest = {"arch": network.arch.to_dict(), "dtype": dtype.name, "arrays": entries}
    head = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path):
    """Read a checkpoint; returns ``(network, extras)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise FormatError(f"{path}: not an SLCRF001 checkpoint")
    (n,) = struct.unpack("<I", data[8:12])
    manifest = json.loads(data[12:12 + n].decode("utf-8"))
    offset = 12 + n
    arch = Architecture.from_dict(manifest["arch"])
    params = [dict() for _ in arch.layers]
    extras = {}
    for entry in manifest["arrays"]:
        dt = _le(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        size = count * dt.itemsize
        if offset + size > len(data):
            raise LengthMismatchError(f"{path}: truncated at array {entry['name']}")
        arr = np.frombuffer(data, dtype=dt, count=count, offset=offset)
        arr = arr.astype(dt.newbyteorder("="), copy=True).reshape(entry["shape"])
        offset += size
        name = entry["name"]
        if name.startswith("extra."):
            extras[name[6:]] = arr
        else:
            layer, key = name.split(".")
            params[int(layer[5:])][key] = arr
    if offset != len(data):
        raise LengthMismatchError(f"{path}: {len(data) - offset} trailing bytes")
    return Network(arch, params, np.dtype(manifest["dtype"]).type), extras
