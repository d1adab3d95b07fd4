"""Binary snapshot cache for reusing simulated data across tracker variants.

Layout, all little-endian:

    offset  size  field
    0       4     magic b"SGTK"
    4       2     format version (currently 1), uint16
    6       2     reserved, zero
    8       4     number of steps, uint32
    12      4     measurement length per step, uint32
    16      ...   payload: complex64 array of shape (num_steps, length)

Only the measurement vector is stored; the noise precision diagonal is a
fixed function of the radar config and is rebuilt by the consumer.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"SGTK"
VERSION = 1
_HEADER = struct.Struct("<4sHHII")


class CacheError(ValueError):
    pass


def save_snapshots(path, snapshots) -> int:
    """Write Snapshot objects or complex arrays; returns bytes written."""
    arrays = [np.asarray(getattr(s, "data", s), dtype=np.complex64).ravel()
              for s in snapshots]
    if not arrays:
        raise CacheError("nothing to cache")
    n_z = arrays[0].size
    if any(a.size != n_z for a in arrays):
        raise CacheError("snapshots differ in length")
    payload = np.stack(arrays)
    body = payload.astype("<c8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, 0, len(arrays), n_z))
        fh.write(body)
    return _HEADER.size + len(body)


def load_snapshots(path) -> np.ndarray:
    """Read a cache file back as a complex64 array (num_steps, length)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise CacheError("truncated cache header")
        magic, version, _, num_steps, n_z = _HEADER.unpack(head)
        if magic != MAGIC:
            raise CacheError("not a snapshot cache file")
        if version != VERSION:
            raise CacheError(f"unsupported cache version {version}")
        raw = fh.read()
    data = np.frombuffer(raw, dtype="<c8")
    if data.size != num_steps * n_z:
        raise CacheError("payload size does not match header")
    return data.reshape(num_steps, n_z).copy()
