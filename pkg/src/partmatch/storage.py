"""Deterministic array containers and content hashing for disk caches.

numpy's savez stamps zip entries with the current time, which breaks
byte-for-byte reproducibility of cached artifacts; this writer pins the
timestamp so identical inputs yield identical files. Files remain ordinary
.npz archives readable by numpy.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile

import numpy as np

_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_npz(path, arrays):
    """Write named arrays as an uncompressed, reproducible .npz file."""
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asanyarray(arrays[name]))
            info = zipfile.ZipInfo(name + ".npy", date_time=_EPOCH)
            zf.writestr(info, buf.getvalue())


def load_npz(path):
    out = {}
    with np.load(path, allow_pickle=False) as data:
        for name in data.files:
            out[name] = data[name]
    return out


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def stable_key(parts):
    """Content key for a cache entry from a JSON-serializable description."""
    blob = json.dumps(parts, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
