"""Manifest + blob container for named float32 tensors.

A container at ``<stem>`` is two files:

``<stem>.json``
    ``{"magic", "version", "dtype", "checksum", "tensors": [{"name", "shape",
    "offset", "nbytes"}, ...], "meta": {...}}``
``<stem>.bin``
    the tensors back to back as little-endian float32, in manifest order.

``checksum`` is the SHA-256 of the blob.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
DTYPE = "<f4"


class ContainerError(ValueError):
    """Raised for malformed, mismatched or corrupted containers."""


def _paths(stem):
    stem = Path(stem)
    if stem.suffix in (".json", ".bin"):
        stem = stem.with_suffix("")
    return stem.with_suffix(".json"), stem.with_suffix(".bin")


def blob_of(tensors):
    """Concatenate tensors (in iteration order) into one little-endian blob."""
    parts = [np.ascontiguousarray(t, dtype=DTYPE).tobytes() for t in tensors.values()]
    return b"".join(parts)


def checksum_of(tensors):
    return hashlib.sha256(blob_of(tensors)).hexdigest()


def save_container(stem, tensors, magic, meta=None):
    """Write ``tensors`` (an ordered name -> array mapping). Returns the checksum."""
    manifest_path, blob_path = _paths(stem)
    entries = []
    offset = 0
    for name, t in tensors.items():
        nbytes = int(np.asarray(t).size * 4)
        entries.append({"name": name, "shape": list(np.shape(t)),
                        "offset": offset, "nbytes": nbytes})
        offset += nbytes
    blob = blob_of(tensors)
    digest = hashlib.sha256(blob).hexdigest()
    manifest = {
        "magic": magic,
        "version": FORMAT_VERSION,
        "dtype": DTYPE,
        "checksum": digest,
        "tensors": entries,
        "meta": meta or {},
    }
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    blob_path.write_bytes(blob)
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return digest


def load_container(stem, magic):
    """Read a container; returns ``(tensors, meta)``.

    Raises
    ------
    ContainerError
        Wrong magic/version/dtype, truncated blob or checksum mismatch.
    """
    manifest_path, blob_path = _paths(stem)
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ContainerError(f"{manifest_path}: invalid JSON ({exc})") from exc
    if manifest.get("magic") != magic:
        raise ContainerError(
            f"{manifest_path}: expected magic {magic!r}, got {manifest.get('magic')!r}")
    if manifest.get("version") != FORMAT_VERSION:
        raise ContainerError(
            f"{manifest_path}: unsupported version {manifest.get('version')!r}")
    if manifest.get("dtype") != DTYPE:
        raise ContainerError(f"{manifest_path}: unsupported dtype {manifest.get('dtype')!r}")
    blob = blob_path.read_bytes()
    if hashlib.sha256(blob).hexdigest() != manifest.get("checksum"):
        raise ContainerError(f"{blob_path}: checksum mismatch")
    tensors = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(blob) or nbytes != 4 * int(np.prod(shape, dtype=np.int64)):
            raise ContainerError(f"{blob_path}: entry {entry['name']!r} out of bounds")
        arr = np.frombuffer(blob, dtype=DTYPE, count=nbytes // 4, offset=start)
        tensors[entry["name"]] = arr.reshape(shape).astype(np.float32)
    return tensors, manifest.get("meta", {})
