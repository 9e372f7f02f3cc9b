"""
### archive.py
#### Functions:
    - encode_archive
    - decode_archive
    - archive_write
    - archive_read

Layout: magic ``NFTA1``, 8-byte little-endian header length, UTF-8 JSON header listing
``{"name", "dtype": "f32", "shape"}`` per tensor, then the little-endian float32 payloads
concatenated in header order.
"""

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from brainvidpy._tools.tools import atomic_write_bytes
from brainvidpy.errors import ArchiveCorruptionError, ArchiveFormatError, ArchiveValidationError

MAGIC = b"NFTA1"
_LEN = struct.Struct("<Q")


def encode_archive(tensors: Mapping[str, np.ndarray]) -> bytes:
    """Serializes named tensors to archive bytes.

    #### Args:
        tensors (Mapping[str, np.ndarray]): Named arrays; converted to float32.

    #### Returns:
        data (bytes)
    """
    header, payloads = [], []
    for name, value in tensors.items():
        if not isinstance(name, str) or not name:
            raise ArchiveValidationError(f"tensor names must be non-empty strings, got {name!r}")
        array = np.ascontiguousarray(np.asarray(value, dtype="<f4"))
        header.append({"name": name, "dtype": "f32", "shape": [int(s) for s in array.shape]})
        payloads.append(array.tobytes(order="C"))
    names = [entry["name"] for entry in header]
    if len(set(names)) != len(names):
        raise ArchiveValidationError("duplicate tensor names in archive")
    head = json.dumps(header, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return MAGIC + _LEN.pack(len(head)) + head + b"".join(payloads)


def decode_archive(data: bytes) -> dict[str, np.ndarray]:
    """Parses archive bytes; tensors come back in header order."""
    if data[:len(MAGIC)] != MAGIC:
        raise ArchiveFormatError("bad magic: not a tensor archive")
    offset = len(MAGIC)
    if len(data) < offset + _LEN.size:
        raise ArchiveCorruptionError("truncated header length")
    (head_len,) = _LEN.unpack_from(data, offset)
    offset += _LEN.size
    if len(data) < offset + head_len:
        raise ArchiveCorruptionError("truncated header")
    try:
        header = json.loads(data[offset:offset + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveCorruptionError(f"unreadable header: {exc}") from exc
    offset += head_len

    tensors = {}
    for entry in header:
        name, shape = entry.get("name"), entry.get("shape")
        if entry.get("dtype") != "f32" or not isinstance(shape, list) or any(int(s) < 0 for s in shape):
            raise ArchiveValidationError(f"invalid header entry {entry!r}")
        if name in tensors:
            raise ArchiveValidationError(f"duplicate tensor name '{name}'")
        size = int(np.prod(shape, dtype=np.int64)) * 4
        if len(data) < offset + size:
            raise ArchiveCorruptionError(f"payload of '{name}' is truncated")
        tensors[name] = np.frombuffer(data, dtype="<f4", count=size // 4, offset=offset).reshape(shape).astype(np.float32)
        offset += size
    if offset != len(data):
        raise ArchiveCorruptionError(f"{len(data) - offset} trailing bytes after payload")
    return tensors


def archive_write(path: str | Path, tensors: Mapping[str, np.ndarray]) -> None:
    """Writes the archive atomically (temporary file, then rename)."""
    atomic_write_bytes(path, encode_archive(tensors))


def archive_read(path: str | Path) -> dict[str, np.ndarray]:
    return decode_archive(Path(path).read_bytes())
