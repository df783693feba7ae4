"""Binary container used for snapshot files and model bundles.

Layout::

    magic | u64 LE header length | UTF-8 JSON header | float64 LE payload | u32 LE CRC-32

The header lists every array with its shape and byte offset into the
payload; the CRC covers the payload bytes only. JSON is written with sorted
keys and no whitespace so identical content always gives identical bytes.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import ChecksumError, MagicError, StructureError, TruncatedError

SNAPSHOT_MAGIC = b"MORSNAP1"
BUNDLE_MAGIC = b"MORBDL1"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


def encode(magic: bytes, header: dict, arrays: dict[str, np.ndarray]) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(np.asarray(arr, dtype=np.float64)).astype(_DTYPE, copy=False)
        raw = a.tobytes(order="C")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    full_header = dict(header)
    full_header["format_version"] = FORMAT_VERSION
    full_header["arrays"] = entries
    head = json.dumps(full_header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    payload = b"".join(chunks)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    return b"".join([magic, struct.pack("<Q", len(head)), head, payload, struct.pack("<I", crc)])


def decode(blob: bytes, magic: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    """Parse a container; raises a :class:`FileFormatError` subclass on any defect."""
    n_magic = len(magic)
    if blob[:n_magic] != magic:
        if len(blob) < n_magic and magic.startswith(blob):
            raise TruncatedError(f"file ends inside the magic bytes ({len(blob)} of {n_magic})")
        raise MagicError(f"bad magic {blob[:n_magic]!r}, expected {magic!r}")
    pos = n_magic
    if len(blob) < pos + 8:
        raise TruncatedError("file ends inside the header length field")
    (hlen,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    if len(blob) < pos + hlen:
        raise TruncatedError(f"header declares {hlen} bytes, only {len(blob) - pos} present")
    try:
        header = json.loads(blob[pos:pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise StructureError(f"unreadable header: {exc}") from None
    pos += hlen
    if not isinstance(header, dict):
        raise StructureError("header is not a mapping")
    if header.get("format_version") != FORMAT_VERSION:
        raise MagicError(f"unsupported format version {header.get('format_version')!r}")
    entries = header.get("arrays")
    if not isinstance(entries, list):
        raise StructureError("header has no array table")
    expected = 0
    seen = set()
    for e in entries:
        ok = isinstance(e, dict) and isinstance(e.get("name"), str) and e.get("name") not in seen
        ok = ok and isinstance(e.get("shape"), list) and all(type(s) is int and s >= 0 for s in e["shape"])
        ok = ok and type(e.get("offset")) is int and type(e.get("nbytes")) is int
        ok = ok and e["offset"] == expected and e["nbytes"] == int(np.prod(e["shape"], dtype=np.int64)) * 8
        if not ok:
            raise StructureError(f"inconsistent array entry {e!r}")
        seen.add(e["name"])
        expected += e["nbytes"]
    have = len(blob) - pos
    if have < expected + 4:
        raise TruncatedError(f"payload declares {expected} bytes plus checksum, only {have} present")
    if have > expected + 4:
        raise StructureError(f"{have - expected - 4} unexpected trailing bytes")
    payload = blob[pos:pos + expected]
    (crc,) = struct.unpack_from("<I", blob, pos + expected)
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise ChecksumError("payload checksum mismatch")
    arrays = {}
    for e in entries:
        arrays[e["name"]] = np.frombuffer(payload, dtype=_DTYPE, count=e["nbytes"] // 8,
                                          offset=e["offset"]).reshape(e["shape"]).astype(np.float64)
    del header["arrays"]
    return header, arrays


def write_container(path, magic: bytes, header: dict, arrays: dict[str, np.ndarray]) -> int:
    """Write the container and return the payload CRC-32."""
    blob = encode(magic, header, arrays)
    Path(path).write_bytes(blob)
    return struct.unpack("<I", blob[-4:])[0]


def read_container(path, magic: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    return decode(Path(path).read_bytes(), magic)


def as_index(arr: np.ndarray, what: str) -> np.ndarray:
    """Float payload back to integer indices, rejecting non-integral values."""
    idx = np.asarray(arr).astype(np.int64)
    if not np.array_equal(idx.astype(np.float64), arr):
        raise StructureError(f"{what} contains non-integer entries")
    return idx
