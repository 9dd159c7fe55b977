"""``MLAR`` archive format: an ``ar``-like container whose entries carry an mtime.

    magic   4 bytes  b"MLAR"
    entries until end of data:
      name_len u32, name, mtime u64, payload_len u32, payload
"""

from __future__ import annotations

import struct
from typing import NamedTuple

ARCHIVE_MAGIC = b"MLAR"


class ArchiveError(ValueError):
    pass


class ArchiveEntry(NamedTuple):
    name: bytes
    mtime: int
    payload: bytes


def pack_archive(entries) -> bytes:
    out = bytearray(ARCHIVE_MAGIC)
    seen = set()
    for name, mtime, payload in entries:
        name = bytes(name)
        if name in seen:
            raise ArchiveError(f"duplicate entry name {name!r}")
        seen.add(name)
        if not 0 <= mtime < 1 << 64:
            raise ArchiveError(f"mtime out of range for {name!r}: {mtime}")
        out += struct.pack("<I", len(name)) + name
        out += struct.pack("<QI", mtime, len(payload)) + bytes(payload)
    return bytes(out)


def unpack_archive(data: bytes) -> list[ArchiveEntry]:
    data = bytes(data)
    if data[:4] != ARCHIVE_MAGIC:
        raise ArchiveError("missing MLAR magic" if len(data) < 4 else f"bad magic {data[:4]!r}")
    pos = 4
    entries: list[ArchiveEntry] = []
    seen = set()
    while pos < len(data):
        start = pos
        if pos + 4 > len(data):
            raise ArchiveError(f"truncated entry header at offset {start}")
        (nlen,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if pos + nlen + 12 > len(data):
            raise ArchiveError(f"truncated entry at offset {start}")
        name = data[pos : pos + nlen]
        pos += nlen
        mtime, plen = struct.unpack_from("<QI", data, pos)
        pos += 12
        if pos + plen > len(data):
            raise ArchiveError(f"truncated payload of {name!r} at offset {pos}")
        if name in seen:
            raise ArchiveError(f"duplicate entry name {name!r}")
        seen.add(name)
        entries.append(ArchiveEntry(name, mtime, data[pos : pos + plen]))
        pos += plen
    return entries


def strip_mtimes(data: bytes) -> bytes:
    """Re-pack an archive with every mtime set to zero."""
    return pack_archive([(e.name, 0, e.payload) for e in unpack_archive(data)])
