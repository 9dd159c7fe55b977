"""Bytecode image (``MLBC``) and runtime object (``MLOB``) formats.

Layout, all integers little-endian::

    magic          4 bytes   b"MLBC" | b"MLOB"
    version        u32       FORMAT_VERSION
    n_constants    u32
      len u32, bytes          (per constant)
    n_functions    u32
      name_len u32, name, arity u32, code_offset u32
    code_len       u32
    code           bytes
    runtime_len    u32       (MLBC only)
    runtime        bytes     (MLBC only; a verbatim MLOB blob or empty)

No field carries time, host paths or randomness.  Trailing bytes are an error,
which keeps the encoding canonical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

IMAGE_MAGIC = b"MLBC"
OBJECT_MAGIC = b"MLOB"
FORMAT_VERSION = 1


class ImageFormatError(ValueError):
    """A byte sequence is not a valid image/object; names the constraint and offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.reason = message
        self.offset = offset


@dataclass(frozen=True)
class Function:
    name: bytes
    arity: int
    code_offset: int


@dataclass(frozen=True)
class RuntimeObject:
    """Compiled runtime helpers: constants, exported functions and code."""

    constants: tuple[bytes, ...] = ()
    functions: tuple[Function, ...] = ()
    code: bytes = b""

    def serialize(self) -> bytes:
        out = bytearray(OBJECT_MAGIC)
        _put_body(out, self.constants, self.functions, self.code)
        return bytes(out)

    def exports(self) -> dict[bytes, tuple[int, int]]:
        """name -> (function index, arity); first definition wins."""
        table: dict[bytes, tuple[int, int]] = {}
        for i, fn in enumerate(self.functions):
            table.setdefault(fn.name, (i, fn.arity))
        return table


@dataclass(frozen=True)
class BytecodeImage:
    constants: tuple[bytes, ...] = ()
    functions: tuple[Function, ...] = ()
    code: bytes = b""
    runtime_section: bytes = b""
    version: int = FORMAT_VERSION
    _runtime: RuntimeObject | None = field(default=None, compare=False, repr=False)

    def serialize(self) -> bytes:
        out = bytearray(IMAGE_MAGIC)
        _put_body(out, self.constants, self.functions, self.code, self.version)
        out += struct.pack("<I", len(self.runtime_section))
        out += self.runtime_section
        return bytes(out)

    @property
    def runtime(self) -> RuntimeObject | None:
        if not self.runtime_section:
            return None
        if self._runtime is None:
            return parse_object(self.runtime_section)
        return self._runtime

    def function_index(self, name: bytes) -> int | None:
        for i, fn in enumerate(self.functions):
            if fn.name == name:
                return i
        return None

    def with_runtime(self, runtime: bytes) -> "BytecodeImage":
        return replace(self, runtime_section=runtime, _runtime=None)


def _put_body(out: bytearray, constants, functions, code, version=FORMAT_VERSION) -> None:
    out += struct.pack("<I", version)
    out += struct.pack("<I", len(constants))
    for c in constants:
        out += struct.pack("<I", len(c))
        out += c
    out += struct.pack("<I", len(functions))
    for fn in functions:
        out += struct.pack("<I", len(fn.name))
        out += fn.name
        out += struct.pack("<II", fn.arity, fn.code_offset)
    out += struct.pack("<I", len(code))
    out += code


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def u32(self, what: str) -> int:
        if self.pos + 4 > len(self.data):
            raise ImageFormatError(f"truncated {what}", self.pos)
        (v,) = struct.unpack_from("<I", self.data, self.pos)
        self.pos += 4
        return v

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise ImageFormatError(f"truncated {what}", self.pos)
        b = self.data[self.pos : self.pos + n]
        self.pos += n
        return bytes(b)


def _read_body(r: _Reader):
    version_at = r.pos
    version = r.u32("version")
    if version != FORMAT_VERSION:
        raise ImageFormatError(f"unsupported format version {version}", version_at)
    nconst = r.u32("constant count")
    constants = []
    for i in range(nconst):
        n = r.u32(f"constant {i} length")
        constants.append(r.take(n, f"constant {i}"))
    nfunc = r.u32("function count")
    raw_funcs = []
    for i in range(nfunc):
        at = r.pos
        n = r.u32(f"function {i} name length")
        name = r.take(n, f"function {i} name")
        arity = r.u32(f"function {i} arity")
        off = r.u32(f"function {i} code offset")
        raw_funcs.append((at, Function(name, arity, off)))
    code_len = r.u32("code length")
    code = r.take(code_len, "code")
    for at, fn in raw_funcs:
        if fn.code_offset >= len(code):
            raise ImageFormatError(
                f"function {fn.name.decode('latin-1')!r} code offset {fn.code_offset} "
                f"past end of code ({len(code)} bytes)",
                at,
            )
        if fn.arity > 0xFFFF:
            raise ImageFormatError(f"function {fn.name.decode('latin-1')!r} arity too large", at)
    return version, tuple(constants), tuple(fn for _, fn in raw_funcs), code


def _check_magic(data: bytes, magic: bytes) -> None:
    if len(data) < 4:
        raise ImageFormatError("missing magic", 0)
    if data[:4] != magic:
        raise ImageFormatError(f"bad magic {bytes(data[:4])!r}, expected {magic!r}", 0)


def parse_object(data: bytes) -> RuntimeObject:
    data = bytes(data)
    _check_magic(data, OBJECT_MAGIC)
    r = _Reader(data, 4)
    _, constants, functions, code = _read_body(r)
    if r.pos != len(data):
        raise ImageFormatError("trailing bytes after object", r.pos)
    return RuntimeObject(constants, functions, code)


def validate_image(data: bytes) -> BytecodeImage:
    """Parse and check an ``MLBC`` image; raises ImageFormatError on the first violation."""
    data = bytes(data)
    _check_magic(data, IMAGE_MAGIC)
    r = _Reader(data, 4)
    version, constants, functions, code = _read_body(r)
    rt_at = r.pos
    rt_len = r.u32("runtime section length")
    runtime_section = r.take(rt_len, "runtime section")
    if r.pos != len(data):
        raise ImageFormatError("trailing bytes after runtime section", r.pos)
    runtime = None
    if runtime_section:
        try:
            runtime = parse_object(runtime_section)
        except ImageFormatError as exc:
            raise ImageFormatError(f"runtime section: {exc.reason}", rt_at + 4 + exc.offset) from None
    return BytecodeImage(constants, functions, code, runtime_section, version, runtime)


parse_image = validate_image


def section_spans(data: bytes) -> list[tuple[str, int, int]]:
    """(section, start, end) byte ranges of a valid image or object."""
    data = bytes(data)
    magic = data[:4]
    r = _Reader(data, 4)
    spans = [("header", 0, 8)]
    r.u32("version")
    start = r.pos
    n = r.u32("constant count")
    for _ in range(n):
        r.take(r.u32("len"), "constant")
    spans.append(("constants", start, r.pos))
    start = r.pos
    n = r.u32("function count")
    for _ in range(n):
        r.take(r.u32("len"), "name")
        r.u32("arity")
        r.u32("offset")
    spans.append(("functions", start, r.pos))
    start = r.pos
    r.take(r.u32("code length"), "code")
    spans.append(("code", start, r.pos))
    if magic == IMAGE_MAGIC:
        spans.append(("runtime_section", r.pos, len(data)))
    return spans
