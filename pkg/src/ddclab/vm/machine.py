"""Deterministic execution of bytecode images."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from . import kernel
from .image import BytecodeImage, validate_image

TRAP_KINDS = {
    kernel.TR_INVALID_OPCODE: "invalid_opcode",
    kernel.TR_STACK_UNDERFLOW: "stack_underflow",
    kernel.TR_STACK_OVERFLOW: "stack_overflow",
    kernel.TR_DIV_ZERO: "div_zero",
    kernel.TR_INDEX_RANGE: "index_range",
    kernel.TR_TYPE_ERROR: "type_error",
    kernel.TR_UNDECLARED_PATH: "undeclared_path",
    kernel.TR_BAD_CALL: "bad_call",
    kernel.TR_BAD_JUMP: "bad_jump",
    kernel.TR_STEP_LIMIT: "step_limit",
    kernel.TR_MEMORY_LIMIT: "memory_limit",
    kernel.TR_OUTPUT_LIMIT: "output_limit",
    kernel.TR_BAD_CONSTANT: "bad_constant",
    kernel.TR_BAD_ARGUMENT: "bad_argument",
    kernel.TR_BAD_LOCAL: "bad_local",
    kernel.TR_NO_ENTRY: "no_entry",
}

# Sandbox path whose bytes fill cells returned by alloc(); models leftover memory.
RESIDUE_PATH = b"/env/residue"


@dataclass(frozen=True)
class VmLimits:
    max_steps: int = 2_000_000_000
    max_memory_cells: int = 1 << 27
    max_output_bytes: int = 1 << 24

    def __post_init__(self):
        for name in ("max_steps", "max_memory_cells", "max_output_bytes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class Trap:
    kind: str
    module: str  # "program" or "runtime"
    offset: int

    def __str__(self) -> str:
        return f"{self.kind} at {self.module}+{self.offset}"


@dataclass(frozen=True)
class ExecutionResult:
    exit_code: int
    stdout: bytes
    files_written: Mapping[bytes, bytes] = field(default_factory=dict)
    trap: Trap | None = None
    steps: int = 0

    def __post_init__(self):
        object.__setattr__(self, "files_written", MappingProxyType(dict(sorted(self.files_written.items()))))

    def __eq__(self, other):
        if not isinstance(other, ExecutionResult):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def key(self):
        """Everything observable about a run except the step count."""
        return (self.exit_code, self.stdout, tuple(self.files_written.items()), self.trap)

    def canonical_bytes(self) -> bytes:
        """Stable byte encoding used to compare results across compilers."""
        parts = [b"exit=%d" % self.exit_code, b"stdout=" + self.stdout.hex().encode()]
        for path, data in self.files_written.items():
            parts.append(b"file=" + path.hex().encode() + b":" + data.hex().encode())
        if self.trap:
            parts.append(b"trap=" + str(self.trap).encode())
        return b"\n".join(parts)


def _as_bytes(x) -> bytes:
    return x.encode() if isinstance(x, str) else bytes(x)


class _StringTable:
    def __init__(self):
        self.off: list[int] = []
        self.len: list[int] = []
        self.buf = bytearray()

    def add(self, b: bytes) -> int:
        self.off.append(len(self.buf))
        self.len.append(len(b))
        self.buf += b
        return len(self.off) - 1


def run_image(
    image: BytecodeImage | bytes,
    argv: Sequence[bytes | str] = (),
    sandbox: Mapping[bytes | str, bytes] | None = None,
    limits: VmLimits | None = None,
) -> ExecutionResult:
    """Execute ``image`` from its ``main`` function.

    The result depends only on the four arguments.  Files written by the
    program are returned in ``files_written``; reads see earlier writes.
    """
    if not isinstance(image, BytecodeImage):
        image = validate_image(image)
    limits = limits or VmLimits()
    sandbox = {_as_bytes(k): bytes(v) for k, v in (sandbox or {}).items()}
    runtime = image.runtime

    strings = _StringTable()
    for c in image.constants:
        strings.add(c)
    rt_const_base = len(strings.off)
    if runtime is not None:
        for c in runtime.constants:
            strings.add(c)
    argv_h = np.array([strings.add(_as_bytes(a)) for a in argv], dtype=np.int64)
    paths = sorted(sandbox)
    f_path = np.array([strings.add(p) for p in paths] + [0] * 4, dtype=np.int64)
    f_data = np.array([strings.add(sandbox[p]) for p in paths] + [0] * 4, dtype=np.int64)
    f_written = np.zeros(len(paths) + 4, dtype=np.int64)
    residue = np.frombuffer(sandbox.get(RESIDUE_PATH, b""), dtype=np.uint8).copy()

    rt_code = runtime.code if runtime is not None else b""
    code = np.frombuffer(image.code + rt_code, dtype=np.uint8).copy()
    rt_funcs = runtime.functions if runtime is not None else ()
    fn_off = np.array(
        [f.code_offset for f in image.functions] + [len(image.code) + f.code_offset for f in rt_funcs] + [0],
        dtype=np.int64,
    )
    fn_arity = np.array([f.arity for f in image.functions] + [f.arity for f in rt_funcs] + [0], dtype=np.int64)
    entry = image.function_index(b"main")

    n_str = len(strings.off)
    s_off = np.array(strings.off + [0] * 16, dtype=np.int64)
    s_len = np.array(strings.len + [0] * 16, dtype=np.int64)
    sb = np.frombuffer(bytes(strings.buf) + bytes(64), dtype=np.uint8).copy()

    i64 = lambda xs: np.array(xs, dtype=np.int64)  # noqa: E731
    with np.errstate(all="ignore"):
        res = kernel.run_kernel(
            code,
            i64([0, len(image.code)]),
            i64([len(image.code), len(rt_code)]),
            i64([0, len(image.functions)]),
            i64([len(image.functions), len(rt_funcs)]),
            i64([0, rt_const_base]),
            i64([len(image.constants), len(runtime.constants) if runtime is not None else 0]),
            fn_off,
            fn_arity,
            -1 if entry is None else entry,
            s_off,
            s_len,
            sb,
            n_str,
            len(strings.buf),
            argv_h,
            f_path,
            f_data,
            f_written,
            len(paths),
            residue,
            limits.max_steps,
            limits.max_memory_cells,
            limits.max_output_bytes,
        )
    (status, exit_code, trap, trap_mod, trap_pc, steps, out, s_off, s_len, sb, _, f_path, f_data, f_written, n_files) = res

    def string(h: int) -> bytes:
        o = int(s_off[h])
        return bytes(sb[o : o + int(s_len[h])])

    written = {string(int(f_path[k])): string(int(f_data[k])) for k in range(int(n_files)) if f_written[k]}
    trap_obj = None
    if status:
        trap_obj = Trap(TRAP_KINDS[int(trap)], "runtime" if trap_mod else "program", int(trap_pc))
        exit_code = -1
    return ExecutionResult(int(exit_code), bytes(out), written, trap_obj, int(steps))
