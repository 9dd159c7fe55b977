"""MiniLang VM instruction set.

Every instruction is one opcode byte followed by a fixed-size little-endian
operand.  Jump targets and function code offsets are relative to the start of
the module's code (program code or runtime-section code).
"""

from __future__ import annotations

import struct

PUSH_I8 = 0x01
PUSH_I64 = 0x02
PUSH_CONST = 0x03
POP = 0x04
DUP = 0x05
LOAD = 0x06
STORE = 0x07
GLOAD = 0x08
GSTORE = 0x09

ADD = 0x10
SUB = 0x11
MUL = 0x12
DIV = 0x13
MOD = 0x14
NEG = 0x15
AND = 0x16
OR = 0x17
XOR = 0x18
SHL = 0x19
SHR = 0x1A
NOT = 0x1B

EQ = 0x20
NE = 0x21
LT = 0x22
LE = 0x23
GT = 0x24
GE = 0x25

JMP = 0x30
JZ = 0x31
JNZ = 0x32

CALL = 0x38
CALLR = 0x39
RET = 0x3A
LOCALS = 0x3B

INDEX = 0x40
SETINDEX = 0x41
BUILTIN = 0x42

# call operand bit selecting the runtime module's function table
RUNTIME_BIT = 0x80000000

# operand kinds: "" none, "i8", "i64", "u8", "u16", "u32"
OPERANDS: dict[int, str] = {
    PUSH_I8: "i8",
    PUSH_I64: "i64",
    PUSH_CONST: "u32",
    POP: "",
    DUP: "",
    LOAD: "u16",
    STORE: "u16",
    GLOAD: "u16",
    GSTORE: "u16",
    ADD: "",
    SUB: "",
    MUL: "",
    DIV: "",
    MOD: "",
    NEG: "",
    AND: "",
    OR: "",
    XOR: "",
    SHL: "",
    SHR: "",
    NOT: "",
    EQ: "",
    NE: "",
    LT: "",
    LE: "",
    GT: "",
    GE: "",
    JMP: "u32",
    JZ: "u32",
    JNZ: "u32",
    CALL: "u32",
    CALLR: "u32",
    RET: "",
    LOCALS: "u16",
    INDEX: "",
    SETINDEX: "",
    BUILTIN: "u8",
}

NAMES: dict[int, str] = {
    op: name
    for name, op in list(globals().items())
    if name.isupper() and isinstance(op, int) and op in OPERANDS
}
OPCODES: dict[str, int] = {name: op for op, name in NAMES.items()}

_FMT = {"": None, "i8": "<b", "i64": "<q", "u8": "<B", "u16": "<H", "u32": "<I"}
SIZES = {"": 0, "i8": 1, "i64": 8, "u8": 1, "u16": 2, "u32": 4}


def instr_size(op: int) -> int:
    return 1 + SIZES[OPERANDS[op]]


# Builtins: name -> (id, arity).  Dispatched by the BUILTIN opcode.
BUILTINS: dict[str, tuple[int, int]] = {
    "print": (0, 1),
    "args": (1, 0),
    "exit": (2, 1),
    "read_file": (3, 1),
    "write_file": (4, 2),
    "len": (5, 1),
    "byte_at": (6, 2),
    "substr": (7, 3),
    "cat": (8, 2),
    "chr": (9, 1),
    "itos": (10, 1),
    "stoi": (11, 1),
    "array": (12, 0),
    "push": (13, 2),
    "pop": (14, 1),
    "bytes": (15, 1),
    "make": (16, 2),
    "alloc": (17, 1),
    "exists": (18, 1),
}
BUILTIN_NAMES = {bid: name for name, (bid, _) in BUILTINS.items()}
BUILTIN_ARITY = {bid: arity for _, (bid, arity) in BUILTINS.items()}


def encode(op: int, operand: int | None = None) -> bytes:
    kind = OPERANDS[op]
    if kind == "":
        if operand is not None:
            raise ValueError(f"{NAMES[op]} takes no operand")
        return bytes([op])
    if operand is None:
        raise ValueError(f"{NAMES[op]} needs an operand")
    return bytes([op]) + struct.pack(_FMT[kind], operand)


def decode(code: bytes, pc: int) -> tuple[int, int | None, int]:
    """Decode one instruction at ``pc``; returns (op, operand, next_pc).

    Raises ValueError on an unknown opcode or a truncated operand.
    """
    op = code[pc]
    kind = OPERANDS.get(op)
    if kind is None:
        raise ValueError(f"invalid opcode 0x{op:02x} at {pc}")
    size = SIZES[kind]
    end = pc + 1 + size
    if end > len(code):
        raise ValueError(f"truncated {NAMES[op]} at {pc}")
    if not size:
        return op, None, end
    (operand,) = struct.unpack_from(_FMT[kind], code, pc + 1)
    return op, operand, end


def disassemble(code: bytes, start: int = 0, end: int | None = None) -> list[tuple[int, str, int | None]]:
    """List of (pc, mnemonic, operand) for a well-formed code range."""
    out = []
    pc = start
    stop = len(code) if end is None else end
    while pc < stop:
        op, operand, nxt = decode(code, pc)
        out.append((pc, NAMES[op], operand))
        pc = nxt
    return out


def assemble(listing) -> bytes:
    """Assemble ``[("PUSH_CONST", 0), ("BUILTIN", 0), ...]`` into code bytes."""
    out = bytearray()
    for item in listing:
        if isinstance(item, str):
            item = (item,)
        name, *rest = item
        out += encode(OPCODES[name], rest[0] if rest else None)
    return bytes(out)
