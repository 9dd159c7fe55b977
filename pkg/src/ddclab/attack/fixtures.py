"""Defect fixtures: variants of s_A that break one DDC assumption each.

Each is a plain text substitution on the shipped compiler source, so the
defect is visible in the source and honest with respect to its binary.
"""

from __future__ import annotations

from ..selfhost.toolchain import COMPILER_SOURCE, shipped_source
from ..tcompiler.inputs import SourceTree

PUSH_SELECTOR = b"""fn push_is_short(v) {
    return short_push && v >= -128 && v <= 127
}
"""

# Which of two argument expressions runs last is left open by the language.
# The probe records it; the short form is chosen only when the second
# argument was evaluated first, so T's build of this source picks the long
# encoding everywhere while A's build keeps the short one.
ORDER_DEPENDENT_SELECTOR = b"""var probe_mark = 0

fn probe(k) {
    probe_mark = k
    return k
}

fn push_pick(first, second, v) {
    if (probe_mark != first) {
        return 0
    }
    return short_push && v >= -128 && v <= 127
}

fn push_is_short(v) {
    return push_pick(probe(1), probe(2), v)
}
"""

CONST_EMIT = b"""    buf_u32(out, len(consts))
    var i = 0
    while (i < len(consts)) {
        buf_lstr(out, consts[i])
        i = i + 1
    }
"""

# an extra, never-referenced constant; its contents come from an
# expression that is not a function of the compiler's inputs
EXTRA_CONST_EMIT = b"""    var extra = 0
    if (mode == "program") {
        extra = 1
    }
    buf_u32(out, len(consts) + extra)
    var i = 0
    while (i < len(consts)) {
        buf_lstr(out, consts[i])
        i = i + 1
    }
    if (extra) {
        buf_lstr(out, %s)
    }
"""

PAD_EXPR = b"pad_bytes(2)"
PAD_HELPER = b"""
fn pad_bytes(n) {
    var cells = alloc(n)
    var b = array()
    var i = 0
    while (i < n) {
        push(b, cells[i] & 255)
        i = i + 1
    }
    return bytes(b)
}
"""
CLOCK_EXPR = b'cat("built-at:", read_file("/env/clock"))'

FIXTURES = ("semantic-divergence", "uninitialized-padding", "timestamp-in-output")


def _substitute(src: bytes, old: bytes, new: bytes) -> bytes:
    if src.count(old) != 1:
        raise ValueError(f"fixture anchor found {src.count(old)} times in the compiler source")
    return src.replace(old, new)


def fixture_source(kind: str, base: SourceTree | None = None) -> SourceTree:
    base = base or shipped_source()
    src = base.files[COMPILER_SOURCE]
    if kind == "semantic-divergence":
        src = _substitute(src, PUSH_SELECTOR, ORDER_DEPENDENT_SELECTOR)
    elif kind == "uninitialized-padding":
        src = _substitute(src, CONST_EMIT, EXTRA_CONST_EMIT % PAD_EXPR) + PAD_HELPER
    elif kind == "timestamp-in-output":
        src = _substitute(src, CONST_EMIT, EXTRA_CONST_EMIT % CLOCK_EXPR)
    else:
        raise ValueError(f"unknown fixture {kind!r}; known: {', '.join(FIXTURES)}")
    return base.replace_file(COMPILER_SOURCE, src)
