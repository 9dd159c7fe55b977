"""The trusted compiler T: a native Python MiniLang compiler.

T shares nothing with the self-hosted compiler except the language
definition in ``docs/minilang.md``.  It is intentionally naive: every integer
literal becomes a full ``PUSH_I64`` and arguments are evaluated left to right,
so its output bytes differ from the self-hosted compiler's for the same source.
"""

from __future__ import annotations

from ..vm.image import BytecodeImage, ImageFormatError, RuntimeObject, parse_object
from .codegen import build_image, build_object
from .inputs import BuildInputs, SourceTree
from .lexer import CompileError, Diagnostic, Token, tokenize
from .parser import parse

# T understands no compilation flags; anything passed is rejected rather than ignored.
KNOWN_FLAGS: frozenset[str] = frozenset()


class UnknownFlagError(ValueError):
    def __init__(self, key: str):
        super().__init__(f"unknown compilation flag '{key}'")
        self.key = key


def _check_flags(inputs: BuildInputs) -> None:
    for key, _ in inputs.flags:
        if key not in KNOWN_FLAGS:
            raise UnknownFlagError(key)


def t_compile_program(src: SourceTree, inputs: BuildInputs = BuildInputs()) -> BytecodeImage:
    _check_flags(inputs)
    runtime = None
    if inputs.embedded_runtime:
        try:
            runtime = parse_object(inputs.embedded_runtime)
        except ImageFormatError as exc:
            raise ValueError(f"embedded runtime is not a valid object: {exc}") from None
    prog = parse(src.entry_source, src.entry_point)
    return build_image(prog, src.entry_point, inputs.embedded_runtime, runtime)


def t_compile_object(src: SourceTree, inputs: BuildInputs = BuildInputs()) -> RuntimeObject:
    _check_flags(inputs)
    prog = parse(src.entry_source, src.entry_point)
    return build_object(prog, src.entry_point)


__all__ = [
    "BuildInputs",
    "CompileError",
    "Diagnostic",
    "KNOWN_FLAGS",
    "SourceTree",
    "Token",
    "UnknownFlagError",
    "parse",
    "t_compile_object",
    "t_compile_program",
    "tokenize",
]
