"""MiniLang bytecode VM: image/archive formats and deterministic execution."""

from .archive import ArchiveEntry, ArchiveError, pack_archive, strip_mtimes, unpack_archive
from .image import (
    BytecodeImage,
    Function,
    ImageFormatError,
    RuntimeObject,
    parse_object,
    validate_image,
)
from .machine import ExecutionResult, Trap, VmLimits, run_image

__all__ = [
    "ArchiveEntry",
    "ArchiveError",
    "BytecodeImage",
    "ExecutionResult",
    "Function",
    "ImageFormatError",
    "RuntimeObject",
    "Trap",
    "VmLimits",
    "pack_archive",
    "parse_object",
    "run_image",
    "strip_mtimes",
    "unpack_archive",
    "validate_image",
]
