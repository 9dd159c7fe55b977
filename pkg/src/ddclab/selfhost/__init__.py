"""The self-hosted MiniLang toolchain: s_A (compiler + runtime source) and its builds."""

from .env import AuditEntry, AuditLog, BuildEnv, CompilerCrash, SourceDiagnostic, ToolchainError
from .toolchain import (
    COMPILER_SOURCE,
    DEFAULT_INPUTS,
    DEFAULT_MAX_GENERATIONS,
    DEFAULT_PLAN,
    RUNTIME_SOURCE,
    T,
    BootstrapLog,
    CompilerPackage,
    Component,
    ConvergenceError,
    TrustedCompiler,
    archive_runtime,
    bootstrap,
    compile_with,
    load_asset,
    runtime_from_archive,
    self_compile,
    sha256,
    shipped_source,
    stabilize,
)

__all__ = [
    "AuditEntry",
    "AuditLog",
    "BootstrapLog",
    "BuildEnv",
    "COMPILER_SOURCE",
    "CompilerCrash",
    "CompilerPackage",
    "Component",
    "ConvergenceError",
    "DEFAULT_INPUTS",
    "DEFAULT_MAX_GENERATIONS",
    "DEFAULT_PLAN",
    "RUNTIME_SOURCE",
    "SourceDiagnostic",
    "T",
    "ToolchainError",
    "TrustedCompiler",
    "archive_runtime",
    "bootstrap",
    "compile_with",
    "load_asset",
    "runtime_from_archive",
    "self_compile",
    "sha256",
    "shipped_source",
    "stabilize",
]
