"""Build environment model and the audited compiler runner.

Every VM run made by a pipeline goes through :class:`BuildEnv`.  It supplies
the ambient files a careless compiler might consult (``/env/clock`` and
``/env/residue``), advancing them on every run so that such a compiler shows
up as nondeterministic, and it records an audit entry per run.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from ..tcompiler.inputs import BuildInputs, SourceTree
from ..vm import ImageFormatError, Trap, VmLimits, run_image
from ..vm.machine import RESIDUE_PATH

CLOCK_PATH = b"/env/clock"
CLOCK_EPOCH = 1_700_000_000
RESIDUE_BYTES = 256

# canonical sandbox paths
SRC_PREFIX = "src/"
RUNTIME_SLOT = "rt.o"
OUTPUT_SLOT = "out.bin"


class ToolchainError(Exception):
    pass


class CompilerCrash(ToolchainError):
    """The compiler binary itself failed (trap or missing output)."""

    def __init__(self, message: str, trap: Trap | None = None, stdout: bytes = b""):
        super().__init__(message)
        self.trap = trap
        self.stdout = stdout


class SourceDiagnostic(ToolchainError):
    """The compiler rejected its input and exited nonzero."""

    def __init__(self, exit_code: int, text: str):
        super().__init__(text.strip() or f"compiler exited with status {exit_code}")
        self.exit_code = exit_code
        self.text = text


@dataclass(frozen=True)
class AuditEntry:
    phase: str
    image_sha256: str
    argv: tuple[str, ...]
    exit_code: int


@dataclass
class AuditLog:
    entries: list[AuditEntry] = field(default_factory=list)

    def record(self, entry: AuditEntry) -> None:
        self.entries.append(entry)

    def hashes(self, phase_prefix: str = "") -> set[str]:
        return {e.image_sha256 for e in self.entries if e.phase.startswith(phase_prefix)}

    def to_list(self) -> list[dict]:
        return [
            {"phase": e.phase, "image_sha256": e.image_sha256, "argv": list(e.argv), "exit_code": e.exit_code}
            for e in self.entries
        ]


class BuildEnv:
    """A fresh, isolated build environment for one pipeline."""

    def __init__(self, start: int = 0, limits: VmLimits | None = None, audit: AuditLog | None = None):
        self.counter = start
        self.limits = limits or VmLimits()
        self.audit = audit if audit is not None else AuditLog()

    def clock(self) -> int:
        return CLOCK_EPOCH + self.counter

    def ambient(self) -> dict[bytes, bytes]:
        seed = hashlib.sha256(b"residue:%d" % self.counter).digest()
        residue = (seed * (RESIDUE_BYTES // len(seed) + 1))[:RESIDUE_BYTES]
        return {CLOCK_PATH: str(self.clock()).encode(), RESIDUE_PATH: residue}

    def run_compiler(
        self,
        image: bytes,
        mode: str,
        tree: SourceTree,
        inputs: BuildInputs,
        runtime: bytes | None = None,
        phase: str = "build",
    ) -> bytes:
        """Run a MiniLang compiler image on ``tree`` and return its output file."""
        sandbox: dict[bytes, bytes] = {(SRC_PREFIX + p).encode(): d for p, d in tree.files.items()}
        sandbox.update(self.ambient())
        if runtime is not None:
            sandbox[RUNTIME_SLOT.encode()] = runtime
        argv = ["mlc", mode, SRC_PREFIX + tree.entry_point, OUTPUT_SLOT, RUNTIME_SLOT if runtime is not None else ""]
        argv += [f"{k}={v}" for k, v in inputs.flags]
        argv.append(f"seed={inputs.deterministic_seed}")
        self.counter += 1
        try:
            result = run_image(image, argv, sandbox, self.limits)
        except ImageFormatError as exc:
            self.audit.record(AuditEntry(phase, hashlib.sha256(image).hexdigest(), tuple(argv), -1))
            raise CompilerCrash(f"compiler image is malformed: {exc}") from None
        self.audit.record(AuditEntry(phase, hashlib.sha256(image).hexdigest(), tuple(argv), result.exit_code))
        if result.trap is not None:
            raise CompilerCrash(f"compiler trapped: {result.trap}", result.trap, result.stdout)
        if result.exit_code != 0:
            raise SourceDiagnostic(result.exit_code, result.stdout.decode("utf-8", "replace"))
        out = result.files_written.get(OUTPUT_SLOT.encode())
        if out is None:
            raise CompilerCrash("compiler exited 0 without writing its output", None, result.stdout)
        return out
