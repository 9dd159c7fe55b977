"""Compiler packages, self-compilation, bootstrap and stabilization."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Sequence

from ..tcompiler import t_compile_object, t_compile_program
from ..tcompiler.inputs import BuildInputs, SourceTree
from ..vm.archive import pack_archive, unpack_archive
from .env import BuildEnv, ToolchainError

COMPILER_SOURCE = "compiler/mlc.ml"
RUNTIME_SOURCE = "runtime/rt.ml"
RUNTIME_ENTRY = b"rt.o"
NORMALIZATIONS = ("none", "strip_archive_mtimes")
DEFAULT_MAX_GENERATIONS = 5

DEFAULT_INPUTS = BuildInputs(flags=(("short-push", "on"),), deterministic_seed=0)


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def load_asset(name: str) -> bytes:
    return resources.files("ddclab.selfhost").joinpath("assets", name).read_bytes()


def shipped_source() -> SourceTree:
    """s_A: the compiler source plus the runtime library source."""
    return SourceTree(
        {COMPILER_SOURCE: load_asset("mlc.ml"), RUNTIME_SOURCE: load_asset("rt.ml")},
        COMPILER_SOURCE,
    )


@dataclass(frozen=True)
class Component:
    name: str
    kind: str  # "runtime" or "compiler"
    source: str
    depends: tuple[str, ...] = ()
    normalization: str = "none"

    def __post_init__(self):
        if self.kind not in ("runtime", "compiler"):
            raise ValueError(f"component {self.name!r}: unknown kind {self.kind!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"component {self.name!r}: unknown normalization {self.normalization!r}")
        object.__setattr__(self, "depends", tuple(self.depends))

    @property
    def slot(self) -> str:
        return "runtime_object" if self.kind == "runtime" else "compiler_image"


DEFAULT_PLAN = (
    Component("runtime", "runtime", RUNTIME_SOURCE, (), "strip_archive_mtimes"),
    Component("compiler", "compiler", COMPILER_SOURCE, ("runtime",), "none"),
)


def check_plan(plan: Sequence[Component]) -> None:
    seen: set[str] = set()
    kinds = [c.kind for c in plan]
    if sorted(kinds) != ["compiler", "runtime"]:
        raise ValueError("build plan needs exactly one runtime and one compiler component")
    for c in plan:
        for dep in c.depends:
            if dep not in seen:
                raise ValueError(f"component {c.name!r} depends on {dep!r}, which is not built before it")
        seen.add(c.name)
    if kinds.index("runtime") > kinds.index("compiler"):
        raise ValueError("the runtime must be built before the compiler")
    comp = plan[kinds.index("compiler")]
    rt = plan[kinds.index("runtime")]
    if rt.name not in comp.depends:
        raise ValueError("the compiler component must depend on the runtime component")


@dataclass(frozen=True)
class CompilerPackage:
    """A compiler binary (image + runtime object) and the source claimed to produce it."""

    name: str
    compiler_image: bytes
    runtime_object: bytes
    source: SourceTree
    build_plan: tuple[Component, ...] = DEFAULT_PLAN
    inputs: BuildInputs = DEFAULT_INPUTS
    # the runtime as distributed: an archive whose mtime records when it was built
    runtime_archive: bytes | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "build_plan", tuple(self.build_plan))
        check_plan(self.build_plan)
        for c in self.build_plan:
            if c.source not in self.source.files:
                raise ValueError(f"component {c.name!r}: source {c.source!r} missing from the tree")

    def component(self, kind: str) -> Component:
        return next(c for c in self.build_plan if c.kind == kind)

    def pair(self) -> tuple[bytes, bytes]:
        return self.compiler_image, self.runtime_object

    def artifact(self, kind: str) -> bytes:
        """Distributed bytes of a component: the archive for the runtime if present."""
        if kind == "compiler":
            return self.compiler_image
        if self.runtime_archive is not None:
            return self.runtime_archive
        return self.runtime_object

    def with_binaries(self, image: bytes, runtime: bytes, archive: bytes | None = None) -> "CompilerPackage":
        return replace(self, compiler_image=image, runtime_object=runtime, runtime_archive=archive)


def archive_runtime(obj: bytes, mtime: int) -> bytes:
    return pack_archive([(RUNTIME_ENTRY, mtime, obj)])


def runtime_from_archive(data: bytes) -> bytes:
    for e in unpack_archive(data):
        if e.name == RUNTIME_ENTRY:
            return e.payload
    raise ValueError("archive has no rt.o entry")


class TrustedCompiler:
    """Adapter giving T the same two-step build interface as a compiler package."""

    name = "T"

    def build(self, src: SourceTree, plan: Sequence[Component] = DEFAULT_PLAN) -> tuple[bytes, bytes]:
        rt = next(c for c in plan if c.kind == "runtime")
        cc = next(c for c in plan if c.kind == "compiler")
        obj = t_compile_object(src.subtree(rt.source)).serialize()
        img = t_compile_program(src.subtree(cc.source), BuildInputs(embedded_runtime=obj)).serialize()
        return img, obj

    def compile_program(self, src: SourceTree, runtime: bytes | None = None) -> bytes:
        return t_compile_program(src, BuildInputs(embedded_runtime=runtime)).serialize()


T = TrustedCompiler()


def self_compile(
    pkg: CompilerPackage,
    src: SourceTree | None = None,
    inputs: BuildInputs | None = None,
    env: BuildEnv | None = None,
    phase: str = "self",
) -> tuple[bytes, bytes]:
    """c(src, pkg): build ``src`` with the package's compiler on the VM, runtime first."""
    src = src or pkg.source
    inputs = inputs or pkg.inputs
    env = env or BuildEnv()
    runtime = None
    image = None
    for comp in pkg.build_plan:
        tree = src.subtree(comp.source)
        if comp.kind == "runtime":
            runtime = env.run_compiler(pkg.compiler_image, "object", tree, inputs, None, f"{phase}:{comp.name}")
        else:
            image = env.run_compiler(pkg.compiler_image, "program", tree, inputs, runtime, f"{phase}:{comp.name}")
    return image, runtime


def compile_with(
    compiler_image: bytes,
    src: SourceTree,
    inputs: BuildInputs = DEFAULT_INPUTS,
    runtime: bytes | None = None,
    env: BuildEnv | None = None,
    mode: str = "program",
    phase: str = "compile",
) -> bytes:
    """Compile one ordinary unit with a MiniLang compiler image."""
    return (env or BuildEnv()).run_compiler(compiler_image, mode, src, inputs, runtime, phase)


@dataclass(frozen=True)
class LogStep:
    label: str
    inputs: dict
    outputs: dict

    def to_dict(self) -> dict:
        return {"label": self.label, "inputs": dict(self.inputs), "outputs": dict(self.outputs)}


@dataclass
class BootstrapLog:
    steps: list[LogStep] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0

    def add(self, label: str, inputs: dict, image: bytes, runtime: bytes) -> None:
        self.steps.append(LogStep(label, inputs, {"compiler_image": sha256(image), "runtime_object": sha256(runtime)}))

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "steps": [s.to_dict() for s in self.steps],
        }


class ConvergenceError(ToolchainError):
    def __init__(self, message: str, log: BootstrapLog, diffs: list[dict]):
        super().__init__(message)
        self.log = log
        self.diffs = diffs


def _pair_diff(prev: tuple[bytes, bytes], cur: tuple[bytes, bytes]) -> dict:
    out = {}
    for name, a, b in (("compiler_image", prev[0], cur[0]), ("runtime_object", prev[1], cur[1])):
        first = next((i for i in range(min(len(a), len(b))) if a[i] != b[i]), None)
        if first is None and len(a) != len(b):
            first = min(len(a), len(b))
        differing = sum(x != y for x, y in zip(a, b)) + abs(len(a) - len(b))
        out[name] = {"first_diff_offset": first, "differing_bytes": differing}
    return out


def _iterate(pkg, src, inputs, max_generations, env, log, label):
    """Self-compile until two successive generations are identical."""
    prev = pkg.pair()
    diffs = []
    for g in range(1, max_generations + 1):
        cur = self_compile(pkg, src, inputs, env, phase=f"{label}{g}")
        log.add(f"{label}{g}", {"compiler_image": sha256(prev[0]), "source": src.digest()}, *cur)
        log.iterations = g
        if cur == prev:
            log.converged = True
            return pkg.with_binaries(*cur, archive_runtime(cur[1], env.clock()))
        diffs.append(_pair_diff(prev, cur))
        pkg = pkg.with_binaries(*cur)
        prev = cur
    raise ConvergenceError(
        f"no fixpoint within {max_generations} generations",
        log,
        diffs,
    )


def bootstrap(
    s_A: SourceTree | None = None,
    trusted: TrustedCompiler = T,
    inputs: BuildInputs = DEFAULT_INPUTS,
    max_generations: int = DEFAULT_MAX_GENERATIONS,
    preprocess: Callable[[SourceTree], SourceTree] | None = None,
    plan: Sequence[Component] = DEFAULT_PLAN,
    name: str = "minilang",
    env: BuildEnv | None = None,
) -> tuple[CompilerPackage, BootstrapLog]:
    """Build generation 0 with T, then self-compile to a fixpoint.

    ``preprocess`` is an optional declared source-to-source step applied only to
    the input of T; later generations compile the source as given.
    """
    if max_generations < 1:
        raise ValueError("max_generations must be at least 1")
    s_A = s_A or shipped_source()
    env = env or BuildEnv()
    log = BootstrapLog()
    t_src = preprocess(s_A) if preprocess else s_A
    image, runtime = trusted.build(t_src, plan)
    log.add("gen0:T", {"source": t_src.digest()}, image, runtime)
    pkg = CompilerPackage(name, image, runtime, s_A, tuple(plan), inputs)
    return _iterate(pkg, s_A, inputs, max_generations, env, log, "gen"), log


def stabilize(
    pkg: CompilerPackage,
    s: SourceTree | None = None,
    inputs: BuildInputs | None = None,
    max_generations: int = DEFAULT_MAX_GENERATIONS,
    env: BuildEnv | None = None,
) -> tuple[CompilerPackage, BootstrapLog]:
    """Self-compile ``s`` starting from ``pkg`` until byte-stable."""
    if max_generations < 1:
        raise ValueError("max_generations must be at least 1")
    s = s or pkg.source
    inputs = inputs or pkg.inputs
    log = BootstrapLog()
    start = replace(pkg, source=s, inputs=inputs)
    return _iterate(start, s, inputs, max_generations, env or BuildEnv(), log, "gen"), log
