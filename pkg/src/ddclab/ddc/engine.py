"""Regeneration check, diverse double-compiling and determinism checks.

Pipeline layout, with A = (compiler image, runtime object) and s_A its claimed
source:

    regen:   c(s_A, A) twice in one fresh environment  -> Compare1 against A
    stage 1: c(s_A', T)   (s_A' = optionally mutated s_A, built natively by T)
    stage 2: c(s_A, c(s_A', T)) on the VM               -> Compare2 against A

Stage 1 and stage 2 record their VM runs in an audit log of their own; A's
image hash must never appear there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..selfhost.env import AuditEntry, AuditLog, BuildEnv, CompilerCrash, SourceDiagnostic
from ..selfhost.toolchain import T, CompilerPackage, TrustedCompiler, archive_runtime, self_compile, sha256
from ..tcompiler import CompileError, UnknownFlagError
from ..tcompiler.inputs import BuildInputs, SourceTree
from .compare import CompareResult, PairCompare, compare_artifacts
from .diff import DiffReport, diagnose_diff
from .mutate import MutationLog, MutationSpec, mutate_source

VERDICT_KINDS = ("verified", "regeneration_failed", "mismatch", "nondeterministic", "semantic_error")


class AuditViolation(AssertionError):
    """The package's own compiler image was executed inside a DDC stage."""


@dataclass(frozen=True)
class StageLog:
    stage: str
    compiler: str  # sha256 of the compiler that ran, or "T"
    source: str  # SourceTree digest
    outputs: dict  # component -> sha256

    def to_dict(self) -> dict:
        return {"stage": self.stage, "compiler": self.compiler, "source": self.source, "outputs": dict(self.outputs)}


@dataclass
class Verdict:
    kind: str
    stage_logs: list[StageLog] = field(default_factory=list)
    compare1: PairCompare | None = None
    compare2: PairCompare | None = None
    diagnosis: list[DiffReport] = field(default_factory=list)
    audit: AuditLog = field(default_factory=AuditLog)
    regen_audit: AuditLog = field(default_factory=AuditLog)
    detail: str = ""
    mutation: str = "none"
    mutation_log: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in VERDICT_KINDS:
            raise ValueError(f"unknown verdict kind {self.kind!r}")
        if self.kind == "verified":
            assert self.compare1 is not None and self.compare1.equal
            assert self.compare2 is not None and self.compare2.equal
        if self.kind == "mismatch":
            assert self.compare2 is not None and not self.compare2.equal

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "detail": self.detail,
            "mutation": self.mutation,
            "mutation_log": list(self.mutation_log),
            "stage_logs": [s.to_dict() for s in self.stage_logs],
            "compare1": self.compare1.to_dict() if self.compare1 else None,
            "compare2": self.compare2.to_dict() if self.compare2 else None,
            "diagnosis": [d.to_dict() for d in self.diagnosis],
            "audit": self.audit.to_list(),
            "regen_audit": self.regen_audit.to_list(),
        }


@dataclass
class RegenResult:
    """Outcome of the self-regeneration check (Compare1)."""

    compare1: PairCompare | None
    kind: str | None  # None when the check passed, else the failing verdict kind
    detail: str = ""
    stage_logs: list[StageLog] = field(default_factory=list)
    audit: AuditLog = field(default_factory=AuditLog)
    diagnosis: list[DiffReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.kind is None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "kind": self.kind or "verified",
            "detail": self.detail,
            "compare1": self.compare1.to_dict() if self.compare1 else None,
            "stage_logs": [s.to_dict() for s in self.stage_logs],
            "diagnosis": [d.to_dict() for d in self.diagnosis],
            "audit": self.audit.to_list(),
        }


def _outputs(image: bytes, runtime: bytes) -> dict:
    return {"compiler": sha256(image), "runtime": sha256(runtime)}


def compare_pair(pkg: CompilerPackage, image: bytes, runtime: bytes, clock: int) -> PairCompare:
    """Compare a freshly built (image, object) pair with the package, per component.

    The runtime is compared as distributed: when the package ships it as an
    archive the fresh object is archived with the build clock as mtime, and the
    component's declared normalization decides whether that mtime matters.
    """
    results: dict[str, CompareResult] = {}
    for comp in pkg.build_plan:
        if comp.kind == "compiler":
            results[comp.name] = compare_artifacts(pkg.compiler_image, image, (comp.normalization,))
        elif pkg.runtime_archive is not None:
            results[comp.name] = compare_artifacts(
                pkg.runtime_archive, archive_runtime(runtime, clock), (comp.normalization,)
            )
        else:
            results[comp.name] = compare_artifacts(pkg.runtime_object, runtime, ("none",))
    return PairCompare(results)


def _safe_diagnose(a: bytes, b: bytes, name: str) -> DiffReport:
    try:
        return diagnose_diff(a, b, name)
    except ValueError as exc:  # unparseable output, report it plainly
        return DiffReport(name, hints=[f"output could not be parsed: {exc}"])


def _diagnose(pkg: CompilerPackage, image: bytes, runtime: bytes, cmp: PairCompare) -> list[DiffReport]:
    out = []
    for comp in pkg.build_plan:
        if cmp.results[comp.name].equal:
            continue
        if comp.kind == "compiler":
            out.append(_safe_diagnose(pkg.compiler_image, image, comp.name))
        else:
            out.append(_safe_diagnose(pkg.runtime_object, runtime, comp.name))
    return out


def regen_check(pkg: CompilerPackage, env: BuildEnv | None = None) -> RegenResult:
    """c(s_A, A) == A, computed twice to expose nondeterminism."""
    env = env or BuildEnv()
    logs = []
    runs = []
    for i in (1, 2):
        try:
            image, runtime = self_compile(pkg, pkg.source, pkg.inputs, env, phase=f"regen.{i}")
        except CompilerCrash as exc:
            return RegenResult(None, "regeneration_failed", f"self-compile run {i} trapped: {exc}", logs, env.audit)
        except SourceDiagnostic as exc:
            return RegenResult(None, "regeneration_failed", f"self-compile run {i} rejected s_A: {exc}", logs, env.audit)
        logs.append(StageLog(f"regen.{i}", sha256(pkg.compiler_image), pkg.source.digest(), _outputs(image, runtime)))
        runs.append((image, runtime, env.clock()))
    (img1, rt1, clock1), (img2, rt2, _) = runs
    if (img1, rt1) != (img2, rt2):
        between = PairCompare(
            {"compiler": compare_artifacts(img1, img2), "runtime": compare_artifacts(rt1, rt2)}
        )
        diag = [
            _safe_diagnose(a, b, name)
            for name, a, b in (("compiler", img1, img2), ("runtime", rt1, rt2))
            if a != b
        ]
        where = ", ".join(f"{n} at offset {r.first_diff_offset}" for n, r in between.results.items() if not r.equal)
        return RegenResult(between, "nondeterministic", f"two self-compiles differ ({where})", logs, env.audit, diag)
    cmp1 = compare_pair(pkg, img1, rt1, clock1)
    if not cmp1.equal:
        where = ", ".join(
            f"{n} at offset {r.first_diff_offset} ({r.section_attribution})" for n, r in cmp1.results.items() if not r.equal
        )
        return RegenResult(
            cmp1, "regeneration_failed", f"c(s_A, A) differs from A: {where}", logs, env.audit,
            _diagnose(pkg, img1, rt1, cmp1),
        )
    return RegenResult(cmp1, None, "", logs, env.audit)


def ddc(
    pkg: CompilerPackage,
    trusted: TrustedCompiler = T,
    mutation: MutationSpec | None = None,
    stage2_inputs: BuildInputs | None = None,
    regen: RegenResult | None = None,
) -> Verdict:
    """Diverse double-compile ``pkg`` against its claimed source using ``trusted``.

    ``stage2_inputs`` overrides the build inputs of stage 2 only (they default to
    the package's own); ``regen`` lets a caller reuse an earlier regeneration check.
    """
    regen = regen or regen_check(pkg)
    mutation = mutation or MutationSpec()
    if not regen.passed:
        return Verdict(
            regen.kind, list(regen.stage_logs), regen.compare1, None, list(regen.diagnosis),
            AuditLog(), regen.audit, regen.detail, str(mutation),
        )
    logs = list(regen.stage_logs)
    audit = AuditLog()
    env = BuildEnv(audit=audit)
    a_hash = sha256(pkg.compiler_image)

    def verdict(kind, cmp2=None, diag=(), detail="", mlog=None):
        if a_hash in audit.hashes():
            raise AuditViolation("the package's own compiler image was executed during a DDC stage")
        return Verdict(
            kind, logs, regen.compare1, cmp2, list(diag), audit, regen.audit, detail, str(mutation),
            mlog.to_list() if mlog else [],
        )

    # stage 1: T compiles the (possibly mutated) claimed source
    mlog = MutationLog()
    try:
        s1 = mutate_source(pkg.source, mutation, mlog) if not mutation.empty else pkg.source
        image1, runtime1 = trusted.build(s1, pkg.build_plan)
    except (CompileError, UnknownFlagError, ValueError) as exc:
        return verdict("semantic_error", detail=f"stage 1: T rejected s_A: {exc}", mlog=mlog)
    audit.record(AuditEntry("stage1", f"native:{trusted.name}", ("build", s1.digest()), 0))
    logs.append(StageLog("stage1", trusted.name, s1.digest(), _outputs(image1, runtime1)))

    # stage 2: the stage-1 compiler rebuilds the ORIGINAL source on the VM
    candidate = pkg.with_binaries(image1, runtime1)
    inputs = stage2_inputs or pkg.inputs
    try:
        image2, runtime2 = self_compile(candidate, pkg.source, inputs, env, phase="stage2")
    except (CompilerCrash, SourceDiagnostic) as exc:
        cmp2 = compare_pair(pkg, b"", b"", env.clock())
        diag = [DiffReport("compiler", hints=[f"stage-2 compiler failed: {exc}"])]
        return verdict("mismatch", cmp2, diag, f"stage 2 failed: {exc}", mlog)
    logs.append(StageLog("stage2", sha256(image1), pkg.source.digest(), _outputs(image2, runtime2)))
    cmp2 = compare_pair(pkg, image2, runtime2, env.clock())
    if cmp2.equal:
        return verdict("verified", cmp2, (), "stage-2 output is bit-for-bit identical to A", mlog)
    diag = _diagnose(pkg, image2, runtime2, cmp2)
    where = ", ".join(
        f"{n} at offset {r.first_diff_offset} ({r.section_attribution})" for n, r in cmp2.results.items() if not r.equal
    )
    return verdict("mismatch", cmp2, diag, f"c(s_A, c(s_A, T)) differs from A: {where}", mlog)


@dataclass
class DeterminismResult:
    equal: bool
    runs: int
    hashes: list[dict]
    diffs: list[dict]  # pairwise (run 1 vs run k) comparisons that were unequal

    def to_dict(self) -> dict:
        return {"equal": self.equal, "runs": self.runs, "hashes": list(self.hashes), "diffs": list(self.diffs)}


def determinism_check(
    pkg: CompilerPackage,
    src: SourceTree | None = None,
    inputs: BuildInputs | None = None,
    runs: int = 3,
    env: BuildEnv | None = None,
) -> DeterminismResult:
    """Compile ``src`` ``runs`` times under identical inputs with the package compiler.

    With ``src`` omitted the package's own source is self-compiled; otherwise
    ``src`` is compiled as an ordinary program against the package runtime.
    """
    if runs < 2:
        raise ValueError("determinism_check needs runs >= 2")
    inputs = inputs or pkg.inputs
    env = env or BuildEnv()
    outs = []
    for i in range(1, runs + 1):
        if src is None:
            outs.append(dict(zip(("compiler", "runtime"), self_compile(pkg, None, inputs, env, phase=f"det.{i}"))))
        else:
            out = env.run_compiler(pkg.compiler_image, "program", src, inputs, pkg.runtime_object, f"det.{i}")
            outs.append({"program": out})
    hashes = [{k: sha256(v) for k, v in o.items()} for o in outs]
    diffs = []
    for k in range(1, runs):
        for name in outs[0]:
            r = compare_artifacts(outs[0][name], outs[k][name])
            if not r.equal:
                diffs.append({"runs": [1, k + 1], "artifact": name, **r.to_dict()})
    return DeterminismResult(not diffs, runs, hashes, diffs)
