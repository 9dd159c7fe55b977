import hashlib
from dataclasses import replace

import pytest

from ddclab.ddc import (
    AuditViolation,
    MutationSpec,
    Verdict,
    ddc,
    determinism_check,
    regen_check,
)
from ddclab.ddc.compare import PairCompare
from ddclab.selfhost.toolchain import T, TrustedCompiler
from ddclab.tcompiler.inputs import BuildInputs, SourceTree


@pytest.fixture(scope="module")
def clean_verdict(clean):
    return ddc(clean)


def a_hash(pkg):
    return hashlib.sha256(pkg.compiler_image).hexdigest()


def test_regen_passes(clean):
    r = regen_check(clean)
    assert r.passed and r.compare1.equal
    assert [s.stage for s in r.stage_logs] == ["regen.1", "regen.2"]
    # regeneration runs A itself, by definition
    assert a_hash(clean) in r.audit.hashes()


def test_clean_verified(clean, clean_verdict):
    v = clean_verdict
    assert v.kind == "verified" and v.compare2.equal
    stages = [s.stage for s in v.stage_logs]
    assert stages == ["regen.1", "regen.2", "stage1", "stage2"]
    assert v.stage_logs[2].compiler == "T"
    assert v.stage_logs[3].outputs == v.stage_logs[0].outputs
    assert v.to_dict()["kind"] == "verified"


def test_stage_audit_excludes_a(clean, clean_verdict):
    h = a_hash(clean)
    assert h not in clean_verdict.audit.hashes()
    assert [e.phase for e in clean_verdict.audit.entries] == ["stage1", "stage2:runtime", "stage2:compiler"]
    assert clean_verdict.audit.entries[0].image_sha256 == "native:T"


def test_stage2_flag_change_is_a_mismatch(clean):
    inputs = BuildInputs((("short-push", "off"),), None, 0)
    v = ddc(clean, stage2_inputs=inputs)
    assert v.kind == "mismatch"
    assert any("push" in h for d in v.diagnosis for h in d.hints)


def test_mutated_stage1_still_verifies(clean):
    v = ddc(clean, mutation=MutationSpec.parse("rename:9,ws"))
    assert v.kind == "verified"
    assert v.mutation == "rename_identifiers(9),normalize_whitespace"
    assert v.stage_logs[2].source != clean.source.digest()
    assert all(r["applied"] for r in v.mutation_log)


def test_corrupt_binary_fails_regen(clean):
    bad = replace(clean, compiler_image=clean.compiler_image[:-3])
    v = ddc(bad)
    assert v.kind == "regeneration_failed"
    assert v.compare2 is None and not v.audit.entries


def test_source_that_t_rejects(clean):
    # A happily regenerates from s_A, but T refuses s_A: a source/semantic problem
    class Picky(TrustedCompiler):
        def build(self, src, plan=()):
            raise ValueError("unsupported construct")

    v = ddc(clean, trusted=Picky())
    assert v.kind == "semantic_error" and "stage 1" in v.detail


def test_audit_violation_is_raised(clean):
    class Cheat(TrustedCompiler):
        name = "cheat"

        def build(self, src, plan=()):
            return clean.compiler_image, clean.runtime_object  # "T" that just hands back A

    with pytest.raises(AuditViolation):
        ddc(clean, trusted=Cheat())


def test_verdict_invariants():
    with pytest.raises(ValueError):
        Verdict("maybe")
    with pytest.raises(AssertionError):
        Verdict("verified")
    with pytest.raises(AssertionError):
        Verdict("mismatch", compare2=PairCompare({}))


def test_determinism_self_and_program(clean):
    r = determinism_check(clean, runs=2)
    assert r.equal and len(r.hashes) == 2 and set(r.hashes[0]) == {"compiler", "runtime"}
    r = determinism_check(clean, SourceTree.single(b"main { print(\"x\") }", "p.ml"))
    assert r.equal and r.runs == 3
    with pytest.raises(ValueError):
        determinism_check(clean, runs=1)


def test_gen0_binary_does_not_regenerate(clean):
    # T's own build of s_A is a working compiler but not a fixpoint
    gen0 = clean.with_binaries(*T.build(clean.source))
    r = regen_check(gen0)
    assert r.kind == "regeneration_failed" and r.diagnosis
    assert "differs from A" in r.detail
