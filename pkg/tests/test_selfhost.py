import hashlib

import pytest

from ddclab.selfhost.env import AuditLog, BuildEnv, CompilerCrash, SourceDiagnostic
from ddclab.selfhost.toolchain import (
    COMPILER_SOURCE,
    DEFAULT_PLAN,
    T,
    Component,
    CompilerPackage,
    ConvergenceError,
    archive_runtime,
    bootstrap,
    check_plan,
    compile_with,
    runtime_from_archive,
    self_compile,
    shipped_source,
    stabilize,
)
from ddclab.tcompiler.inputs import BuildInputs, SourceTree
from ddclab.vm import run_image, validate_image


def test_gen0_differs_from_fixpoint(clean):
    # T and A are different compilers: T's output is a different binary
    image, runtime = T.build(shipped_source())
    assert image != clean.compiler_image
    assert validate_image(image).function_index(b"main") is not None


def test_fixpoint_regenerates(clean):
    assert self_compile(clean) == clean.pair()


def test_archive_carries_the_object(clean):
    assert runtime_from_archive(clean.runtime_archive) == clean.runtime_object
    assert clean.artifact("runtime") == clean.runtime_archive
    assert clean.artifact("compiler") == clean.compiler_image


def test_a_compiles_programs(clean):
    src = SourceTree.single(b'fn sq(x) { return x * x }\nmain { print(itos(sq(12))) }', "p.ml")
    img = compile_with(clean.compiler_image, src, clean.inputs, clean.runtime_object)
    assert run_image(img).stdout == b"144"


def test_a_reports_source_errors(clean):
    src = SourceTree.single(b"main { return 1 + }", "bad.ml")
    with pytest.raises(SourceDiagnostic) as ei:
        compile_with(clean.compiler_image, src, clean.inputs, clean.runtime_object)
    assert ei.value.exit_code == 1
    assert "bad.ml:1:" in ei.value.text and "error" in ei.value.text


def test_a_rejects_unknown_flags(clean):
    src = SourceTree.single(b"main { }", "p.ml")
    with pytest.raises(SourceDiagnostic) as ei:
        compile_with(clean.compiler_image, src, BuildInputs(flags=(("bogus", "1"),)))
    assert ei.value.exit_code == 2


def test_short_push_flag_changes_output(clean):
    src = SourceTree.single(b"main { return 5 }", "p.ml")
    on = compile_with(clean.compiler_image, src, BuildInputs(flags=(("short-push", "on"),)))
    off = compile_with(clean.compiler_image, src, BuildInputs(flags=(("short-push", "off"),)))
    assert on != off
    assert run_image(on).exit_code == run_image(off).exit_code == 5


def test_audit_records_every_run(clean):
    env = BuildEnv()
    self_compile(clean, env=env, phase="x")
    h = hashlib.sha256(clean.compiler_image).hexdigest()
    assert [e.phase for e in env.audit.entries] == ["x:runtime", "x:compiler"]
    assert env.audit.hashes() == {h}
    assert env.counter == 2


def test_ambient_files_advance():
    env = BuildEnv()
    a = env.ambient()
    env.counter += 1
    b = env.ambient()
    assert a != b and set(a) == set(b)


def test_crash_is_reported():
    # a "compiler" that returns without writing its output
    img = T.compile_program(SourceTree.single(b"main { return 0 }"))
    with pytest.raises(CompilerCrash):
        compile_with(img, SourceTree.single(b"main { }"))


def test_convergence_budget():
    with pytest.raises(ConvergenceError) as ei:
        bootstrap(shipped_source(), max_generations=1)
    assert ei.value.log.iterations == 1 and ei.value.diffs
    with pytest.raises(ValueError):
        bootstrap(max_generations=0)


def test_bootstrap_log(clean):
    pkg, log = bootstrap()
    assert pkg == clean
    assert log.converged and log.iterations <= 5
    assert log.steps[0].label == "gen0:T"
    assert log.steps[-1].outputs == log.steps[-2].outputs


def test_stabilize_new_source(clean):
    src = clean.source.files[COMPILER_SOURCE] + b"\n// trailing comment\n"
    tree = clean.source.replace_file(COMPILER_SOURCE, src)
    pkg, log = stabilize(clean, tree)
    assert log.converged and pkg.source == tree
    # comments do not reach the binary
    assert pkg.pair() == clean.pair()


def test_plan_validation():
    check_plan(DEFAULT_PLAN)
    with pytest.raises(ValueError):
        check_plan(DEFAULT_PLAN[:1])
    with pytest.raises(ValueError):
        Component("x", "linker", "a.ml")
    with pytest.raises(ValueError):
        CompilerPackage("p", b"", b"", SourceTree.single(b"", "only.ml"))


def test_archive_mtime():
    a = archive_runtime(b"MLOB", 1)
    b = archive_runtime(b"MLOB", 2)
    assert a != b and runtime_from_archive(a) == runtime_from_archive(b)
