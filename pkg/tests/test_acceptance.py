"""One test per acceptance criterion, each at its stated tolerance and time budget."""

import hashlib
import time


from ddclab.attack import (
    DEFAULT_MASTER,
    build_popup_chain,
    get_scenario,
    login_source,
    make_defect_fixtures,
    run_scenario,
)
from ddclab.corpus import load_corpus
from ddclab.ddc import SHIPPED_MUTATIONS, compare_artifacts, ddc, determinism_check, regen_check
from ddclab.selfhost.toolchain import T, bootstrap, compile_with, shipped_source
from ddclab.vm import pack_archive, strip_mtimes

# every ddc verdict produced here is kept for the audit criterion
VERDICTS = []


def checked_ddc(pkg, **kw):
    v = ddc(pkg, **kw)
    VERDICTS.append((hashlib.sha256(pkg.compiler_image).hexdigest(), v))
    return v


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_c1_bootstrap_fixpoint_and_regeneration():
    def run():
        pkg, log = bootstrap(shipped_source(), T)
        return pkg, log, regen_check(pkg)

    (pkg, log, regen), dt = timed(run)
    assert log.converged and log.iterations <= 5
    assert regen.passed
    assert all(r.equal and r.first_diff_offset is None for r in regen.compare1.results.values())
    assert set(regen.compare1.results) == {"compiler", "runtime"}
    assert dt < 30, dt


def test_c2_clean_verification(clean):
    v, dt = timed(lambda: checked_ddc(clean))
    assert v.kind == "verified"
    stage2 = v.stage_logs[-1]
    assert stage2.stage == "stage2"
    assert stage2.outputs["compiler"] == hashlib.sha256(clean.compiler_image).hexdigest()
    assert stage2.outputs["runtime"] == hashlib.sha256(clean.runtime_object).hexdigest()
    assert dt < 60, dt


def test_c3_binary_splice_detected(clean, mal):
    def run():
        regen = regen_check(mal)
        v = checked_ddc(mal, regen=regen)
        rt = clean.runtime_object
        evil = compile_with(mal.compiler_image, login_source(), mal.inputs, rt)
        # the compiler DDC rebuilt from s_A: stage 1 by T, stage 2 by that
        rebuilt = compile_with(T.build(mal.source)[0], mal.source, mal.inputs, T.build(mal.source)[1])
        honest = compile_with(rebuilt, login_source(), mal.inputs, rt)
        return regen, v, evil, honest

    (regen, v, evil, honest), dt = timed(run)
    assert regen.passed
    assert v.kind == "mismatch"
    [diag] = [d for d in v.diagnosis if d.component == "compiler"]
    assert any("atk_" in h for h in diag.hints)
    assert any(r.function in ("_main", "main") or r.section == "functions" for r in diag.diff_regions)
    from ddclab.vm import run_image

    pw = DEFAULT_MASTER.decode()
    assert run_image(evil, ["login", "root", pw]).stdout == b"access granted\n"
    assert run_image(honest, ["login", "root", pw]).stdout == b"access denied\n"
    assert run_image(honest, ["login", "alice", "wonderland7"]).exit_code == 0
    assert dt < 60, dt


def test_c4_popup_chain(clean):
    def run():
        chain = build_popup_chain(a1=clean)
        return chain, checked_ddc(chain.A3), checked_ddc(chain.A2)

    (chain, v3, v2), dt = timed(run)
    assert chain.s_v3.files == chain.s_v1.files
    assert v3.kind == "mismatch"
    assert v2.kind == "verified"
    assert dt < 120, dt


def test_c6_mutation_invariance(clean, mal):
    base = {"clean": checked_ddc(clean).kind, "mal": checked_ddc(mal).kind}
    assert base == {"clean": "verified", "mal": "mismatch"}
    for name, spec in SHIPPED_MUTATIONS.items():
        for label, pkg in (("clean", clean), ("mal", mal)):
            v = checked_ddc(pkg, mutation=spec)
            assert v.kind == base[label], (name, label, v.detail)
    # fragility: whitespace normalization stops a one-trigger shim, not a two-trigger one
    single = get_scenario("fragility-single")
    multi = get_scenario("fragility-multi")
    assert "propagation expected: False" in single.description
    assert "propagation expected: True" in multi.description
    for sc in (single, multi):
        r = run_scenario(sc)
        VERDICTS.extend((hashlib.sha256(s.package.compiler_image).hexdigest(), v.verdict)
                        for s, v in zip(sc.subjects, r.subjects))
        assert r.ok, r.to_dict()


def test_c5_stage_audit_never_runs_a(clean):
    # ordered after the ddc-producing criteria so it sees all of their runs
    if not VERDICTS:
        VERDICTS.append((hashlib.sha256(clean.compiler_image).hexdigest(), ddc(clean)))
    assert len(VERDICTS) >= 1
    for a_hash, v in VERDICTS:
        if v.kind == "regeneration_failed":
            continue
        assert v.audit.entries, v.kind
        assert a_hash not in v.audit.hashes()
        assert all(e.phase.startswith("stage") for e in v.audit.entries)


def test_c7_determinism_suite(clean):
    corpus = load_corpus()
    assert len(corpus) >= 25
    for p in corpus:
        r = determinism_check(clean, p.tree(), runs=3)
        assert r.equal, p.name
    assert determinism_check(clean, runs=3).equal
    kinds = {}
    for sc in make_defect_fixtures():
        [sub] = sc.subjects
        kinds[sub.label] = checked_ddc(sub.package).kind
    assert kinds["semantic-divergence"] in ("mismatch", "semantic_error")
    assert kinds["uninitialized-padding"] == "nondeterministic"
    assert kinds["timestamp-in-output"] == "nondeterministic"


def test_c8_timestamp_normalization():
    a = pack_archive([(b"rt.o", 1_700_000_001, b"object bytes"), (b"x.o", 5, b"other")])
    b = pack_archive([(b"rt.o", 1_700_009_999, b"object bytes"), (b"x.o", 77, b"other")])
    assert compare_artifacts(a, b, "strip_archive_mtimes").equal
    assert not compare_artifacts(a, b, "none").equal
    assert strip_mtimes(strip_mtimes(a)) == strip_mtimes(a)
    c = pack_archive([(b"rt.o", 1, b"object bytez"), (b"x.o", 5, b"other")])
    assert not compare_artifacts(a, c, "strip_archive_mtimes").equal


def test_c9_conformance_agreement(clean):
    def run():
        bad = []
        for p in load_corpus():
            a_img = compile_with(clean.compiler_image, p.tree(), clean.inputs, clean.runtime_object)
            t_img = T.compile_program(p.tree(), clean.runtime_object)
            ra, rt = p.run(a_img), p.run(t_img)
            if ra.canonical_bytes() != rt.canonical_bytes() or ra.trap is not None:
                bad.append(p.name)
        return bad

    bad, dt = timed(run)
    assert bad == []
    assert dt < 60, dt
