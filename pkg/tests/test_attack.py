import pytest

from ddclab.attack import (
    DEFAULT_MASTER,
    FIXTURES,
    PLACEHOLDER,
    SCENARIOS,
    FixpointError,
    PayloadSpec,
    ShimError,
    ShimSpec,
    TriggerSpec,
    backdoor_image,
    build_shim,
    default_shim,
    fixpoint_payload,
    fixture_source,
    get_scenario,
    login_source,
    multi_trigger_shim,
    popup_source,
    splice_image,
    splice_shim,
)
from ddclab.attack.shim import SELF_PATTERN, SELF_PATTERN_2, fill_template, ml_string, template_source
from ddclab.selfhost.toolchain import COMPILER_SOURCE, T, compile_with, self_compile, shipped_source
from ddclab.tcompiler import CompileError
from ddclab.tcompiler.inputs import SourceTree
from ddclab.vm import parse_object, run_image, validate_image


def login(image, user, pw):
    return run_image(image, ["login", user, pw])


def test_ml_string_roundtrip(run_t):
    data = bytes(range(256))
    r = run_t(b"main { var s = " + ml_string(data) + b"; print(s) }")
    assert r.stdout == data


def test_spec_validation():
    with pytest.raises(ShimError):
        TriggerSpec("compiling_kernel", b"x")
    with pytest.raises(ShimError):
        TriggerSpec("compiling_self", b"")
    with pytest.raises(ShimError):
        PayloadSpec("ransom")
    with pytest.raises(ShimError):
        fill_template(ShimSpec((TriggerSpec("compiling_self", b"x"),), ()))
    assert multi_trigger_shim().patterns("compiling_self") == [SELF_PATTERN, SELF_PATTERN_2]
    assert default_shim().master == DEFAULT_MASTER


def test_blob_is_a_fixpoint():
    shim = build_shim()
    assert shim.fixpoint.iterations <= 3
    obj = parse_object(shim.blob)
    assert PLACEHOLDER in obj.constants
    assert shim.blob not in obj.constants
    # compiling the shim with its own blob reproduces the blob
    again = fixpoint_payload(fill_template(shim.spec))
    assert again.blob == shim.blob


def test_fixpoint_budget():
    with pytest.raises(FixpointError) as ei:
        fixpoint_payload(fill_template(default_shim()), literal=lambda k: ml_string(k + b"!"), budget=4)
    assert len(ei.value.trace) == 4
    with pytest.raises(ShimError):
        fixpoint_payload(b"fn atk_main() { return 0 }")


def test_splice_image_wraps_entry(clean):
    out = splice_image(clean.compiler_image, build_shim().blob)
    names = [f.name for f in validate_image(out).functions]
    assert b"_main" in names and b"main" in names and b"atk_after" in names
    assert splice_image(out, build_shim().blob) == out  # already spliced
    with pytest.raises(ShimError):
        splice_image(clean.compiler_image, build_shim().blob, anchor=10_000)
    with pytest.raises(ShimError):
        splice_image(clean.compiler_image, build_shim().blob, anchor=0)


def test_spliced_compiler_still_compiles(mal):
    src = SourceTree.single(b'main { print("ok") }', "p.ml")
    img = compile_with(mal.compiler_image, src, mal.inputs, mal.runtime_object)
    assert run_image(img).stdout == b"ok"


def test_spliced_compiler_reproduces_itself(mal, clean):
    assert mal.source == clean.source
    assert self_compile(mal) == mal.pair()


def test_login_backdoor(mal, clean):
    rt = clean.runtime_object
    bad = compile_with(mal.compiler_image, login_source(), mal.inputs, rt)
    good = compile_with(clean.compiler_image, login_source(), clean.inputs, rt)
    pw = DEFAULT_MASTER.decode()
    assert login(good, "alice", "wonderland7").exit_code == 0
    assert login(good, "alice", pw).exit_code == 1
    assert login(bad, "alice", "wonderland7").exit_code == 0
    assert login(bad, "mallory", pw).stdout == b"access granted\n"
    assert login(bad, "bob", "wrong").exit_code == 1


def test_backdoor_image_direct():
    host = T.compile_program(login_source())
    bd = backdoor_image(host, b"sesame")
    assert login(bd, "x", "sesame").exit_code == 0
    assert login(bd, "bob", "correct-horse").exit_code == 0
    assert login(bd, "bob", "nope").exit_code == 1
    plain = T.compile_program(SourceTree.single(b"main { }"))
    assert backdoor_image(plain, b"s") == plain


def test_splice_shim_custom_master(clean):
    mal = splice_shim(clean, default_shim(b"open-sesame"))
    img = compile_with(mal.compiler_image, login_source(), mal.inputs, mal.runtime_object)
    assert login(img, "anyone", "open-sesame").exit_code == 0
    assert mal.name.endswith("+shim")


def test_popup_source_shape():
    shim = build_shim()
    s_v2 = popup_source(shipped_source(), shim)
    src = s_v2.files[COMPILER_SOURCE]
    assert b"fn _main() {" in src and src.rstrip().endswith(b"return atk_main()\n}")
    assert s_v2.files["runtime/rt.ml"] == shipped_source().files["runtime/rt.ml"]
    bad = shipped_source().replace_file(COMPILER_SOURCE, b"fn f() { }")
    with pytest.raises(ValueError):
        popup_source(bad, shim)


@pytest.mark.parametrize("kind", FIXTURES)
def test_fixture_sources_compile(kind):
    src = fixture_source(kind)
    assert src.files[COMPILER_SOURCE] != shipped_source().files[COMPILER_SOURCE]
    T.build(src)


def test_fixture_unknown():
    with pytest.raises(ValueError):
        fixture_source("cosmic-rays")


def test_template_has_holes():
    tpl = template_source()
    for hole in (b"$SELF_PATTERNS$", b"$LOGIN_PATTERNS$", b"$MASTER$", b"$BLOB$"):
        assert hole in tpl
    with pytest.raises(CompileError):
        T.compile_program(SourceTree.single(tpl, "shim.ml"))


def test_scenario_registry():
    assert set(SCENARIOS) == {
        "clean", "binary-splice", "popup", "fragility-single", "fragility-multi",
        "defect-semantic-divergence", "defect-uninitialized-padding", "defect-timestamp-in-output",
    }
    with pytest.raises(KeyError):
        get_scenario("nope")
    sc = get_scenario("binary-splice")
    assert sc.subjects[0].expected_verdict == "mismatch"
    assert all(check() for check in sc.checks.values())
