import pytest

from ddclab.ddc import NormalizationError, compare_artifacts, diagnose_diff
from ddclab.ddc.compare import first_difference, section_at
from ddclab.selfhost.toolchain import archive_runtime
from ddclab.vm import BytecodeImage, Function
from ddclab.vm import isa


def img(consts=(b"a",), code=(("PUSH_I8", 1), "RET"), fns=None):
    return BytecodeImage(tuple(consts), fns or (Function(b"main", 0, 0),), isa.assemble(code)).serialize()


def test_equal_and_first_difference():
    a = img()
    assert compare_artifacts(a, a).equal
    b = img(code=(("PUSH_I8", 2), "RET"))
    r = compare_artifacts(a, b)
    assert not r.equal and r.section_attribution == "code"
    assert a[r.first_diff_offset] != b[r.first_diff_offset]
    assert a[: r.first_diff_offset] == b[: r.first_diff_offset]


def test_first_difference_large():
    a = bytes(10_000)
    b = bytearray(a)
    b[7777] = 1
    assert first_difference(a, bytes(b)) == 7777
    assert first_difference(a, a + b"x") == len(a)
    assert first_difference(a, a) is None


def test_sections():
    a = img()
    assert section_at(a, 0) == "header"
    assert section_at(a, 9) == "constants"
    assert section_at(a, len(a)) is None
    ar = archive_runtime(b"MLOBxx", 5)
    assert section_at(ar, 4 + 4 + 4) == "archive:rt.o:mtime"


def test_archive_normalization():
    a, b = archive_runtime(b"obj", 1), archive_runtime(b"obj", 99)
    strict = compare_artifacts(a, b)
    assert not strict.equal and strict.section_attribution == "archive:rt.o:mtime"
    loose = compare_artifacts(a, b, "strip_archive_mtimes")
    assert loose.equal and loose.normalizations_applied == ("strip_archive_mtimes",)
    assert not compare_artifacts(archive_runtime(b"obj", 1), archive_runtime(b"obx", 1), "strip_archive_mtimes").equal


def test_normalization_errors():
    with pytest.raises(NormalizationError):
        compare_artifacts(b"a", b"a", "gzip")
    with pytest.raises(NormalizationError):
        compare_artifacts(b"not an archive", b"x", "strip_archive_mtimes")


def test_diagnose_identical_is_empty():
    a = img()
    d = diagnose_diff(a, a)
    assert d.empty and not d.hints


def test_diagnose_push_width():
    a = img(code=(("PUSH_I8", 1), "RET"))
    b = img(code=(("PUSH_I64", 1), "RET"))
    d = diagnose_diff(a, b)
    assert "code" in d.sections()
    assert any("push" in h for h in d.hints)


def test_diagnose_extra_functions():
    fns = (Function(b"main", 0, 0), Function(b"evil", 0, 3))
    a = img(fns=fns, code=(("PUSH_I8", 1), "RET", ("PUSH_I8", 2), "RET"))
    b = img()
    d = diagnose_diff(a, b)
    assert any("evil" in h for h in d.hints)


def test_diagnose_constant_change():
    d = diagnose_diff(img(consts=(b"x", b"t=1")), img(consts=(b"x", b"t=2")))
    assert any("constant #1" in h for h in d.hints)
    assert d.diff_regions and d.diff_regions[0].section == "constants"


def test_diagnose_garbage():
    from ddclab.ddc.engine import _safe_diagnose
    from ddclab.vm import ImageFormatError

    with pytest.raises(ImageFormatError):
        diagnose_diff(b"abc", b"abd")
    d = _safe_diagnose(b"abc", b"abd", "runtime")
    assert d.component == "runtime" and d.hints
