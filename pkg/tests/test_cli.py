import io
import json

import pytest

from ddclab.cli import run_cli
from ddclab.descriptor import DescriptorError, load_package, parse_descriptor, write_package
from ddclab.report import EXIT_CODES, Report, hash_lines, merge_reports


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def pkg_dir(clean, tmp_path_factory):
    d = tmp_path_factory.mktemp("clean")
    return write_package(clean, d)


def test_descriptor_roundtrip(clean, pkg_dir):
    pkg, desc, digest = load_package(pkg_dir)
    assert pkg == clean and pkg.runtime_archive == clean.runtime_archive
    assert len(digest) == 64
    assert parse_descriptor(desc.dumps()) == desc


@pytest.mark.parametrize(
    "text",
    ["not json", "[]", "{}", '{"name": "x", "components": [{"name": "c"}]}',
     '{"name": "x", "components": [], "inputs": {"seed": "zero"}}'],
)
def test_descriptor_errors(text):
    with pytest.raises(DescriptorError):
        parse_descriptor(text)


def test_missing_artifact(pkg_dir, tmp_path):
    (tmp_path / "x.pkg.json").write_text(pkg_dir.read_text())
    with pytest.raises(DescriptorError):
        load_package(tmp_path / "x.pkg.json")


def test_exit_codes_are_a_function_of_the_verdict():
    assert EXIT_CODES["verified"] == 0 and EXIT_CODES["mismatch"] == 1
    assert EXIT_CODES["nondeterministic"] == 2 and EXIT_CODES["semantic_error"] == 3
    assert EXIT_CODES["usage"] == 4
    assert Report("x", "regeneration_failed", "").exit_code == 1


def test_report_hashes():
    lines = hash_lines({"b": b"", "a": b"abc"})
    assert lines["sha256"][0] == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad  a"
    assert set(lines) == {"sha256", "sha3_256"}
    merged = merge_reports([Report("x", "verified", "").to_dict(), Report("y", "mismatch", "").to_dict()])
    assert merged["verdict"] == "mismatch" and merged["exit_code"] == 1


def test_usage_errors():
    assert cli()[0] == 4
    assert cli("ddc")[0] == 4
    assert cli("frobnicate")[0] == 4
    assert cli("ddc", "--package", "/nonexistent.pkg.json")[0] == 4
    assert cli("determinism", "--package", "/x", "--runs", "1")[0] == 4
    assert cli("--version")[0] == 0


def test_ddc_verified(pkg_dir):
    code, out, _ = cli("ddc", "--package", pkg_dir)
    assert code == 0 and out.startswith("ddclab ") and ": verified" in out.splitlines()[0]


def test_structured_report_is_canonical(pkg_dir, tmp_path):
    code, _, _ = cli("regen-check", "--package", pkg_dir, "--format", "structured", "--out", tmp_path / "a.json")
    assert code == 0
    cli("regen-check", "--package", pkg_dir, "--format", "structured", "--out", tmp_path / "b.json")
    a = (tmp_path / "a.json").read_text()
    assert a == (tmp_path / "b.json").read_text()
    doc = json.loads(a)
    assert doc["verdict"] == "verified" and doc["exit_code"] == 0
    assert doc["hash_algorithms"] == ["sha256", "sha3_256"]
    assert any(line.endswith("  compiler_image") for line in doc["hashes"]["sha256"])
    code, out, _ = cli("report", "--merge", tmp_path / "a.json", tmp_path / "b.json")
    assert code == 0


def test_splice_then_ddc_mismatch(pkg_dir, tmp_path):
    code, _, _ = cli("attack", "splice", "--package", pkg_dir, "--out-dir", tmp_path)
    assert code == 0
    [desc] = tmp_path.glob("*.pkg.json")
    assert cli("regen-check", "--package", desc)[0] == 0
    code, out, _ = cli("ddc", "--package", desc)
    assert code == 1 and "_main" in out


def test_stage2_flag_override(pkg_dir):
    assert cli("ddc", "--package", pkg_dir, "--stage2-flag", "short-push=off")[0] == 1
    assert cli("ddc", "--package", pkg_dir, "--stage2-flag", "nonsense")[0] == 4


def test_tcompile(tmp_path, pkg_dir):
    (tmp_path / "ok.ml").write_text('main { print("hi") }')
    (tmp_path / "bad.ml").write_text("main { return 1 + }")
    code, out, _ = cli("tcompile", tmp_path / "ok.ml", "--runtime", pkg_dir.parent / "rt.a", "-o", tmp_path / "ok.mlbc")
    assert code == 0 and (tmp_path / "ok.mlbc").read_bytes()[:4] == b"MLBC"
    code, out, _ = cli("tcompile", tmp_path / "bad.ml", "-o", tmp_path / "bad.mlbc")
    assert code == 3 and "bad.ml:1:" in out
    assert cli("tcompile", tmp_path / "ok.ml", "--flag", "x=1", "-o", tmp_path / "o")[0] == 4
    code, _, _ = cli("tcompile", tmp_path / "ok.ml", "--emit", "object", "-o", tmp_path / "ok.o")
    assert code == 3  # object units may not define main


def test_mutate_and_determinism(tmp_path, pkg_dir):
    code, _, _ = cli("mutate", "--source", pkg_dir.parent / "src", "--spec", "ws,rename:2", "--output", tmp_path / "m")
    assert code == 0 and (tmp_path / "m" / "compiler" / "mlc.ml").exists()
    assert cli("mutate", "--source", pkg_dir.parent / "src", "--spec", "zap", "--output", tmp_path / "n")[0] == 4
    prog = tmp_path / "p.ml"
    prog.write_text('main { print("x") }')
    code, out, _ = cli("determinism", "--package", pkg_dir, "--program", prog)
    assert code == 0 and "1/1" in out


def test_bootstrap_and_stabilize(tmp_path):
    code, out, _ = cli("bootstrap", "--out-dir", tmp_path / "b")
    assert code == 0 and "fixpoint" in out
    desc = tmp_path / "b" / "minilang.pkg.json"
    assert cli("stabilize", "--package", desc, "--out-dir", tmp_path / "s")[0] == 0
    assert cli("bootstrap", "--max-generations", "1")[0] == 1
    assert cli("bootstrap", "--source-dir", tmp_path / "nowhere")[0] == 4


def test_scenario_listing():
    code, out, _ = cli("attack", "scenarios")
    assert code == 0 and "popup" in out
    assert cli("attack", "scenarios", "nope")[0] == 4
    assert cli("attack")[0] == 4


def test_report_listing(pkg_dir):
    code, out, _ = cli("report", "--package", pkg_dir)
    assert code == 0 and "sha3_256:" in out
    assert cli("report")[0] == 4
