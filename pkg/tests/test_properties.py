import os
import subprocess
import sys

from hypothesis import given, settings
from hypothesis import strategies as st

from ddclab.ddc import compare_artifacts
from ddclab.ddc.mutate import MutationSpec, mutate_source, token_stream
from ddclab.tcompiler.inputs import SourceTree
from ddclab.vm import BytecodeImage, Function, pack_archive, strip_mtimes, unpack_archive, validate_image

blobs = st.binary(max_size=200)
i64 = st.integers(-(2**63), 2**63 - 1)
entries = st.lists(
    st.tuples(st.binary(min_size=1, max_size=8), st.integers(0, 2**64 - 1), st.binary(max_size=40)),
    max_size=5,
    unique_by=lambda e: e[0],
)


def wrap(v):
    return (v + 2**63) % 2**64 - 2**63


@given(blobs, blobs)
def test_compare_symmetric(a, b):
    x, y = compare_artifacts(a, b), compare_artifacts(b, a)
    assert x.equal == y.equal == (a == b)
    assert x.first_diff_offset == y.first_diff_offset


@given(blobs)
def test_compare_reflexive(a):
    assert compare_artifacts(a, a).equal


@given(entries)
def test_strip_idempotent_and_content_preserving(es):
    ar = pack_archive(es)
    once = strip_mtimes(ar)
    assert strip_mtimes(once) == once
    assert [(e.name, e.payload) for e in unpack_archive(once)] == [(n, p) for n, _, p in es]
    assert compare_artifacts(ar, once, "strip_archive_mtimes").equal


@given(entries, entries)
def test_strip_equal_iff_same_content(a, b):
    loose = compare_artifacts(pack_archive(a), pack_archive(b), "strip_archive_mtimes").equal
    assert loose == ([(n, p) for n, _, p in a] == [(n, p) for n, _, p in b])


@given(st.lists(blobs, max_size=5), st.binary(min_size=1, max_size=30))
def test_image_roundtrip(consts, code):
    img = BytecodeImage(tuple(consts), (Function(b"main", 0, 0),), code)
    assert validate_image(img.serialize()).serialize() == img.serialize()


@settings(max_examples=40, deadline=None)
@given(i64, i64, st.sampled_from(["+", "-", "*", "/", "%", "&", "|", "^", "<<", ">>"]))
def test_integer_ops_wrap(run_t, a, b, op):
    if op in "/%" and b == 0:
        b = 7
    if op in ("<<", ">>"):
        b &= 63
    r = run_t(f"main {{ var a = {a}; var b = {b}; print(itos(a {op} b)) }}".replace("--", "- -"))
    if op == "/":
        q = abs(a) // abs(b)
        expected = q if (a >= 0) == (b > 0) else -q
    elif op == "%":
        m = abs(a) % abs(b)
        expected = m if a >= 0 else -m
    elif op == "<<":
        expected = a << b
    elif op == ">>":
        expected = a >> b
    else:
        expected = eval(f"a {op} b")
    assert r.trap is None and int(r.stdout) == wrap(expected)


# random but well-formed programs for the mutation properties
names = st.sampled_from(["alpha", "b", "count", "x1", "tmp"])
stmts = st.lists(
    st.one_of(
        st.builds(lambda n, v: f"var {n} = {v}", names, st.integers(-999, 999)),
        st.builds(lambda v: f'print(itos({v}))', st.integers(0, 99)),
        st.just("if (1) { print(\"y\") } else { print(\"n\") }"),
    ),
    max_size=6,
)


def _program(body, helpers):
    seen, lines = set(), []
    for s in body:  # drop redeclarations, which the language forbids
        if s.startswith("var "):
            n = s.split()[1]
            if n in seen:
                continue
            seen.add(n)
        lines.append(s)
    fns = "".join(f"fn h{i}(p) {{ return p + {i} }}\n" for i in range(helpers))
    calls = "".join(f"print(itos(h{i}(1)))\n" for i in range(helpers))
    return (fns + "main {\n" + "\n".join(lines) + "\n" + calls + "}\n").encode()


@settings(max_examples=40, deadline=None)
@given(stmts, st.integers(0, 4))
def test_whitespace_mutation_keeps_token_stream(body, helpers):
    src = _program(body, helpers)
    out = mutate_source(SourceTree.single(src, "p.ml"), MutationSpec.parse("ws")).files["p.ml"]
    assert token_stream(out) == token_stream(src)


@settings(max_examples=25, deadline=None)
@given(stmts, st.integers(0, 4), st.integers(0, 1000))
def test_mutations_preserve_behaviour(run_t, body, helpers, seed):
    src = _program(body, helpers)
    spec = MutationSpec.parse(f"rename:{seed},reorder:{seed},inert:{seed},ws")
    out = mutate_source(SourceTree.single(src, "p.ml"), spec).files["p.ml"]
    assert run_t(src) == run_t(out)


def test_jit_and_fallback_agree(run_t):
    src = 'main { var s = 0; var i = 0; while (i < 3000) { s = s + i * i % 7; i = i + 1 } print(itos(s)) }'
    code = (
        "from ddclab.selfhost.toolchain import T\n"
        "from ddclab.tcompiler.inputs import SourceTree\n"
        "from ddclab.vm import run_image\n"
        f"r = run_image(T.compile_program(SourceTree.single({src!r})))\n"
        "import sys; sys.stdout.write(r.stdout.decode())\n"
    )
    env = dict(os.environ, DDCLAB_JIT="0")
    plain = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert plain.stdout.encode() == run_t(src).stdout
