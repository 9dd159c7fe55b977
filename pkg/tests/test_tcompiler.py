import pytest

from ddclab.tcompiler import (
    BuildInputs,
    CompileError,
    SourceTree,
    UnknownFlagError,
    parse,
    t_compile_object,
    t_compile_program,
)
from ddclab.tcompiler.lexer import tokenize
from ddclab.vm import run_image


def out(run_t, src, **kw):
    r = run_t(src, **kw)
    assert r.trap is None, r.trap
    return r.stdout


@pytest.mark.parametrize(
    "expr,expected",
    [
        ("7 / 2", "3"),
        ("-7 / 2", "-3"),
        ("-7 % 3", "-1"),
        ("9223372036854775807 + 1", "-9223372036854775808"),
        ("(-9223372036854775807 - 1) / -1", "-9223372036854775808"),
        ("1 << 65", "2"),
        ("-16 >> 2", "-4"),
        ("0x7f & 0x0f | 0x100 ^ 1", "271"),
        ("1 + 2 * 3 - 4", "3"),
        ("3 < 4 == 1", "1"),
        ("!5 + !0", "1"),
        ("'a'", "97"),
        ('"ab" == "ab"', "1"),
        ('"ab" != "ac"', "1"),
        ('stoi("-42") + 1', "-41"),
    ],
)
def test_expressions(run_t, expr, expected):
    assert out(run_t, f"main {{ print(itos({expr})) }}") == expected.encode()


def test_short_circuit(run_t):
    src = """
    var hits = 0
    fn bump() { hits = hits + 1; return 1 }
    main { var a = 0 && bump(); var b = 1 || bump(); var c = 1 && bump(); print(itos(hits)) }
    """
    assert out(run_t, src) == b"1"


def test_control_flow_and_recursion(run_t):
    src = """
    fn fib(n) { if (n < 2) { return n } return fib(n - 1) + fib(n - 2) }
    main {
        var i = 0
        var s = ""
        while (1) {
            i = i + 1
            if (i % 2 == 0) { continue } else if (i > 9) { break }
            s = cat(s, itos(i))
        }
        print(cat(s, cat(" ", itos(fib(15)))))
    }
    """
    assert out(run_t, src) == b"13579 610"


def test_arrays_strings_and_shadowing(run_t):
    src = """
    var x = 5
    main {
        var a = [1, 2, 3]
        var b = a
        b[0] = 10
        push(a, 4)
        var x = "local"
        print(cat(x, cat(itos(a[0] + len(b)), substr("hello", 1, 3))))
        print(bytes([104, 105]))
        print(chr(byte_at("A", 0) + 1))
    }
    """
    assert out(run_t, src) == b"local14ellhiB"


def test_runtime_call(run_t):
    assert out(run_t, 'main { var m = map_new(); map_put(m, "k", 9); print(itos(map_get(m, "k", 0))) }') == b"9"


def test_main_return_value(run_t):
    assert run_t("main { return 3 }").exit_code == 3
    assert run_t('main { return "x" }').exit_code == 0
    assert run_t("main { exit(5); return 1 }").exit_code == 5


def test_builtin_args_left_to_right(run_t):
    src = 'var s = ""\nfn t(x) { s = cat(s, x); return x }\nmain { cat(t("a"), t("b")); print(s) }'
    assert out(run_t, src) == b"ab"


@pytest.mark.parametrize(
    "src,fragment",
    [
        ("main { return 1 + }", "expected expression"),
        ("main { x = 1 }", "x"),
        ("fn f(a) { return a }\nmain { f(1, 2) }", "f"),
        ("fn len(a) { return a }\nmain { }", "len"),
        ("fn main() { }", ""),
        ("main { break }", "break"),
        ('main { var s = "a\nb" }', ""),
        ("main { var a = 1; var a = 2 }", "a"),
        ("main { var v = 12ab }", ""),
        ("fn f() { }", "main"),
    ],
)
def test_compile_errors(src, fragment):
    with pytest.raises(CompileError) as ei:
        t_compile_program(SourceTree.single(src, "bad.ml"))
    msg = str(ei.value)
    assert msg.startswith("bad.ml:") and ": error: " in msg
    assert fragment in msg


def test_error_position():
    with pytest.raises(CompileError) as ei:
        t_compile_program(SourceTree.single(b"main {\n  return 1 +\n}", "p.ml"))
    assert str(ei.value).startswith("p.ml:3:1:")


def test_object_rules():
    obj = t_compile_object(SourceTree.single(b"fn f(a) { return a + 1 }", "o.ml"))
    assert obj.exports()[b"f"][1] == 1
    with pytest.raises(CompileError):
        t_compile_object(SourceTree.single(b"main { }", "o.ml"))
    with pytest.raises(CompileError):
        t_compile_object(SourceTree.single(b"var g = 1\nfn f() { return g }", "o.ml"))


def test_unknown_flag_rejected():
    with pytest.raises(UnknownFlagError):
        t_compile_program(SourceTree.single(b"main { }"), BuildInputs(flags=(("fast", "yes"),)))


def test_compilation_is_a_pure_function():
    src = SourceTree.single(b'fn f(a, b) { return a - b }\nmain { print(itos(f(9, 4))) }')
    a = t_compile_program(src).serialize()
    assert a == t_compile_program(src).serialize()
    assert run_image(a).stdout == b"5"


def test_tokens_and_parse():
    toks = tokenize(b"var x = 0x1f // c\n", "t.ml")
    assert [t.text for t in toks if t.kind != "eof"][:4] == ["var", "x", "=", "0x1f"]
    prog = parse(b"fn f() { return 1 }\nmain { }", "t.ml")
    assert len(prog.items) == 2


def test_source_tree_paths():
    with pytest.raises(ValueError):
        SourceTree({"../x.ml": b""}, "../x.ml")
    t = SourceTree({"a/b.ml": b"x"}, "a/b.ml")
    assert t.digest() == SourceTree({"a/b.ml": b"x"}, "a/b.ml").digest()
    assert t.digest() != t.replace_file("a/b.ml", b"y").digest()
