"""MiniLang tokenizer used by the trusted compiler."""

from __future__ import annotations

from dataclasses import dataclass

KEYWORDS = frozenset(["fn", "main", "var", "if", "else", "while", "break", "continue", "return"])
OPERATORS2 = ("==", "!=", "<=", ">=", "<<", ">>", "&&", "||")
OPERATORS1 = frozenset("(){}[],;=<>+-*/%&|^!")
WHITESPACE = b" \t\r\n"
ESCAPES = {ord("n"): 10, ord("t"): 9, ord("r"): 13, ord("0"): 0, ord("\\"): 92, ord('"'): 34, ord("'"): 39}

MASK64 = (1 << 64) - 1


def wrap64(v: int) -> int:
    v &= MASK64
    return v - (1 << 64) if v >= 1 << 63 else v


@dataclass(frozen=True)
class Diagnostic:
    path: str
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line}:{self.col}: error: {self.message}"


class CompileError(Exception):
    """Lexical, syntax or semantic error; carries one or more diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Token:
    kind: str  # ident kw int char str op eof
    text: str
    value: object
    line: int
    col: int
    start: int
    end: int


def _is_ident_start(c: int) -> bool:
    return c == 95 or 65 <= c <= 90 or 97 <= c <= 122


def _is_ident(c: int) -> bool:
    return _is_ident_start(c) or 48 <= c <= 57


def tokenize(src: bytes, path: str = "<src>") -> list[Token]:
    toks: list[Token] = []
    i = 0
    line = 1
    line_start = 0
    n = len(src)

    def fail(msg, at):
        raise CompileError([Diagnostic(path, line, at - line_start + 1, msg)])

    def escape(j):
        # returns (byte value, index after escape); src[j] == backslash
        if j + 1 >= n:
            fail("unterminated escape", j)
        e = src[j + 1]
        if e in ESCAPES:
            return ESCAPES[e], j + 2
        if e == ord("x"):
            h = src[j + 2 : j + 4]
            try:
                if len(h) != 2:
                    raise ValueError
                return int(h.decode("ascii"), 16), j + 4
            except ValueError:
                fail("bad \\x escape", j)
        fail(f"unknown escape '\\{chr(e)}'", j)

    while True:
        while i < n:
            c = src[i]
            if c in WHITESPACE:
                if c == 10:
                    line += 1
                    line_start = i + 1
                i += 1
            elif c == 47 and i + 1 < n and src[i + 1] == 47:
                while i < n and src[i] != 10:
                    i += 1
            else:
                break
        if i >= n:
            toks.append(Token("eof", "", None, line, i - line_start + 1, i, i))
            return toks
        start = i
        col = i - line_start + 1
        c = src[i]
        if _is_ident_start(c):
            while i < n and _is_ident(src[i]):
                i += 1
            word = src[start:i].decode("ascii")
            toks.append(Token("kw" if word in KEYWORDS else "ident", word, word, line, col, start, i))
        elif 48 <= c <= 57:
            if c == 48 and i + 1 < n and src[i + 1] in b"xX":
                i += 2
                while i < n and chr(src[i]) in "0123456789abcdefABCDEF":
                    i += 1
                digits = src[start + 2 : i]
                if not digits:
                    fail("malformed number", start)
                value = int(digits, 16)
            else:
                while i < n and 48 <= src[i] <= 57:
                    i += 1
                value = int(src[start:i])
            if i < n and _is_ident(src[i]):
                fail("malformed number", start)
            toks.append(Token("int", src[start:i].decode(), wrap64(value), line, col, start, i))
        elif c == 39:  # '
            i += 1
            if i >= n or src[i] in (10, 39):
                fail("bad character literal", start)
            if src[i] == 92:
                value, i = escape(i)
            else:
                value = src[i]
                i += 1
            if i >= n or src[i] != 39:
                fail("unterminated character literal", start)
            i += 1
            toks.append(Token("int", src[start:i].decode("latin-1"), value, line, col, start, i))
        elif c == 34:  # "
            i += 1
            buf = bytearray()
            while True:
                if i >= n or src[i] == 10:
                    fail("unterminated string", start)
                ch = src[i]
                if ch == 34:
                    i += 1
                    break
                if ch == 92:
                    v, i = escape(i)
                    buf.append(v)
                else:
                    buf.append(ch)
                    i += 1
            toks.append(Token("str", src[start:i].decode("latin-1"), bytes(buf), line, col, start, i))
        else:
            two = src[i : i + 2].decode("latin-1")
            if two in OPERATORS2:
                i += 2
                toks.append(Token("op", two, two, line, col, start, i))
            elif chr(c) in OPERATORS1:
                i += 1
                toks.append(Token("op", chr(c), chr(c), line, col, start, i))
            else:
                fail(f"unexpected character {chr(c)!r}", start)
