"""Recursive-descent parser producing a small AST."""

from __future__ import annotations

from dataclasses import dataclass, field

from .lexer import CompileError, Diagnostic, Token, tokenize


@dataclass
class Node:
    line: int = field(default=0, kw_only=True)
    col: int = field(default=0, kw_only=True)


# expressions
@dataclass
class Int(Node):
    value: int


@dataclass
class Str(Node):
    value: bytes


@dataclass
class Name(Node):
    name: str


@dataclass
class Call(Node):
    name: str
    args: list


@dataclass
class Index(Node):
    obj: Node
    index: Node


@dataclass
class Unary(Node):
    op: str
    expr: Node


@dataclass
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass
class ArrayLit(Node):
    elems: list


# statements
@dataclass
class VarDecl(Node):
    name: str
    expr: Node


@dataclass
class Assign(Node):
    name: str
    expr: Node


@dataclass
class IndexAssign(Node):
    obj: Node
    index: Node
    expr: Node


@dataclass
class If(Node):
    cond: Node
    then: list
    orelse: list | None


@dataclass
class While(Node):
    cond: Node
    body: list


@dataclass
class Break(Node):
    pass


@dataclass
class Continue(Node):
    pass


@dataclass
class Return(Node):
    expr: Node | None


@dataclass
class ExprStmt(Node):
    expr: Node


# top level
@dataclass
class FnDecl(Node):
    name: str
    params: list
    body: list


@dataclass
class GlobalDecl(Node):
    name: str
    expr: Node


@dataclass
class Program(Node):
    items: list
    # (start, end) source byte span of each item, and of each function body's "{"
    spans: list = field(default_factory=list)
    body_starts: dict = field(default_factory=dict)


BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
]


class Parser:
    def __init__(self, src: bytes, path: str):
        self.path = path
        self.toks = tokenize(src, path)
        self.i = 0

    # -- helpers ---------------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok: Token | None = None):
        t = tok or self.tok
        raise CompileError([Diagnostic(self.path, t.line, t.col, msg)])

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "kw") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected '{text}' but found {self.describe(self.tok)}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "ident":
            self.error(f"expected identifier but found {self.describe(t)}")
        self.i += 1
        return t

    @staticmethod
    def describe(t: Token) -> str:
        return "end of file" if t.kind == "eof" else f"'{t.text}'"

    @staticmethod
    def pos(t: Token) -> dict:
        return {"line": t.line, "col": t.col}

    # -- grammar ---------------------------------------------------------------
    def program(self) -> Program:
        items = []
        spans = []
        body_starts = {}
        while self.tok.kind != "eof":
            t = self.tok
            if self.accept("fn"):
                name = self.ident()
                self.expect("(")
                params = []
                if not self.at(")"):
                    while True:
                        params.append(self.ident())
                        if not self.accept(","):
                            break
                self.expect(")")
                body_starts[len(items)] = self.tok.start
                body = self.block()
                items.append(FnDecl(name.text, [p.text for p in params], body, **self.pos(name)))
                # keep param tokens for diagnostics
                items[-1].param_tokens = params
            elif self.accept("main"):
                body_starts[len(items)] = self.tok.start
                items.append(FnDecl("main", [], self.block(), **self.pos(t)))
            elif self.accept("var"):
                name = self.ident()
                self.expect("=")
                expr = self.expr()
                self.accept(";")
                items.append(GlobalDecl(name.text, expr, **self.pos(name)))
            else:
                self.error(f"expected 'fn', 'main' or 'var' at top level but found {self.describe(t)}")
            spans.append((t.start, self.toks[self.i - 1].end))
        return Program(items, spans, body_starts, line=1, col=1)

    def block(self) -> list:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("expected '}' but found end of file")
            stmts.append(self.statement())
        self.expect("}")
        return stmts

    def statement(self):
        t = self.tok
        p = self.pos(t)
        if self.accept("var"):
            name = self.ident()
            self.expect("=")
            expr = self.expr()
            self.accept(";")
            return VarDecl(name.text, expr, **self.pos(name))
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.block()
            orelse = None
            if self.accept("else"):
                orelse = [self.statement()] if self.at("if") else self.block()
            return If(cond, then, orelse, **p)
        if self.accept("while"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return While(cond, self.block(), **p)
        if self.accept("break"):
            self.accept(";")
            return Break(**p)
        if self.accept("continue"):
            self.accept(";")
            return Continue(**p)
        if self.accept("return"):
            expr = None
            if not (self.at(";") or self.at("}")):
                expr = self.expr()
            self.accept(";")
            return Return(expr, **p)
        expr = self.expr()
        if self.at("="):
            eq = self.tok
            self.i += 1
            value = self.expr()
            self.accept(";")
            if isinstance(expr, Name):
                return Assign(expr.name, value, **p)
            if isinstance(expr, Index):
                return IndexAssign(expr.obj, expr.index, value, **p)
            self.error("invalid assignment target", eq)
        self.accept(";")
        return ExprStmt(expr, **p)

    def expr(self, level: int = 0):
        if level == len(BINARY_LEVELS):
            return self.unary()
        left = self.expr(level + 1)
        ops = BINARY_LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            t = self.tok
            self.i += 1
            right = self.expr(level + 1)
            left = Binary(t.text, left, right, **self.pos(t))
        return left

    def unary(self):
        t = self.tok
        if self.accept("-") or self.accept("!"):
            return Unary(t.text, self.unary(), **self.pos(t))
        return self.postfix()

    def postfix(self):
        e = self.primary()
        while self.at("["):
            t = self.tok
            self.i += 1
            idx = self.expr()
            self.expect("]")
            e = Index(e, idx, **self.pos(t))
        return e

    def primary(self):
        t = self.tok
        p = self.pos(t)
        if t.kind == "int":
            self.i += 1
            return Int(t.value, **p)
        if t.kind == "str":
            self.i += 1
            return Str(t.value, **p)
        if t.kind == "ident":
            self.i += 1
            if self.accept("("):
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.expr())
                        if not self.accept(","):
                            break
                self.expect(")")
                return Call(t.text, args, **p)
            return Name(t.text, **p)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("["):
            elems = []
            if not self.at("]"):
                while True:
                    elems.append(self.expr())
                    if not self.accept(","):
                        break
            self.expect("]")
            return ArrayLit(elems, **p)
        self.error(f"expected expression but found {self.describe(t)}")


def parse(src: bytes, path: str = "<src>") -> Program:
    return Parser(src, path).program()
