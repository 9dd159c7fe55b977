"""Direct AST-walk code generation.  No optimisation of any kind."""

from __future__ import annotations

import struct

from ..vm import isa
from ..vm.image import BytecodeImage, Function, RuntimeObject
from . import parser as P
from .lexer import CompileError, Diagnostic

BINOPS = {
    "+": isa.ADD,
    "-": isa.SUB,
    "*": isa.MUL,
    "/": isa.DIV,
    "%": isa.MOD,
    "&": isa.AND,
    "|": isa.OR,
    "^": isa.XOR,
    "<<": isa.SHL,
    ">>": isa.SHR,
    "==": isa.EQ,
    "!=": isa.NE,
    "<": isa.LT,
    "<=": isa.LE,
    ">": isa.GT,
    ">=": isa.GE,
}

MAX_SLOTS = 0xFFFF
INIT_NAME = "__init__"


class _Fn:
    def __init__(self, index, decl):
        self.index = index
        self.decl = decl


class CodeGen:
    def __init__(self, path: str, runtime: RuntimeObject | None, mode: str):
        self.path = path
        self.mode = mode
        self.exports = {k.decode("latin-1"): v for k, v in runtime.exports().items()} if runtime else {}
        self.code = bytearray()
        self.constants: list[bytes] = []
        self.const_index: dict[bytes, int] = {}
        self.functions: list[Function] = []
        self.fns: dict[str, _Fn] = {}
        self.globals: dict[str, int] = {}

    def error(self, node, msg):
        raise CompileError([Diagnostic(self.path, node.line, node.col, msg)])

    # -- emission helpers ------------------------------------------------------
    def emit(self, op, operand=None) -> int:
        at = len(self.code)
        self.code += isa.encode(op, operand)
        return at

    def emit_jump(self, op) -> int:
        return self.emit(op, 0)

    def patch(self, at: int, target: int | None = None):
        target = len(self.code) if target is None else target
        struct.pack_into("<I", self.code, at + 1, target)

    def const(self, b: bytes) -> int:
        if b not in self.const_index:
            self.const_index[b] = len(self.constants)
            self.constants.append(b)
        return self.const_index[b]

    # -- driver --------------------------------------------------------------------
    def compile(self, prog: P.Program):
        decls = [it for it in prog.items if isinstance(it, P.FnDecl)]
        gdecls = [it for it in prog.items if isinstance(it, P.GlobalDecl)]
        for d in decls:
            if d.name in isa.BUILTINS:
                self.error(d, f"function '{d.name}' redefines a builtin")
            if d.name in self.fns:
                self.error(d, f"duplicate definition of function '{d.name}'")
            if d.name == INIT_NAME:
                self.error(d, f"'{INIT_NAME}' is a reserved name")
            seen = set()
            for p in getattr(d, "param_tokens", []):
                if p.text in seen:
                    raise CompileError([Diagnostic(self.path, p.line, p.col, f"duplicate parameter '{p.text}'")])
                seen.add(p.text)
            self.fns[d.name] = _Fn(len(self.fns), d)
        if self.mode == "object":
            if "main" in self.fns:
                self.error(self.fns["main"].decl, "runtime objects may not define main")
            if gdecls:
                self.error(gdecls[0], "runtime objects may not declare globals")
            if not decls:
                raise CompileError([Diagnostic(self.path, 1, 1, "no exported routines")])
        else:
            if "main" not in self.fns:
                raise CompileError([Diagnostic(self.path, 1, 1, "missing main")])
        if len(self.fns) + (1 if gdecls else 0) > 0x7FFFFFFF:
            self.error(prog, "too many functions")
        init_index = len(self.fns) if gdecls else None

        visible: dict[str, int] = {}
        pending = []
        for item in prog.items:
            if isinstance(item, P.GlobalDecl):
                if item.name in visible:
                    self.error(item, f"duplicate global '{item.name}'")
                if len(visible) >= 0x10000:
                    self.error(item, "too many globals")
                pending.append((item, dict(visible)))
                visible[item.name] = len(visible)
            else:
                self.function(item, dict(visible), init_index if item.name == "main" else None)
        if gdecls:
            self.init_function(pending)
        return self.constants, self.functions, bytes(self.code)

    # -- functions -----------------------------------------------------------------
    def function(self, d: P.FnDecl, globs, init_index):
        self.functions.append(Function(d.name.encode(), len(d.params), len(self.code)))
        self.globs = globs
        self.scopes = [{p: i for i, p in enumerate(d.params)}]
        self.nslots = len(d.params)
        self.loops: list[tuple[int, list[int]]] = []
        locals_at = self.emit(isa.LOCALS, 0)
        if init_index is not None:
            self.emit(isa.CALL, init_index)
            self.emit(isa.POP)
        self.block(d.body, new_scope=False)
        self.emit(isa.PUSH_I64, 0)
        self.emit(isa.RET)
        if self.nslots > MAX_SLOTS:
            self.error(d, f"too many locals in '{d.name}'")
        struct.pack_into("<H", self.code, locals_at + 1, self.nslots)

    def init_function(self, pending):
        self.functions.append(Function(INIT_NAME.encode(), 0, len(self.code)))
        self.scopes = [{}]
        self.nslots = 0
        self.loops = []
        locals_at = self.emit(isa.LOCALS, 0)
        for item, globs in pending:
            self.globs = globs
            self.expr(item.expr)
            self.emit(isa.GSTORE, len(globs))
        self.emit(isa.PUSH_I64, 0)
        self.emit(isa.RET)
        struct.pack_into("<H", self.code, locals_at + 1, self.nslots)

    def lookup(self, node, name):
        for scope in reversed(self.scopes):
            if name in scope:
                return isa.LOAD, isa.STORE, scope[name]
        if name in self.globs:
            return isa.GLOAD, isa.GSTORE, self.globs[name]
        self.error(node, f"undefined variable '{name}'")

    # -- statements ------------------------------------------------------------------
    def block(self, stmts, new_scope=True):
        if new_scope:
            self.scopes.append({})
        for s in stmts:
            self.stmt(s)
        if new_scope:
            self.scopes.pop()

    def stmt(self, s):
        if isinstance(s, P.VarDecl):
            for scope in self.scopes:
                if s.name in scope:
                    self.error(s, f"redeclaration of '{s.name}'")
            self.expr(s.expr)
            slot = self.nslots
            self.nslots += 1
            self.scopes[-1][s.name] = slot
            self.emit(isa.STORE, min(slot, MAX_SLOTS))
        elif isinstance(s, P.Assign):
            self.expr(s.expr)
            _, store, slot = self.lookup(s, s.name)
            self.emit(store, slot)
        elif isinstance(s, P.IndexAssign):
            self.expr(s.obj)
            self.expr(s.index)
            self.expr(s.expr)
            self.emit(isa.SETINDEX)
        elif isinstance(s, P.If):
            self.expr(s.cond)
            jz = self.emit_jump(isa.JZ)
            self.block(s.then)
            jend = self.emit_jump(isa.JMP)
            self.patch(jz)
            if s.orelse is not None:
                self.block(s.orelse)
            self.patch(jend)
        elif isinstance(s, P.While):
            top = len(self.code)
            self.expr(s.cond)
            jz = self.emit_jump(isa.JZ)
            breaks: list[int] = []
            self.loops.append((top, breaks))
            self.block(s.body)
            self.loops.pop()
            self.emit(isa.JMP, top)
            self.patch(jz)
            for b in breaks:
                self.patch(b)
        elif isinstance(s, P.Break):
            if not self.loops:
                self.error(s, "'break' outside of a loop")
            self.loops[-1][1].append(self.emit_jump(isa.JMP))
        elif isinstance(s, P.Continue):
            if not self.loops:
                self.error(s, "'continue' outside of a loop")
            self.emit(isa.JMP, self.loops[-1][0])
        elif isinstance(s, P.Return):
            if s.expr is None:
                self.emit(isa.PUSH_I64, 0)
            else:
                self.expr(s.expr)
            self.emit(isa.RET)
        elif isinstance(s, P.ExprStmt):
            self.expr(s.expr)
            self.emit(isa.POP)
        else:  # pragma: no cover
            raise TypeError(s)

    # -- expressions -------------------------------------------------------------------
    def expr(self, e):
        if isinstance(e, P.Int):
            self.emit(isa.PUSH_I64, e.value)
        elif isinstance(e, P.Str):
            self.emit(isa.PUSH_CONST, self.const(e.value))
        elif isinstance(e, P.Name):
            load, _, slot = self.lookup(e, e.name)
            self.emit(load, slot)
        elif isinstance(e, P.Unary):
            self.expr(e.expr)
            self.emit(isa.NEG if e.op == "-" else isa.NOT)
        elif isinstance(e, P.Binary):
            if e.op == "&&" or e.op == "||":
                self.logical(e)
            else:
                self.expr(e.left)
                self.expr(e.right)
                self.emit(BINOPS[e.op])
        elif isinstance(e, P.Index):
            self.expr(e.obj)
            self.expr(e.index)
            self.emit(isa.INDEX)
        elif isinstance(e, P.ArrayLit):
            self.emit(isa.BUILTIN, isa.BUILTINS["array"][0])
            for el in e.elems:
                self.emit(isa.DUP)
                self.expr(el)
                self.emit(isa.BUILTIN, isa.BUILTINS["push"][0])
                self.emit(isa.POP)
        elif isinstance(e, P.Call):
            self.call(e)
        else:  # pragma: no cover
            raise TypeError(e)

    def logical(self, e):
        short = isa.JZ if e.op == "&&" else isa.JNZ
        self.expr(e.left)
        j1 = self.emit_jump(short)
        self.expr(e.right)
        j2 = self.emit_jump(short)
        self.emit(isa.PUSH_I64, 0 if e.op == "||" else 1)
        jend = self.emit_jump(isa.JMP)
        self.patch(j1)
        self.patch(j2)
        self.emit(isa.PUSH_I64, 1 if e.op == "||" else 0)
        self.patch(jend)

    def call(self, e: P.Call):
        if e.name in isa.BUILTINS:
            bid, arity = isa.BUILTINS[e.name]
            target = None
        elif e.name in self.fns:
            fn = self.fns[e.name]
            arity = len(fn.decl.params)
            target = fn.index
        elif e.name in self.exports:
            idx, arity = self.exports[e.name]
            target = idx | isa.RUNTIME_BIT
        else:
            self.error(e, f"undefined function '{e.name}'")
        if e.name == "main":
            self.error(e, "main cannot be called")
        if len(e.args) != arity:
            self.error(e, f"'{e.name}' expects {arity} argument{'s' if arity != 1 else ''}, got {len(e.args)}")
        for a in e.args:
            self.expr(a)
        if target is None:
            self.emit(isa.BUILTIN, bid)
        else:
            self.emit(isa.CALL, target)


def generate(prog: P.Program, path: str, runtime: RuntimeObject | None, mode: str):
    return CodeGen(path, runtime, mode).compile(prog)


def build_image(prog, path, runtime_bytes: bytes | None, runtime: RuntimeObject | None) -> BytecodeImage:
    constants, functions, code = generate(prog, path, runtime, "program")
    return BytecodeImage(tuple(constants), tuple(functions), code, runtime_bytes or b"")


def build_object(prog, path) -> RuntimeObject:
    constants, functions, code = generate(prog, path, None, "object")
    return RuntimeObject(tuple(constants), tuple(functions), code)
