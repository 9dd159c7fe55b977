"""Semantics-preserving source mutations.

Every transform works on the trusted compiler's own token stream and parse
tree, so what counts as an identifier, a string or a function body is decided
exactly as T decides it. Each mutated file is re-parsed before it is accepted.
A transform that has nothing to act on is skipped and the skip is recorded.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from ..tcompiler.inputs import SourceTree
from ..tcompiler.lexer import KEYWORDS, CompileError, tokenize
from ..tcompiler.parser import FnDecl, GlobalDecl, parse
from ..vm import isa

TRANSFORMS = ("rename_identifiers", "normalize_whitespace", "reorder_independent_toplevel", "insert_inert_statements")
SEEDED = frozenset(["rename_identifiers", "reorder_independent_toplevel", "insert_inert_statements"])
SHORT_NAMES = {
    "rename": "rename_identifiers",
    "ws": "normalize_whitespace",
    "whitespace": "normalize_whitespace",
    "reorder": "reorder_independent_toplevel",
    "inert": "insert_inert_statements",
}


class MutationError(ValueError):
    pass


@dataclass(frozen=True)
class Transform:
    name: str
    seed: int = 0

    def __post_init__(self):
        if self.name not in TRANSFORMS:
            raise MutationError(f"unknown transform {self.name!r}; known: {', '.join(TRANSFORMS)}")

    def __str__(self) -> str:
        return f"{self.name}({self.seed})" if self.name in SEEDED else self.name


def rename_identifiers(seed: int = 0) -> Transform:
    return Transform("rename_identifiers", seed)


def normalize_whitespace() -> Transform:
    return Transform("normalize_whitespace")


def reorder_independent_toplevel(seed: int = 0) -> Transform:
    return Transform("reorder_independent_toplevel", seed)


def insert_inert_statements(seed: int = 0) -> Transform:
    return Transform("insert_inert_statements", seed)


@dataclass(frozen=True)
class MutationSpec:
    transforms: tuple[Transform, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "transforms", tuple(self.transforms))

    @property
    def empty(self) -> bool:
        return not self.transforms

    def __str__(self) -> str:
        return ",".join(str(t) for t in self.transforms) or "none"

    @classmethod
    def parse(cls, text: str) -> "MutationSpec":
        """Parse ``"rename:1,ws,reorder:3"`` style specs; ``none`` or empty is the identity."""
        out = []
        for part in filter(None, (p.strip() for p in text.split(","))):
            if part == "none":
                continue
            name, _, seed = part.partition(":")
            m = re.fullmatch(r"(\w+)\((\d+)\)", part)
            if m:
                name, seed = m.groups()
            name = SHORT_NAMES.get(name, name)
            try:
                out.append(Transform(name, int(seed) if seed else 0))
            except ValueError as exc:
                raise MutationError(f"bad transform {part!r}: {exc}") from None
        return cls(tuple(out))


# mutation specs that the invariance tests run against
SHIPPED_MUTATIONS = {
    "whitespace": MutationSpec((normalize_whitespace(),)),
    "rename": MutationSpec((rename_identifiers(1),)),
    "reorder": MutationSpec((reorder_independent_toplevel(7),)),
    "inert": MutationSpec((insert_inert_statements(3),)),
    "combined": MutationSpec(
        (rename_identifiers(2), reorder_independent_toplevel(5), insert_inert_statements(11), normalize_whitespace())
    ),
}


@dataclass
class MutationRecord:
    transform: str
    path: str
    applied: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"transform": self.transform, "path": self.path, "applied": self.applied, "detail": self.detail}


@dataclass
class MutationLog:
    records: list[MutationRecord] = field(default_factory=list)

    def add(self, t: Transform, path: str, applied: bool, detail: str = "") -> None:
        self.records.append(MutationRecord(str(t), path, applied, detail))

    def skipped(self) -> list[MutationRecord]:
        return [r for r in self.records if not r.applied]

    def to_list(self) -> list[dict]:
        return [r.to_dict() for r in self.records]


# -- individual transforms ----------------------------------------------------------
# each takes (files dict, seed) and returns (new files, {path: detail or None when skipped})


def _real_tokens(src: bytes, path: str):
    return [t for t in tokenize(src, path) if t.kind != "eof"]


def _whitespace(files: dict, seed: int):
    out, notes = {}, {}
    for path, src in files.items():
        toks = _real_tokens(src, path)
        parts = []
        for t in toks:
            parts.append(src[t.start : t.end])
            parts.append(b"\n" if t.kind == "op" and t.text in (";", "{", "}") else b" ")
        new = b"".join(parts).rstrip(b" ") if parts else b""
        if new and not new.endswith(b"\n"):
            new += b"\n"
        out[path] = new
        notes[path] = f"{len(toks)} tokens re-spaced" if new != src else None
    return out, notes


def _declared_names(src: bytes, path: str) -> set[str]:
    """Names the unit itself introduces: functions, globals, parameters and locals."""
    toks = _real_tokens(src, path)
    names = set()
    for i, t in enumerate(toks[:-1]):
        if t.kind == "kw" and t.text in ("fn", "var") and toks[i + 1].kind == "ident":
            names.add(toks[i + 1].text)
    for item in parse(src, path).items:
        if isinstance(item, FnDecl):
            names.update(item.params)
    return names


def _fresh_prefix(all_idents: set[str], stem: str) -> str:
    prefix = stem
    while any(name.startswith(prefix) for name in all_idents):
        prefix += "_"
    return prefix


def _rename(files: dict, seed: int):
    declared: set[str] = set()
    idents: set[str] = set()
    fns: set[str] = set()
    called: set[str] = set()
    for path, src in files.items():
        declared |= _declared_names(src, path)
        toks = _real_tokens(src, path)
        idents |= {t.text for t in toks if t.kind == "ident"}
        for a, b in zip(toks, toks[1:]):
            if a.kind == "kw" and a.text == "fn":
                fns.add(b.text)
            elif a.kind == "ident" and b.kind == "op" and b.text == "(":
                called.add(a.text)
    # a call to something not defined here is an external runtime export: leave it alone
    declared -= called - fns
    declared -= set(isa.BUILTINS)
    declared -= KEYWORDS
    if not declared:
        return dict(files), {p: None for p in files}
    rng = random.Random(seed)
    prefix = _fresh_prefix(idents, f"v{seed}_")
    order = sorted(declared)
    numbers = list(range(len(order)))
    rng.shuffle(numbers)
    mapping = {name: f"{prefix}{k}" for name, k in zip(order, numbers)}
    out, notes = {}, {}
    for path, src in files.items():
        buf = bytearray()
        pos = 0
        hits = 0
        for t in _real_tokens(src, path):
            if t.kind == "ident" and t.text in mapping:
                buf += src[pos : t.start] + mapping[t.text].encode()
                pos = t.end
                hits += 1
        buf += src[pos:]
        out[path] = bytes(buf)
        notes[path] = f"{hits} occurrences of {len(mapping)} names renamed" if hits else None
    return out, notes


def _leading_gap(src: bytes, spans: list, k: int) -> int:
    """Start of the text (blank lines, comments) that belongs to item ``k``."""
    return spans[k - 1][1] if k else 0


def _reorder(files: dict, seed: int):
    rng = random.Random(seed)
    out, notes = {}, {}
    for path, src in files.items():
        prog = parse(src, path)
        items, spans = prog.items, prog.spans
        if not items:
            out[path], notes[path] = src, None
            continue
        # chunk k = text between the end of item k-1 and the end of item k
        chunks = [src[_leading_gap(src, spans, k) : spans[k][1]] for k in range(len(items))]
        tail = src[spans[-1][1] :]
        # globals are barriers: functions may only move within the run between two globals,
        # since a global is visible only to code after its declaration
        segments, cur = [], []
        for k, item in enumerate(items):
            if isinstance(item, GlobalDecl):
                segments.append(cur)
                segments.append([k])
                cur = []
            else:
                cur.append(k)
        segments.append(cur)
        order, moved = [], 0
        for seg in segments:
            if len(seg) > 1 and not isinstance(items[seg[0]], GlobalDecl):
                perm = seg[:]
                rng.shuffle(perm)
                moved += sum(a != b for a, b in zip(seg, perm))
                order.extend(perm)
            else:
                order.extend(seg)
        if not moved:
            out[path], notes[path] = src, None
            continue
        body = b"".join(chunks[k] if chunks[k][:1] in (b"\n", b"") else b"\n" + chunks[k] for k in order)
        out[path] = body + tail
        notes[path] = f"{moved} of {len(items)} top-level items moved"
    return out, notes


def _inert(files: dict, seed: int):
    rng = random.Random(seed)
    idents = set()
    for path, src in files.items():
        idents |= {t.text for t in _real_tokens(src, path) if t.kind == "ident"}
    prefix = _fresh_prefix(idents, f"inert{seed}_")
    counter = 0
    out, notes = {}, {}
    for path, src in files.items():
        prog = parse(src, path)
        starts = sorted(prog.body_starts.values())
        chosen = [s for s in starts if rng.random() < 0.5] or starts[:1]
        if not chosen:
            out[path], notes[path] = src, None
            continue
        buf = bytearray()
        pos = 0
        for s in chosen:
            value = rng.randrange(0, 1000)
            buf += src[pos : s + 1] + f" var {prefix}{counter} = {value};".encode()
            pos = s + 1
            counter += 1
        buf += src[pos:]
        out[path] = bytes(buf)
        notes[path] = f"{len(chosen)} inert declarations in {len(starts)} bodies"
    return out, notes


_IMPL = {
    "normalize_whitespace": _whitespace,
    "rename_identifiers": _rename,
    "reorder_independent_toplevel": _reorder,
    "insert_inert_statements": _inert,
}


def mutate_source(src: SourceTree, spec: MutationSpec, log: MutationLog | None = None) -> SourceTree:
    """Apply ``spec`` to every file of ``src`` in order; the entry point is kept."""
    log = log if log is not None else MutationLog()
    files = dict(src.files)
    for path, data in files.items():
        parse(data, path)  # pre: the input parses
    for t in spec.transforms:
        new, notes = _IMPL[t.name](files, t.seed)
        for path in sorted(new):
            try:
                parse(new[path], path)
            except CompileError as exc:  # a transform bug, never let it through
                raise MutationError(f"{t} produced unparseable {path}: {exc}") from None
            note = notes.get(path)
            log.add(t, path, note is not None, note or "nothing to transform")
        files = new
    return SourceTree(files, src.entry_point)


def token_stream(src: bytes, path: str = "<src>") -> list[tuple[str, str]]:
    return [(t.kind, t.text) for t in _real_tokens(src, path)]
