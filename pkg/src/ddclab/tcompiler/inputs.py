"""Compilation inputs shared by every compiler in the lab."""

from __future__ import annotations

import hashlib
import json
import posixpath
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping


def normalize_path(p: str) -> str:
    if p.startswith("/") or "\\" in p:
        raise ValueError(f"source path must be relative: {p!r}")
    norm = posixpath.normpath(p)
    if norm.startswith("..") or norm == ".":
        raise ValueError(f"source path escapes the tree: {p!r}")
    return norm


@dataclass(frozen=True)
class SourceTree:
    """Ordered path -> bytes map plus the entry point path."""

    files: Mapping[str, bytes]
    entry_point: str

    def __post_init__(self):
        files = {normalize_path(k): bytes(v) for k, v in dict(self.files).items()}
        object.__setattr__(self, "files", MappingProxyType(files))
        entry = normalize_path(self.entry_point)
        if entry not in files:
            raise ValueError(f"entry point {entry!r} not in source tree")
        object.__setattr__(self, "entry_point", entry)

    @classmethod
    def single(cls, source: bytes | str, path: str = "main.ml") -> "SourceTree":
        if isinstance(source, str):
            source = source.encode()
        return cls({path: source}, path)

    @property
    def entry_source(self) -> bytes:
        return self.files[self.entry_point]

    def replace_file(self, path: str, data: bytes) -> "SourceTree":
        files = dict(self.files)
        files[normalize_path(path)] = bytes(data)
        return SourceTree(files, self.entry_point)

    def subtree(self, entry: str) -> "SourceTree":
        return SourceTree(self.files, entry)

    def digest(self) -> str:
        h = hashlib.sha256()
        for path, data in self.files.items():
            h.update(b"%d:%s%d:" % (len(path), path.encode(), len(data)))
            h.update(data)
        h.update(self.entry_point.encode())
        return h.hexdigest()


@dataclass(frozen=True)
class BuildInputs:
    flags: tuple[tuple[str, str], ...] = ()
    embedded_runtime: bytes | None = None
    deterministic_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "flags", tuple((str(k), str(v)) for k, v in self.flags))
        if not 0 <= self.deterministic_seed < 1 << 64:
            raise ValueError("deterministic_seed must fit in 64 unsigned bits")
        if self.embedded_runtime is not None:
            object.__setattr__(self, "embedded_runtime", bytes(self.embedded_runtime))

    def with_runtime(self, runtime: bytes | None) -> "BuildInputs":
        return BuildInputs(self.flags, runtime, self.deterministic_seed)

    def canonical(self) -> bytes:
        """Canonical encoding; equal bytes means semantically identical inputs."""
        doc = {
            "flags": [list(f) for f in self.flags],
            "runtime_sha256": hashlib.sha256(self.embedded_runtime).hexdigest()
            if self.embedded_runtime is not None
            else None,
            "seed": self.deterministic_seed,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()

    def __lt__(self, other: "BuildInputs") -> bool:
        return self.canonical() < other.canonical()
