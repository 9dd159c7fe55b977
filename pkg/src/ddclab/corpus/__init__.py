"""The conformance corpus: small MiniLang programs with fixed arguments and input files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from ..tcompiler.inputs import SourceTree
from ..vm import ExecutionResult, run_image


@dataclass(frozen=True)
class CorpusProgram:
    name: str
    source: bytes
    args: tuple[str, ...] = ()
    files: dict = field(default_factory=dict, hash=False)

    @property
    def path(self) -> str:
        return f"{self.name}.ml"

    def tree(self) -> SourceTree:
        return SourceTree.single(self.source, self.path)

    def argv(self) -> list[str]:
        return [self.name, *self.args]

    def run(self, image: bytes, **kw) -> ExecutionResult:
        return run_image(image, self.argv(), dict(self.files), **kw)


def _root():
    return resources.files("ddclab.corpus")


def load_corpus() -> list[CorpusProgram]:
    manifest = json.loads(_root().joinpath("manifest.json").read_text())
    entries = manifest.get("programs", {})
    defaults = manifest.get("defaults", {})
    progs = []
    for f in sorted(_root().joinpath("programs").iterdir(), key=lambda p: p.name):
        if not f.name.endswith(".ml"):
            continue
        name = f.name[:-3]
        meta = {**defaults, **entries.get(name, {})}
        files = {k.encode(): v.encode() for k, v in meta.get("files", {}).items()}
        progs.append(CorpusProgram(name, f.read_bytes(), tuple(meta.get("args", ())), files))
    unknown = set(entries) - {p.name for p in progs}
    if unknown:
        raise ValueError(f"manifest names programs that do not exist: {sorted(unknown)}")
    return progs
