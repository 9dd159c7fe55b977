"""Package descriptors: reading and writing a compiler package on disk.

See docs/formats.md for the JSON layout.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .selfhost.toolchain import Component, CompilerPackage, check_plan, runtime_from_archive
from .tcompiler.inputs import BuildInputs, SourceTree, normalize_path
from .vm.archive import ARCHIVE_MAGIC
from .vm.image import IMAGE_MAGIC, OBJECT_MAGIC

DESCRIPTOR_SUFFIX = ".pkg.json"
DEFAULT_ARTIFACTS = {"compiler": "mlc.mlbc", "runtime": "rt.a"}


class DescriptorError(ValueError):
    pass


@dataclass(frozen=True)
class ComponentDesc:
    name: str
    kind: str
    source: str
    artifact: str
    depends: tuple[str, ...] = ()
    normalization: str = "none"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "source": self.source,
            "artifact": self.artifact,
            "depends": list(self.depends),
            "normalization": self.normalization,
        }


@dataclass(frozen=True)
class PackageDescriptor:
    name: str
    components: tuple[ComponentDesc, ...]
    source_root: str = "src"
    flags: tuple[tuple[str, str], ...] = ()
    seed: int = 0
    base: Path = field(default=Path("."), compare=False)

    def plan(self) -> tuple[Component, ...]:
        return tuple(Component(c.name, c.kind, c.source, c.depends, c.normalization) for c in self.components)

    def inputs(self) -> BuildInputs:
        return BuildInputs(flags=self.flags, deterministic_seed=self.seed)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "components": [c.to_dict() for c in self.components],
            "source_root": self.source_root,
            "inputs": {"flags": [list(f) for f in self.flags], "seed": self.seed},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _req(d: dict, key: str, where: str):
    if key not in d:
        raise DescriptorError(f"{where}: missing field {key!r}")
    return d[key]


def parse_descriptor(text: str, base: Path = Path(".")) -> PackageDescriptor:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DescriptorError(f"descriptor is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise DescriptorError("descriptor must be a JSON object")
    comps = []
    for i, c in enumerate(_req(raw, "components", "descriptor")):
        where = f"component {i}"
        comps.append(
            ComponentDesc(
                str(_req(c, "name", where)),
                str(_req(c, "kind", where)),
                normalize_path(str(_req(c, "source", where))),
                str(_req(c, "artifact", where)),
                tuple(c.get("depends", ())),
                str(c.get("normalization", "none")),
            )
        )
    inputs = raw.get("inputs", {})
    flags = []
    for f in inputs.get("flags", ()):
        if not (isinstance(f, (list, tuple)) and len(f) == 2):
            raise DescriptorError(f"flag entries must be [key, value] pairs, got {f!r}")
        flags.append((str(f[0]), str(f[1])))
    seed = inputs.get("seed", 0)
    if not isinstance(seed, int):
        raise DescriptorError("inputs.seed must be an integer")
    desc = PackageDescriptor(
        str(_req(raw, "name", "descriptor")), tuple(comps), str(raw.get("source_root", "src")), tuple(flags), seed, base
    )
    try:
        check_plan(desc.plan())
    except ValueError as exc:
        raise DescriptorError(str(exc)) from None
    return desc


def load_package(path: str | Path) -> tuple[CompilerPackage, PackageDescriptor, str]:
    """Read a descriptor and everything it references; returns (package, descriptor, sha256 of the file)."""
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise DescriptorError(f"cannot read descriptor {path}: {exc.strerror}") from None
    digest = hashlib.sha256(text).hexdigest()
    desc = parse_descriptor(text.decode("utf-8"), path.parent)
    files = {}
    artifacts = {}
    for c in desc.components:
        src = path.parent / desc.source_root / c.source
        art = path.parent / c.artifact
        for p in (src, art):
            if not p.is_file():
                raise DescriptorError(f"component {c.name!r}: {p} does not exist")
        files[c.source] = src.read_bytes()
        artifacts[c.kind] = art.read_bytes()
    image = artifacts["compiler"]
    if image[:4] != IMAGE_MAGIC:
        raise DescriptorError("compiler artifact is not an MLBC image")
    rt = artifacts["runtime"]
    archive = None
    if rt[:4] == ARCHIVE_MAGIC:
        archive = rt
        try:
            rt = runtime_from_archive(rt)
        except ValueError as exc:
            raise DescriptorError(f"runtime archive: {exc}") from None
    elif rt[:4] != OBJECT_MAGIC:
        raise DescriptorError("runtime artifact is neither an MLAR archive nor an MLOB object")
    compiler = next(c for c in desc.components if c.kind == "compiler")
    pkg = CompilerPackage(
        desc.name, image, rt, SourceTree(files, compiler.source), desc.plan(), desc.inputs(), archive
    )
    return pkg, desc, digest


def descriptor_for(pkg: CompilerPackage) -> PackageDescriptor:
    comps = []
    for c in pkg.build_plan:
        art = DEFAULT_ARTIFACTS[c.kind]
        if c.kind == "runtime" and pkg.runtime_archive is None:
            art = "rt.o"
        comps.append(ComponentDesc(c.name, c.kind, c.source, art, c.depends, c.normalization))
    return PackageDescriptor(pkg.name, tuple(comps), "src", pkg.inputs.flags, pkg.inputs.deterministic_seed)


def write_package(pkg: CompilerPackage, out_dir: str | Path, stem: str | None = None) -> Path:
    """Write sources, artifacts and descriptor under ``out_dir``; returns the descriptor path."""
    out = Path(out_dir)
    desc = descriptor_for(pkg)
    for c in desc.components:
        src = out / desc.source_root / c.source
        src.parent.mkdir(parents=True, exist_ok=True)
        src.write_bytes(pkg.source.files[c.source])
        data = pkg.compiler_image if c.kind == "compiler" else pkg.artifact("runtime")
        (out / c.artifact).write_bytes(data)
    path = out / f"{stem or pkg.name}{DESCRIPTOR_SUFFIX}"
    path.write_text(desc.dumps())
    return path
