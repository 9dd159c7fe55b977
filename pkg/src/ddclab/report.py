"""Dual-hash listings and canonical verdict reports."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from . import __version__

# two independent hash families, so a break in one does not void the report
HASH_ALGORITHMS = ("sha256", "sha3_256")

EXIT_CODES = {
    "verified": 0,
    "success": 0,
    "mismatch": 1,
    "regeneration_failed": 1,
    "failed": 1,
    "nondeterministic": 2,
    "semantic_error": 3,
    "usage": 4,
}


def exit_code(kind: str) -> int:
    return EXIT_CODES[kind]


def hash_artifact(data: bytes) -> tuple[str, str]:
    return tuple(hashlib.new(alg, data).hexdigest() for alg in HASH_ALGORITHMS)


def hash_lines(named: dict[str, bytes]) -> dict[str, list[str]]:
    """``{algorithm: ["<hex>  <name>", ...]}`` in name order."""
    out: dict[str, list[str]] = {alg: [] for alg in HASH_ALGORITHMS}
    for name in sorted(named):
        for alg, hx in zip(HASH_ALGORITHMS, hash_artifact(named[name])):
            out[alg].append(f"{hx}  {name}")
    return out


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=True) + "\n"


@dataclass
class Report:
    command: str
    kind: str  # verdict kind or success/failed
    summary: str
    descriptor_digest: str | None = None
    artifacts: dict[str, bytes] = field(default_factory=dict)
    body: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return exit_code(self.kind)

    def to_dict(self) -> dict:
        return {
            "tool": {"name": "ddclab", "version": __version__},
            "command": self.command,
            "verdict": self.kind,
            "exit_code": self.exit_code,
            "summary": self.summary,
            "descriptor_sha256": self.descriptor_digest,
            "hash_algorithms": list(HASH_ALGORITHMS),
            "hashes": hash_lines(self.artifacts),
            "details": self.body,
        }

    def structured(self) -> str:
        return canonical_json(self.to_dict())

    def text(self) -> str:
        lines = [f"ddclab {__version__} {self.command}: {self.kind}", self.summary]
        if self.descriptor_digest:
            lines.append(f"descriptor sha256 {self.descriptor_digest}")
        for alg, hl in hash_lines(self.artifacts).items():
            if hl:
                lines.append(f"{alg}:")
                lines.extend(f"  {h}" for h in hl)
        for extra in self.body.get("text", ()):
            lines.append(extra)
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        return self.structured() if fmt == "structured" else self.text()


def merge_reports(docs: list[dict]) -> dict:
    """Combine structured reports; the overall verdict is the worst exit code seen."""
    if not docs:
        raise ValueError("nothing to merge")
    worst = max(docs, key=lambda d: d.get("exit_code", 0))
    return {
        "tool": {"name": "ddclab", "version": __version__},
        "command": "report",
        "verdict": worst["verdict"],
        "exit_code": worst.get("exit_code", 0),
        "reports": sorted(docs, key=canonical_json),
    }
