"""Byte comparison of artifacts with opt-in normalization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from ..vm.archive import ARCHIVE_MAGIC, ArchiveError, strip_mtimes
from ..vm.image import IMAGE_MAGIC, OBJECT_MAGIC, ImageFormatError, section_spans

NORMALIZATIONS = {
    "none": lambda data: data,
    "strip_archive_mtimes": strip_mtimes,
}


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class CompareResult:
    equal: bool
    first_diff_offset: int | None = None
    section_attribution: str | None = None
    normalizations_applied: tuple[str, ...] = ()
    left_size: int = field(default=0, compare=False)
    right_size: int = field(default=0, compare=False)

    def to_dict(self) -> dict:
        return {
            "equal": self.equal,
            "first_diff_offset": self.first_diff_offset,
            "section": self.section_attribution,
            "normalizations": list(self.normalizations_applied),
            "sizes": [self.left_size, self.right_size],
        }


@dataclass(frozen=True)
class PairCompare:
    """Per-component comparison results (compiler image, runtime)."""

    results: dict = field(default_factory=dict)

    @property
    def equal(self) -> bool:
        return all(r.equal for r in self.results.values())

    def to_dict(self) -> dict:
        return {name: r.to_dict() for name, r in sorted(self.results.items())}


def normalize(data: bytes, normalization: Iterable[str]) -> tuple[bytes, tuple[str, ...]]:
    applied = []
    for name in normalization:
        if name not in NORMALIZATIONS:
            raise NormalizationError(f"unknown normalization {name!r}; known: {sorted(NORMALIZATIONS)}")
        if name == "none":
            continue
        try:
            data = NORMALIZATIONS[name](data)
        except ArchiveError as exc:
            raise NormalizationError(f"{name}: {exc}") from None
        applied.append(name)
    return data, tuple(applied)


def first_difference(a: bytes, b: bytes) -> int | None:
    n = min(len(a), len(b))
    if a[:n] != b[:n]:
        # binary search on prefix equality keeps this fast for large artifacts
        lo, hi = 0, n
        while hi - lo > 64:
            mid = (lo + hi) // 2
            if a[lo:mid] == b[lo:mid]:
                lo = mid
            else:
                hi = mid
        return next(i for i in range(lo, hi) if a[i] != b[i])
    if len(a) != len(b):
        return n
    return None


def section_at(data: bytes, offset: int) -> str | None:
    """Name the structural section of an image, object or archive containing ``offset``."""
    magic = bytes(data[:4])
    if offset >= len(data):
        return None
    if offset < 4:
        return "header"
    if magic in (IMAGE_MAGIC, OBJECT_MAGIC):
        try:
            spans = section_spans(data)
        except ImageFormatError:
            return None
        for name, start, end in spans:
            if start <= offset < end:
                return name
        return "trailing"
    if magic == ARCHIVE_MAGIC:
        pos = 4
        while pos + 4 <= len(data):
            nlen = int.from_bytes(data[pos : pos + 4], "little")
            name = bytes(data[pos + 4 : pos + 4 + nlen]).decode("latin-1")
            mt = pos + 4 + nlen
            if pos + 4 + nlen + 12 > len(data):
                return "archive:truncated"
            plen = int.from_bytes(data[mt + 8 : mt + 12], "little")
            end = mt + 12 + plen
            if offset < mt:
                return f"archive:{name}:name"
            if offset < mt + 8:
                return f"archive:{name}:mtime"
            if offset < end:
                return f"archive:{name}:payload"
            pos = end
        return "archive:end"
    return None


def compare_artifacts(a: bytes, b: bytes, normalization: Iterable[str] | str = ("none",)) -> CompareResult:
    """Equality of ``a`` and ``b`` after applying the same normalization to both."""
    if isinstance(normalization, str):
        normalization = (normalization,)
    normalization = tuple(normalization)
    na, applied = normalize(bytes(a), normalization)
    nb, _ = normalize(bytes(b), normalization)
    off = first_difference(na, nb)
    if off is None:
        return CompareResult(True, None, None, applied, len(na), len(nb))
    sections = {s for s in (section_at(na, off), section_at(nb, off)) if s}
    return CompareResult(False, off, "/".join(sorted(sections)) or None, applied, len(na), len(nb))
