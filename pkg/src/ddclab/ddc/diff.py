"""Section-aware diff diagnosis for bytecode images."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from ..vm import isa
from ..vm.image import BytecodeImage, parse_object, section_spans, validate_image

# differing runs closer than this are reported as one region
MERGE_GAP = 8


@dataclass(frozen=True)
class DiffRegion:
    section: str
    offset: int  # relative to the start of the section
    length: int
    left: bytes
    right: bytes
    function: str | None = None

    def to_dict(self) -> dict:
        return {
            "section": self.section,
            "offset": self.offset,
            "length": self.length,
            "left": self.left[:64].hex(),
            "right": self.right[:64].hex(),
            "function": self.function,
        }


@dataclass
class DiffReport:
    component: str
    diff_regions: list[DiffRegion] = field(default_factory=list)
    nearest_function: str | None = None
    hints: list[str] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.diff_regions

    def sections(self) -> list[str]:
        return sorted({r.section for r in self.diff_regions})

    def to_dict(self) -> dict:
        return {
            "component": self.component,
            "nearest_function": self.nearest_function,
            "hints": list(self.hints),
            "regions": [r.to_dict() for r in self.diff_regions],
        }


def _runs(a: bytes, b: bytes) -> list[tuple[int, int]]:
    """(offset, length) runs where a and b differ, including any length excess."""
    n = min(len(a), len(b))
    runs: list[list[int]] = []
    i = 0
    while i < n:
        if a[i] != b[i]:
            j = i
            while j < n and a[j] != b[j]:
                j += 1
            if runs and i - (runs[-1][0] + runs[-1][1]) <= MERGE_GAP:
                runs[-1][1] = j - runs[-1][0]
            else:
                runs.append([i, j - i])
            i = j
        else:
            i += 1
    if len(a) != len(b):
        excess = max(len(a), len(b)) - n
        if runs and n - (runs[-1][0] + runs[-1][1]) <= MERGE_GAP:
            runs[-1][1] = n + excess - runs[-1][0]
        else:
            runs.append([n, excess])
    return [(o, ln) for o, ln in runs]


def _function_at(img, code_offset: int) -> str | None:
    best = None
    for fn in img.functions:
        if fn.code_offset <= code_offset and (best is None or fn.code_offset >= best.code_offset):
            best = fn
    return best.name.decode("latin-1") if best else None


def _entry_at(data: bytes, rel: int) -> str | None:
    """Name of the function-table entry covering ``rel`` bytes into the functions section."""
    if rel < 4:  # the entry count
        return None
    pos = 4
    while pos + 4 <= len(data):
        n = int.from_bytes(data[pos : pos + 4], "little")
        end = pos + 4 + n + 8
        if rel < end:
            return data[pos + 4 : pos + 4 + n].decode("latin-1")
        pos = end
    return None


def _push_profile(code: bytes) -> Counter:
    try:
        return Counter(name for _, name, _ in isa.disassemble(code))
    except ValueError:
        return Counter()


def _as_image(x):
    if isinstance(x, BytecodeImage):
        return x, x.serialize()
    data = bytes(x)
    if data[:4] == b"MLOB":
        obj = parse_object(data)
        return BytecodeImage(obj.constants, obj.functions, obj.code), data
    return validate_image(data), data


def diagnose_diff(a, b, component: str = "compiler") -> DiffReport:
    """Attribute every difference between two images (or objects) to a section."""
    ia, da = _as_image(a)
    ib, db = _as_image(b)
    report = DiffReport(component)
    if da == db:
        return report
    spans_a = {name: (s, e) for name, s, e in section_spans(da)}
    spans_b = {name: (s, e) for name, s, e in section_spans(db)}
    for name in ("header", "constants", "functions", "code", "runtime_section"):
        if name not in spans_a and name not in spans_b:
            continue
        sa, ea = spans_a.get(name, (0, 0))
        sb, eb = spans_b.get(name, (0, 0))
        ba, bb = da[sa:ea], db[sb:eb]
        for off, ln in _runs(ba, bb):
            fn = None
            if name == "code":
                # skip the u32 length prefix of the code section
                at = off - 4
                if at >= 0:
                    fn = _function_at(ia if at < len(ia.code) else ib, at)
            elif name == "functions":
                fn = _entry_at(ba if off < len(ba) else bb, off)
            report.diff_regions.append(DiffRegion(name, off, ln, ba[off : off + ln], bb[off : off + ln], fn))
    code_fns = [r.function for r in report.diff_regions if r.section == "code" and r.function]
    report.nearest_function = code_fns[0] if code_fns else next(
        (r.function for r in report.diff_regions if r.function), None
    )
    report.hints = _hints(ia, ib, report)
    return report


def _hints(ia, ib, report: DiffReport) -> list[str]:
    hints = []
    names_a = [f.name for f in ia.functions]
    names_b = [f.name for f in ib.functions]
    only_a = [n.decode("latin-1") for n in names_a if n not in names_b]
    only_b = [n.decode("latin-1") for n in names_b if n not in names_a]
    if only_a:
        hints.append(f"functions only on the left: {', '.join(only_a)}")
    if only_b:
        hints.append(f"functions only on the right: {', '.join(only_b)}")
    for side, names in (("left", names_a), ("right", names_b)):
        if b"_main" in names and b"main" in names:
            hints.append(f"{side} image wraps its entry point: original main renamed to _main")
    if len(ia.constants) != len(ib.constants):
        hints.append(f"constant pool sizes differ: {len(ia.constants)} vs {len(ib.constants)}")
    else:
        changed = [i for i, (x, y) in enumerate(zip(ia.constants, ib.constants)) if x != y]
        for i in changed[:3]:
            hints.append(f"constant #{i} differs: {ia.constants[i][:40]!r} vs {ib.constants[i][:40]!r}")
        if len(changed) > 3:
            hints.append(f"{len(changed) - 3} more constants differ")
    if len(ia.code) != len(ib.code):
        common = min(len(ia.code), len(ib.code))
        if ia.code[:common] == ib.code[:common]:
            hints.append(f"code differs only by {abs(len(ia.code) - len(ib.code))} appended bytes")
    pa, pb = _push_profile(ia.code), _push_profile(ib.code)
    short_a, short_b = pa["PUSH_I8"], pb["PUSH_I8"]
    if (short_a == 0) != (short_b == 0):
        hints.append(
            "integer push selection diverges: PUSH_I8 used "
            f"{short_a}x on the left and {short_b}x on the right (short vs long encoding)"
        )
    if ia.runtime_section != ib.runtime_section:
        hints.append("embedded runtime sections differ")
    odd = [n for n in names_a + names_b if any(c < 0x20 or c > 0x7E for c in n)]
    if odd:
        hints.append(f"{len(odd)} function names contain non-printable bytes (uninitialised padding?)")
    return hints
