"""Pop-up attack: malicious source present in one intermediate version only."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..selfhost.toolchain import (
    COMPILER_SOURCE,
    T,
    BootstrapLog,
    CompilerPackage,
    archive_runtime,
    bootstrap,
    self_compile,
    stabilize,
)
from ..selfhost.env import BuildEnv
from ..tcompiler.inputs import SourceTree
from .shim import Shim, ShimSpec, build_shim

_MAIN = re.compile(rb"^main \{", re.M)
POPUP_MAIN = b"\nmain {\n    return atk_main()\n}\n"


def popup_source(s_v1: SourceTree, shim: Shim) -> SourceTree:
    """s_v2: s_v1 with its entry point wrapped by the shim, in source form."""
    src = s_v1.files[COMPILER_SOURCE]
    if len(_MAIN.findall(src)) != 1:
        raise ValueError("compiler source must define main exactly once at the start of a line")
    src = _MAIN.sub(b"fn _main() {", src)
    if not src.endswith(b"\n"):
        src += b"\n"
    src += b"\n" + shim.popup_source(b"_main()") + POPUP_MAIN
    return s_v1.replace_file(COMPILER_SOURCE, src)


@dataclass
class PopupChain:
    s_v1: SourceTree
    s_v2: SourceTree
    s_v3: SourceTree
    A1: CompilerPackage
    A2: CompilerPackage
    A3: CompilerPackage
    logs: dict[str, BootstrapLog]
    shim: Shim


def build_popup_chain(
    s_v1: SourceTree | None = None,
    trusted=T,
    shim: ShimSpec | Shim | None = None,
    a1: CompilerPackage | None = None,
) -> PopupChain:
    """v1 clean -> v2 carries the attack in source -> v3 clean again.

    A1 is the bootstrap fixpoint of s_v1, A2 the fixpoint reached by
    self-compiling s_v2 from A1, and A3 = c(s_v3, A2).
    """
    if not isinstance(shim, Shim):
        shim = build_shim(shim)
    logs = {}
    if a1 is None:
        a1, logs["A1"] = bootstrap(s_v1, trusted)
    s_v1 = s_v1 or a1.source
    s_v2 = popup_source(s_v1, shim)
    a2, logs["A2"] = stabilize(a1, s_v2)
    s_v3 = SourceTree(dict(s_v1.files), s_v1.entry_point)
    env = BuildEnv()
    image, runtime = self_compile(a2, s_v3, a2.inputs, env, phase="A3")
    a3 = CompilerPackage(
        f"{a1.name}-v3", image, runtime, s_v3, a2.build_plan, a2.inputs, archive_runtime(runtime, env.clock())
    )
    return PopupChain(s_v1, s_v2, s_v3, a1, a2, a3, logs, shim)
