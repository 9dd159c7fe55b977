"""Named attack and defect scenarios with their expected DDC outcomes."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

from ..ddc.engine import Verdict, ddc, regen_check
from ..ddc.mutate import SHIPPED_MUTATIONS, MutationSpec, mutate_source
from ..selfhost.env import BuildEnv
from ..selfhost.toolchain import (
    T,
    CompilerPackage,
    ConvergenceError,
    archive_runtime,
    bootstrap,
    self_compile,
    shipped_source,
)
from ..tcompiler.inputs import SourceTree
from ..vm.image import validate_image
from .fixtures import FIXTURES, fixture_source
from .popup import build_popup_chain
from .shim import Shim, ShimSpec, build_shim, default_shim, multi_trigger_shim, splice_shim


@dataclass
class Subject:
    """One (binary, claimed source) pair put through regen_check and ddc."""

    label: str
    package: CompilerPackage
    expected_regen: str  # "pass" or the failing verdict kind
    expected_verdict: str
    malicious: bool = False
    honest: bool = True  # source faithfully describes the binary


@dataclass
class Scenario:
    name: str
    description: str
    subjects: list[Subject]
    sources: dict[str, SourceTree] = field(default_factory=dict)
    packages: dict[str, CompilerPackage] = field(default_factory=dict)
    # property name -> zero-argument check returning True when the property holds
    checks: dict[str, Callable[[], bool]] = field(default_factory=dict)


@dataclass
class SubjectResult:
    label: str
    regen: str
    verdict: Verdict
    expected_regen: str
    expected_verdict: str

    @property
    def ok(self) -> bool:
        return self.regen == self.expected_regen and self.verdict.kind == self.expected_verdict

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "regen": self.regen,
            "expected_regen": self.expected_regen,
            "verdict": self.verdict.kind,
            "expected_verdict": self.expected_verdict,
            "ok": self.ok,
            "detail": self.verdict.detail,
        }


@dataclass
class ScenarioResult:
    name: str
    subjects: list[SubjectResult]
    checks: dict[str, bool]

    @property
    def ok(self) -> bool:
        return all(s.ok for s in self.subjects) and all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "ok": self.ok,
            "subjects": [s.to_dict() for s in self.subjects],
            "checks": dict(sorted(self.checks.items())),
        }


def run_scenario(sc: Scenario, mutation: MutationSpec | None = None) -> ScenarioResult:
    results = []
    for sub in sc.subjects:
        regen = regen_check(sub.package)
        v = ddc(sub.package, T, mutation, regen=regen)
        results.append(SubjectResult(sub.label, "pass" if regen.passed else regen.kind, v, sub.expected_regen, sub.expected_verdict))
    return ScenarioResult(sc.name, results, {name: bool(fn()) for name, fn in sc.checks.items()})


# -- shared, deterministic building blocks (cached: every build is a pure function) -----


@functools.lru_cache(maxsize=None)
def clean_package() -> CompilerPackage:
    return bootstrap(shipped_source(), T)[0]


@functools.lru_cache(maxsize=None)
def malicious_package(spec: ShimSpec | None = None) -> CompilerPackage:
    return splice_shim(clean_package(), build_shim(spec or default_shim()))


def _has_shim(image: bytes) -> bool:
    return any(f.name == b"_main" for f in validate_image(image).functions)


# -- constructors ---------------------------------------------------------------------


def make_clean_scenario() -> Scenario:
    pkg = clean_package()
    return Scenario(
        "clean",
        "the bootstrapped fixpoint with its true source",
        [Subject("A", pkg, "pass", "verified")],
        {"s_A": pkg.source},
        {"A": pkg},
    )


def make_splice_scenario(spec: ShimSpec | None = None, name: str = "binary-splice") -> Scenario:
    clean = clean_package()
    mal = malicious_package(spec)
    return Scenario(
        name,
        "shim spliced into the distributed compiler binary; source left clean",
        [Subject("A_mal", mal, "pass", "mismatch", malicious=True, honest=False)],
        {"s_A": mal.source},
        {"A": clean, "A_mal": mal},
        {
            "source unchanged": lambda: mal.source == clean.source,
            "self-perpetuating": lambda: self_compile(mal)[0] == mal.compiler_image,
        },
    )


def make_popup_scenario() -> Scenario:
    chain = build_popup_chain(a1=clean_package())
    return Scenario(
        "popup",
        "attack lives in the source of v2 only; v3 is clean again but built by A2",
        [
            Subject("A3 vs s_v3", chain.A3, "pass", "mismatch", malicious=True, honest=False),
            Subject("A2 vs s_v2", chain.A2, "pass", "verified", malicious=True, honest=True),
        ],
        {"s_v1": chain.s_v1, "s_v2": chain.s_v2, "s_v3": chain.s_v3},
        {"A1": chain.A1, "A2": chain.A2, "A3": chain.A3},
        {
            "s_v3 equals s_v1": lambda: chain.s_v3.files == chain.s_v1.files,
            "A3 carries the shim": lambda: _has_shim(chain.A3.compiler_image),
            "A1 is clean": lambda: not _has_shim(chain.A1.compiler_image),
        },
    )


def make_fragility_scenario(
    a_mal: CompilerPackage,
    mutation: MutationSpec | None = None,
    shim: ShimSpec | Shim | None = None,
    clean: CompilerPackage | None = None,
    name: str = "fragility",
) -> Scenario:
    """Does a source mutation stop ``a_mal`` from reproducing itself?

    The expectation is predicted statically (does any compiling_self pattern
    survive in the mutated source?) and checked by actually running A_mal.
    """
    mutation = mutation or SHIPPED_MUTATIONS["whitespace"]
    if not isinstance(shim, Shim):
        shim = build_shim(shim)
    s_a = a_mal.source
    mutated = mutate_source(s_a, mutation)
    patterns = shim.spec.patterns("compiling_self")
    survives = any(p in data for p in patterns for data in mutated.files.values())

    @functools.lru_cache(maxsize=None)
    def after_mutation():
        env = BuildEnv()
        image, runtime = self_compile(a_mal, mutated, a_mal.inputs, env)
        return a_mal.with_binaries(image, runtime, archive_runtime(runtime, env.clock()))

    def halted_then_clean():
        pkg = after_mutation()
        regen_image = self_compile(pkg)[0]
        if clean is not None:
            return regen_image == clean.compiler_image
        return not _has_shim(regen_image)

    checks = {
        "unmutated source keeps the attack": lambda: self_compile(a_mal)[0] == a_mal.compiler_image,
        "propagation under mutation as predicted": lambda: _has_shim(after_mutation().compiler_image) == survives,
    }
    if not survives:
        checks["mutation yields a clean compiler that regenerates clean"] = halted_then_clean
    return Scenario(
        name,
        f"mutation {mutation} against a shim with {len(patterns)} self trigger(s); propagation expected: {survives}",
        [Subject("A_mal", a_mal, "pass", "mismatch", malicious=True, honest=False)],
        {"s_A": s_a, "mutated": mutated},
        {"A_mal": a_mal},
        checks,
    )


def _fixture_package(kind: str) -> CompilerPackage:
    """Bootstrap the fixture; a source that never stabilizes ships its first self-build."""
    src = fixture_source(kind)
    try:
        return bootstrap(src, T)[0]
    except ConvergenceError:
        image, runtime = T.build(src)
        gen0 = CompilerPackage(f"fixture-{kind}", image, runtime, src)
        env = BuildEnv()
        image, runtime = self_compile(gen0, src, None, env)
        return gen0.with_binaries(image, runtime, archive_runtime(runtime, env.clock()))


FIXTURE_EXPECTATIONS = {
    "semantic-divergence": ("pass", "mismatch"),
    "uninitialized-padding": ("nondeterministic", "nondeterministic"),
    "timestamp-in-output": ("nondeterministic", "nondeterministic"),
}


def make_defect_fixture(kind: str) -> Scenario:
    pkg = _fixture_package(kind)
    regen, verdict = FIXTURE_EXPECTATIONS[kind]
    return Scenario(
        f"defect-{kind}",
        {
            "semantic-divergence": "compiler source depends on unspecified argument evaluation order",
            "uninitialized-padding": "image emission writes bytes of never-initialised memory",
            "timestamp-in-output": "image emission embeds the build clock",
        }[kind],
        [Subject(kind, pkg, regen, verdict)],
        {"s": pkg.source},
        {kind: pkg},
    )


def make_defect_fixtures() -> list[Scenario]:
    return [make_defect_fixture(k) for k in FIXTURES]


SCENARIOS: dict[str, Callable[[], Scenario]] = {
    "clean": make_clean_scenario,
    "binary-splice": make_splice_scenario,
    "popup": make_popup_scenario,
    "fragility-single": lambda: make_fragility_scenario(
        malicious_package(default_shim()), shim=default_shim(), clean=clean_package(), name="fragility-single"
    ),
    "fragility-multi": lambda: make_fragility_scenario(
        malicious_package(multi_trigger_shim()), shim=multi_trigger_shim(), clean=clean_package(), name="fragility-multi"
    ),
    **{f"defect-{k}": functools.partial(make_defect_fixture, k) for k in FIXTURES},
}


def get_scenario(name: str) -> Scenario:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    return SCENARIOS[name]()
