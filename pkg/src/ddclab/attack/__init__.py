"""Trusting-trust attacks and defect fixtures against the MiniLang toolchain."""

from .fixtures import FIXTURES, fixture_source
from .popup import PopupChain, build_popup_chain, popup_source
from .scenarios import (
    SCENARIOS,
    Scenario,
    ScenarioResult,
    Subject,
    clean_package,
    get_scenario,
    make_defect_fixtures,
    make_fragility_scenario,
    malicious_package,
    run_scenario,
)
from .shim import (
    DEFAULT_MASTER,
    LOGIN_PATTERN,
    PLACEHOLDER,
    FixpointError,
    PayloadSpec,
    Shim,
    ShimError,
    ShimSpec,
    TriggerSpec,
    backdoor_image,
    build_shim,
    default_shim,
    fixpoint_payload,
    login_source,
    multi_trigger_shim,
    splice_image,
    splice_shim,
)

__all__ = [
    "DEFAULT_MASTER",
    "FIXTURES",
    "FixpointError",
    "LOGIN_PATTERN",
    "PLACEHOLDER",
    "PayloadSpec",
    "PopupChain",
    "SCENARIOS",
    "Scenario",
    "ScenarioResult",
    "Shim",
    "ShimError",
    "ShimSpec",
    "Subject",
    "login_source",
    "TriggerSpec",
    "backdoor_image",
    "build_popup_chain",
    "build_shim",
    "clean_package",
    "default_shim",
    "fixpoint_payload",
    "fixture_source",
    "get_scenario",
    "make_defect_fixtures",
    "make_fragility_scenario",
    "malicious_package",
    "multi_trigger_shim",
    "popup_source",
    "run_scenario",
    "splice_image",
    "splice_shim",
]
