"""The DDC protocol: regeneration check, stages 1 and 2, comparison and diagnosis."""

from .compare import NORMALIZATIONS, CompareResult, NormalizationError, PairCompare, compare_artifacts
from .diff import DiffRegion, DiffReport, diagnose_diff
from .engine import (
    VERDICT_KINDS,
    AuditViolation,
    DeterminismResult,
    RegenResult,
    StageLog,
    Verdict,
    compare_pair,
    ddc,
    determinism_check,
    regen_check,
)
from .mutate import (
    SHIPPED_MUTATIONS,
    MutationError,
    MutationLog,
    MutationSpec,
    Transform,
    insert_inert_statements,
    mutate_source,
    normalize_whitespace,
    rename_identifiers,
    reorder_independent_toplevel,
)

__all__ = [
    "AuditViolation",
    "CompareResult",
    "DeterminismResult",
    "DiffRegion",
    "DiffReport",
    "MutationError",
    "MutationLog",
    "MutationSpec",
    "NORMALIZATIONS",
    "NormalizationError",
    "PairCompare",
    "RegenResult",
    "SHIPPED_MUTATIONS",
    "StageLog",
    "Transform",
    "VERDICT_KINDS",
    "Verdict",
    "compare_artifacts",
    "compare_pair",
    "ddc",
    "determinism_check",
    "diagnose_diff",
    "insert_inert_statements",
    "mutate_source",
    "normalize_whitespace",
    "regen_check",
    "rename_identifiers",
    "reorder_independent_toplevel",
]
