"""Exception hierarchy shared by every sigfuse module.

Each class carries a stable machine-readable ``code`` and the process exit
status the CLI uses when the error escapes a command.
"""

from __future__ import annotations

from typing import Optional, Sequence


class SigfuseError(Exception):
    code: str = "sigfuse_error"
    exit_code: int = 1


# -----------------------------
# Signature model / matching
# -----------------------------

class SignatureValidationError(SigfuseError):
    code = "invalid_signature"
    exit_code = 4

    def __init__(self, violations: Sequence[str], context: str = "signature"):
        self.violations = list(violations)
        joined = "; ".join(self.violations)
        super().__init__(f"{context} violates {len(self.violations)} invariant(s): {joined}")


class DimensionMismatchError(SigfuseError):
    code = "dimension_mismatch"
    exit_code = 4


class InvalidWeightsError(SigfuseError):
    code = "invalid_weights"
    exit_code = 4


class ZeroNormError(SigfuseError):
    code = "zero_norm"
    exit_code = 6


class NoComparablePatchesError(SigfuseError):
    code = "no_comparable_patches"
    exit_code = 6


class NonFiniteScoreError(SigfuseError):
    code = "non_finite_score"
    exit_code = 6


class ComponentMatchError(SigfuseError):
    """A component score failed inside match_signatures; ``component`` says which."""

    code = "component_match_failed"
    exit_code = 6

    def __init__(self, component: str, cause: SigfuseError):
        self.component = component
        self.cause = cause
        super().__init__(f"{component} component: {type(cause).__name__}: {cause}")


# -----------------------------
# Identification
# -----------------------------

class IdentificationError(SigfuseError):
    code = "identification_failed"
    exit_code = 7


# -----------------------------
# Storage
# -----------------------------

class SignatureFormatError(SigfuseError):
    code = "bad_signature_file"
    exit_code = 5

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class BadMagicError(SignatureFormatError):
    code = "bad_magic"


class UnsupportedVersionError(SignatureFormatError):
    code = "unsupported_version"


class TruncatedFileError(SignatureFormatError):
    code = "truncated_file"


class ChecksumMismatchError(SignatureFormatError):
    code = "checksum_mismatch"


class DerivedValueMismatchError(SignatureFormatError):
    code = "derived_value_mismatch"


class TrailingDataError(SignatureFormatError):
    code = "trailing_data"


class ManifestError(SigfuseError):
    code = "bad_manifest"
    exit_code = 3


class ConfigError(SigfuseError):
    code = "bad_config"
    exit_code = 3


class EvaluationError(SigfuseError):
    """Empty probe sets, unlabeled probes, open-set truth."""

    code = "evaluation_failed"
    exit_code = 9


# -----------------------------
# Statistics
# -----------------------------

class StatisticsError(SigfuseError):
    code = "statistics_failed"
    exit_code = 8


class DegenerateStatisticError(StatisticsError):
    code = "degenerate_statistic"


class MissingCriticalValueError(StatisticsError):
    code = "missing_critical_value"
