"""Error taxonomy shared across the engine."""


class EngineError(Exception):
    """Base class for every error raised by this package."""

    code = "engine_error"


class MalformedDocument(EngineError):
    """Input is not a JSON object of the expected shape."""

    code = "malformed_document"


class SchemaViolation(EngineError):
    """Document parses as JSON but violates the rubric/scoring schema."""

    code = "schema_violation"


class CallParseError(EngineError):
    """A verifier call expression failed to parse.

    Carries the byte offset of the failure inside the call string.
    """

    code = "call_parse_error"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class CreditDomainError(EngineError):
    """A numeric credit value outside {0, 0.5, 1}."""

    code = "credit_domain_error"


class VerifierArgumentError(EngineError):
    """Invalid argument combination passed to a verifier."""

    code = "argument_error"


class RoleMismatch(EngineError):
    """Criterion reference variant incompatible with the requested role."""

    code = "role_mismatch"


class MergeConflict(EngineError):
    """The same keyword appears on both the target and predict side."""

    code = "merge_conflict"


class PairingError(EngineError):
    """Rubric/scoring pairing validation failed in strict mode."""

    code = "pairing_error"


class FormatError(EngineError):
    """Target-side time format/value pair failed to parse (rubric bug)."""

    code = "format_error"


class GroupTooSmall(EngineError):
    """Advantage computation needs at least two rollouts."""

    code = "group_too_small"


class TransportError(EngineError):
    """The generation transport failed to produce a reply."""

    code = "transport_error"


class ParseFailureAfterRetries(EngineError):
    """Scoring reply stayed unparseable after the retry budget."""

    code = "parse_failure_after_retries"


class NoMatchingTeacher(EngineError):
    """No teacher credit equals the retained median."""

    code = "no_matching_teacher"


class EmptyAuditSet(EngineError):
    """Audit metrics requested over zero records."""

    code = "empty_audit_set"


class EmptyCategory(EngineError):
    """False-positive rates requested for a category with no records."""

    code = "empty_category"
