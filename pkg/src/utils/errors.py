"""Exception hierarchy for buildyard."""

from enum import Enum
from typing import Any, Dict, Optional

from models.action import ErrorCode


class BuildyardError(Exception):
    """Base class for all buildyard errors."""

    pass


# Catalog


class CatalogError(BuildyardError):
    """Raised when the block catalog cannot be loaded."""

    pass


class ParseError(CatalogError):
    """Raised when a catalog document is not well-formed."""

    pass


class CatalogValidationError(CatalogError):
    """Raised when a catalog entry breaks an invariant."""

    def __init__(self, type_id: str, field_name: str, message: str):
        self.type_id = type_id
        self.field_name = field_name
        super().__init__(f"{type_id}.{field_name}: {message}")


# Actions


class ActionError(BuildyardError):
    """An action rejected by the engine.

    The code selects the prose template, the context fills it.
    """

    code: ErrorCode = ErrorCode.MALFORMED_ARGUMENTS

    def __init__(self, context: Optional[Dict[str, Any]] = None, code: Optional[ErrorCode] = None):
        if code is not None:
            self.code = code
        self.context = dict(context or {})
        super().__init__(f"{self.code.value}: {self.context}")


class OverlapConflictError(ActionError):
    code = ErrorCode.OVERLAP_CONFLICT


class FaceOccupiedError(ActionError):
    code = ErrorCode.FACE_OCCUPIED


class InvalidFaceError(ActionError):
    code = ErrorCode.INVALID_FACE


class ExcessConnectionError(ActionError):
    code = ErrorCode.EXCESS_CONNECTION


class UnknownBlockError(ActionError):
    code = ErrorCode.UNKNOWN_BLOCK


class UnknownBlockTypeError(ActionError):
    code = ErrorCode.UNKNOWN_BLOCK_TYPE


class StartingBlockProtectedError(ActionError):
    code = ErrorCode.STARTING_BLOCK_PROTECTED


class ConnectorSpanExceededError(ActionError):
    code = ErrorCode.CONNECTOR_SPAN_EXCEEDED


class PhaseViolationError(ActionError):
    code = ErrorCode.PHASE_VIOLATION


class MalformedArgumentsError(ActionError):
    code = ErrorCode.MALFORMED_ARGUMENTS


class IllegalKeyError(ActionError):
    code = ErrorCode.ILLEGAL_KEY


class UnknownActionError(ActionError):
    code = ErrorCode.UNKNOWN_ACTION


class DuplicateBindingError(ActionError):
    code = ErrorCode.DUPLICATE_BINDING


class UnboundKeyError(ActionError):
    code = ErrorCode.UNBOUND_KEY


class NonPositiveHoldError(ActionError):
    code = ErrorCode.NON_POSITIVE_HOLD


class NegativeTimeError(ActionError):
    code = ErrorCode.NEGATIVE_TIME


# Evaluation


class EvaluationError(BuildyardError):
    """Raised when an evaluator cannot produce a result."""

    pass


class NoControlsError(EvaluationError):
    """Raised when a motion task has no usable control configuration."""

    pass


class EmptyInputError(EvaluationError):
    """Raised when aggregation receives no records."""

    pass


# Workflow


class FailureReason(str, Enum):
    """Closed set of reasons a workflow run can fail."""

    FORMAT = "format"
    BUDGET = "budget"
    REJECTION = "rejection"
    BACKEND = "backend"


class WorkflowError(BuildyardError):
    """Base class for errors that end a workflow run."""

    reason: FailureReason = FailureReason.FORMAT


class FormatViolation(WorkflowError):
    reason = FailureReason.FORMAT


class MalformedToolCall(WorkflowError):
    reason = FailureReason.FORMAT


class LoopBudgetExceeded(WorkflowError):
    reason = FailureReason.BUDGET


class DraftRejected(WorkflowError):
    reason = FailureReason.REJECTION


class BackendError(WorkflowError):
    reason = FailureReason.BACKEND


# Interface


class InterfaceError(BuildyardError):
    """Base class for I/O and protocol errors."""

    pass


class CatalogMismatch(InterfaceError):
    """Raised when a scene document was written against another catalog."""

    pass


class UnfinalizedScene(InterfaceError):
    """Raised when exporting a machine file from a scene still under construction."""

    pass


class UnsoundScene(InterfaceError):
    """Raised when a scene to be exported breaks a geometric or ledger invariant."""

    pass


class ProtocolError(InterfaceError):
    """Raised for tool-server requests or scene documents that cannot be decoded."""

    pass


class ConfigError(InterfaceError):
    """Raised when a task config is missing a field or holds a bad value."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")
