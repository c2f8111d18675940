"""Action-space data models."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional


class ErrorCode(str, Enum):
    """Failure classes an action can end in."""

    OVERLAP_CONFLICT = "OverlapConflict"
    FACE_OCCUPIED = "FaceOccupied"
    INVALID_FACE = "InvalidFace"
    EXCESS_CONNECTION = "ExcessConnection"
    UNKNOWN_BLOCK = "UnknownBlock"
    UNKNOWN_BLOCK_TYPE = "UnknownBlockType"
    STARTING_BLOCK_PROTECTED = "StartingBlockProtected"
    CONNECTOR_SPAN_EXCEEDED = "ConnectorSpanExceeded"
    PHASE_VIOLATION = "PhaseViolation"
    MALFORMED_ARGUMENTS = "MalformedArguments"
    # Control group
    ILLEGAL_KEY = "IllegalKey"
    UNKNOWN_ACTION = "UnknownAction"
    DUPLICATE_BINDING = "DuplicateBinding"
    UNBOUND_KEY = "UnboundKey"
    NON_POSITIVE_HOLD = "NonPositiveHold"
    NEGATIVE_TIME = "NegativeTime"


class Category(str, Enum):
    """Operator categories of the action space."""

    BUILD = "build"
    REFINE = "refine"
    ASSEMBLE = "assemble"
    CONTROL = "control"
    QUERY = "query"


@dataclass
class Action:
    """One typed request from the action space."""

    category: Category
    name: str
    arguments: Dict[str, Any] = field(default_factory=dict)
    note: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "category": self.category.value,
            "name": self.name,
            "arguments": dict(self.arguments),
        }
        if self.note is not None:
            data["note"] = self.note
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Action":
        return cls(
            category=Category(data["category"]),
            name=str(data["name"]),
            arguments=dict(data.get("arguments") or {}),
            note=data.get("note"),
        )


@dataclass
class StateDelta:
    """Ids created or removed by an action."""

    created_blocks: List[int] = field(default_factory=list)
    removed_blocks: List[int] = field(default_factory=list)
    created_connectors: List[int] = field(default_factory=list)
    removed_connectors: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict[str, List[int]]:
        return {
            "created_blocks": list(self.created_blocks),
            "removed_blocks": list(self.removed_blocks),
            "created_connectors": list(self.created_connectors),
            "removed_connectors": list(self.removed_connectors),
        }


@dataclass
class ActionResult:
    """Outcome of one action: success prose or a taxonomized failure."""

    ok: bool
    description: str
    error: Optional[ErrorCode] = None
    state_delta: StateDelta = field(default_factory=StateDelta)
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "description": self.description,
            "error": self.error.value if self.error else None,
            "state_delta": self.state_delta.to_dict(),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ActionResult":
        delta = data.get("state_delta") or {}
        return cls(
            ok=bool(data["ok"]),
            description=str(data.get("description", "")),
            error=ErrorCode(data["error"]) if data.get("error") else None,
            state_delta=StateDelta(
                created_blocks=list(delta.get("created_blocks", [])),
                removed_blocks=list(delta.get("removed_blocks", [])),
                created_connectors=list(delta.get("created_connectors", [])),
                removed_connectors=list(delta.get("removed_connectors", [])),
            ),
            warnings=list(data.get("warnings", [])),
        )
