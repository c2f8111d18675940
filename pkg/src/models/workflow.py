"""Agentic workflow data models."""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from models.scene import Scene
from models.task import TaskConfig
from utils.errors import FailureReason


class EntityName(str, Enum):
    PLANNER = "Planner"
    DRAFTER = "Drafter"
    REVIEWER = "Reviewer"
    BUILDER = "Builder"
    GUIDANCE = "Guidance"
    CONTROLLER = "Controller"


@dataclass(frozen=True)
class Entity:
    """A prompt-differentiated agent role."""

    name: EntityName
    prompt: str
    turn_budget: int


class WorkflowPhase(str, Enum):
    PLAN = "plan"
    DRAFT_REVIEW = "draft_review"
    BUILD_GUIDANCE = "build_guidance"
    DONE = "done"
    FAILED = "failed"


@dataclass(frozen=True)
class Message:
    """One transcript line."""

    role: str  # system | user | assistant | tool
    entity: str
    content: str
    input_tokens: int = 0
    output_tokens: int = 0
    backend_call: bool = False


@dataclass(frozen=True)
class AgentReply:
    """A backend's answer with reported usage."""

    text: str
    input_tokens: int = 0
    output_tokens: int = 0


@dataclass
class WorkflowRun:
    """State of one Plan -> Draft/Review -> Build/Guidance run."""

    task: TaskConfig
    phase: WorkflowPhase = WorkflowPhase.PLAN
    transcript: List[Message] = field(default_factory=list)
    scene: Optional[Scene] = None
    failure_reason: Optional[FailureReason] = None
    failure_detail: str = ""
    plan: str = ""
    blueprint: str = ""
    machine_file: str = ""

    def append(self, message: Message) -> None:
        self.transcript.append(message)
