"""Construction state data models."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from models.action import Action, ActionResult
from models.control import ControlState
from utils.geometry import Pose, Vec3

FaceRef = Tuple[int, str]


class Phase(str, Enum):
    """Linear construction phases."""

    BUILD = "build"
    REFINE = "refine"
    ASSEMBLE = "assemble"
    FINALIZED = "finalized"

    @property
    def order(self) -> int:
        return list(Phase).index(self)


@dataclass
class PlacedBlock:
    """A block instance in a scene."""

    block_id: int
    type_id: str
    pose: Pose
    note: str = ""
    mounted_on: Optional[FaceRef] = None
    mount_face: Optional[str] = None  # own face consumed by the mounting
    flipped: bool = False
    offset: Vec3 = (0.0, 0.0, 0.0)  # accumulated translate shift


@dataclass
class Connector:
    """Brace or winch joining two faces of two blocks."""

    connector_id: int
    kind: str
    type_id: str
    endpoint_a: FaceRef
    endpoint_b: FaceRef
    note: str = ""

    def other_end(self, block_id: int) -> FaceRef:
        return self.endpoint_b if self.endpoint_a[0] == block_id else self.endpoint_a


@dataclass
class FaceOccupancy:
    """Ledger record for one face: at most one attachment plus connector slots."""

    attachment: Optional[FaceRef] = None
    connectors: List[int] = field(default_factory=list)

    def is_empty(self) -> bool:
        return self.attachment is None and not self.connectors


@dataclass
class TrajectoryEntry:
    """One (action, result) pair of the build log."""

    action: Action
    result: ActionResult


@dataclass
class Scene:
    """Live construction state: blocks, poses, ledger, connectors and controls."""

    blocks: Dict[int, PlacedBlock] = field(default_factory=dict)
    connectors: Dict[int, Connector] = field(default_factory=dict)
    face_ledger: Dict[FaceRef, FaceOccupancy] = field(default_factory=dict)
    control: ControlState = field(default_factory=ControlState)
    phase: Phase = Phase.BUILD
    trajectory: List[TrajectoryEntry] = field(default_factory=list)
    next_block_id: int = 0
    next_connector_id: int = 0

    def occupancy(self, block_id: int, face_id: str) -> FaceOccupancy:
        return self.face_ledger.get((block_id, face_id)) or FaceOccupancy()

    def children_of(self, block_id: int) -> List[int]:
        return sorted(
            b.block_id
            for b in self.blocks.values()
            if b.mounted_on is not None and b.mounted_on[0] == block_id
        )

    def subtree(self, block_id: int) -> List[int]:
        """The block and everything mounted on it, directly or transitively."""
        found = [block_id]
        queue = [block_id]
        while queue:
            current = queue.pop()
            for child in self.children_of(current):
                if child not in found:
                    found.append(child)
                    queue.append(child)
        return sorted(found)
