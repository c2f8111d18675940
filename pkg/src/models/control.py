"""Control configuration data models."""

from dataclasses import dataclass, field
from typing import List

CONTROL_WINDOW = 30.0


@dataclass(frozen=True)
class KeyBinding:
    """One key driving one control action of one block."""

    key: str
    action: str
    block_id: int


@dataclass(frozen=True)
class ControlSequenceEntry:
    """Press `key` at `time` and hold it for `hold_for` seconds."""

    time: float
    key: str
    hold_for: float
    motion_note: str = ""

    @property
    def end(self) -> float:
        return self.time + self.hold_for

    @property
    def inert(self) -> bool:
        return self.time >= CONTROL_WINDOW


@dataclass
class ControlState:
    """Bindings plus the time-sorted open-loop sequence."""

    bindings: List[KeyBinding] = field(default_factory=list)
    sequence: List[ControlSequenceEntry] = field(default_factory=list)
    window: float = CONTROL_WINDOW

    def is_empty(self) -> bool:
        return not self.bindings and not self.sequence

    def bound_keys(self) -> List[str]:
        return sorted({b.key for b in self.bindings})
