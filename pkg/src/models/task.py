"""Task configuration model."""

from dataclasses import dataclass, field
from typing import Any, Dict, List


@dataclass(frozen=True)
class TaskConfig:
    """One task level: prompt text, protocol numbers and the success rule."""

    task_id: str
    task: str  # transport | support | lift
    level: int
    prompt: str
    indicator: str  # displacement | load | twr | height
    threshold: float
    requires_controls: bool
    indicator_subject: str = "machine"  # machine | cargo
    duration: float = 30.0
    protocol: Dict[str, Any] = field(default_factory=dict)
    non_source_values: List[str] = field(default_factory=list)

    def succeeded(self, indicator: float) -> bool:
        """Success is a strict exceedance of the threshold."""
        return indicator > self.threshold
