"""Evaluation and benchmark data models."""

from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional

from utils.geometry import Vec3


@dataclass
class CostCounters:
    """Backend usage accumulated over a run."""

    input_tokens: int = 0
    output_tokens: int = 0
    llm_requests: int = 0

    def __add__(self, other: "CostCounters") -> "CostCounters":
        return CostCounters(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
            self.llm_requests + other.llm_requests,
        )


@dataclass
class Trajectory:
    """Uniformly sampled positions of tracked points."""

    sample_period: float
    times: List[float] = field(default_factory=list)
    samples: Dict[str, List[Vec3]] = field(default_factory=dict)

    def record(self, t: float, **points: Vec3) -> None:
        self.times.append(t)
        for name, point in points.items():
            self.samples.setdefault(name, []).append(point)


@dataclass
class TransportResult:
    trajectory: Trajectory
    max_displacement: float
    subject: str
    ground_wheels: List[int] = field(default_factory=list)
    no_ground_wheels: bool = False
    cargo_carried: bool = False
    closest_approach: float = 0.0
    mean_deviation: float = 0.0


@dataclass
class LiftResult:
    trajectory: Trajectory
    max_height: float
    max_speed: float = 0.0
    lateral_deviation: float = 0.0
    final_lateral_drift: float = 0.0


@dataclass
class SupportResult:
    spans: bool
    load_capacity: float
    north_contacts: List[int] = field(default_factory=list)
    south_contacts: List[int] = field(default_factory=list)
    bearing_north: float = 0.0
    bearing_south: float = 0.0
    cargo_caught: bool = False
    rest_height: float = 0.0


@dataclass
class MetricsRecord:
    """Per-run outcome: parts, success, task indicator and cost."""

    task_id: str
    level: int
    parts: int
    success: bool
    indicator: float
    cost: CostCounters = field(default_factory=CostCounters)
    sample_index: int = 0
    failure_reason: Optional[str] = None
    state_hash: str = ""
    details: Dict[str, Any] = field(default_factory=dict)

    def to_row(self) -> Dict[str, Any]:
        """Flat mapping for delimited-text reports."""
        return {
            "sample_index": self.sample_index,
            "task_id": self.task_id,
            "level": self.level,
            "parts": self.parts,
            "success": self.success,
            "indicator": self.indicator,
            "input_tokens": self.cost.input_tokens,
            "output_tokens": self.cost.output_tokens,
            "llm_requests": self.cost.llm_requests,
            "failure_reason": self.failure_reason or "",
            "state_hash": self.state_hash,
        }

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class AggregateRow:
    """One summary row over n samples of the same task."""

    task_id: str
    level: int
    n: int
    success_rate: float  # percent
    mean_parts: float
    mean_indicator: float
    mean_input_tokens: float
    mean_output_tokens: float
    mean_llm_requests: float
    failure_reasons: Dict[str, int] = field(default_factory=dict)

    def to_row(self) -> Dict[str, Any]:
        row = asdict(self)
        row["failure_reasons"] = ";".join(
            f"{k}={v}" for k, v in sorted(self.failure_reasons.items())
        )
        return row


