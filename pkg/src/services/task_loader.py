"""Task config loading and validation."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from models.task import TaskConfig
from utils.config import load_config
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

TASK_KINDS = ("transport", "support", "lift")
INDICATORS = {
    "transport": ("displacement",),
    "support": ("load",),
    "lift": ("twr", "height"),
}
SUBJECTS = ("machine", "cargo")
REQUIRED_FIELDS = ("task_id", "task", "level", "prompt", "indicator", "threshold", "requires_controls")


def _number(raw: Dict[str, Any], name: str, default: Optional[float] = None) -> float:
    value = raw.get(name, default)
    if isinstance(value, bool):
        raise ConfigError(name, f"expected a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a number, got {value!r}")


def parse_task(raw: Dict[str, Any]) -> TaskConfig:
    """Validate one task document.

    Raises:
        ConfigError: a required field is missing or a value is out of range
    """
    if not isinstance(raw, dict):
        raise ConfigError("task", "task config must be a JSON object")
    for name in REQUIRED_FIELDS:
        if name not in raw:
            raise ConfigError(name, f"task config is missing required field '{name}'")

    task = raw["task"]
    if task not in TASK_KINDS:
        raise ConfigError("task", f"unknown task '{task}' (expected one of {', '.join(TASK_KINDS)})")
    indicator = raw["indicator"]
    if indicator not in INDICATORS[task]:
        raise ConfigError("indicator", f"indicator '{indicator}' does not apply to {task}")

    level = int(_number(raw, "level"))
    threshold = _number(raw, "threshold")
    duration = _number(raw, "duration", 30.0)
    if level not in (1, 2, 3):
        raise ConfigError("level", f"level must be 1, 2 or 3, got {level}")
    if duration <= 0:
        raise ConfigError("duration", "duration must be positive")

    subject = raw.get("indicator_subject", "machine")
    if subject not in SUBJECTS:
        raise ConfigError("indicator_subject", f"unknown indicator subject '{subject}'")

    protocol = raw.get("protocol", {})
    if not isinstance(protocol, dict):
        raise ConfigError("protocol", "protocol must be an object")
    if task == "support" and "gap_width" not in protocol:
        raise ConfigError("protocol.gap_width", "support tasks need protocol.gap_width")
    if subject == "cargo" and "cargo_drop" not in protocol:
        raise ConfigError("protocol.cargo_drop", "cargo-subject tasks need protocol.cargo_drop")

    return TaskConfig(
        task_id=str(raw["task_id"]),
        task=task,
        level=level,
        prompt=str(raw["prompt"]),
        indicator=indicator,
        threshold=threshold,
        requires_controls=bool(raw["requires_controls"]),
        indicator_subject=subject,
        duration=duration,
        protocol=dict(protocol),
        non_source_values=[str(v) for v in raw.get("non_source_values", [])],
    )


def load_task(ref: Union[str, Path], tasks_dir: Optional[Union[str, Path]] = None) -> TaskConfig:
    """Load a task by id (``lift_2``) from the tasks directory, or by file path.

    Raises:
        ConfigError: unknown task, unreadable file or invalid content
    """
    path = Path(ref)
    if not path.suffix:
        directory = Path(tasks_dir) if tasks_dir else Path(load_config()["tasks_dir"])
        path = directory / f"{ref}.json"
    if not path.exists():
        raise ConfigError("task", f"task config not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError("task", f"{path.name} is not valid JSON: {e}")
    task = parse_task(raw)
    logger.debug(f"Loaded task {task.task_id} from {path}")
    return task


def list_tasks(tasks_dir: Optional[Union[str, Path]] = None) -> List[str]:
    directory = Path(tasks_dir) if tasks_dir else Path(load_config()["tasks_dir"])
    return sorted(p.stem for p in directory.glob("*.json"))
