"""Key bindings, the timed control sequence, and the Controller document."""

import bisect
import json
import logging
from typing import Any, Dict, List, Set, Tuple

from models.control import ControlSequenceEntry, ControlState, KeyBinding
from models.scene import Scene
from services.scene_builder import SceneBuilder
from utils.config import get_legal_keys
from utils.errors import (
    DuplicateBindingError,
    FormatViolation,
    IllegalKeyError,
    MalformedArgumentsError,
    NegativeTimeError,
    NonPositiveHoldError,
    UnboundKeyError,
    UnknownActionError,
)

logger = logging.getLogger(__name__)

# Unity KeyCode values used by the machine-file exporter
UNITY_KEY_CODES: Dict[str, int] = {
    "UpArrow": 273,
    "DownArrow": 274,
    "RightArrow": 275,
    "LeftArrow": 276,
    **{f"Alpha{i}": 48 + i for i in range(10)},
    **{f"Keypad{i}": 256 + i for i in range(10)},
}


def strip_markdown_code_blocks(text: str) -> str:
    """Strip markdown code fences from model output.

    Args:
        text: Raw text that may contain markdown code blocks

    Returns:
        Cleaned text with markdown code blocks removed
    """
    text = text.strip()
    if "```" in text and not text.startswith("```"):
        # Keep only the first fenced block when prose surrounds it
        text = text[text.index("```") :]
        closing = text.find("```", 3)
        if closing != -1:
            text = text[: closing + 3]
    if text.startswith("```json"):
        text = text[7:]  # Remove ```json
    elif text.startswith("```"):
        text = text[3:]  # Remove ```
    if text.endswith("```"):
        text = text[:-3]  # Remove ```
    return text.strip()


def _number(value: Any, field_name: str, action: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedArgumentsError(
            {"action": action, "reason": f"{field_name} must be a number"}
        )
    return float(value)


class ControlService:
    """Validates and applies control operations against a scene's ControlState."""

    def __init__(self, builder: SceneBuilder, templates: Dict[str, Dict[str, str]]):
        self.builder = builder
        self.templates = templates
        self.legal_keys = get_legal_keys()

    def bind_key(self, scene: Scene, key: Any, action: Any, block_ref: Any) -> KeyBinding:
        """Bind a legal key to a control action of a block. Many-to-many is allowed."""
        if not isinstance(key, str) or key not in self.legal_keys:
            raise IllegalKeyError({"key": key, "legal": ", ".join(self.legal_keys)})
        block = self.builder.resolve_block(scene, block_ref)
        spec = self.builder.spec(block)
        if action not in spec.control_actions:
            raise UnknownActionError(
                {
                    "block": block.block_id,
                    "type_id": block.type_id,
                    "action": action,
                    "available": ", ".join(spec.control_actions) or "none",
                }
            )
        binding = KeyBinding(key, action, block.block_id)
        if binding in scene.control.bindings:
            raise DuplicateBindingError(
                {"key": key, "action": action, "block": block.block_id}
            )
        scene.control.bindings.append(binding)
        logger.debug(f"Bound {key} -> {action} on block {block.block_id}")
        return binding

    def validate_entry(
        self, state: ControlState, time: Any, key: Any, hold_for: Any, motion_note: Any = ""
    ) -> ControlSequenceEntry:
        t = _number(time, "time", "add_control_sequence")
        hold = _number(hold_for, "hold_for", "add_control_sequence")
        if t < 0:
            raise NegativeTimeError({"time": t})
        if hold <= 0:
            raise NonPositiveHoldError({"hold_for": hold})
        if not isinstance(key, str) or key not in {b.key for b in state.bindings}:
            raise UnboundKeyError({"key": key})
        return ControlSequenceEntry(t, key, hold, str(motion_note or ""))

    def add_control_sequence(
        self, state: ControlState, time: Any, key: Any, hold_for: Any, motion_note: Any = ""
    ) -> Tuple[ControlSequenceEntry, List[str]]:
        """Insert an entry keeping ascending time order; overlaps are permitted.

        Returns:
            The entry and any warnings (entries at or past the window are inert)
        """
        entry = self.validate_entry(state, time, key, hold_for, motion_note)
        times = [e.time for e in state.sequence]
        state.sequence.insert(bisect.bisect_right(times, entry.time), entry)
        warnings = []
        if entry.time >= state.window:
            warnings.append(
                self.templates["results"]["beyond_window"].format(
                    time=f"{entry.time:g}", window=f"{state.window:g}"
                )
            )
            logger.warning(warnings[-1])
        return entry, warnings

    @staticmethod
    def effective_intervals(state: ControlState) -> List[Tuple[float, float, str]]:
        """Entry intervals clipped to the window; inert entries are dropped."""
        return [
            (e.time, min(e.end, state.window), e.key)
            for e in state.sequence
            if e.time < state.window
        ]

    @staticmethod
    def active_actions_at(state: ControlState, t: float) -> Set[Tuple[int, str]]:
        """(block_id, action) pairs active at time t: time <= t < time + hold_for, clipped."""
        if t < 0:
            raise ValueError("t must be >= 0")
        if t >= state.window:
            return set()
        keys = {
            e.key for e in state.sequence if e.time <= t < min(e.end, state.window)
        }
        return {(b.block_id, b.action) for b in state.bindings if b.key in keys}

    @staticmethod
    def breakpoints(state: ControlState) -> List[float]:
        """Times at which the active set may change."""
        points = set()
        for start, end, _ in ControlService.effective_intervals(state):
            points.update((start, end))
        return sorted(points)

    def review_control_config(self, state: ControlState) -> str:
        """Deterministic prose listing bindings and sequence."""
        templates = self.templates["describe"]
        if state.is_empty():
            return templates["review_empty"]
        lines = [
            templates["review_header"].format(
                bindings=len(state.bindings),
                entries=len(state.sequence),
                window=f"{state.window:g}",
            )
        ]
        for binding in sorted(state.bindings, key=lambda b: (b.key, b.block_id, b.action)):
            lines.append(
                templates["review_binding"].format(
                    key=binding.key, action=binding.action, block=binding.block_id
                )
            )
        lines.extend(self.narrate_sequence(state))
        return "\n".join(lines)

    def narrate_sequence(self, state: ControlState) -> List[str]:
        templates = self.templates["describe"]
        if not state.sequence:
            return [templates["sequence_empty"]]
        lines = []
        for entry in state.sequence:
            actions = sorted(
                f"{b.action} on block {b.block_id}"
                for b in state.bindings
                if b.key == entry.key
            )
            lines.append(
                templates["sequence_entry"].format(
                    time=f"{entry.time:g}",
                    key=entry.key,
                    hold_for=f"{entry.hold_for:g}",
                    actions=", ".join(actions) or "nothing bound",
                    motion=f" ({entry.motion_note})" if entry.motion_note else "",
                    inert=templates["sequence_inert"].format(window=f"{state.window:g}")
                    if entry.inert
                    else "",
                )
            )
        return lines

    def parse_document(self, text: str) -> Dict[str, Any]:
        """Decode the Controller's fenced JSON deliverable."""
        try:
            document = json.loads(strip_markdown_code_blocks(text))
        except json.JSONDecodeError as e:
            raise FormatViolation(f"controller output is not valid JSON: {e}")
        if not isinstance(document, dict):
            raise FormatViolation("controller output must be a JSON object")
        for field_name in ("control_config", "control_sequence"):
            if not isinstance(document.get(field_name), list):
                raise FormatViolation(f"controller output misses the {field_name} list")
        return document

    def install_document(self, scene: Scene, document: Dict[str, Any]) -> List[str]:
        """Replace the scene's controls with the document's, all-or-nothing.

        Raises:
            ActionError: first invalid binding or entry (IllegalKey, UnboundKey, ...)
        """
        staged = Scene(blocks=scene.blocks, control=ControlState(window=scene.control.window))
        warnings: List[str] = []
        for item in document.get("control_config", []):
            if not isinstance(item, dict):
                raise MalformedArgumentsError(
                    {"action": "control_config", "reason": "entries must be objects"}
                )
            try:
                self.bind_key(staged, item.get("key"), item.get("action"), item.get("block_id"))
            except DuplicateBindingError:
                # Repeated rows in a document collapse to one binding
                continue
        for item in document.get("control_sequence", []):
            if not isinstance(item, dict):
                raise MalformedArgumentsError(
                    {"action": "control_sequence", "reason": "entries must be objects"}
                )
            _, entry_warnings = self.add_control_sequence(
                staged.control,
                item.get("time"),
                item.get("key"),
                item.get("hold_for"),
                item.get("motion_action", ""),
            )
            warnings.extend(entry_warnings)
        scene.control = staged.control
        logger.info(
            f"Installed controls: {len(scene.control.bindings)} bindings, "
            f"{len(scene.control.sequence)} entries"
        )
        return warnings

    def install_text(self, scene: Scene, text: str) -> List[str]:
        document = self.parse_document(text)
        return self.install_document(scene, document)
