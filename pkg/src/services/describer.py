"""Natural-language projection of scenes for agent consumption."""

import logging
import re
from typing import Any, Dict, List, Mapping, Optional, Sequence, Set

import numpy as np

from models.action import ErrorCode
from models.scene import PlacedBlock, Scene
from services.catalog_loader import fmt_number
from services.evaluator import Evaluator
from services.scene_builder import MOUNT_FACE, SceneBuilder, format_float
from utils.geometry import compass_label

logger = logging.getLogger(__name__)

POSITION_DIGITS = 3
VERTICAL_WORDS = {"top": "up", "bottom": "down"}
_BLOCK_LINE = re.compile(r"^#(\d+) .*? at \((-?[\d.]+), (-?[\d.]+), (-?[\d.]+)\), ")


class _Context(dict):
    """format_map context that leaves unknown placeholders visible."""

    def __missing__(self, key: str) -> str:
        return "{" + key + "}"


def fmt_position(value: float) -> str:
    return format_float(value, POSITION_DIGITS)


def direction_text(vector: Optional[Sequence[float]]) -> str:
    """Compass word (up/down for vertical) or a 3-decimal vector."""
    if vector is None:
        return "nowhere"
    label = compass_label(vector)
    if label is not None:
        return VERTICAL_WORDS.get(label, label)
    return "[" + ", ".join(fmt_position(c) for c in vector) + "]"


class Describer:
    """Deterministic prose for summaries, block details, controls and errors."""

    def __init__(
        self,
        builder: SceneBuilder,
        templates: Dict[str, Dict[str, str]],
        evaluator: Optional[Evaluator] = None,
    ):
        self.builder = builder
        self.catalog = builder.catalog
        self.templates = templates
        self.t = templates["describe"]
        self.evaluator = evaluator or Evaluator(builder)

    # Errors and results

    def error_message(self, code: ErrorCode, context: Optional[Mapping[str, Any]] = None) -> str:
        """Fill the fixed template of an error code."""
        return self.templates["errors"][ErrorCode(code).value].format_map(_Context(context or {}))

    def result_text(self, key: str, /, **values: Any) -> str:
        return self.templates["results"][key].format_map(_Context(values))

    # Shared fragments

    def _note(self, note: str) -> str:
        return f' "{note}"' if note else ""

    def _xyz(self, point: Sequence[float], prefix: str = "") -> Dict[str, str]:
        return {f"{prefix}{axis}": fmt_position(v) for axis, v in zip("xyz", point)}

    def orientation_text(self, block: PlacedBlock) -> str:
        up = compass_label(block.pose.rotate((0.0, 0.0, 1.0)))
        north = compass_label(block.pose.rotate((0.0, 1.0, 0.0)))
        if up is not None and north is not None:
            return self.t["orientation_aligned"].format(
                up=VERTICAL_WORDS.get(up, up), north=VERTICAL_WORDS.get(north, north)
            )
        w, qx, qy, qz = (fmt_position(c) for c in block.pose.orientation)
        return self.t["orientation_quat"].format(w=w, qx=qx, qy=qy, qz=qz)

    def function_phrase(self, block: PlacedBlock, heated: Set[int]) -> str:
        spec = self.builder.spec(block)
        if spec.is_wheel:
            direction = self.builder.roll_direction(block)
            if direction is None:
                return self.t["fn_wheel_flat"]
            return self.t["fn_wheel"].format(direction=direction_text(direction))
        if spec.is_cannon:
            key = "fn_cannon_steam" if block.block_id in heated else "fn_cannon"
            return self.t[key].format(direction=direction_text(self.builder.functional_axis(block)))
        if spec.is_heater:
            centers = self.builder.heat_centers(block)
            if centers:
                return self.t["fn_torch"].format(**self._xyz(centers[0]))
        return ""

    def face_label(self, scene: Scene, block_id: int, face_id: str) -> str:
        block = scene.blocks.get(block_id)
        if block is None or face_id == MOUNT_FACE:
            return face_id
        return self.builder.face_label(block, face_id)

    # Queries

    def machine_summary(self, scene: Scene) -> str:
        """One line per block (ids in ascending order), then connectors and controls."""
        heated = self.evaluator.heated_cannons(scene)
        lines = [
            self.t["summary_header"].format(
                count=len(scene.blocks),
                connectors=len(scene.connectors),
                phase=scene.phase.value,
                mass=fmt_number(round(self.evaluator.total_mass(scene), 9)),
            )
        ]
        for block in sorted(scene.blocks.values(), key=lambda b: b.block_id):
            if block.mounted_on is not None:
                parent, face = block.mounted_on
                mount = self.t["summary_mount"].format(
                    parent=parent, face=self.face_label(scene, parent, face)
                )
            else:
                mount = self.t["summary_root"]
            lines.append(
                self.t["summary_block"].format(
                    block=block.block_id,
                    type_id=block.type_id,
                    note=self._note(block.note),
                    orientation=self.orientation_text(block),
                    mount=mount,
                    function=self.function_phrase(block, heated),
                    **self._xyz(block.pose.position),
                )
            )
        if scene.connectors:
            for connector in sorted(scene.connectors.values(), key=lambda c: c.connector_id):
                (a, face_a), (b, face_b) = connector.endpoint_a, connector.endpoint_b
                lines.append(
                    self.t["summary_connector"].format(
                        connector=connector.connector_id,
                        kind=connector.kind,
                        note=self._note(connector.note),
                        a=a,
                        face_a=self.face_label(scene, a, face_a),
                        b=b,
                        face_b=self.face_label(scene, b, face_b),
                        span=fmt_position(self.builder.connector_span(scene, connector)),
                    )
                )
        else:
            lines.append(self.t["summary_no_connectors"])
        if scene.control.is_empty():
            lines.append(self.t["summary_no_controls"])
        else:
            lines.append(
                self.t["summary_controls"].format(
                    bindings=len(scene.control.bindings), entries=len(scene.control.sequence)
                )
            )
        return "\n".join(lines)

    def _face_status(self, scene: Scene, block: PlacedBlock, face_id: str) -> str:
        occupancy = scene.occupancy(block.block_id, face_id)
        parts = []
        if occupancy.attachment is not None:
            partner, partner_face = occupancy.attachment
            parts.append(
                self.t["detail_face_attachment"].format(
                    partner=partner, partner_face=self.face_label(scene, partner, partner_face)
                )
            )
        for connector_id in occupancy.connectors:
            connector = scene.connectors[connector_id]
            partner, partner_face = connector.other_end(block.block_id)
            parts.append(
                self.t["detail_face_connector"].format(
                    connector=connector_id,
                    kind=connector.kind,
                    partner=partner,
                    partner_face=self.face_label(scene, partner, partner_face),
                )
            )
        if not parts:
            return self.t["detail_face_free"]
        if occupancy.attachment is None and not self.builder.face_has_headroom(
            scene, block.block_id, face_id
        ):
            parts.append(self.t["detail_face_full"])
        return "; ".join(parts)

    def block_detail(self, scene: Scene, block_ref: Any) -> str:
        """World pose, face statuses and functional facts of one block.

        Raises:
            UnknownBlockError: the reference resolves to no block
        """
        block = self.builder.resolve_block(scene, block_ref)
        spec = self.builder.spec(block)
        lines = [
            self.t["detail_header"].format(
                block=block.block_id,
                type_id=block.type_id,
                note=self._note(block.note),
                orientation=self.orientation_text(block),
                **self._xyz(block.pose.position),
            )
        ]
        if block.mounted_on is not None:
            parent, face = block.mounted_on
            offset = ""
            if any(abs(c) > 0 for c in block.offset):
                dx, dy, dz = (fmt_position(c) for c in block.offset)
                offset = self.t["detail_offset"].format(dx=dx, dy=dy, dz=dz)
            lines.append(
                self.t["detail_mount"].format(
                    parent=parent, face=self.face_label(scene, parent, face), offset=offset
                )
            )
        else:
            lines.append(self.t["detail_root"])

        attachable = [f for f in spec.faces if f.attachable]
        if not attachable:
            lines.append(self.t["detail_no_faces"])
        else:
            ordered = sorted(
                attachable, key=lambda f: self.builder.label_sort_key(block, f.face_id)
            )
            for face in ordered:
                lines.append(
                    self.t["detail_face"].format(
                        label=self.builder.face_label(block, face.face_id),
                        status=self._face_status(scene, block, face.face_id),
                    )
                )
            free = [self.builder.face_label(block, f) for f in self.builder.free_face_ids(scene, block)]
            lines.append(
                self.t["detail_free_count"].format(
                    count=len(free), faces=", ".join(free) or self.t["none"]
                )
            )

        lines.extend(self._functional_facts(scene, block))
        if block.flipped:
            lines.append(self.t["detail_flipped"])
        bindings = sorted(
            f"{b.key} -> {b.action}" for b in scene.control.bindings if b.block_id == block.block_id
        )
        if bindings:
            lines.append(self.t["detail_bindings"].format(bindings=", ".join(bindings)))
        return "\n".join(lines)

    def _functional_facts(self, scene: Scene, block: PlacedBlock) -> List[str]:
        spec = self.builder.spec(block)
        facts = []
        if spec.is_wheel:
            axis = direction_text(self.builder.wheel_axle(block))
            direction = self.builder.roll_direction(block)
            if direction is None:
                facts.append(self.t["detail_wheel_flat"].format(axis=axis))
            else:
                facts.append(
                    self.t["detail_wheel"].format(axis=axis, direction=direction_text(direction))
                )
        if spec.is_cannon:
            inlet, outlet = self.builder.cannon_ports(block)
            facts.append(
                self.t["detail_cannon"].format(
                    direction=direction_text(self.builder.functional_axis(block)),
                    **self._xyz(inlet, "i"),
                    **self._xyz(outlet, "o"),
                )
            )
            if block.block_id in self.evaluator.heated_cannons(scene):
                facts.append(
                    self.t["detail_cannon_steam"].format(
                        multiplier=fmt_number(spec.physical.steam_multiplier)
                    )
                )
            else:
                facts.append(self.t["detail_cannon_water"])
        if spec.is_heater:
            for center in self.builder.heat_centers(block):
                facts.append(
                    self.t["detail_torch"].format(
                        radius=fmt_number(spec.physical.heat_radius), **self._xyz(center)
                    )
                )
        return facts

    def free_faces_text(self, scene: Scene, block_ref: Any) -> str:
        block = self.builder.resolve_block(scene, block_ref)
        faces = self.builder.free_faces(scene, block.block_id)
        return self.t["free_faces"].format(
            block=block.block_id, faces=", ".join(faces) or self.t["none"]
        )

    def control_map(self, scene: Scene) -> str:
        """Function-to-key mappings for every control-enabled block."""
        lines = []
        for block in sorted(scene.blocks.values(), key=lambda b: b.block_id):
            actions = self.builder.spec(block).control_actions
            if not actions:
                continue
            mappings = []
            for action in actions:
                keys = sorted(
                    b.key
                    for b in scene.control.bindings
                    if b.block_id == block.block_id and b.action == action
                )
                mappings.append(
                    self.t["control_map_mapping"].format(
                        action=action, keys=", ".join(keys) or self.t["control_map_unbound"]
                    )
                )
            lines.append(
                self.t["control_map_block"].format(
                    block=block.block_id,
                    type_id=block.type_id,
                    note=self._note(block.note),
                    mappings="; ".join(mappings),
                )
            )
        return "\n".join(lines) if lines else self.t["control_map_empty"]

    def functional_poses(self, scene: Scene) -> str:
        """Function-to-pose mapping: wheel axles, cannon ports, torch heat centres."""
        heated = self.evaluator.heated_cannons(scene)
        lines = []
        for block in sorted(scene.blocks.values(), key=lambda b: b.block_id):
            spec = self.builder.spec(block)
            if spec.is_wheel:
                lines.append(
                    self.t["pose_wheel"].format(
                        block=block.block_id,
                        type_id=block.type_id,
                        axis=direction_text(self.builder.wheel_axle(block)),
                        direction=direction_text(self.builder.roll_direction(block)),
                        **self._xyz(block.pose.position),
                    )
                )
            elif spec.is_cannon:
                inlet, outlet = self.builder.cannon_ports(block)
                lines.append(
                    self.t["pose_cannon"].format(
                        block=block.block_id,
                        type_id=block.type_id,
                        direction=direction_text(self.builder.functional_axis(block)),
                        mode="steam" if block.block_id in heated else "water",
                        **self._xyz(inlet, "i"),
                        **self._xyz(outlet, "o"),
                    )
                )
            elif spec.is_heater:
                for center in self.builder.heat_centers(block):
                    lines.append(
                        self.t["pose_torch"].format(
                            block=block.block_id,
                            type_id=block.type_id,
                            radius=fmt_number(spec.physical.heat_radius),
                            **self._xyz(center),
                        )
                    )
        return "\n".join(lines) if lines else self.t["pose_none"]


def parse_positions(summary: str) -> Dict[int, np.ndarray]:
    """Block positions read back from a machine summary."""
    positions = {}
    for line in summary.splitlines():
        match = _BLOCK_LINE.match(line)
        if match:
            positions[int(match.group(1))] = np.array([float(match.group(i)) for i in (2, 3, 4)])
    return positions
