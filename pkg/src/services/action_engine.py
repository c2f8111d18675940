"""The validated action space.

Every request is an Action (category, name, arguments). `apply` dispatches it
to the named operation, converts engine errors into failing ActionResults and
appends the (action, result) pair to the scene's trajectory log. A failing
action never changes the scene.
"""

import copy
import logging
import threading
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from models.action import Action, ActionResult, Category, StateDelta
from models.catalog import Catalog
from models.scene import Connector, Phase, PlacedBlock, Scene, TrajectoryEntry
from services.catalog_loader import block_spec, describe_block_type, fmt_number, load_templates
from services.control_service import ControlService
from services.describer import Describer, fmt_position
from services.evaluator import Evaluator
from services.scene_builder import STARTING_BLOCK_ID, SceneBuilder
from utils.config import load_config
from utils.errors import (
    ActionError,
    ConnectorSpanExceededError,
    ExcessConnectionError,
    FaceOccupiedError,
    FormatViolation,
    InvalidFaceError,
    MalformedArgumentsError,
    OverlapConflictError,
    PhaseViolationError,
    StartingBlockProtectedError,
)
from utils.geometry import Pose, rotate_about, translate

logger = logging.getLogger(__name__)

# Argument kinds: ref (block id or note), str, number, vec3, bool, document
REQUIRED = True
OPTIONAL = False

OPERATIONS: Dict[str, Tuple[Category, Dict[str, Tuple[str, bool]]]] = {
    # Build
    "start": (
        Category.BUILD,
        {"init_shift": ("vec3", OPTIONAL), "init_rotation": ("vec3", OPTIONAL), "note": ("str", OPTIONAL)},
    ),
    "attach_block_to": (
        Category.BUILD,
        {
            "base_block": ("ref", REQUIRED),
            "face": ("str", REQUIRED),
            "new_block": ("str", REQUIRED),
            "note": ("str", OPTIONAL),
            "pointing": ("str", OPTIONAL),
        },
    ),
    "connect_blocks": (
        Category.BUILD,
        {
            "a": ("ref", REQUIRED),
            "face_a": ("str", REQUIRED),
            "b": ("ref", REQUIRED),
            "face_b": ("str", REQUIRED),
            "connector": ("str", REQUIRED),
            "note": ("str", OPTIONAL),
        },
    ),
    "remove_block": (Category.BUILD, {"block": ("ref", REQUIRED), "cascade": ("bool", OPTIONAL)}),
    "reset": (Category.BUILD, {}),
    "advance_phase": (Category.BUILD, {"target": ("str", OPTIONAL)}),
    # Refine
    "twist_block": (Category.REFINE, {"block": ("ref", REQUIRED), "angle": ("number", REQUIRED)}),
    "translate_block": (Category.REFINE, {"block": ("ref", REQUIRED), "shift": ("vec3", REQUIRED)}),
    "flip_block": (Category.REFINE, {"block": ("ref", REQUIRED)}),
    # Assemble
    "merge_substructure": (
        Category.ASSEMBLE,
        {
            "name": ("str", REQUIRED),
            "base_block": ("ref", REQUIRED),
            "base_face": ("str", REQUIRED),
            "anchor_block": ("ref", REQUIRED),
            "anchor_face": ("str", REQUIRED),
        },
    ),
    # Control
    "bind_key": (
        Category.CONTROL,
        {"key": ("str", REQUIRED), "action": ("str", REQUIRED), "block": ("ref", REQUIRED)},
    ),
    "add_control_sequence": (
        Category.CONTROL,
        {
            "time": ("number", REQUIRED),
            "key": ("str", REQUIRED),
            "hold_for": ("number", REQUIRED),
            "motion_note": ("str", OPTIONAL),
        },
    ),
    "review_control_config": (Category.CONTROL, {}),
    "install_controls": (Category.CONTROL, {"document": ("document", REQUIRED)}),
    # Query
    "get_machine_summary": (Category.QUERY, {}),
    "get_block_detail": (Category.QUERY, {"block": ("ref", REQUIRED)}),
    "get_control_map": (Category.QUERY, {}),
    "get_control_sequence": (Category.QUERY, {}),
    "get_functional_poses": (Category.QUERY, {}),
    "list_free_faces": (Category.QUERY, {"block": ("ref", REQUIRED)}),
    "describe_block_type": (Category.QUERY, {"type_id": ("str", REQUIRED)}),
}

ATTACH_PHASES = (Phase.BUILD, Phase.ASSEMBLE)
EDIT_PHASES = (Phase.BUILD, Phase.REFINE, Phase.ASSEMBLE)


def category_of(name: str) -> Optional[Category]:
    entry = OPERATIONS.get(name)
    return entry[0] if entry else None


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and np.isfinite(value)


def _kind_ok(kind: str, value: Any) -> bool:
    if kind == "ref":
        return (isinstance(value, int) and not isinstance(value, bool)) or isinstance(value, str)
    if kind == "str":
        return isinstance(value, str)
    if kind == "number":
        return _is_number(value)
    if kind == "vec3":
        return isinstance(value, (list, tuple)) and len(value) == 3 and all(_is_number(v) for v in value)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "document":
        return isinstance(value, (str, dict))
    return False


def _snapshot(scene: Scene) -> Dict[str, Any]:
    state = {
        "blocks": scene.blocks,
        "connectors": scene.connectors,
        "face_ledger": scene.face_ledger,
        "control": scene.control,
    }
    snapshot = copy.deepcopy(state)
    snapshot.update(
        phase=scene.phase,
        next_block_id=scene.next_block_id,
        next_connector_id=scene.next_connector_id,
    )
    return snapshot


def _restore(scene: Scene, snapshot: Dict[str, Any]) -> None:
    for name, value in snapshot.items():
        setattr(scene, name, value)


class ActionEngine:
    """Applies actions to scenes built from one catalog.

    Holds the named substructure registry used by merge_substructure.
    """

    def __init__(
        self,
        catalog: Catalog,
        config: Optional[Dict] = None,
        templates: Optional[Dict[str, Dict[str, str]]] = None,
    ):
        self.config = config or load_config()
        self.catalog = catalog
        self.templates = templates or load_templates(self.config.get("templates_path"))
        self.builder = SceneBuilder(catalog, self.config)
        self.evaluator = Evaluator(self.builder)
        self.describer = Describer(self.builder, self.templates, self.evaluator)
        self.control = ControlService(self.builder, self.templates)
        self.substructures: Dict[str, Scene] = {}
        self.remove_cascade = bool(self.config.get("remove_cascade", False))
        self.starting_block_immovable = bool(self.config.get("starting_block_immovable", True))
        self._lock = threading.RLock()

    # Entry points

    def start(
        self,
        init_shift: Iterable[float] = (0.0, 0.0, 0.0),
        init_rotation: Iterable[float] = (0.0, 0.0, 0.0),
        note: str = "",
    ) -> Scene:
        """A new scene whose trajectory log opens with the start action."""
        scene = Scene()
        arguments: Dict[str, Any] = {"init_shift": list(init_shift), "init_rotation": list(init_rotation)}
        if note:
            arguments["note"] = note
        result = self.apply(scene, Action(Category.BUILD, "start", arguments))
        if not result.ok:
            raise MalformedArgumentsError({"action": "start", "reason": result.description})
        return scene

    def run(self, scene: Scene, name: str, /, note: Optional[str] = None, **arguments: Any) -> ActionResult:
        """Apply an operation by name, inferring its category."""
        category = category_of(name) or Category.QUERY
        return self.apply(scene, Action(category, name, arguments, note))

    def apply(self, scene: Scene, action: Action) -> ActionResult:
        """Dispatch one action and log it; engine errors become failing results."""
        with self._lock:
            result = self._dispatch(scene, action)
            scene.trajectory.append(TrajectoryEntry(action, result))
            return result

    def replay(self, actions: Iterable[Action]) -> Scene:
        """Re-run a logged action sequence on an empty scene."""
        scene = Scene()
        for action in actions:
            self.apply(scene, action)
        return scene

    def register_substructure(self, name: str, scene: Scene) -> ActionResult:
        """Store a finalized scene under a name for merge_substructure."""
        if scene.phase != Phase.FINALIZED:
            return self._failure(
                PhaseViolationError(
                    {
                        "action": "register_substructure",
                        "phase": scene.phase.value,
                        "reason": "only finalized scenes can be registered",
                    }
                )
            )
        stored = copy.deepcopy(scene)
        stored.trajectory = []
        with self._lock:
            self.substructures[name] = stored
        logger.info(f"Registered substructure '{name}' ({len(stored.blocks)} blocks)")
        return ActionResult(
            ok=True,
            description=self.describer.result_text(
                "register_substructure", name=name, count=len(stored.blocks)
            ),
        )

    # Dispatch

    def _dispatch(self, scene: Scene, action: Action) -> ActionResult:
        try:
            arguments = self._check(action)
            handler: Callable[..., ActionResult] = getattr(self, f"_op_{action.name}")
        except ActionError as e:
            return self._failure(e)

        if action.name != "start" and not scene.blocks:
            return self._failure(
                PhaseViolationError(
                    {"action": action.name, "phase": scene.phase.value, "reason": "no machine has been started"}
                )
            )

        snapshot = _snapshot(scene)
        try:
            result = handler(scene, arguments, action.note)
        except ActionError as e:
            _restore(scene, snapshot)
            return self._failure(e)
        except Exception:
            _restore(scene, snapshot)
            raise
        logger.debug(f"{action.name} ok")
        return result

    def _check(self, action: Action) -> Dict[str, Any]:
        entry = OPERATIONS.get(action.name)
        if entry is None:
            raise MalformedArgumentsError(
                {"action": action.name, "reason": f"unknown operation; known: {', '.join(OPERATIONS)}"}
            )
        category, schema = entry
        try:
            requested = Category(action.category)
        except ValueError:
            requested = None
        if requested != category:
            raise MalformedArgumentsError(
                {"action": action.name, "reason": f"it belongs to the {category.value} category"}
            )
        arguments = dict(action.arguments or {})
        unknown = sorted(set(arguments) - set(schema))
        if unknown:
            raise MalformedArgumentsError(
                {"action": action.name, "reason": f"unknown argument(s) {', '.join(unknown)}"}
            )
        for name, (kind, required) in schema.items():
            if name not in arguments or arguments[name] is None:
                arguments.pop(name, None)
                if required:
                    raise MalformedArgumentsError(
                        {"action": action.name, "reason": f"missing required argument {name}"}
                    )
                continue
            if not _kind_ok(kind, arguments[name]):
                raise MalformedArgumentsError(
                    {"action": action.name, "reason": f"argument {name} must be a {kind}"}
                )
        return arguments

    def _failure(self, error: ActionError) -> ActionResult:
        description = self.describer.error_message(error.code, error.context)
        logger.info(f"Rejected: {description}")
        return ActionResult(ok=False, description=description, error=error.code)

    def _ok(self, description: str, delta: Optional[StateDelta] = None, warnings: Optional[List[str]] = None) -> ActionResult:
        return ActionResult(
            ok=True, description=description, state_delta=delta or StateDelta(), warnings=warnings or []
        )

    @staticmethod
    def _require_phase(scene: Scene, action: str, allowed: Iterable[Phase]) -> None:
        allowed = tuple(allowed)
        if scene.phase not in allowed:
            raise PhaseViolationError(
                {
                    "action": action,
                    "phase": scene.phase.value,
                    "reason": f"it needs one of the phases {', '.join(p.value for p in allowed)}",
                }
            )

    def _block_text(self, scene: Scene, block: PlacedBlock) -> Dict[str, str]:
        return {axis: fmt_position(v) for axis, v in zip("xyz", block.pose.position)}

    def _collision_check(self, scene: Scene, subject: str, candidates, ignore: Iterable[int] = ()) -> None:
        hits = self.builder.overlapping_blocks(scene, candidates, ignore)
        if hits:
            others = sorted({other for _, other in hits})
            raise OverlapConflictError(
                {
                    "subject": subject,
                    "others": ", ".join(f"block {b}" for b in others),
                    "blocks": others,
                }
            )

    def _span_check(self, scene: Scene, poses: Dict[int, Pose]) -> None:
        for connector in sorted(scene.connectors.values(), key=lambda c: c.connector_id):
            ends = {connector.endpoint_a[0], connector.endpoint_b[0]}
            if not ends & set(poses):
                continue
            span = self.builder.connector_span(scene, connector, poses)
            if span > self.builder.connector_max_span:
                raise ConnectorSpanExceededError(
                    {
                        "span": fmt_position(span),
                        "a": connector.endpoint_a[0],
                        "b": connector.endpoint_b[0],
                        "max_span": fmt_number(self.builder.connector_max_span),
                    }
                )

    # Build

    def _op_start(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        removed = sorted(scene.blocks)
        self.builder.reinitialize(
            scene,
            args.get("init_shift", (0.0, 0.0, 0.0)),
            args.get("init_rotation", (0.0, 0.0, 0.0)),
            args.get("note", note or ""),
        )
        start = scene.blocks[STARTING_BLOCK_ID]
        return self._ok(
            self.describer.result_text(
                "start",
                faces=", ".join(self.builder.free_faces(scene, STARTING_BLOCK_ID)),
                **self._block_text(scene, start),
            ),
            StateDelta(created_blocks=[STARTING_BLOCK_ID], removed_blocks=removed),
        )

    def _op_reset(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        start = scene.blocks[STARTING_BLOCK_ID]
        removed = sorted(b for b in scene.blocks if b != STARTING_BLOCK_ID)
        removed_connectors = sorted(scene.connectors)
        pose, kept_note = start.pose, start.note
        self.builder.reinitialize(scene, note=kept_note)
        scene.blocks[STARTING_BLOCK_ID].pose = pose
        return self._ok(
            self.describer.result_text("reset", **self._block_text(scene, scene.blocks[STARTING_BLOCK_ID])),
            StateDelta(removed_blocks=removed, removed_connectors=removed_connectors),
        )

    def _op_attach_block_to(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        self._require_phase(scene, "attach_block_to", ATTACH_PHASES)
        base = self.builder.resolve_block(scene, args["base_block"])
        spec = block_spec(self.catalog, args["new_block"])
        if spec.type_id == self.catalog.starting_type:
            raise StartingBlockProtectedError({"operation": "placed a second time"})
        if spec.is_connector or spec.mount is None:
            raise MalformedArgumentsError(
                {
                    "action": "attach_block_to",
                    "reason": f"{spec.type_id} is a connector; use connect_blocks",
                }
            )
        face = self.builder.resolve_face(scene, base, args["face"])
        label = self.builder.face_label(base, face.face_id)
        occupant = scene.occupancy(base.block_id, face.face_id).attachment
        if occupant is not None:
            raise FaceOccupiedError({"face": label, "block": base.block_id, "occupant": occupant[0]})

        frame = self.builder.face_frame(base, face.face_id)
        reference = self.builder.pointing_reference(frame.world_normal, args.get("pointing"), "attach_block_to")
        block = PlacedBlock(
            block_id=scene.next_block_id,
            type_id=spec.type_id,
            pose=self.builder.mount_pose(spec, frame, reference).canonical(),
            note=args.get("note", note or ""),
            mounted_on=(base.block_id, face.face_id),
            mount_face=spec.mount.face_id,
        )
        self._collision_check(
            scene, f"the new {spec.type_id}", [(block.block_id, self.builder.block_obbs(block))]
        )

        scene.blocks[block.block_id] = block
        scene.next_block_id += 1
        self.builder.record_attachment(scene, (base.block_id, face.face_id), block, spec.mount.face_id)
        free = self.builder.free_faces(scene, block.block_id)
        phrase = self.describer.function_phrase(block, self.evaluator.heated_cannons(scene))
        return self._ok(
            self.describer.result_text(
                "attach",
                type_id=spec.type_id,
                block=block.block_id,
                face=label,
                base=base.block_id,
                note=f' ("{block.note}")' if block.note else "",
                function=f" It{phrase[1:]}." if phrase else "",
                faces=", ".join(free) or self.templates["describe"]["none"],
                **self._block_text(scene, block),
            ),
            StateDelta(created_blocks=[block.block_id]),
        )

    def _op_connect_blocks(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        self._require_phase(scene, "connect_blocks", ATTACH_PHASES)
        spec = block_spec(self.catalog, args["connector"])
        if not spec.is_connector:
            raise MalformedArgumentsError(
                {"action": "connect_blocks", "reason": f"{spec.type_id} is not a connector type"}
            )
        a = self.builder.resolve_block(scene, args["a"])
        b = self.builder.resolve_block(scene, args["b"])
        if a.block_id == b.block_id:
            raise MalformedArgumentsError(
                {"action": "connect_blocks", "reason": "a connector joins two different blocks"}
            )
        face_a = self.builder.resolve_face(scene, a, args["face_a"])
        face_b = self.builder.resolve_face(scene, b, args["face_b"])
        for block, face in ((a, face_a), (b, face_b)):
            if not self.builder.face_has_headroom(scene, block.block_id, face.face_id):
                raise ExcessConnectionError(
                    {
                        "face": self.builder.face_label(block, face.face_id),
                        "block": block.block_id,
                        "count": len(scene.occupancy(block.block_id, face.face_id).connectors),
                        "cap": self.builder.max_connectors_per_face,
                    }
                )

        connector = Connector(
            connector_id=scene.next_connector_id,
            kind=spec.physical.connector_kind,
            type_id=spec.type_id,
            endpoint_a=(a.block_id, face_a.face_id),
            endpoint_b=(b.block_id, face_b.face_id),
            note=args.get("note", note or ""),
        )
        span = self.builder.connector_span(scene, connector)
        if span > self.builder.connector_max_span:
            raise ConnectorSpanExceededError(
                {
                    "span": fmt_position(span),
                    "a": a.block_id,
                    "b": b.block_id,
                    "max_span": fmt_number(self.builder.connector_max_span),
                }
            )

        scene.connectors[connector.connector_id] = connector
        scene.next_connector_id += 1
        for end in (connector.endpoint_a, connector.endpoint_b):
            scene.face_ledger.setdefault(end, scene.occupancy(*end)).connectors.append(
                connector.connector_id
            )
        return self._ok(
            self.describer.result_text(
                "connect",
                a=a.block_id,
                face_a=self.builder.face_label(a, face_a.face_id),
                b=b.block_id,
                face_b=self.builder.face_label(b, face_b.face_id),
                type_id=spec.type_id,
                connector=connector.connector_id,
                span=fmt_position(span),
            ),
            StateDelta(created_connectors=[connector.connector_id]),
        )

    def _op_remove_block(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        self._require_phase(scene, "remove_block", EDIT_PHASES)
        block = self.builder.resolve_block(scene, args["block"])
        if block.block_id == STARTING_BLOCK_ID:
            raise StartingBlockProtectedError({"operation": "removed"})
        subtree = scene.subtree(block.block_id)
        dependents = [b for b in subtree if b != block.block_id]
        if dependents and not args.get("cascade", self.remove_cascade):
            raise PhaseViolationError(
                {
                    "action": "remove_block",
                    "phase": scene.phase.value,
                    "reason": f"block(s) {', '.join(map(str, dependents))} are mounted on it; "
                    "remove them first or pass cascade",
                }
            )
        removed = set(subtree)

        removed_connectors = sorted(
            c.connector_id
            for c in scene.connectors.values()
            if c.endpoint_a[0] in removed or c.endpoint_b[0] in removed
        )
        for connector_id in removed_connectors:
            del scene.connectors[connector_id]
        for key in list(scene.face_ledger):
            if key[0] in removed:
                del scene.face_ledger[key]
                continue
            occupancy = scene.face_ledger[key]
            if occupancy.attachment is not None and occupancy.attachment[0] in removed:
                occupancy.attachment = None
            occupancy.connectors = [c for c in occupancy.connectors if c not in removed_connectors]
        for block_id in removed:
            del scene.blocks[block_id]
        self.builder.prune_ledger(scene)

        warnings = self._drop_controls(scene, removed)
        return self._ok(
            self.describer.result_text(
                "remove",
                blocks=", ".join(map(str, sorted(removed))),
                connectors=", ".join(map(str, removed_connectors)) or self.templates["describe"]["none"],
            ),
            StateDelta(removed_blocks=sorted(removed), removed_connectors=removed_connectors),
            warnings,
        )

    def _drop_controls(self, scene: Scene, removed: set) -> List[str]:
        control = scene.control
        kept = [b for b in control.bindings if b.block_id not in removed]
        dropped = len(control.bindings) - len(kept)
        if not dropped:
            return []
        control.bindings = kept
        bound = {b.key for b in kept}
        control.sequence = [e for e in control.sequence if e.key in bound]
        warning = self.describer.result_text("dropped_bindings", count=dropped)
        logger.warning(warning)
        return [warning]

    def _op_advance_phase(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        old = scene.phase
        if "target" in args:
            try:
                target = Phase(args["target"].strip().lower())
            except ValueError:
                raise MalformedArgumentsError(
                    {
                        "action": "advance_phase",
                        "reason": f"target must be one of {', '.join(p.value for p in Phase)}",
                    }
                )
        elif old == Phase.FINALIZED:
            target = old
        else:
            target = list(Phase)[old.order + 1]
        if target.order <= old.order:
            raise PhaseViolationError(
                {"action": "advance_phase", "phase": old.value, "reason": "phases only move forward"}
            )
        if target == Phase.FINALIZED:
            problems = self.builder.check_invariants(scene)
            if problems:
                raise PhaseViolationError(
                    {"action": "advance_phase", "phase": old.value, "reason": "; ".join(problems)}
                )
        scene.phase = target
        logger.info(f"Scene phase {old.value} -> {target.value}")
        return self._ok(self.describer.result_text("advance_phase", old=old.value, new=target.value))

    # Refine

    def _mounted(self, scene: Scene, block: PlacedBlock, action: str):
        frame = self.builder.mount_point(scene, block)
        if frame is None:
            if block.block_id == STARTING_BLOCK_ID:
                raise StartingBlockProtectedError({"operation": "twisted"})
            raise InvalidFaceError(
                {
                    "face": "mount",
                    "block": block.block_id,
                    "type_id": block.type_id,
                    "reason": f"{action} needs a block mounted on a face",
                }
            )
        return frame

    def _move(self, scene: Scene, block: PlacedBlock, poses: Dict[int, Pose]) -> None:
        moved_blocks = [copy.copy(scene.blocks[b]) for b in poses]
        for moved in moved_blocks:
            moved.pose = poses[moved.block_id]
        self._collision_check(
            scene,
            f"block {block.block_id}",
            [(b.block_id, self.builder.block_obbs(b)) for b in moved_blocks],
            ignore=poses,
        )
        self._span_check(scene, poses)
        for block_id, pose in poses.items():
            scene.blocks[block_id].pose = pose

    def _op_twist_block(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        self._require_phase(scene, "twist_block", EDIT_PHASES)
        block = self.builder.resolve_block(scene, args["block"])
        frame = self._mounted(scene, block, "twist_block")
        angle = float(args["angle"])
        # Right-handed about the outward normal: clockwise seen looking along it
        poses = {
            b: rotate_about(scene.blocks[b].pose, frame.world_center, frame.world_normal, angle).canonical()
            for b in scene.subtree(block.block_id)
        }
        self._move(scene, block, poses)
        parent, face = block.mounted_on
        return self._ok(
            self.describer.result_text(
                "twist",
                block=block.block_id,
                angle=fmt_number(angle),
                face=self.builder.face_label(scene.blocks[parent], face),
                parent=parent,
                count=len(poses),
            )
        )

    def _op_translate_block(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        self._require_phase(scene, "translate_block", EDIT_PHASES)
        block = self.builder.resolve_block(scene, args["block"])
        if block.block_id == STARTING_BLOCK_ID and self.starting_block_immovable:
            raise StartingBlockProtectedError({"operation": "moved"})
        shift = tuple(float(v) for v in args["shift"])
        poses = {b: translate(scene.blocks[b].pose, shift) for b in scene.subtree(block.block_id)}
        self._move(scene, block, poses)
        block.offset = tuple(float(a + b) for a, b in zip(block.offset, shift))
        dx, dy, dz = (fmt_number(v) for v in shift)
        return self._ok(
            self.describer.result_text(
                "translate", block=block.block_id, dx=dx, dy=dy, dz=dz, count=len(poses)
            )
        )

    def _op_flip_block(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        self._require_phase(scene, "flip_block", EDIT_PHASES)
        block = self.builder.resolve_block(scene, args["block"])
        functional = self.builder.spec(block).functional
        if functional.axis is None or not functional.reversible:
            raise InvalidFaceError(
                {
                    "face": "functional axis",
                    "block": block.block_id,
                    "type_id": block.type_id,
                    "reason": "the type has no reversible functional axis",
                }
            )
        block.flipped = not block.flipped
        phrase = self.describer.function_phrase(block, self.evaluator.heated_cannons(scene))
        return self._ok(
            self.describer.result_text("flip", block=block.block_id, function=phrase.lstrip("; "))
        )

    # Assemble

    def _op_merge_substructure(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        name = args["name"]
        sub = self.substructures.get(name)
        if sub is None:
            raise MalformedArgumentsError(
                {
                    "action": "merge_substructure",
                    "reason": f"no substructure named '{name}' (registered: "
                    f"{', '.join(sorted(self.substructures)) or 'none'})",
                }
            )
        blocks, connectors = self.builder.merge(
            scene, sub, args["base_block"], args["base_face"], args["anchor_block"], args["anchor_face"], name
        )
        base = self.builder.resolve_block(scene, args["base_block"])
        face = self.builder.resolve_face(scene, base, args["base_face"])
        return self._ok(
            self.describer.result_text(
                "merge",
                name=name,
                face=self.builder.face_label(base, face.face_id),
                base=base.block_id,
                blocks=", ".join(map(str, blocks)),
            ),
            StateDelta(created_blocks=blocks, created_connectors=connectors),
        )

    # Control

    def _op_bind_key(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        binding = self.control.bind_key(scene, args["key"], args["action"], args["block"])
        return self._ok(
            self.describer.result_text(
                "bind_key", key=binding.key, action=binding.action, block=binding.block_id
            )
        )

    def _op_add_control_sequence(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        entry, warnings = self.control.add_control_sequence(
            scene.control, args["time"], args["key"], args["hold_for"], args.get("motion_note", "")
        )
        return self._ok(
            self.describer.result_text(
                "add_control_sequence",
                time=fmt_number(entry.time),
                key=entry.key,
                hold_for=fmt_number(entry.hold_for),
            ),
            warnings=warnings,
        )

    def _op_review_control_config(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        return self._ok(self.control.review_control_config(scene.control))

    def _op_install_controls(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        document = args["document"]
        try:
            if isinstance(document, str):
                warnings = self.control.install_text(scene, document)
            else:
                warnings = self.control.install_document(scene, document)
        except FormatViolation as e:
            raise MalformedArgumentsError({"action": "install_controls", "reason": str(e)})
        return self._ok(self.control.review_control_config(scene.control), warnings=warnings)

    # Query

    def _op_get_machine_summary(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        return self._ok(self.describer.machine_summary(scene))

    def _op_get_block_detail(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        return self._ok(self.describer.block_detail(scene, args["block"]))

    def _op_get_control_map(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        return self._ok(self.describer.control_map(scene))

    def _op_get_control_sequence(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        return self._ok("\n".join(self.control.narrate_sequence(scene.control)))

    def _op_get_functional_poses(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        return self._ok(self.describer.functional_poses(scene))

    def _op_list_free_faces(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        return self._ok(self.describer.free_faces_text(scene, args["block"]))

    def _op_describe_block_type(self, scene: Scene, args: Dict[str, Any], note: Optional[str]) -> ActionResult:
        return self._ok(describe_block_type(self.catalog, args["type_id"], self.templates))
