"""Scene construction primitives: block placement geometry, the face ledger,
reference resolution, hashing and substructure merging."""

import copy
import hashlib
import json
import logging
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from models.catalog import BlockSpec, Catalog, FaceSpec
from models.control import ControlState
from models.scene import Connector, FaceOccupancy, FaceRef, Phase, PlacedBlock, Scene
from services.catalog_loader import block_spec
from utils.config import load_config
from utils.errors import (
    FaceOccupiedError,
    InvalidFaceError,
    MalformedArgumentsError,
    OverlapConflictError,
    PhaseViolationError,
    UnknownBlockError,
)
from utils.geometry import (
    AXIS_ALIGNMENT_TOLERANCE,
    COMPASS_VECTORS,
    DIRECTION_WORDS,
    FaceFrame,
    Obb,
    Pose,
    box_in_world,
    canonical_quat,
    compass_label,
    compose,
    face_world_frame,
    obb_overlap,
    quat_from_euler_deg,
    rotation_between_frames,
)

logger = logging.getLogger(__name__)

STARTING_BLOCK_ID = 0
FACE_ORDER = ("top", "bottom", "north", "south", "east", "west")
# Ledger pseudo-face for blocks that mount without a face of their own
MOUNT_FACE = "mount"


def format_float(value: float, digits: int = 9) -> str:
    """Fixed-precision float text with negative zero normalized."""
    text = f"{float(value):.{digits}f}"
    if text.startswith("-") and float(text) == 0:
        text = text[1:]
    return text


def _hash_quat(q: Sequence[float]) -> List[str]:
    rounded = [float(format_float(c)) for c in q]
    return [format_float(c) for c in canonical_quat(rounded)]


def part_count(scene: Scene, include_start: bool = False, starting_type: str = "StartingBlock") -> int:
    """Placed blocks plus connectors; starting blocks are excluded by default."""
    blocks = sum(
        1 for b in scene.blocks.values() if include_start or b.type_id != starting_type
    )
    return blocks + len(scene.connectors)


def state_hash(scene: Scene) -> str:
    """Content digest of a scene. Id counters and the trajectory log are excluded."""
    payload = {
        "blocks": [
            [
                b.block_id,
                b.type_id,
                [format_float(c) for c in b.pose.position],
                _hash_quat(b.pose.orientation),
                b.note,
                list(b.mounted_on) if b.mounted_on else None,
                b.mount_face,
                b.flipped,
                [format_float(c) for c in b.offset],
            ]
            for b in sorted(scene.blocks.values(), key=lambda b: b.block_id)
        ],
        "connectors": [
            [c.connector_id, c.kind, c.type_id, list(c.endpoint_a), list(c.endpoint_b), c.note]
            for c in sorted(scene.connectors.values(), key=lambda c: c.connector_id)
        ],
        "ledger": [
            [list(key), list(occ.attachment) if occ.attachment else None, sorted(occ.connectors)]
            for key, occ in sorted(scene.face_ledger.items())
            if not occ.is_empty()
        ],
        "control": {
            "bindings": sorted([b.key, b.action, b.block_id] for b in scene.control.bindings),
            "sequence": sorted(
                [format_float(e.time), e.key, format_float(e.hold_for), e.motion_note]
                for e in scene.control.sequence
            ),
            "window": format_float(scene.control.window),
        },
        "phase": scene.phase.value,
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class SceneBuilder:
    """Geometry and ledger operations over scenes built from one catalog."""

    def __init__(self, catalog: Catalog, config: Optional[Dict] = None):
        self.catalog = catalog
        self.config = config or load_config()
        self.contact_tolerance = float(self.config.get("contact_tolerance", 1e-6))
        self.max_connectors_per_face = int(self.config.get("max_connectors_per_face", 1))
        self.connector_max_span = float(self.config.get("connector_max_span", 10.0))

    # Lookup helpers

    def spec(self, block: PlacedBlock) -> BlockSpec:
        return block_spec(self.catalog, block.type_id)

    def is_starting(self, block: PlacedBlock) -> bool:
        return block.type_id == self.catalog.starting_type

    # Scene creation

    def new_scene(
        self,
        init_shift: Sequence[float] = (0.0, 0.0, 0.0),
        init_rotation: Sequence[float] = (0.0, 0.0, 0.0),
        note: str = "",
    ) -> Scene:
        """A scene holding exactly one starting block, in build phase."""
        scene = Scene()
        self.reinitialize(scene, init_shift, init_rotation, note)
        return scene

    def reinitialize(
        self,
        scene: Scene,
        init_shift: Sequence[float] = (0.0, 0.0, 0.0),
        init_rotation: Sequence[float] = (0.0, 0.0, 0.0),
        note: str = "",
    ) -> None:
        """Replace the scene content in place with a lone starting block."""
        x, y, z = (float(v) for v in init_shift)
        pose = Pose((x, y, z), quat_from_euler_deg(init_rotation))
        scene.blocks = {
            STARTING_BLOCK_ID: PlacedBlock(
                STARTING_BLOCK_ID, self.catalog.starting_type, pose, note=str(note)
            )
        }
        scene.connectors = {}
        scene.face_ledger = {}
        scene.control = ControlState()
        scene.phase = Phase.BUILD
        scene.next_block_id = STARTING_BLOCK_ID + 1
        scene.next_connector_id = 0

    # Geometry of placed blocks

    def block_obbs(self, block: PlacedBlock, pose: Optional[Pose] = None) -> List[Obb]:
        pose = pose or block.pose
        return [
            box_in_world(pose, box.center, box.half_extents)
            for box in self.spec(block).collision
        ]

    def face_frame(self, block: PlacedBlock, face_id: str, pose: Optional[Pose] = None) -> FaceFrame:
        face = self.spec(block).face(face_id)
        if face is None:
            raise InvalidFaceError(
                {
                    "face": face_id,
                    "block": block.block_id,
                    "type_id": block.type_id,
                    "reason": "no such face",
                }
            )
        return face_world_frame(pose or block.pose, face)

    def face_label(self, block: PlacedBlock, face_id: str) -> str:
        """Compass word for axis-aligned compass faces, the local label otherwise."""
        if face_id in COMPASS_VECTORS and self.spec(block).face(face_id) is not None:
            label = compass_label(self.face_frame(block, face_id).world_normal)
            if label is not None:
                return label
        return face_id

    def mount_point(self, scene: Scene, block: PlacedBlock) -> Optional[FaceFrame]:
        """World frame of the parent face a block is mounted on."""
        if block.mounted_on is None:
            return None
        parent = scene.blocks.get(block.mounted_on[0])
        if parent is None:
            return None
        return self.face_frame(parent, block.mounted_on[1])

    def _world(self, block: PlacedBlock, local: Sequence[float]) -> np.ndarray:
        return block.pose.apply(local)

    def functional_axis(self, block: PlacedBlock) -> Optional[np.ndarray]:
        """World functional axis with the flip applied (wheel axle, cannon jet)."""
        axis = self.spec(block).functional.axis
        if axis is None:
            return None
        world = block.pose.rotate(axis)
        return -world if block.flipped else world

    def wheel_axle(self, block: PlacedBlock) -> np.ndarray:
        """Geometric axle direction, unaffected by flipping."""
        return block.pose.rotate(self.spec(block).functional.axis)

    def roll_direction(self, block: PlacedBlock) -> Optional[np.ndarray]:
        """Ground direction a forward-spinning wheel drives, None if the axle is vertical."""
        axle = self.wheel_axle(block)
        d = np.cross((0.0, 0.0, 1.0), axle)
        norm = np.linalg.norm(d)
        if norm < AXIS_ALIGNMENT_TOLERANCE:
            return None
        d = d / norm
        return -d if block.flipped else d

    def cannon_ports(self, block: PlacedBlock) -> Tuple[np.ndarray, np.ndarray]:
        """World (inlet, outlet) points; flipping swaps them."""
        functional = self.spec(block).functional
        inlet = self._world(block, functional.inlet)
        outlet = self._world(block, functional.outlet)
        return (outlet, inlet) if block.flipped else (inlet, outlet)

    def heat_centers(self, block: PlacedBlock) -> List[np.ndarray]:
        return [self._world(block, p) for p in self.spec(block).physical.heat_offsets]

    def heat_zones(self, block: PlacedBlock) -> List[Obb]:
        """End thirds of the body box along the functional axis; the middle third is excluded."""
        spec = self.spec(block)
        body = spec.collision[0]
        index = int(np.argmax(np.abs(spec.functional.axis)))
        half = list(body.half_extents)
        third = half[index] * 2.0 / 3.0
        zones = []
        for sign in (-1.0, 1.0):
            center = list(body.center)
            center[index] += sign * (half[index] - third / 2.0)
            extents = list(half)
            extents[index] = third / 2.0
            zones.append(box_in_world(block.pose, center, extents))
        return zones

    # Reference resolution

    def resolve_block(self, scene: Scene, ref: Any) -> PlacedBlock:
        """Resolve an id, a numeric string or a unique note substring."""
        if isinstance(ref, bool):
            raise UnknownBlockError({"ref": ref, "candidates": ""})
        if isinstance(ref, int):
            block = scene.blocks.get(ref)
            if block is None:
                raise UnknownBlockError({"ref": ref, "candidates": ""})
            return block
        if isinstance(ref, float) and ref.is_integer():
            return self.resolve_block(scene, int(ref))
        if not isinstance(ref, str) or not ref.strip():
            raise UnknownBlockError({"ref": ref, "candidates": ""})

        text = ref.strip()
        numeric = text[1:] if text.startswith("#") else text
        if numeric.isdigit():
            return self.resolve_block(scene, int(numeric))

        wanted = text.casefold()
        ordered = sorted(scene.blocks.values(), key=lambda b: b.block_id)
        exact = [b for b in ordered if b.note and b.note.casefold() == wanted]
        if len(exact) == 1:
            return exact[0]
        matches = exact or [b for b in ordered if b.note and wanted in b.note.casefold()]
        if len(matches) == 1:
            return matches[0]
        candidates = ""
        if matches:
            listed = ", ".join(f'block {b.block_id} ("{b.note}")' for b in matches)
            candidates = f" The note is ambiguous; candidates: {listed}."
        raise UnknownBlockError({"ref": ref, "candidates": candidates})

    def resolve_face(self, scene: Scene, block: PlacedBlock, face: Any) -> FaceSpec:
        """Resolve a compass word (against world normals first) or a local face label."""
        spec = self.spec(block)
        context = {"face": face, "block": block.block_id, "type_id": block.type_id}
        if not spec.faces:
            raise InvalidFaceError({**context, "reason": "it has no attachable faces"})
        if not isinstance(face, str) or not face.strip():
            raise InvalidFaceError({**context, "reason": "a face label is required"})

        word = face.strip().lower()
        if word in COMPASS_VECTORS:
            target = COMPASS_VECTORS[word]
            for candidate in spec.faces:
                normal = face_world_frame(block.pose, candidate).world_normal
                if np.allclose(normal, target, atol=AXIS_ALIGNMENT_TOLERANCE, rtol=0):
                    return self._attachable(candidate, context)

        for candidate in spec.faces:
            if candidate.face_id.lower() == word:
                return self._attachable(candidate, context)

        labels = ", ".join(self.face_label(block, f.face_id) for f in spec.faces)
        raise InvalidFaceError({**context, "reason": f"no such face (faces: {labels})"})

    @staticmethod
    def _attachable(face: FaceSpec, context: Dict) -> FaceSpec:
        if not face.attachable:
            raise InvalidFaceError({**context, "reason": "the face is not attachable"})
        return face

    # Ledger

    def face_has_headroom(self, scene: Scene, block_id: int, face_id: str) -> bool:
        return len(scene.occupancy(block_id, face_id).connectors) < self.max_connectors_per_face

    def free_face_ids(self, scene: Scene, block: PlacedBlock) -> List[str]:
        free = [
            f.face_id
            for f in self.spec(block).faces
            if f.attachable
            and scene.occupancy(block.block_id, f.face_id).attachment is None
            and self.face_has_headroom(scene, block.block_id, f.face_id)
        ]
        return sorted(free, key=lambda fid: self.label_sort_key(block, fid))

    def label_sort_key(self, block: PlacedBlock, face_id: str):
        label = self.face_label(block, face_id)
        if label in FACE_ORDER:
            return (0, FACE_ORDER.index(label), label)
        return (1, 0, label)

    def free_faces(self, scene: Scene, block_ref: Any) -> List[str]:
        """Display labels of attachable faces with no attachment and connector headroom."""
        block = self.resolve_block(scene, block_ref)
        return [self.face_label(block, fid) for fid in self.free_face_ids(scene, block)]

    def record_attachment(
        self, scene: Scene, parent: FaceRef, child: PlacedBlock, child_face: Optional[str]
    ) -> None:
        scene.face_ledger.setdefault(parent, FaceOccupancy()).attachment = (
            child.block_id,
            child_face or MOUNT_FACE,
        )
        if child_face is not None:
            scene.face_ledger.setdefault(
                (child.block_id, child_face), FaceOccupancy()
            ).attachment = parent

    def prune_ledger(self, scene: Scene) -> None:
        for key in [k for k, occ in scene.face_ledger.items() if occ.is_empty()]:
            del scene.face_ledger[key]

    # Placement

    @staticmethod
    def default_reference(normal: Sequence[float]) -> np.ndarray:
        """Pointing used when an attach omits one.

        World up projected on the face plane, or north when the face is
        horizontal. Side-mounted blocks aim along this reference; an axis along
        the face normal is out of their reach.
        """
        n = np.asarray(normal, dtype=float)
        for fallback in (DIRECTION_WORDS["up"], DIRECTION_WORDS["north"]):
            v = np.asarray(fallback, dtype=float)
            r = v - np.dot(v, n) * n
            norm = np.linalg.norm(r)
            if norm > AXIS_ALIGNMENT_TOLERANCE:
                return r / norm
        raise ValueError("degenerate face normal")

    def pointing_reference(self, normal: Sequence[float], pointing: Optional[str], action: str) -> np.ndarray:
        if pointing is None:
            return self.default_reference(normal)
        word = str(pointing).strip().lower()
        if word not in DIRECTION_WORDS:
            raise MalformedArgumentsError(
                {
                    "action": action,
                    "reason": f"pointing must be one of {', '.join(DIRECTION_WORDS)}",
                }
            )
        r = np.asarray(DIRECTION_WORDS[word], dtype=float)
        if abs(float(np.dot(r, normal))) > AXIS_ALIGNMENT_TOLERANCE:
            raise MalformedArgumentsError(
                {
                    "action": action,
                    "reason": f"pointing '{word}' must lie in the plane of the target face",
                }
            )
        return r

    def mount_pose(self, spec: BlockSpec, frame: FaceFrame, reference: Sequence[float]) -> Pose:
        """Seat a block's mount flush and anti-parallel on a face frame."""
        mount = spec.mount
        world_normal = -np.asarray(frame.world_normal, dtype=float)
        orientation = rotation_between_frames(
            mount.local_normal, mount.local_reference, world_normal, reference
        )
        placed = Pose((0.0, 0.0, 0.0), orientation)
        origin = np.asarray(frame.world_center) - placed.rotate(mount.local_center)
        return Pose(tuple(float(v) for v in origin), orientation)

    # Constraint checks

    def overlapping_blocks(
        self,
        scene: Scene,
        candidates: Iterable[Tuple[Any, List[Obb]]],
        ignore: Iterable[int] = (),
    ) -> List[Tuple[Any, int]]:
        """Pairs (candidate key, existing block id) whose boxes overlap."""
        skip = set(ignore)
        hits = []
        others = [
            (b.block_id, self.block_obbs(b))
            for b in sorted(scene.blocks.values(), key=lambda b: b.block_id)
            if b.block_id not in skip
        ]
        for key, boxes in candidates:
            for other_id, other_boxes in others:
                if any(
                    obb_overlap(a, b, self.contact_tolerance)
                    for a in boxes
                    for b in other_boxes
                ):
                    hits.append((key, other_id))
        return hits

    def connector_span(
        self,
        scene: Scene,
        connector: Connector,
        poses: Optional[Dict[int, Pose]] = None,
    ) -> float:
        poses = poses or {}
        ends = []
        for block_id, face_id in (connector.endpoint_a, connector.endpoint_b):
            block = scene.blocks[block_id]
            ends.append(self.face_frame(block, face_id, poses.get(block_id)).world_center)
        return float(np.linalg.norm(np.subtract(ends[0], ends[1])))

    def check_invariants(self, scene: Scene) -> List[str]:
        """Problems with the scene: overlaps, ledger unsoundness, connector spans."""
        problems: List[str] = []
        ordered = sorted(scene.blocks.values(), key=lambda b: b.block_id)
        boxes = {b.block_id: self.block_obbs(b) for b in ordered}
        for i, a in enumerate(ordered):
            for b in ordered[i + 1 :]:
                if any(
                    obb_overlap(x, y, self.contact_tolerance)
                    for x in boxes[a.block_id]
                    for y in boxes[b.block_id]
                ):
                    problems.append(f"blocks {a.block_id} and {b.block_id} overlap")

        starts = [b for b in ordered if b.block_id == STARTING_BLOCK_ID]
        if not starts or not self.is_starting(starts[0]) or starts[0].mounted_on is not None:
            problems.append("block 0 must be an unmounted starting block")

        for block in ordered:
            if block.mounted_on is None:
                continue
            parent, face = block.mounted_on
            occ = scene.face_ledger.get((parent, face))
            expected = (block.block_id, block.mount_face or MOUNT_FACE)
            if parent not in scene.blocks or occ is None or occ.attachment != expected:
                problems.append(f"mounting of block {block.block_id} missing from ledger")

        for (block_id, face_id), occ in sorted(scene.face_ledger.items()):
            if block_id not in scene.blocks:
                problems.append(f"ledger entry for missing block {block_id}")
                continue
            if occ.attachment is not None:
                partner_id, partner_face = occ.attachment
                partner = scene.blocks.get(partner_id)
                justified = partner is not None and (
                    partner.mounted_on == (block_id, face_id)
                    or scene.blocks[block_id].mounted_on == (partner_id, partner_face)
                    or scene.occupancy(partner_id, partner_face).attachment
                    == (block_id, face_id)
                )
                if not justified:
                    problems.append(
                        f"attachment on block {block_id} face {face_id} is unjustified"
                    )
            if len(occ.connectors) > self.max_connectors_per_face:
                problems.append(f"block {block_id} face {face_id} exceeds the connector cap")
            for connector_id in occ.connectors:
                connector = scene.connectors.get(connector_id)
                if connector is None or (block_id, face_id) not in (
                    connector.endpoint_a,
                    connector.endpoint_b,
                ):
                    problems.append(f"ledger lists unknown connector {connector_id}")

        for connector in sorted(scene.connectors.values(), key=lambda c: c.connector_id):
            for end in (connector.endpoint_a, connector.endpoint_b):
                if end[0] not in scene.blocks:
                    problems.append(f"connector {connector.connector_id} dangles")
                    break
                if connector.connector_id not in scene.occupancy(*end).connectors:
                    problems.append(f"connector {connector.connector_id} missing from ledger")
            else:
                span = self.connector_span(scene, connector)
                if span > self.connector_max_span + 1e-9:
                    problems.append(f"connector {connector.connector_id} exceeds max span")
        return problems

    # Substructure merge

    def _in_plane_reference(self, normal: Sequence[float]) -> np.ndarray:
        """World-z projection on the plane, north when degenerate."""
        return self.default_reference(normal)

    def merge(
        self,
        scene: Scene,
        sub: Scene,
        base_ref: Any,
        base_face: Any,
        anchor_ref: Any,
        anchor_face: Any,
        name: str = "substructure",
    ) -> Tuple[List[int], List[int]]:
        """Copy a finalized scene onto a free face; all-or-nothing.

        Returns:
            (new block ids, new connector ids)
        """
        if scene.phase != Phase.ASSEMBLE:
            raise PhaseViolationError(
                {
                    "action": "merge_substructure",
                    "phase": scene.phase.value,
                    "reason": "merging is only allowed in the assemble phase",
                }
            )
        if sub.phase != Phase.FINALIZED:
            raise PhaseViolationError(
                {
                    "action": "merge_substructure",
                    "phase": scene.phase.value,
                    "reason": f"substructure '{name}' is not finalized",
                }
            )

        base = self.resolve_block(scene, base_ref)
        base_spec = self.resolve_face(scene, base, base_face)
        occupant = scene.occupancy(base.block_id, base_spec.face_id).attachment
        if occupant is not None:
            raise FaceOccupiedError(
                {
                    "face": self.face_label(base, base_spec.face_id),
                    "block": base.block_id,
                    "occupant": occupant[0],
                }
            )

        anchor = self.resolve_block(sub, anchor_ref)
        anchor_spec = self.resolve_face(sub, anchor, anchor_face)
        occupant = sub.occupancy(anchor.block_id, anchor_spec.face_id).attachment
        if occupant is not None:
            raise FaceOccupiedError(
                {
                    "face": self.face_label(anchor, anchor_spec.face_id),
                    "block": f"{anchor.block_id} of '{name}'",
                    "occupant": occupant[0],
                }
            )

        base_frame = face_world_frame(base.pose, base_spec)
        anchor_frame = face_world_frame(anchor.pose, anchor_spec)
        target_normal = -np.asarray(base_frame.world_normal)
        rotation = rotation_between_frames(
            anchor_frame.world_normal,
            self._in_plane_reference(anchor_frame.world_normal),
            target_normal,
            self._in_plane_reference(target_normal),
        )
        rotated = Pose((0.0, 0.0, 0.0), rotation)
        shift = np.asarray(base_frame.world_center) - rotated.rotate(anchor_frame.world_center)
        transform = Pose(tuple(float(v) for v in shift), rotation)

        id_map: Dict[int, int] = {}
        new_blocks: List[PlacedBlock] = []
        next_id = scene.next_block_id
        for old in sorted(sub.blocks.values(), key=lambda b: b.block_id):
            id_map[old.block_id] = next_id
            moved = copy.deepcopy(old)
            moved.block_id = next_id
            moved.pose = compose(transform, old.pose).canonical()
            new_blocks.append(moved)
            next_id += 1

        hits = self.overlapping_blocks(
            scene, [(b.block_id, self.block_obbs(b)) for b in new_blocks]
        )
        if hits:
            raise OverlapConflictError(
                {
                    "subject": f"substructure '{name}' (block {hits[0][0]})",
                    "others": ", ".join(sorted({f"block {h[1]}" for h in hits})),
                    "blocks": sorted({h[1] for h in hits}),
                }
            )

        # Commit
        for block in new_blocks:
            if block.mounted_on is not None:
                block.mounted_on = (id_map[block.mounted_on[0]], block.mounted_on[1])
            scene.blocks[block.block_id] = block
        scene.next_block_id = next_id

        connector_map: Dict[int, int] = {}
        for old in sorted(sub.connectors.values(), key=lambda c: c.connector_id):
            new_id = scene.next_connector_id
            scene.next_connector_id += 1
            connector_map[old.connector_id] = new_id
            scene.connectors[new_id] = Connector(
                new_id,
                old.kind,
                old.type_id,
                (id_map[old.endpoint_a[0]], old.endpoint_a[1]),
                (id_map[old.endpoint_b[0]], old.endpoint_b[1]),
                old.note,
            )

        for (block_id, face_id), occ in sorted(sub.face_ledger.items()):
            if occ.is_empty():
                continue
            scene.face_ledger[(id_map[block_id], face_id)] = FaceOccupancy(
                attachment=(id_map[occ.attachment[0]], occ.attachment[1])
                if occ.attachment
                else None,
                connectors=[connector_map[c] for c in occ.connectors],
            )

        new_anchor = scene.blocks[id_map[anchor.block_id]]
        joint = (base.block_id, base_spec.face_id)
        scene.face_ledger.setdefault(joint, FaceOccupancy()).attachment = (
            new_anchor.block_id,
            anchor_spec.face_id,
        )
        scene.face_ledger.setdefault(
            (new_anchor.block_id, anchor_spec.face_id), FaceOccupancy()
        ).attachment = joint
        if new_anchor.mounted_on is None:
            new_anchor.mounted_on = joint
            new_anchor.mount_face = anchor_spec.face_id

        existing = set(scene.control.bindings)
        for binding in sub.control.bindings:
            remapped = type(binding)(binding.key, binding.action, id_map[binding.block_id])
            if remapped not in existing:
                scene.control.bindings.append(remapped)
                existing.add(remapped)
        scene.control.sequence = sorted(
            scene.control.sequence + list(sub.control.sequence), key=lambda e: e.time
        )

        logger.debug(
            f"Merged '{name}' onto block {base.block_id} face {base_spec.face_id}: "
            f"{len(new_blocks)} blocks"
        )
        return [b.block_id for b in new_blocks], sorted(connector_map.values())
