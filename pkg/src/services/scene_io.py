"""Scene documents: the lossless native JSON format and the best-effort
sandbox machine file."""

import json
import logging
import uuid
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from models.action import Action, ActionResult
from models.catalog import Catalog
from models.control import ControlSequenceEntry, ControlState, KeyBinding
from models.scene import Connector, FaceOccupancy, Phase, PlacedBlock, Scene, TrajectoryEntry
from services.catalog_loader import block_spec
from services.control_service import UNITY_KEY_CODES
from services.scene_builder import SceneBuilder, format_float, state_hash
from utils.errors import (
    CatalogMismatch,
    ProtocolError,
    UnfinalizedScene,
    UnknownBlockTypeError,
    UnsoundScene,
)
from utils.geometry import Pose, canonical_quat
from utils.retry import retry_file_operation

logger = logging.getLogger(__name__)

NATIVE_FORMAT = "buildyard-scene"
NATIVE_VERSION = "1.0"
SUPPORTED_NATIVE_VERSIONS = ("1.0",)

MACHINE_VERSION = "1"
EXTENSION_NAMESPACE = "urn:buildyard:machine-extension:1"
GUID_NAMESPACE = uuid.UUID("6f1c1d2e-8a47-4f53-9d0c-3b5e2a7c9e10")

# Engine frame is right-handed z-up (x east, y north). The sandbox frame is
# left-handed y-up with z forward, so positions swap y and z, and the
# quaternion vector part picks up the reflection sign.
VECTOR_AXIS_MAPPER = {
    "x": {"coPos": 0, "sign": 1.0},
    "y": {"coPos": 2, "sign": 1.0},
    "z": {"coPos": 1, "sign": 1.0},
}
# Indices into an engine (w, x, y, z) quaternion
QUATERNION_AXIS_MAPPER = {
    "x": {"coPos": 1, "sign": -1.0},
    "y": {"coPos": 3, "sign": -1.0},
    "z": {"coPos": 2, "sign": -1.0},
    "w": {"coPos": 0, "sign": 1.0},
}

ET.register_namespace("ext", EXTENSION_NAMESPACE)


def convert_vector(co: Sequence[float]) -> List[float]:
    """Engine z-up position to the sandbox y-up frame."""
    return [float(co[VECTOR_AXIS_MAPPER[axis]["coPos"]]) * VECTOR_AXIS_MAPPER[axis]["sign"] for axis in "xyz"]


def convert_quaternion(co: Sequence[float]) -> List[float]:
    """Engine (w, x, y, z) quaternion to the sandbox (x, y, z, w) order and frame."""
    return [
        float(co[QUATERNION_AXIS_MAPPER[axis]["coPos"]]) * QUATERNION_AXIS_MAPPER[axis]["sign"]
        for axis in "xyzw"
    ]


def _face_ref(ref) -> Optional[List[Any]]:
    return [ref[0], ref[1]] if ref is not None else None


def export_native(scene: Scene, catalog: Catalog) -> Dict[str, Any]:
    """Lossless document for a scene, trajectory log included."""
    return {
        "format": NATIVE_FORMAT,
        "version": NATIVE_VERSION,
        "catalog_hash": catalog.content_hash,
        "phase": scene.phase.value,
        "next_block_id": scene.next_block_id,
        "next_connector_id": scene.next_connector_id,
        "blocks": [
            {
                "id": b.block_id,
                "type_id": b.type_id,
                "position": [float(c) for c in b.pose.position],
                "orientation": [float(c) for c in canonical_quat(b.pose.orientation)],
                "note": b.note,
                "mounted_on": _face_ref(b.mounted_on),
                "mount_face": b.mount_face,
                "flipped": b.flipped,
                "offset": [float(c) for c in b.offset],
            }
            for b in sorted(scene.blocks.values(), key=lambda b: b.block_id)
        ],
        "connectors": [
            {
                "id": c.connector_id,
                "kind": c.kind,
                "type_id": c.type_id,
                "a": _face_ref(c.endpoint_a),
                "b": _face_ref(c.endpoint_b),
                "note": c.note,
            }
            for c in sorted(scene.connectors.values(), key=lambda c: c.connector_id)
        ],
        "ledger": [
            {
                "block": key[0],
                "face": key[1],
                "attachment": _face_ref(occ.attachment),
                "connectors": sorted(occ.connectors),
            }
            for key, occ in sorted(scene.face_ledger.items())
            if not occ.is_empty()
        ],
        "control": {
            "window": scene.control.window,
            "bindings": [
                {"key": b.key, "action": b.action, "block_id": b.block_id}
                for b in scene.control.bindings
            ],
            "sequence": [
                {"time": e.time, "key": e.key, "hold_for": e.hold_for, "motion_note": e.motion_note}
                for e in scene.control.sequence
            ],
        },
        "trajectory": [
            {"action": entry.action.to_dict(), "result": entry.result.to_dict()}
            for entry in scene.trajectory
        ],
    }


def dumps_native(scene: Scene, catalog: Catalog) -> str:
    """Native document text; identical scenes give identical bytes."""
    return json.dumps(export_native(scene, catalog), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _ref(value: Any, field_name: str):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ProtocolError(f"{field_name} must be a [block_id, face] pair")
    return (int(value[0]), str(value[1]))


def _triple(value: Any, field_name: str):
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ProtocolError(f"{field_name} must have three components")
    return tuple(float(c) for c in value)


def import_native(document: Union[str, Dict[str, Any]], catalog: Catalog) -> Scene:
    """Rebuild a scene from a native document.

    Raises:
        ProtocolError: unreadable document or unknown version
        CatalogMismatch: the document was written against another catalog
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise ProtocolError(f"scene document is not valid JSON: {e}")
    if not isinstance(document, dict) or document.get("format") != NATIVE_FORMAT:
        raise ProtocolError("not a buildyard scene document")
    version = document.get("version")
    if version not in SUPPORTED_NATIVE_VERSIONS:
        raise ProtocolError(f"unsupported scene document version '{version}'")
    if document.get("catalog_hash") != catalog.content_hash:
        raise CatalogMismatch(
            f"scene was written against catalog {str(document.get('catalog_hash'))[:12]}, "
            f"loaded catalog is {catalog.content_hash[:12]}"
        )

    try:
        scene = Scene(
            phase=Phase(document.get("phase", Phase.BUILD.value)),
            next_block_id=int(document.get("next_block_id", 0)),
            next_connector_id=int(document.get("next_connector_id", 0)),
        )
        for raw in document.get("blocks", []):
            block_spec(catalog, raw["type_id"])
            orientation = raw["orientation"]
            if len(orientation) != 4:
                raise ProtocolError(f"block {raw['id']} orientation must have four components")
            block = PlacedBlock(
                block_id=int(raw["id"]),
                type_id=str(raw["type_id"]),
                pose=Pose(_triple(raw["position"], "position"), tuple(float(c) for c in orientation)),
                note=str(raw.get("note", "")),
                mounted_on=_ref(raw.get("mounted_on"), "mounted_on"),
                mount_face=raw.get("mount_face"),
                flipped=bool(raw.get("flipped", False)),
                offset=_triple(raw.get("offset", [0.0, 0.0, 0.0]), "offset"),
            )
            scene.blocks[block.block_id] = block
        for raw in document.get("connectors", []):
            connector = Connector(
                connector_id=int(raw["id"]),
                kind=str(raw["kind"]),
                type_id=str(raw["type_id"]),
                endpoint_a=_ref(raw["a"], "a"),
                endpoint_b=_ref(raw["b"], "b"),
                note=str(raw.get("note", "")),
            )
            scene.connectors[connector.connector_id] = connector
        for raw in document.get("ledger", []):
            scene.face_ledger[(int(raw["block"]), str(raw["face"]))] = FaceOccupancy(
                attachment=_ref(raw.get("attachment"), "attachment"),
                connectors=[int(c) for c in raw.get("connectors", [])],
            )
        control = document.get("control") or {}
        scene.control = ControlState(
            bindings=[
                KeyBinding(str(b["key"]), str(b["action"]), int(b["block_id"]))
                for b in control.get("bindings", [])
            ],
            sequence=[
                ControlSequenceEntry(
                    float(e["time"]), str(e["key"]), float(e["hold_for"]), str(e.get("motion_note", ""))
                )
                for e in control.get("sequence", [])
            ],
            window=float(control.get("window", ControlState().window)),
        )
        scene.trajectory = [
            TrajectoryEntry(Action.from_dict(entry["action"]), ActionResult.from_dict(entry["result"]))
            for entry in document.get("trajectory", [])
        ]
    except UnknownBlockTypeError as e:
        raise ProtocolError(f"scene document uses an unknown block type: {e}")
    except (KeyError, TypeError, ValueError) as e:
        raise ProtocolError(f"malformed scene document: {e}")
    return scene


def trajectory_actions(document: Union[str, Dict[str, Any]]) -> List[Action]:
    """The logged actions of a native document, or of a bare JSON-lines action log."""
    if isinstance(document, dict):
        return [Action.from_dict(entry["action"]) for entry in document.get("trajectory", [])]
    text = document.strip()
    try:
        whole = json.loads(text)
    except json.JSONDecodeError:
        whole = None
    if isinstance(whole, dict) and whole.get("format") == NATIVE_FORMAT:
        return trajectory_actions(whole)
    actions = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            actions.append(Action.from_dict(raw.get("action", raw)))
        except (json.JSONDecodeError, KeyError, ValueError, AttributeError) as e:
            raise ProtocolError(f"action log line {number} is malformed: {e}")
    return actions


@retry_file_operation(max_retries=3, base_delay=0.5)
def save_scene(scene: Scene, catalog: Catalog, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_native(scene, catalog), encoding="utf-8")
    logger.debug(f"Saved scene with {len(scene.blocks)} blocks to {path}")
    return path


def load_scene(path: Union[str, Path], catalog: Catalog) -> Scene:
    return import_native(Path(path).read_text(encoding="utf-8"), catalog)


def _ext(tag: str) -> str:
    return f"{{{EXTENSION_NAMESPACE}}}{tag}"


def _xyz(parent: ET.Element, tag: str, values: Sequence[float]) -> ET.Element:
    return ET.SubElement(parent, tag, {axis: format_float(v, 6) for axis, v in zip("xyzw", values)})


def _transform(parent: ET.Element, pose: Pose) -> None:
    transform = ET.SubElement(parent, "Transform")
    _xyz(transform, "Position", convert_vector(pose.position))
    _xyz(transform, "Rotation", convert_quaternion(canonical_quat(pose.orientation)))
    _xyz(transform, "Scale", (1.0, 1.0, 1.0))


def _block_guid(scene_hash: str, element_id: str) -> str:
    return str(uuid.uuid5(GUID_NAMESPACE, f"{scene_hash}:{element_id}"))


def export_machine_file(
    scene: Scene,
    catalog: Catalog,
    name: str = "buildyard machine",
    builder: Optional[SceneBuilder] = None,
) -> str:
    """Machine markup for a finalized scene.

    One Block element per placed block and per connector. Fields whose
    meaning in the sandbox format is not confirmed (key bindings, connector
    endpoints, unverified type ids, the frame conversion) are written under
    the extension namespace.

    Raises:
        UnfinalizedScene: the scene has not reached the finalized phase
        UnsoundScene: overlapping blocks, a broken face ledger or an overlong connector
    """
    if scene.phase != Phase.FINALIZED:
        raise UnfinalizedScene(f"scene is in phase '{scene.phase.value}', export needs 'finalized'")
    problems = (builder or SceneBuilder(catalog)).check_invariants(scene)
    if problems:
        raise UnsoundScene(f"scene cannot be exported: {'; '.join(problems)}")

    digest = state_hash(scene)
    machine = ET.Element("Machine", {"version": MACHINE_VERSION, "name": name})
    global_el = ET.SubElement(machine, "Global")
    _xyz(global_el, "Position", (0.0, 0.0, 0.0))
    _xyz(global_el, "Rotation", (0.0, 0.0, 0.0, 1.0))
    ET.SubElement(
        machine,
        _ext("Frame"),
        {"source": "z-up right-handed", "target": "y-up left-handed", "verified": "false"},
    )
    ET.SubElement(machine, "Data")
    blocks_el = ET.SubElement(machine, "Blocks")

    bindings_by_block: Dict[int, List[KeyBinding]] = {}
    for binding in scene.control.bindings:
        bindings_by_block.setdefault(binding.block_id, []).append(binding)

    for block in sorted(scene.blocks.values(), key=lambda b: b.block_id):
        spec = block_spec(catalog, block.type_id)
        attributes = {"id": str(spec.export_id), "guid": _block_guid(digest, f"b{block.block_id}")}
        block_el = ET.SubElement(blocks_el, "Block", attributes)
        if not spec.export_verified:
            block_el.set(_ext("unverified"), "true")
        block_el.set(_ext("type"), block.type_id)
        block_el.set(_ext("block"), str(block.block_id))
        _transform(block_el, block.pose)
        data_el = ET.SubElement(block_el, "Data")
        if block.flipped:
            ET.SubElement(data_el, "Boolean", {"key": "flipped"}).text = "True"
        for binding in sorted(bindings_by_block.get(block.block_id, []), key=lambda b: (b.action, b.key)):
            ET.SubElement(
                data_el,
                _ext("KeyBinding"),
                {"action": binding.action, "key": binding.key, "code": str(UNITY_KEY_CODES[binding.key])},
            )

    for connector in sorted(scene.connectors.values(), key=lambda c: c.connector_id):
        spec = block_spec(catalog, connector.type_id)
        attributes = {"id": str(spec.export_id), "guid": _block_guid(digest, f"c{connector.connector_id}")}
        connector_el = ET.SubElement(blocks_el, "Block", attributes)
        if not spec.export_verified:
            connector_el.set(_ext("unverified"), "true")
        connector_el.set(_ext("type"), connector.type_id)
        connector_el.set(_ext("connector"), str(connector.connector_id))
        start = _endpoint(scene, catalog, connector.endpoint_a)
        end = _endpoint(scene, catalog, connector.endpoint_b)
        midpoint = tuple((a + b) / 2.0 for a, b in zip(start, end))
        _transform(connector_el, Pose(midpoint))
        data_el = ET.SubElement(connector_el, "Data")
        _xyz(data_el, _ext("Start"), convert_vector(start))
        _xyz(data_el, _ext("End"), convert_vector(end))

    ET.indent(machine, space="  ")
    text = ET.tostring(machine, encoding="unicode")
    logger.info(f"Exported machine file: {len(scene.blocks)} blocks, {len(scene.connectors)} connectors")
    return '<?xml version="1.0" encoding="utf-8"?>\n' + text + "\n"


def _endpoint(scene: Scene, catalog: Catalog, ref) -> List[float]:
    block = scene.blocks[ref[0]]
    face = block_spec(catalog, block.type_id).face(ref[1])
    local = face.local_center if face is not None else (0.0, 0.0, 0.0)
    return [float(c) for c in block.pose.apply(local)]
