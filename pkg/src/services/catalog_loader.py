"""Loading and validation of the block catalog and the prose template asset."""

import hashlib
import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from models.catalog import (
    BlockSpec,
    Catalog,
    CollisionBox,
    FaceSpec,
    FunctionalSpec,
    MountSpec,
    PhysicalParams,
)
from utils.errors import CatalogValidationError, ParseError, UnknownBlockTypeError

logger = logging.getLogger(__name__)

SUPPORTED_VERSIONS = ("1.0",)

REQUIRED_TYPES = (
    "StartingBlock",
    "SmallWoodenBlock",
    "PoweredWheel",
    "Torch",
    "WaterCannon",
    "Brace",
    "Winch",
)

CONNECTOR_KINDS = ("brace", "winch", "none")

UNIT_TOLERANCE = 1e-9


def _triple(value: Any, type_id: str, field_name: str):
    try:
        x, y, z = (float(v) for v in value)
    except (TypeError, ValueError):
        raise CatalogValidationError(type_id, field_name, "expected three numbers")
    return (x, y, z)


def _unit(value: Any, type_id: str, field_name: str):
    vec = _triple(value, type_id, field_name)
    if abs(float(np.linalg.norm(vec)) - 1.0) > UNIT_TOLERANCE:
        raise CatalogValidationError(type_id, field_name, "must be a unit vector")
    return vec


def _positive(value: Any, type_id: str, field_name: str) -> float:
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise CatalogValidationError(type_id, field_name, "expected a number")
    if number <= 0:
        raise CatalogValidationError(type_id, field_name, "must be > 0")
    return number


def _parse_face(raw: Dict, type_id: str, half) -> FaceSpec:
    face_id = str(raw.get("face_id", "")).strip()
    if not face_id:
        raise CatalogValidationError(type_id, "faces", "face_id is required")
    center = _triple(raw.get("local_center"), type_id, f"faces.{face_id}.local_center")
    normal = _unit(raw.get("local_normal"), type_id, f"faces.{face_id}.local_normal")

    c = np.abs(np.asarray(center))
    if np.any(c > half + UNIT_TOLERANCE) or not np.any(np.isclose(c, half, atol=UNIT_TOLERANCE)):
        raise CatalogValidationError(
            type_id, f"faces.{face_id}.local_center", "must lie on the block boundary"
        )
    nudged = np.abs(np.asarray(center) + 1e-6 * np.asarray(normal))
    if not np.any(nudged > half):
        raise CatalogValidationError(
            type_id, f"faces.{face_id}.local_normal", "must point outward"
        )
    return FaceSpec(face_id, center, normal, bool(raw.get("attachable", True)))


def _parse_physical(raw: Dict, type_id: str) -> PhysicalParams:
    values: Dict[str, Any] = {}
    for key in ("wheel_rpm", "recoil_force", "steam_multiplier", "heat_radius"):
        if raw.get(key) is not None:
            values[key] = _positive(raw[key], type_id, f"physical.{key}")
    if "steam_multiplier" in values and "recoil_force" not in values:
        raise CatalogValidationError(
            type_id, "physical.steam_multiplier", "requires recoil_force"
        )
    offsets = tuple(
        _triple(p, type_id, "physical.heat_offsets") for p in raw.get("heat_offsets", [])
    )
    kind = str(raw.get("connector_kind", "none"))
    if kind not in CONNECTOR_KINDS:
        raise CatalogValidationError(
            type_id, "physical.connector_kind", f"must be one of {', '.join(CONNECTOR_KINDS)}"
        )
    return PhysicalParams(heat_offsets=offsets, connector_kind=kind, **values)


def _parse_mount(raw: Optional[Dict], type_id: str, face_ids) -> Optional[MountSpec]:
    if not raw:
        return None
    normal = _unit(raw.get("local_normal"), type_id, "mount.local_normal")
    reference = _unit(raw.get("local_reference"), type_id, "mount.local_reference")
    if abs(float(np.dot(normal, reference))) > UNIT_TOLERANCE:
        raise CatalogValidationError(
            type_id, "mount.local_reference", "must be perpendicular to the mount normal"
        )
    face_id = raw.get("face_id")
    if face_id is not None and face_id not in face_ids:
        raise CatalogValidationError(type_id, "mount.face_id", f"unknown face {face_id}")
    return MountSpec(
        local_center=_triple(raw.get("local_center"), type_id, "mount.local_center"),
        local_normal=normal,
        local_reference=reference,
        face_id=face_id,
    )


def _parse_block(raw: Dict) -> BlockSpec:
    if not isinstance(raw, dict):
        raise ParseError("every catalog entry must be an object")
    type_id = str(raw.get("type_id", "")).strip()
    if not type_id:
        raise ParseError("catalog entry without type_id")

    shape = tuple(
        _positive(v, type_id, "shape") for v in _triple(raw.get("shape"), type_id, "shape")
    )
    mass = _positive(raw.get("mass"), type_id, "mass")
    half = np.asarray(shape) / 2.0

    faces = tuple(_parse_face(f, type_id, half) for f in raw.get("faces", []))
    face_ids = [f.face_id for f in faces]
    if len(set(face_ids)) != len(face_ids):
        raise CatalogValidationError(type_id, "faces", "face ids must be unique")

    actions = tuple(str(a) for a in raw.get("control_actions", []))
    if len(set(actions)) != len(actions):
        raise CatalogValidationError(type_id, "control_actions", "action names must be unique")

    collision_raw = raw.get("collision")
    if collision_raw:
        collision = tuple(
            CollisionBox(
                _triple(box.get("center"), type_id, "collision.center"),
                tuple(
                    _positive(v, type_id, "collision.half_extents")
                    for v in _triple(box.get("half_extents"), type_id, "collision.half_extents")
                ),
            )
            for box in collision_raw
        )
    else:
        collision = (CollisionBox((0.0, 0.0, 0.0), tuple(float(h) for h in half)),)

    functional_raw = raw.get("functional") or {}
    functional = FunctionalSpec(
        axis=_unit(functional_raw["axis"], type_id, "functional.axis")
        if functional_raw.get("axis") is not None
        else None,
        reversible=bool(functional_raw.get("reversible", False)),
        outlet=_triple(functional_raw["outlet"], type_id, "functional.outlet")
        if functional_raw.get("outlet") is not None
        else None,
        inlet=_triple(functional_raw["inlet"], type_id, "functional.inlet")
        if functional_raw.get("inlet") is not None
        else None,
    )
    if functional.reversible and functional.axis is None:
        raise CatalogValidationError(type_id, "functional.reversible", "requires an axis")

    export = raw.get("export") or {}
    return BlockSpec(
        type_id=type_id,
        shape=shape,
        mass=mass,
        faces=faces,
        physical=_parse_physical(raw.get("physical") or {}, type_id),
        control_actions=actions,
        init_description=str(raw.get("init_description", "")),
        mount=_parse_mount(raw.get("mount"), type_id, face_ids),
        collision=collision,
        functional=functional,
        export_id=int(export.get("id", -1)),
        export_verified=bool(export.get("verified", False)),
    )


def _spec_to_dict(spec: BlockSpec) -> Dict[str, Any]:
    physical: Dict[str, Any] = {}
    for key in ("wheel_rpm", "recoil_force", "steam_multiplier", "heat_radius"):
        value = getattr(spec.physical, key)
        if value is not None:
            physical[key] = value
    if spec.physical.heat_offsets:
        physical["heat_offsets"] = [list(p) for p in spec.physical.heat_offsets]
    if spec.physical.connector_kind != "none":
        physical["connector_kind"] = spec.physical.connector_kind

    functional: Dict[str, Any] = {}
    if spec.functional.axis is not None:
        functional["axis"] = list(spec.functional.axis)
        functional["reversible"] = spec.functional.reversible
    if spec.functional.outlet is not None:
        functional["outlet"] = list(spec.functional.outlet)
    if spec.functional.inlet is not None:
        functional["inlet"] = list(spec.functional.inlet)

    mount = None
    if spec.mount is not None:
        mount = {
            "local_center": list(spec.mount.local_center),
            "local_normal": list(spec.mount.local_normal),
            "local_reference": list(spec.mount.local_reference),
        }
        if spec.mount.face_id is not None:
            mount["face_id"] = spec.mount.face_id

    return {
        "type_id": spec.type_id,
        "shape": list(spec.shape),
        "mass": spec.mass,
        "faces": [
            {
                "face_id": f.face_id,
                "local_center": list(f.local_center),
                "local_normal": list(f.local_normal),
                "attachable": f.attachable,
            }
            for f in spec.faces
        ],
        "physical": physical,
        "control_actions": list(spec.control_actions),
        "init_description": spec.init_description,
        "mount": mount,
        "collision": [
            {"center": list(b.center), "half_extents": list(b.half_extents)}
            for b in spec.collision
        ],
        "functional": functional,
        "export": {"id": spec.export_id, "verified": spec.export_verified},
    }


def _content_hash(version: str, starting_type: str, blocks: Dict[str, BlockSpec]) -> str:
    payload = {
        "version": version,
        "starting_type": starting_type,
        "blocks": [_spec_to_dict(blocks[t]) for t in sorted(blocks)],
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_catalog(document: Union[str, Dict[str, Any]]) -> Catalog:
    """Parse and validate a catalog document.

    Args:
        document: JSON text or an already decoded mapping

    Returns:
        Read-only catalog keyed by type_id
    """
    if isinstance(document, str):
        if not document.strip():
            raise ParseError("empty catalog document")
        try:
            data = json.loads(document)
        except json.JSONDecodeError as e:
            raise ParseError(f"catalog is not valid JSON: {e}")
    else:
        data = document

    if not isinstance(data, dict):
        raise ParseError("catalog document must be an object")

    version = str(data.get("version", ""))
    if not version:
        raise ParseError("catalog version is required")
    if version not in SUPPORTED_VERSIONS:
        raise ParseError(f"unsupported catalog version {version}")

    raw_blocks = data.get("blocks")
    if not isinstance(raw_blocks, list) or not raw_blocks:
        raise ParseError("catalog has no blocks")

    blocks: Dict[str, BlockSpec] = {}
    for raw in raw_blocks:
        spec = _parse_block(raw)
        if spec.type_id in blocks:
            raise CatalogValidationError(spec.type_id, "type_id", "duplicate type")
        blocks[spec.type_id] = spec

    missing = [t for t in REQUIRED_TYPES if t not in blocks]
    if missing:
        raise CatalogValidationError(missing[0], "type_id", "required block type missing")

    starting_type = str(data.get("starting_type", "StartingBlock"))
    if starting_type not in blocks:
        raise CatalogValidationError(starting_type, "starting_type", "unknown type")

    content_hash = _content_hash(version, starting_type, blocks)
    logger.debug(f"Loaded catalog v{version} with {len(blocks)} block types")
    return Catalog(version, blocks, content_hash, starting_type)


def load_catalog_file(path: Union[str, Path]) -> Catalog:
    """Read and load a catalog from disk."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read catalog {path}: {e}")
    return load_catalog(text)


def serialize_catalog(catalog: Catalog) -> str:
    """Deterministic JSON text for a catalog."""
    payload = {
        "schema": "buildyard-catalog",
        "version": catalog.version,
        "starting_type": catalog.starting_type,
        "blocks": [_spec_to_dict(catalog.blocks[t]) for t in sorted(catalog.blocks)],
    }
    return json.dumps(payload, sort_keys=True, indent=2)


def block_spec(catalog: Catalog, type_id: str) -> BlockSpec:
    """Look up a block type, raising UnknownBlockType if absent."""
    spec = catalog.blocks.get(type_id)
    if spec is None:
        raise UnknownBlockTypeError(
            {"type_id": type_id, "available": ", ".join(catalog.type_ids)}
        )
    return spec


@lru_cache(maxsize=8)
def _read_templates(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def load_templates(path: Union[str, Path, None] = None) -> Dict[str, Dict[str, str]]:
    """Load the prose template asset (errors, results, descriptions)."""
    if path is None:
        from utils.config import load_config

        path = load_config()["templates_path"]
    try:
        data = json.loads(_read_templates(str(path)))
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot load templates {path}: {e}")
    for section in ("errors", "results", "describe"):
        if section not in data:
            raise ParseError(f"templates asset misses the '{section}' section")
    return data


def fmt_number(value: float) -> str:
    """Compact number formatting for prose (2, 0.25, 1.5)."""
    return f"{float(value):g}"


def describe_block_type(
    catalog: Catalog, type_id: str, templates: Optional[Dict[str, Dict[str, str]]] = None
) -> str:
    """Natural-language summary of a catalog entry."""
    spec = block_spec(catalog, type_id)
    t = (templates or load_templates())["describe"]
    p = spec.physical

    constants = []
    if p.wheel_rpm is not None:
        diameter = max(spec.shape[0], spec.shape[1])
        rim_speed = p.wheel_rpm * np.pi * diameter / 60.0
        constants.append(
            t["type_wheel"].format(rpm=fmt_number(p.wheel_rpm), rim_speed=f"{rim_speed:.3f}")
        )
    if p.recoil_force is not None:
        multiplier = p.steam_multiplier or 1.0
        constants.append(
            t["type_cannon"].format(
                recoil=fmt_number(p.recoil_force),
                multiplier=fmt_number(multiplier),
                steam=fmt_number(round(p.recoil_force * multiplier, 9)),
            )
        )
    if p.heat_radius is not None:
        constants.append(t["type_heater"].format(radius=fmt_number(p.heat_radius)))
    if p.connector_kind != "none":
        constants.append(t["type_connector"].format(kind=p.connector_kind))

    faces = ", ".join(f.face_id for f in spec.faces if f.attachable) or t["none"]
    controls = (
        t["type_controls"].format(actions=", ".join(spec.control_actions))
        if spec.control_actions
        else t["type_no_controls"]
    )
    return t["type_header"].format(
        type_id=spec.type_id,
        description=spec.init_description,
        shape=" x ".join(fmt_number(v) for v in spec.shape),
        mass=fmt_number(spec.mass),
        faces=faces,
        constants=" ".join(constants),
        controls=controls,
    ).replace("  ", " ").strip()
