"""Block catalog data models."""

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional, Tuple

from utils.geometry import Vec3


@dataclass(frozen=True)
class FaceSpec:
    """A labeled attachment site on a block, in block-local coordinates."""

    face_id: str
    local_center: Vec3
    local_normal: Vec3
    attachable: bool = True


@dataclass(frozen=True)
class PhysicalParams:
    """Optional per-type physical and functional constants."""

    wheel_rpm: Optional[float] = None
    recoil_force: Optional[float] = None  # mass units at unit gravity
    steam_multiplier: Optional[float] = None
    heat_radius: Optional[float] = None
    heat_offsets: Tuple[Vec3, ...] = ()
    connector_kind: str = "none"  # brace | winch | none


@dataclass(frozen=True)
class MountSpec:
    """How a block seats on a parent face.

    The mount normal is mated anti-parallel to the parent face normal; the
    reference axis is turned toward the requested pointing direction.
    """

    local_center: Vec3
    local_normal: Vec3
    local_reference: Vec3
    face_id: Optional[str] = None


@dataclass(frozen=True)
class CollisionBox:
    """Block-local axis-aligned collision box."""

    center: Vec3
    half_extents: Vec3


@dataclass(frozen=True)
class FunctionalSpec:
    """Functional axis of a block (wheel axle, cannon jet)."""

    axis: Optional[Vec3] = None
    reversible: bool = False
    outlet: Optional[Vec3] = None
    inlet: Optional[Vec3] = None


@dataclass(frozen=True)
class BlockSpec:
    """Immutable catalog entry."""

    type_id: str
    shape: Vec3
    mass: float
    faces: Tuple[FaceSpec, ...]
    physical: PhysicalParams
    control_actions: Tuple[str, ...]
    init_description: str
    mount: Optional[MountSpec] = None
    collision: Tuple[CollisionBox, ...] = ()
    functional: FunctionalSpec = field(default_factory=FunctionalSpec)
    export_id: int = -1
    export_verified: bool = False

    def face(self, face_id: str) -> Optional[FaceSpec]:
        for spec in self.faces:
            if spec.face_id == face_id:
                return spec
        return None

    @property
    def is_connector(self) -> bool:
        return self.physical.connector_kind != "none"

    @property
    def is_wheel(self) -> bool:
        return self.physical.wheel_rpm is not None

    @property
    def is_cannon(self) -> bool:
        return self.physical.recoil_force is not None

    @property
    def is_heater(self) -> bool:
        return self.physical.heat_radius is not None


@dataclass(frozen=True)
class Catalog:
    """Read-only catalog keyed by type_id."""

    version: str
    blocks: Mapping[str, BlockSpec]
    content_hash: str
    starting_type: str = "StartingBlock"

    def __post_init__(self):
        object.__setattr__(self, "blocks", MappingProxyType(dict(self.blocks)))

    def __contains__(self, type_id: object) -> bool:
        return type_id in self.blocks

    @property
    def type_ids(self) -> Tuple[str, ...]:
        return tuple(sorted(self.blocks))
