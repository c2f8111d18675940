"""Desk-scale surrogate evaluators and metric aggregation.

These are simplified stand-ins for a full rigid-body simulation. They keep the
indicator + threshold decision structure of each task:

- lift level 1: analytic thrust-to-weight ratio
- lift levels 2 and 3: point-mass flight under constant gravity
- transport: planar no-slip wheel kinematics solved by least squares
- support: span geometry plus a min-cut load surrogate
"""

import logging
import math
from fractions import Fraction
from statistics import mean
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np

from models.control import ControlState
from models.metrics import (
    AggregateRow,
    LiftResult,
    MetricsRecord,
    SupportResult,
    Trajectory,
    TransportResult,
)
from models.scene import Scene
from models.task import TaskConfig
from services.control_service import ControlService
from services.scene_builder import SceneBuilder, part_count, state_hash
from utils.errors import EmptyInputError, EvaluationError, NoControlsError
from utils.geometry import aabb, sphere_obb_intersects

logger = logging.getLogger(__name__)

Number = Union[float, Fraction]

MAX_AXLE_TILT_DEG = 5.0
GRAVITY = 1.0
SNAP_TOLERANCE = 1e-9


def _exact(value: float) -> Fraction:
    return Fraction(str(value))


def _snap(component: float) -> Fraction:
    """Exact value for near-integer direction components, decimal otherwise."""
    nearest = round(component)
    if abs(component - nearest) < SNAP_TOLERANCE:
        return Fraction(nearest)
    return Fraction(component)


def _point(values: Sequence[float]) -> Tuple[float, float, float]:
    x, y, z = (float(v) for v in values)
    return (x, y, z)


def _planar_step(v_body: np.ndarray, omega: float, heading: float, dt: float) -> Tuple[np.ndarray, float]:
    """Exact displacement for a constant body twist held over dt."""
    if abs(omega) < 1e-12:
        local = v_body * dt
    else:
        s = math.sin(omega * dt) / omega
        c = (1.0 - math.cos(omega * dt)) / omega
        local = np.array([s * v_body[0] - c * v_body[1], c * v_body[0] + s * v_body[1]])
    cos_h, sin_h = math.cos(heading), math.sin(heading)
    world = np.array([cos_h * local[0] - sin_h * local[1], sin_h * local[0] + cos_h * local[1]])
    return world, heading + omega * dt


class Evaluator:
    """Task evaluators over scene snapshots."""

    def __init__(self, builder: SceneBuilder):
        self.builder = builder
        self.catalog = builder.catalog
        config = builder.config
        self.sample_period = float(config.get("sample_period", 0.04))
        self.min_bearing = float(config.get("min_bearing", 0.5))
        self.strengths = {
            "attachment": float(config.get("attachment_strength", 100.0)),
            "brace": float(config.get("brace_strength", 60.0)),
            "winch": float(config.get("winch_strength", 20.0)),
        }

    # Mass and thrust

    def total_mass(self, scene: Scene, exact: bool = False) -> Number:
        """Sum of catalog masses over blocks and connectors."""
        masses = [self.catalog.blocks[b.type_id].mass for b in scene.blocks.values()]
        masses += [self.catalog.blocks[c.type_id].mass for c in scene.connectors.values()]
        if exact:
            return sum((_exact(m) for m in masses), Fraction(0))
        return float(sum(masses))

    def mass_centre(self, scene: Scene) -> np.ndarray:
        weighted = np.zeros(3)
        total = 0.0
        for block in scene.blocks.values():
            mass = self.catalog.blocks[block.type_id].mass
            weighted += mass * np.asarray(block.pose.position)
            total += mass
        for connector in scene.connectors.values():
            mass = self.catalog.blocks[connector.type_id].mass
            ends = [
                self.builder.face_frame(scene.blocks[b], f).world_center
                for b, f in (connector.endpoint_a, connector.endpoint_b)
            ]
            weighted += mass * (np.asarray(ends[0]) + np.asarray(ends[1])) / 2.0
            total += mass
        return weighted / total

    def _blocks_of(self, scene: Scene, predicate) -> List:
        return [
            b
            for b in sorted(scene.blocks.values(), key=lambda b: b.block_id)
            if predicate(self.catalog.blocks[b.type_id])
        ]

    def heated_cannons(self, scene: Scene) -> Set[int]:
        """Cannons with an end third inside any heat sphere."""
        spheres = [
            (center, self.catalog.blocks[torch.type_id].physical.heat_radius)
            for torch in self._blocks_of(scene, lambda s: s.is_heater)
            for center in self.builder.heat_centers(torch)
        ]
        heated = set()
        for cannon in self._blocks_of(scene, lambda s: s.is_cannon):
            zones = self.builder.heat_zones(cannon)
            if any(
                sphere_obb_intersects(center, radius, zone)
                for center, radius in spheres
                for zone in zones
            ):
                heated.add(cannon.block_id)
        return heated

    def cannon_thrust(self, scene: Scene, block, heated: Set[int], exact: bool = False):
        """Thrust vector of one firing cannon, opposite to its jet."""
        physical = self.catalog.blocks[block.type_id].physical
        direction = -self.builder.functional_axis(block)
        if exact:
            magnitude = _exact(physical.recoil_force)
            if block.block_id in heated:
                magnitude *= _exact(physical.steam_multiplier)
            return [magnitude * _snap(c) for c in direction]
        magnitude = physical.recoil_force
        if block.block_id in heated:
            magnitude *= physical.steam_multiplier
        return [magnitude * float(c) for c in direction]

    def net_thrust(
        self, scene: Scene, firing: Optional[Iterable[int]] = None, exact: bool = False
    ) -> List[Number]:
        heated = self.heated_cannons(scene)
        chosen = None if firing is None else set(firing)
        total: List[Number] = [Fraction(0)] * 3 if exact else [0.0, 0.0, 0.0]
        for cannon in self._blocks_of(scene, lambda s: s.is_cannon):
            if chosen is not None and cannon.block_id not in chosen:
                continue
            thrust = self.cannon_thrust(scene, cannon, heated, exact)
            total = [a + b for a, b in zip(total, thrust)]
        return total

    def thrust_and_twr(
        self, scene: Scene, firing: Optional[Iterable[int]] = None, exact: bool = False
    ) -> Tuple[Tuple[Number, Number, Number], Number]:
        """Net thrust of the firing cannons (all by default) and |F_z| / total mass.

        With exact=True every quantity is a Fraction built from the catalog's
        decimal constants.
        """
        thrust = self.net_thrust(scene, firing, exact)
        twr = abs(thrust[2]) / self.total_mass(scene, exact)
        return (thrust[0], thrust[1], thrust[2]), twr

    # Transport

    def _lowered_boxes(self, scene: Scene):
        boxes = {b.block_id: self.builder.block_obbs(b) for b in scene.blocks.values()}
        low, high = aabb(box for group in boxes.values() for box in group)
        return boxes, low, high

    def ground_wheels(self, scene: Scene, z_shift: float) -> List[int]:
        """Wheels whose rim touches z = 0 with an axle horizontal within 5 degrees."""
        grounded = []
        max_tilt = math.sin(math.radians(MAX_AXLE_TILT_DEG))
        for wheel in self._blocks_of(scene, lambda s: s.is_wheel):
            spec = self.catalog.blocks[wheel.type_id]
            axle = self.builder.wheel_axle(wheel)
            if abs(axle[2]) > max_tilt:
                continue
            radius = max(spec.shape[0], spec.shape[1]) / 2.0
            lowest = wheel.pose.position[2] + z_shift - radius * math.sqrt(max(0.0, 1 - axle[2] ** 2))
            if abs(lowest) <= self.builder.contact_tolerance:
                grounded.append(wheel.block_id)
        return grounded

    def simulate_transport(
        self,
        scene: Scene,
        controls: Optional[ControlState] = None,
        duration: float = 30.0,
        dt: Optional[float] = None,
        cargo_drop: Optional[Sequence[float]] = None,
        subject: str = "machine",
        target: Sequence[float] = (10.0, 10.0),
    ) -> TransportResult:
        """Planar kinematic drive; reports the max xy displacement of the subject.

        Raises:
            NoControlsError: no bindings or no sequence
        """
        controls = controls if controls is not None else scene.control
        if not controls.bindings or not controls.sequence:
            raise NoControlsError("transport needs key bindings and a control sequence")
        dt = dt or self.sample_period
        duration = min(float(duration), controls.window)

        boxes, low, high = self._lowered_boxes(scene)
        z_shift = -float(low[2])
        centre = self.mass_centre(scene)
        centre_xy = centre[:2]

        cargo_carried = False
        cargo_offset = None
        if subject == "cargo":
            drop = np.asarray(cargo_drop if cargo_drop is not None else (0.0, 0.0), dtype=float)[:2]
            # Placement puts the mass centre at the origin
            footprint_low = low[:2] - centre_xy
            footprint_high = high[:2] - centre_xy
            cargo_carried = bool(np.all(drop >= footprint_low) and np.all(drop <= footprint_high))
            cargo_offset = drop

        wheels = self.ground_wheels(scene, z_shift)
        trajectory = Trajectory(dt)
        result = TransportResult(
            trajectory=trajectory,
            max_displacement=0.0,
            subject=subject,
            ground_wheels=wheels,
            no_ground_wheels=not wheels,
            cargo_carried=cargo_carried,
        )
        start_z = float(centre[2] + z_shift)

        rows = []
        for wheel_id in wheels:
            wheel = scene.blocks[wheel_id]
            spec = self.catalog.blocks[wheel.type_id]
            diameter = max(spec.shape[0], spec.shape[1])
            rim_speed = spec.physical.wheel_rpm * math.pi * diameter / 60.0
            d = self.builder.roll_direction(wheel)[:2]
            n = np.array([-d[1], d[0]])
            r = np.asarray(wheel.pose.position[:2]) - centre_xy
            lever = np.array([-r[1], r[0]])
            rows.append((wheel_id, rim_speed, d, n, lever))

        position = np.zeros(2)
        heading = 0.0
        steps = int(round(duration / dt))
        target_xy = np.asarray(target, dtype=float)
        subject_points = []

        def subject_xy() -> np.ndarray:
            if subject != "cargo":
                return position.copy()
            if not cargo_carried:
                return cargo_offset.copy()
            cos_h, sin_h = math.cos(heading), math.sin(heading)
            rotated = np.array(
                [cos_h * cargo_offset[0] - sin_h * cargo_offset[1], sin_h * cargo_offset[0] + cos_h * cargo_offset[1]]
            )
            return position + rotated

        for i in range(steps + 1):
            t = i * dt
            point = subject_xy()
            subject_points.append(point)
            trajectory.record(
                t,
                machine=(float(position[0]), float(position[1]), start_z),
                **({"cargo": (float(point[0]), float(point[1]), start_z)} if subject == "cargo" else {}),
            )
            if i == steps or not rows:
                continue
            active = ControlService.active_actions_at(controls, t)
            matrix = []
            rhs = []
            for wheel_id, rim_speed, d, n, lever in rows:
                command = int((wheel_id, "spin_forward") in active) - int(
                    (wheel_id, "spin_backward") in active
                )
                matrix.append([d[0], d[1], float(lever @ d)])
                rhs.append(command * rim_speed)
                matrix.append([n[0], n[1], float(lever @ n)])
                rhs.append(0.0)
            solution, *_ = np.linalg.lstsq(np.array(matrix), np.array(rhs), rcond=None)
            delta, heading = _planar_step(solution[:2], float(solution[2]), heading, dt)
            position = position + delta

        start = subject_points[0]
        distances = [float(np.linalg.norm(p - start)) for p in subject_points]
        result.max_displacement = max(distances) if rows else 0.0
        result.closest_approach = min(float(np.linalg.norm(p - target_xy)) for p in subject_points)
        line = target_xy - start
        line_norm = float(np.linalg.norm(line))
        if line_norm > 0:
            deviations = [
                abs(float(line[0] * (p - start)[1] - line[1] * (p - start)[0])) / line_norm
                for p in subject_points
            ]
            result.mean_deviation = float(mean(deviations))
        logger.debug(
            f"Transport: {len(wheels)} ground wheels, max displacement {result.max_displacement:.3f}"
        )
        return result

    # Support

    def _connectivity_graph(self, scene: Scene) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(scene.blocks)

        def add(a: int, b: int, capacity: float) -> None:
            if graph.has_edge(a, b):
                graph[a][b]["capacity"] += capacity
            else:
                graph.add_edge(a, b, capacity=capacity)

        joints = set()
        for (block_id, face_id), occ in scene.face_ledger.items():
            if occ.attachment is not None:
                joints.add(frozenset({(block_id, face_id), occ.attachment}))
        for block in scene.blocks.values():
            if block.mounted_on is not None:
                joints.add(frozenset({block.mounted_on, (block.block_id, block.mount_face or "mount")}))
        for joint in joints:
            ends = sorted(joint)
            if len(ends) == 2 and ends[0][0] != ends[1][0]:
                add(ends[0][0], ends[1][0], self.strengths["attachment"])
        for connector in scene.connectors.values():
            add(connector.endpoint_a[0], connector.endpoint_b[0], self.strengths[connector.kind])
        return graph

    def evaluate_support(
        self,
        scene: Scene,
        gap_width: float,
        terrain_height: float = 0.0,
        cargo_footprint: Sequence[float] = (2.5, 2.5),
    ) -> SupportResult:
        """Span check over a gap along y and a min-cut load capacity."""
        boxes = {b.block_id: aabb(self.builder.block_obbs(b)) for b in scene.blocks.values()}
        low, high = aabb(box for b in scene.blocks.values() for box in self.builder.block_obbs(b))
        centre = (low[:2] + high[:2]) / 2.0
        half_gap = gap_width / 2.0
        tol = self.builder.contact_tolerance

        overhang = {"north": {}, "south": {}}
        for block_id, (b_low, b_high) in boxes.items():
            y_low = b_low[1] - centre[1]
            y_high = b_high[1] - centre[1]
            if y_high > half_gap + tol:
                overhang["north"][block_id] = (y_high - half_gap, float(b_low[2]))
            if y_low < -half_gap - tol:
                overhang["south"][block_id] = (-half_gap - y_low, float(b_low[2]))

        result = SupportResult(spans=False, load_capacity=0.0, rest_height=terrain_height)
        all_bottoms = [z for side in overhang.values() for _, z in side.values()]
        if all_bottoms:
            rest = min(all_bottoms)
            contacts = {
                side: sorted(b for b, (_, z) in members.items() if z <= rest + tol)
                for side, members in overhang.items()
            }
            result.north_contacts = contacts["north"]
            result.south_contacts = contacts["south"]
            result.bearing_north = max((overhang["north"][b][0] for b in contacts["north"]), default=0.0)
            result.bearing_south = max((overhang["south"][b][0] for b in contacts["south"]), default=0.0)

        half_cargo = np.asarray(cargo_footprint, dtype=float) / 2.0
        for b_low, b_high in boxes.values():
            lo = b_low[:2] - centre
            hi = b_high[:2] - centre
            if np.all(np.minimum(hi, half_cargo) - np.maximum(lo, -half_cargo) > tol):
                result.cargo_caught = True
                break

        result.spans = (
            bool(result.north_contacts)
            and bool(result.south_contacts)
            and result.bearing_north >= self.min_bearing - tol
            and result.bearing_south >= self.min_bearing - tol
        )
        if not (result.spans and result.cargo_caught):
            return result

        graph = self._connectivity_graph(scene)
        for side in ("north", "south"):
            graph.add_node(side)
            for block_id in getattr(result, f"{side}_contacts"):
                # No capacity attribute: terrain contact is unbounded
                graph.add_edge(side, block_id)
        try:
            result.load_capacity = float(nx.minimum_cut_value(graph, "north", "south"))
        except nx.NetworkXUnbounded:
            # One piece rests on both sides
            result.load_capacity = self.strengths["attachment"]
        logger.debug(f"Support: spans={result.spans}, capacity={result.load_capacity}")
        return result

    # Lift

    def simulate_lift(
        self,
        scene: Scene,
        controls: Optional[ControlState] = None,
        duration: float = 30.0,
        dt: Optional[float] = None,
        gravity: float = GRAVITY,
    ) -> LiftResult:
        """Point-mass flight at the mass centre under net cannon thrust.

        Without controls every cannon fires for the whole window.
        """
        dt = dt or self.sample_period
        mass = self.total_mass(scene)
        cannons = [c.block_id for c in self._blocks_of(scene, lambda s: s.is_cannon)]
        window = controls.window if controls is not None else 30.0
        steps = int(round(min(float(duration), window) / dt))
        start = self.mass_centre(scene)

        position = np.zeros(3)
        velocity = np.zeros(3)
        trajectory = Trajectory(dt)
        max_height = 0.0
        max_speed = 0.0
        lateral = []
        thrust_cache: Dict[frozenset, np.ndarray] = {}

        for i in range(steps + 1):
            t = i * dt
            trajectory.record(t, machine=_point(start + position))
            lateral.append(float(np.linalg.norm(position[:2])))
            max_height = max(max_height, float(position[2]))
            max_speed = max(max_speed, float(np.linalg.norm(velocity)))
            if i == steps:
                break
            if controls is None:
                firing = frozenset(cannons)
            else:
                firing = frozenset(
                    block_id
                    for block_id, action in ControlService.active_actions_at(controls, t)
                    if action == "fire"
                )
            if firing not in thrust_cache:
                thrust_cache[firing] = np.asarray(self.net_thrust(scene, firing), dtype=float)
            accel = thrust_cache[firing] / mass - np.array([0.0, 0.0, gravity])
            if position[2] <= 0.0 and accel[2] <= 0.0 and velocity[2] <= 0.0:
                # Resting on the ground
                position[2] = 0.0
                velocity[:] = 0.0
                continue
            position = position + velocity * dt + 0.5 * accel * dt * dt
            velocity = velocity + accel * dt
            if position[2] < 0.0:
                position[2] = 0.0
                velocity[:] = 0.0

        return LiftResult(
            trajectory=trajectory,
            max_height=max_height,
            max_speed=max_speed,
            lateral_deviation=float(mean(lateral)),
            final_lateral_drift=lateral[-1],
        )

    # Task dispatch

    def evaluate_task(self, scene: Scene, task: TaskConfig) -> MetricsRecord:
        """Compute the task indicator and apply the success rule."""
        protocol = task.protocol
        details: Dict[str, object] = {}
        indicator = 0.0

        if task.task == "transport":
            try:
                result = self.simulate_transport(
                    scene,
                    duration=task.duration,
                    cargo_drop=protocol.get("cargo_drop"),
                    subject=task.indicator_subject,
                    target=protocol.get("target", (10.0, 10.0)),
                )
                indicator = result.max_displacement
                details.update(
                    ground_wheels=result.ground_wheels,
                    no_ground_wheels=result.no_ground_wheels,
                    cargo_carried=result.cargo_carried,
                    closest_approach=result.closest_approach,
                    mean_deviation=result.mean_deviation,
                )
            except NoControlsError as e:
                details["failure"] = f"no_controls: {e}"
        elif task.task == "support":
            result = self.evaluate_support(
                scene,
                protocol["gap_width"],
                protocol.get("terrain_height", 0.0),
                protocol.get("cargo_footprint", (2.5, 2.5)),
            )
            indicator = result.load_capacity
            details.update(
                spans=result.spans,
                cargo_caught=result.cargo_caught,
                bearing_north=result.bearing_north,
                bearing_south=result.bearing_south,
            )
        elif task.task == "lift":
            if task.indicator == "twr":
                _, twr = self.thrust_and_twr(scene)
                indicator = float(twr)
            else:
                controls = scene.control if task.requires_controls else None
                result = self.simulate_lift(
                    scene,
                    controls=controls,
                    duration=task.duration,
                    gravity=protocol.get("gravity", GRAVITY),
                )
                indicator = result.max_height
                details.update(
                    max_speed=result.max_speed,
                    lateral_deviation=result.lateral_deviation,
                )
        else:
            raise EvaluationError(f"unknown task kind {task.task}")

        indicator = max(0.0, float(indicator))
        return MetricsRecord(
            task_id=task.task_id,
            level=task.level,
            parts=part_count(scene, starting_type=self.catalog.starting_type),
            success=task.succeeded(indicator),
            indicator=indicator,
            state_hash=state_hash(scene),
            details=details,
        )


def aggregate(records: List[MetricsRecord]) -> AggregateRow:
    """Success rate (percent) and means over n samples of one task.

    Raises:
        EmptyInputError: no records
        EvaluationError: records of different tasks
    """
    if not records:
        raise EmptyInputError("cannot aggregate an empty record list")
    tasks = {(r.task_id, r.level) for r in records}
    if len(tasks) != 1:
        raise EvaluationError(f"records mix tasks: {sorted(tasks)}")
    task_id, level = tasks.pop()
    n = len(records)
    reasons: Dict[str, int] = {}
    for record in records:
        if record.failure_reason:
            reasons[record.failure_reason] = reasons.get(record.failure_reason, 0) + 1
    return AggregateRow(
        task_id=task_id,
        level=level,
        n=n,
        success_rate=100.0 * sum(1 for r in records if r.success) / n,
        mean_parts=float(mean(r.parts for r in records)),
        mean_indicator=float(mean(r.indicator for r in records)),
        mean_input_tokens=float(mean(r.cost.input_tokens for r in records)),
        mean_output_tokens=float(mean(r.cost.output_tokens for r in records)),
        mean_llm_requests=float(mean(r.cost.llm_requests for r in records)),
        failure_reasons=reasons,
    )
