"""Pose algebra and collision kernel.

World frame: +x east, +y north, +z up. Quaternions are (w, x, y, z) tuples.
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

Vec3 = Tuple[float, float, float]
Quat = Tuple[float, float, float, float]

IDENTITY_QUAT: Quat = (1.0, 0.0, 0.0, 0.0)

COMPASS_VECTORS = {
    "top": (0.0, 0.0, 1.0),
    "bottom": (0.0, 0.0, -1.0),
    "north": (0.0, 1.0, 0.0),
    "south": (0.0, -1.0, 0.0),
    "east": (1.0, 0.0, 0.0),
    "west": (-1.0, 0.0, 0.0),
}

# Pointing words accept "up"/"down" as well as the face names
DIRECTION_WORDS = {
    **COMPASS_VECTORS,
    "up": (0.0, 0.0, 1.0),
    "down": (0.0, 0.0, -1.0),
}

AXIS_ALIGNMENT_TOLERANCE = 1e-6


def _vec(values: Iterable[float]) -> Vec3:
    x, y, z = (float(v) for v in values)
    return (x, y, z)


def quat_normalize(q: Sequence[float]) -> Quat:
    arr = np.asarray(q, dtype=float)
    norm = np.linalg.norm(arr)
    if norm == 0:
        raise ValueError("zero quaternion")
    w, x, y, z = (float(v) for v in arr / norm)
    return (w, x, y, z)


def quat_multiply(a: Sequence[float], b: Sequence[float]) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_conjugate(q: Sequence[float]) -> Quat:
    w, x, y, z = q
    return (w, -x, -y, -z)


def canonical_quat(q: Sequence[float]) -> Quat:
    """Return the representative with w >= 0 (first nonzero component positive when w = 0)."""
    w, x, y, z = (float(v) for v in q)
    for component in (w, x, y, z):
        if component > 0:
            return (w, x, y, z)
        if component < 0:
            return (-w, -x, -y, -z)
    return (w, x, y, z)


def quat_to_matrix(q: Sequence[float]) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> Quat:
    """Convert a rotation matrix to a unit quaternion (Shepperd's method)."""
    trace = m[0, 0] + m[1, 1] + m[2, 2]
    if trace > 0:
        s = math.sqrt(trace + 1.0) * 2
        q = (
            0.25 * s,
            (m[2, 1] - m[1, 2]) / s,
            (m[0, 2] - m[2, 0]) / s,
            (m[1, 0] - m[0, 1]) / s,
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = (
            (m[2, 1] - m[1, 2]) / s,
            0.25 * s,
            (m[0, 1] + m[1, 0]) / s,
            (m[0, 2] + m[2, 0]) / s,
        )
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = (
            (m[0, 2] - m[2, 0]) / s,
            (m[0, 1] + m[1, 0]) / s,
            0.25 * s,
            (m[1, 2] + m[2, 1]) / s,
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = (
            (m[1, 0] - m[0, 1]) / s,
            (m[0, 2] + m[2, 0]) / s,
            (m[1, 2] + m[2, 1]) / s,
            0.25 * s,
        )
    return canonical_quat(quat_normalize(q))


def quat_from_axis_angle(axis: Sequence[float], degrees: float) -> Quat:
    """Right-hand rotation of `degrees` about `axis`."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    half = math.radians(degrees) / 2.0
    s = math.sin(half)
    return (math.cos(half), float(a[0] * s), float(a[1] * s), float(a[2] * s))


def quat_from_euler_deg(angles: Sequence[float]) -> Quat:
    """Rotation about world x, then world y, then world z (degrees)."""
    rx, ry, rz = (float(a) for a in angles)
    qx = quat_from_axis_angle((1, 0, 0), rx)
    qy = quat_from_axis_angle((0, 1, 0), ry)
    qz = quat_from_axis_angle((0, 0, 1), rz)
    return canonical_quat(quat_normalize(quat_multiply(qz, quat_multiply(qy, qx))))


def rotation_between_frames(
    local_normal: Sequence[float],
    local_reference: Sequence[float],
    world_normal: Sequence[float],
    world_reference: Sequence[float],
) -> Quat:
    """Rotation taking the local (normal, reference) pair onto the world pair.

    Both pairs must be orthonormal.
    """

    def frame(n: Sequence[float], r: Sequence[float]) -> np.ndarray:
        n_arr = np.asarray(n, dtype=float)
        r_arr = np.asarray(r, dtype=float)
        return np.column_stack([n_arr, r_arr, np.cross(n_arr, r_arr)])

    local = frame(local_normal, local_reference)
    world = frame(world_normal, world_reference)
    return matrix_to_quat(world @ local.T)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: position plus unit-quaternion orientation."""

    position: Vec3 = (0.0, 0.0, 0.0)
    orientation: Quat = IDENTITY_QUAT

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_translation(cls, shift: Sequence[float]) -> "Pose":
        return cls(position=_vec(shift))

    @classmethod
    def from_rotation(cls, orientation: Sequence[float]) -> "Pose":
        w, x, y, z = quat_normalize(orientation)
        return cls(orientation=(w, x, y, z))

    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def rotate(self, vector: Sequence[float]) -> np.ndarray:
        return self.matrix() @ np.asarray(vector, dtype=float)

    def apply(self, point: Sequence[float]) -> np.ndarray:
        return np.asarray(self.position, dtype=float) + self.rotate(point)

    def canonical(self) -> "Pose":
        return Pose(self.position, canonical_quat(self.orientation))


def compose(parent: Pose, child_relative: Pose) -> Pose:
    """Express `child_relative` (given in the parent frame) in the world frame."""
    position = parent.apply(child_relative.position)
    orientation = quat_normalize(
        quat_multiply(parent.orientation, child_relative.orientation)
    )
    return Pose(_vec(position), orientation)


def inverse(pose: Pose) -> Pose:
    conj = quat_conjugate(pose.orientation)
    position = -(quat_to_matrix(conj) @ np.asarray(pose.position, dtype=float))
    return Pose(_vec(position), conj)


def poses_close(a: Pose, b: Pose, tol: float = 1e-9) -> bool:
    """Equality up to tolerance, treating q and -q as the same rotation."""
    if not np.allclose(a.position, b.position, atol=tol, rtol=0):
        return False
    qa = np.asarray(a.orientation)
    qb = np.asarray(b.orientation)
    return bool(
        np.allclose(qa, qb, atol=tol, rtol=0) or np.allclose(qa, -qb, atol=tol, rtol=0)
    )


def rotate_about(pose: Pose, pivot: Sequence[float], axis: Sequence[float], degrees: float) -> Pose:
    """Rotate a pose rigidly about a world axis through `pivot`."""
    q = quat_from_axis_angle(axis, degrees)
    r = quat_to_matrix(q)
    pivot_arr = np.asarray(pivot, dtype=float)
    position = pivot_arr + r @ (np.asarray(pose.position, dtype=float) - pivot_arr)
    orientation = canonical_quat(quat_normalize(quat_multiply(q, pose.orientation)))
    return Pose(_vec(position), orientation)


def translate(pose: Pose, shift: Sequence[float]) -> Pose:
    position = np.asarray(pose.position, dtype=float) + np.asarray(shift, dtype=float)
    return Pose(_vec(position), pose.orientation)


@dataclass(frozen=True)
class Obb:
    """Oriented bounding box in the world frame."""

    center: Vec3
    half_extents: Vec3
    orientation: Quat = IDENTITY_QUAT

    def axes(self) -> np.ndarray:
        """Box axes as matrix columns."""
        return quat_to_matrix(self.orientation)

    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.half_extents))

    def corners(self) -> np.ndarray:
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=float,
        )
        local = signs * np.asarray(self.half_extents, dtype=float)
        return np.asarray(self.center, dtype=float) + local @ self.axes().T


def box_in_world(pose: Pose, local_center: Sequence[float], half_extents: Sequence[float]) -> Obb:
    """Place a block-local axis-aligned box into the world."""
    return Obb(_vec(pose.apply(local_center)), _vec(half_extents), pose.orientation)


@dataclass(frozen=True)
class FaceFrame:
    """World placement of one block face."""

    world_center: Vec3
    world_normal: Vec3
    face_id: str


def face_world_frame(block_pose: Pose, spec) -> FaceFrame:
    """World center and outward normal of a face spec under a block pose."""
    center = block_pose.apply(spec.local_center)
    normal = block_pose.rotate(spec.local_normal)
    normal = normal / np.linalg.norm(normal)
    return FaceFrame(_vec(center), _vec(normal), spec.face_id)


def compass_label(vector: Sequence[float]) -> Optional[str]:
    """Compass word for an axis-aligned unit vector, None otherwise."""
    v = np.asarray(vector, dtype=float)
    for label, axis in COMPASS_VECTORS.items():
        if np.allclose(v, axis, atol=AXIS_ALIGNMENT_TOLERANCE, rtol=0):
            return label
    return None


def _separating_axes(a_axes: np.ndarray, b_axes: np.ndarray) -> List[np.ndarray]:
    axes = [a_axes[:, i] for i in range(3)] + [b_axes[:, i] for i in range(3)]
    for i in range(3):
        for j in range(3):
            cross = np.cross(a_axes[:, i], b_axes[:, j])
            norm = np.linalg.norm(cross)
            # Parallel edge pairs are already covered by the face axes
            if norm > 1e-9:
                axes.append(cross / norm)
    return axes


def sat_separation(a: Obb, b: Obb, contact_tolerance: float = 0.0) -> float:
    """Largest projected gap over the candidate axes.

    Positive means separated along some axis, negative means every axis overlaps.
    """
    ha = np.maximum(np.asarray(a.half_extents, dtype=float) - contact_tolerance, 0.0)
    hb = np.maximum(np.asarray(b.half_extents, dtype=float) - contact_tolerance, 0.0)
    a_axes = a.axes()
    b_axes = b.axes()
    delta = np.asarray(b.center, dtype=float) - np.asarray(a.center, dtype=float)
    best = -math.inf
    for axis in _separating_axes(a_axes, b_axes):
        ra = float(np.sum(ha * np.abs(axis @ a_axes)))
        rb = float(np.sum(hb * np.abs(axis @ b_axes)))
        gap = abs(float(axis @ delta)) - (ra + rb)
        best = max(best, gap)
    return best


def obb_overlap(a: Obb, b: Obb, contact_tolerance: float = 1e-6) -> bool:
    """True iff the interiors, each shrunk by `contact_tolerance`, intersect."""
    if contact_tolerance < 0:
        raise ValueError("contact_tolerance must be >= 0")
    # Bounding-sphere broad phase
    distance = float(
        np.linalg.norm(np.asarray(b.center, dtype=float) - np.asarray(a.center, dtype=float))
    )
    if distance >= a.bounding_radius() + b.bounding_radius():
        return False
    return sat_separation(a, b, contact_tolerance) < 0


def points_in_obb(points: np.ndarray, box: Obb) -> np.ndarray:
    """Vectorized strict point membership."""
    local = (np.asarray(points, dtype=float) - np.asarray(box.center, dtype=float)) @ box.axes()
    return np.all(np.abs(local) < np.asarray(box.half_extents, dtype=float), axis=-1)


def sphere_obb_intersects(center: Sequence[float], radius: float, box: Obb) -> bool:
    """True iff the closest point of the box lies within `radius` of `center`."""
    if radius <= 0:
        raise ValueError("radius must be > 0")
    local = (np.asarray(center, dtype=float) - np.asarray(box.center, dtype=float)) @ box.axes()
    half = np.asarray(box.half_extents, dtype=float)
    closest = np.clip(local, -half, half)
    return float(np.linalg.norm(local - closest)) <= radius + 1e-12


def aabb(boxes: Iterable[Obb]) -> Tuple[np.ndarray, np.ndarray]:
    """World axis-aligned bounds (min corner, max corner) of a set of boxes."""
    corners = np.vstack([box.corners() for box in boxes])
    return corners.min(axis=0), corners.max(axis=0)
