import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from utils.geometry import (
    Obb,
    Pose,
    canonical_quat,
    compass_label,
    compose,
    inverse,
    obb_overlap,
    points_in_obb,
    poses_close,
    quat_from_axis_angle,
    quat_from_euler_deg,
    quat_normalize,
    rotate_about,
    sat_separation,
    sphere_obb_intersects,
)

coords = st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False)
vectors = st.tuples(coords, coords, coords)
quats = (
    st.tuples(*[st.floats(min_value=-1, max_value=1, allow_nan=False) for _ in range(4)])
    .filter(lambda q: sum(c * c for c in q) > 1e-3)
    .map(quat_normalize)
)
poses = st.builds(Pose, vectors, quats)
right_angles = st.sampled_from([0, 90, 180, 270])


@given(poses)
@settings(max_examples=200)
def test_compose_with_inverse_is_identity(pose):
    assert poses_close(compose(pose, inverse(pose)), Pose(), tol=1e-7)


@given(poses, poses, vectors)
@settings(max_examples=200)
def test_compose_applies_child_then_parent(parent, child, point):
    combined = compose(parent, child).apply(point)
    stepwise = parent.apply(child.apply(point))
    assert np.allclose(combined, stepwise, atol=1e-6)


@given(quats)
def test_canonical_quat_is_sign_invariant(q):
    negated = tuple(-c for c in q)
    assert canonical_quat(q) == canonical_quat(negated)
    assert canonical_quat(q)[0] >= 0


def test_quarter_turn_about_z_maps_east_to_north():
    pose = Pose.from_rotation(quat_from_axis_angle((0, 0, 1), 90))
    assert np.allclose(pose.rotate((1, 0, 0)), (0, 1, 0))


@given(right_angles, right_angles, right_angles)
def test_right_angle_rotations_keep_compass_axes(rx, ry, rz):
    pose = Pose.from_rotation(quat_from_euler_deg((rx, ry, rz)))
    for axis in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
        assert compass_label(pose.rotate(axis)) is not None


def test_rotate_about_pivot():
    pose = Pose((2.0, 0.0, 0.0))
    turned = rotate_about(pose, (1.0, 0.0, 0.0), (0, 0, 1), 180)
    assert np.allclose(turned.position, (0.0, 0.0, 0.0), atol=1e-12)


def test_face_contact_is_not_overlap():
    a = Obb((0.0, 0.0, 0.0), (0.5, 0.5, 0.5))
    b = Obb((1.0, 0.0, 0.0), (0.5, 0.5, 0.5))
    assert not obb_overlap(a, b)
    assert obb_overlap(a, Obb((0.9, 0.0, 0.0), (0.5, 0.5, 0.5)))


def test_rotated_boxes_overlap_by_separating_axes():
    a = Obb((0.0, 0.0, 0.0), (1.0, 0.1, 0.1))
    tilted = Obb((1.2, 0.0, 0.0), (0.5, 0.5, 0.5), quat_from_axis_angle((0, 0, 1), 45))
    assert obb_overlap(a, tilted)


@given(vectors, vectors)
@settings(max_examples=200)
def test_overlap_is_symmetric(c1, c2):
    a = Obb(c1, (1.0, 2.0, 0.5))
    b = Obb(c2, (0.5, 0.5, 3.0), quat_from_axis_angle((1, 1, 0), 30))
    assert obb_overlap(a, b) == obb_overlap(b, a)


def test_negative_tolerance_is_rejected():
    box = Obb((0.0, 0.0, 0.0), (0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        obb_overlap(box, box, contact_tolerance=-1)


def test_sphere_touching_a_box():
    box = Obb((0.0, 0.0, 0.0), (0.5, 0.5, 0.5))
    assert sphere_obb_intersects((0.0, 0.0, 0.8), 0.3, box)
    assert not sphere_obb_intersects((0.0, 0.0, 0.81), 0.3, box)
    assert sphere_obb_intersects((0.5 + 0.3 / math.sqrt(2), 0.5 + 0.3 / math.sqrt(2) - 1e-9, 0.0), 0.3, box)


def _random_box(rng):
    axis = rng.normal(size=3)
    return Obb(
        tuple(rng.uniform(-1.0, 1.0, size=3)),
        tuple(rng.uniform(0.2, 0.8, size=3)),
        quat_from_axis_angle(tuple(axis), float(rng.uniform(0.0, 360.0))),
    )


@pytest.mark.slow
def test_overlap_agrees_with_point_sampling():
    rng = np.random.default_rng(2024)
    band = 0.1
    checked = agreed = 0
    while checked < 1000:
        a, b = _random_box(rng), _random_box(rng)
        if abs(sat_separation(a, b)) < band:
            continue
        # Uniform samples inside a, tested for membership in b
        local = rng.uniform(-1.0, 1.0, size=(100_000, 3)) * np.asarray(a.half_extents)
        points = np.asarray(a.center) + local @ a.axes().T
        sampled = bool(points_in_obb(points, b).any())
        checked += 1
        agreed += sampled == obb_overlap(a, b, contact_tolerance=0.0)
    assert agreed / checked >= 0.999
