import numpy as np
import pytest

from conftest import attach, build_heated_engine
from models.scene import Phase
from services.scene_builder import FACE_ORDER, format_float, part_count, state_hash
from utils.errors import InvalidFaceError, PhaseViolationError, UnknownBlockError


def test_new_scene_holds_only_the_starting_block(engine):
    scene = engine.builder.new_scene()
    assert list(scene.blocks) == [0]
    assert scene.phase == Phase.BUILD
    assert scene.next_block_id == 1
    assert engine.builder.free_faces(scene, 0) == list(FACE_ORDER)


def test_block_on_north_face_sits_one_unit_north(engine):
    scene = engine.start()
    block = attach(engine, scene, 0, "north", "SmallWoodenBlock")
    assert np.allclose(scene.blocks[block].pose.position, (0.0, 1.0, 0.0))
    assert scene.blocks[block].mounted_on == (0, "north")
    assert scene.occupancy(0, "north").attachment == (block, "bottom")
    assert scene.occupancy(block, "bottom").attachment == (0, "north")


def test_compass_words_resolve_against_world_normals(engine):
    scene = engine.start()
    block = attach(engine, scene, 0, "north", "SmallWoodenBlock")
    placed = scene.blocks[block]
    # The block lies on its side: its local top now faces north
    assert engine.builder.resolve_face(scene, placed, "north").face_id == "top"
    assert engine.builder.face_label(placed, "top") == "north"
    assert "south" not in engine.builder.free_faces(scene, block)


def test_wheel_faces_keep_their_local_label(engine):
    scene = engine.start()
    wheel = attach(engine, scene, 0, "east", "PoweredWheel")
    assert engine.builder.free_faces(scene, wheel) == []
    with pytest.raises(InvalidFaceError):
        engine.builder.resolve_face(scene, scene.blocks[wheel], "north")


def test_resolve_block_by_id_text_and_note(engine):
    scene = engine.start(note="chassis")
    left = attach(engine, scene, 0, "west", "SmallWoodenBlock", note="left arm")
    right = attach(engine, scene, 0, "east", "SmallWoodenBlock", note="right arm")
    builder = engine.builder
    assert builder.resolve_block(scene, left).block_id == left
    assert builder.resolve_block(scene, f"#{right}").block_id == right
    assert builder.resolve_block(scene, str(right)).block_id == right
    assert builder.resolve_block(scene, "LEFT").block_id == left
    assert builder.resolve_block(scene, "chassis").block_id == 0
    with pytest.raises(UnknownBlockError) as excinfo:
        builder.resolve_block(scene, "arm")
    assert "ambiguous" in excinfo.value.context["candidates"]
    with pytest.raises(UnknownBlockError):
        builder.resolve_block(scene, 99)
    with pytest.raises(UnknownBlockError):
        builder.resolve_block(scene, True)


def test_part_count_excludes_the_starting_block(beam, engine):
    scene, _ = beam
    assert part_count(scene) == 5
    assert part_count(scene, include_start=True) == 6
    assert engine.run(scene, "connect_blocks", a=3, face_a="top", b=5, face_b="top", connector="Brace").ok
    assert part_count(scene) == 6


def test_invariants_hold_for_built_machines(engine, car, heated_engine, beam):
    for scene in (car[0], heated_engine[0], beam[0]):
        assert engine.builder.check_invariants(scene) == []


def test_state_hash_ignores_trajectory_and_counters(engine):
    a = engine.start()
    attach(engine, a, 0, "top", "SmallWoodenBlock")
    b = engine.start()
    attach(engine, b, 0, "top", "SmallWoodenBlock")
    engine.run(b, "get_machine_summary")
    b.next_connector_id = 7
    assert state_hash(a) == state_hash(b)
    engine.run(b, "advance_phase")
    assert state_hash(a) != state_hash(b)


def test_format_float_normalizes_negative_zero():
    assert format_float(-0.0) == "0.000000000"
    assert format_float(-1e-12) == "0.000000000"
    assert format_float(1.5, 3) == "1.500"


def test_merge_requires_the_assemble_phase(engine):
    sub, _, _ = _finalized_engine(engine)
    scene = engine.start()
    with pytest.raises(PhaseViolationError):
        engine.builder.merge(scene, sub, 0, "bottom", 0, "top")


def _finalized_engine(engine):
    scene, cannon, torch = build_heated_engine(engine)
    assert engine.run(scene, "advance_phase", target="finalized").ok
    return scene, cannon, torch


def test_merge_copies_and_rebases_a_substructure(engine):
    sub, cannon, torch = _finalized_engine(engine)
    scene = engine.start()
    body = attach(engine, scene, 0, "bottom", "SmallWoodenBlock")
    assert engine.run(scene, "advance_phase", target="assemble").ok

    blocks, connectors = engine.builder.merge(scene, sub, body, "bottom", 0, "bottom", "engine")
    assert blocks == [2, 3, 4]
    assert connectors == []
    anchor = scene.blocks[2]
    assert anchor.mounted_on == (body, "top")
    # Substructure face bottom meets the body's downward face, one unit below it
    assert np.allclose(anchor.pose.position, (0.0, 0.0, -2.0))
    assert engine.builder.check_invariants(scene) == []
    assert engine.evaluator.heated_cannons(scene) == {2 + cannon}


def test_functional_points_of_mounted_torch_and_cannon(engine):
    scene = engine.start()
    cannon = attach(engine, scene, 0, "east", "WaterCannon", pointing="down")
    inlet, outlet = engine.builder.cannon_ports(scene.blocks[cannon])
    assert np.allclose(inlet, (1.0, 0.0, 0.75), atol=1e-9)
    assert np.allclose(outlet, (1.0, 0.0, -1.0), atol=1e-9)

    scene = engine.start()
    torch = attach(engine, scene, 0, "east", "Torch", pointing="up")
    [center] = engine.builder.heat_centers(scene.blocks[torch])
    assert np.allclose(center, (1.0, 0.0, 1.0), atol=1e-9)


def test_omitted_pointing_defaults_to_up_then_north(engine):
    scene = engine.start()
    torch = attach(engine, scene, 0, "east", "Torch")
    explicit = engine.start()
    twin = attach(engine, explicit, 0, "east", "Torch", pointing="up")
    assert np.allclose(scene.blocks[torch].pose.position, explicit.blocks[twin].pose.position)
    assert np.allclose(scene.blocks[torch].pose.orientation, explicit.blocks[twin].pose.orientation)
    [center] = engine.builder.heat_centers(scene.blocks[torch])
    assert np.allclose(center, (1.0, 0.0, 1.0), atol=1e-9)

    # A horizontal face has no in-plane "up"
    scene = engine.start()
    cannon = attach(engine, scene, 0, "top", "WaterCannon")
    assert np.allclose(engine.builder.functional_axis(scene.blocks[cannon]), (0.0, 1.0, 0.0), atol=1e-9)
    assert engine.builder.check_invariants(scene) == []


def test_flipping_a_cannon_swaps_its_ports(engine):
    scene = engine.start()
    cannon = attach(engine, scene, 0, "east", "WaterCannon", pointing="down")
    assert engine.run(scene, "flip_block", block=cannon).ok
    inlet, outlet = engine.builder.cannon_ports(scene.blocks[cannon])
    assert np.allclose(inlet, (1.0, 0.0, -1.0), atol=1e-9)
    assert np.allclose(engine.builder.functional_axis(scene.blocks[cannon]), (0.0, 0.0, 1.0), atol=1e-9)
