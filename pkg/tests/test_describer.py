import numpy as np

from conftest import attach
from models.action import ErrorCode
from services.describer import direction_text, parse_positions


def test_summary_lists_blocks_in_id_order(engine, car):
    scene, _ = car
    summary = engine.describer.machine_summary(scene)
    lines = summary.splitlines()
    assert lines[0] == "Machine with 7 block(s) and 0 connector(s); phase build; total mass 4.85."
    assert lines[1].startswith("#0 StartingBlock at (0.000, 0.000, 0.000)")
    assert "; root" in lines[1]
    assert lines[-1] == "Controls: 4 binding(s), 1 sequence entry(ies)."
    assert [line[:2] for line in lines[1:8]] == [f"#{i}" for i in range(7)]


def test_summary_positions_match_the_scene(engine, car):
    scene, _ = car
    positions = parse_positions(engine.describer.machine_summary(scene))
    assert sorted(positions) == sorted(scene.blocks)
    for block_id, position in positions.items():
        assert np.allclose(position, scene.blocks[block_id].pose.position, atol=5e-4)


def test_summary_is_deterministic(engine, car):
    scene, _ = car
    assert engine.describer.machine_summary(scene) == engine.describer.machine_summary(scene)


def test_block_detail_reports_faces_and_function(engine, car):
    scene, wheels = car
    detail = engine.describer.block_detail(scene, "front axle")
    assert detail.startswith('Block #1 SmallWoodenBlock "front axle". Position (0.000, 1.000, 0.000)')
    assert "Mounted on block 0 face north." in detail
    assert "Face east: attached to block 3 face A." in detail
    assert "Face south: attached to block 0 face north." in detail
    assert "3 free face(s): top, bottom, north." in detail

    wheel = engine.describer.block_detail(scene, wheels[1])
    assert "spinning forward rolls it north" in wheel
    assert "Functional direction is flipped." in wheel
    assert "Bound keys: UpArrow -> spin_forward." in wheel


def test_cannon_detail_reports_steam_mode(engine, heated_engine):
    scene, cannon, _ = heated_engine
    detail = engine.describer.block_detail(scene, cannon)
    assert "Jet points down" in detail
    assert "steam mode" in detail
    assert "0 attachable faces" in detail


def test_functional_poses_and_control_map(engine, heated_engine):
    scene, cannon, torch = heated_engine
    poses = engine.describer.functional_poses(scene)
    assert f"Block {cannon} WaterCannon: jet down" in poses
    assert "steam" in poses
    assert f"Block {torch} Torch: heat centre (1.000, 0.000, 1.000), radius 0.3." in poses
    assert engine.describer.control_map(scene) == f'Block {cannon} WaterCannon "lift cannon": fire <- (unbound).'


def test_error_messages_fill_templates(engine):
    text = engine.describer.error_message(ErrorCode.UNBOUND_KEY, {"key": "Alpha3"})
    assert text.startswith("Key Alpha3 is not bound")
    # Missing context stays visible instead of raising
    assert "{reason}" in engine.describer.error_message(ErrorCode.INVALID_FACE, {"face": "x"})


def test_direction_text():
    assert direction_text((0, 0, 1)) == "up"
    assert direction_text((0, -1, 0)) == "south"
    assert direction_text(None) == "nowhere"
    assert direction_text((0.6, 0.8, 0.0)) == "[0.600, 0.800, 0.000]"


def test_free_faces_query(engine):
    scene = engine.start()
    attach(engine, scene, 0, "top", "SmallWoodenBlock")
    result = engine.run(scene, "list_free_faces", block=0)
    assert result.description == "Free faces of block 0: bottom, north, south, east, west."
