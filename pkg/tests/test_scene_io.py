import json
import xml.etree.ElementTree as ET

import pytest

from conftest import build_car
from models.action import Category
from services.scene_builder import state_hash
from services.scene_io import (
    EXTENSION_NAMESPACE,
    convert_quaternion,
    convert_vector,
    dumps_native,
    export_machine_file,
    export_native,
    import_native,
    load_scene,
    save_scene,
    trajectory_actions,
)
from utils.errors import CatalogMismatch, ProtocolError, UnfinalizedScene, UnsoundScene

EXT = f"{{{EXTENSION_NAMESPACE}}}"


def test_native_document_round_trips(engine, catalog, car, tmp_path):
    scene, _ = car
    text = dumps_native(scene, catalog)
    restored = import_native(text, catalog)
    assert state_hash(restored) == state_hash(scene)
    assert dumps_native(restored, catalog) == text

    path = save_scene(scene, catalog, tmp_path / "scenes" / "car.json")
    assert state_hash(load_scene(path, catalog)) == state_hash(scene)


def test_catalog_mismatch_is_reported(catalog, car):
    scene, _ = car
    document = export_native(scene, catalog)
    document["catalog_hash"] = "0" * 64
    with pytest.raises(CatalogMismatch):
        import_native(document, catalog)


@pytest.mark.parametrize(
    "change",
    [
        lambda d: "not json",
        lambda d: {**d, "format": "other"},
        lambda d: {**d, "version": "9.9"},
        lambda d: {**d, "blocks": [{**d["blocks"][0], "type_id": "Balloon"}]},
        lambda d: {**d, "blocks": [{**d["blocks"][0], "orientation": [1, 0, 0]}]},
        lambda d: {**d, "connectors": [{"id": 0}]},
    ],
)
def test_bad_documents_are_protocol_errors(catalog, car, change):
    scene, _ = car
    document = change(export_native(scene, catalog))
    with pytest.raises(ProtocolError):
        import_native(document, catalog)


def test_replay_from_the_action_log(engine, catalog, car):
    scene, _ = car
    actions = trajectory_actions(dumps_native(scene, catalog))
    assert actions[0].name == "start"
    assert state_hash(engine.replay(actions)) == state_hash(scene)


def test_bare_action_log_lines(engine):
    log = "\n".join(
        [
            json.dumps({"category": "build", "name": "start", "arguments": {}}),
            "",
            json.dumps({"action": {"category": "build", "name": "attach_block_to", "arguments": {"base_block": 0, "face": "top", "new_block": "SmallWoodenBlock"}}}),
        ]
    )
    actions = trajectory_actions(log)
    assert [a.name for a in actions] == ["start", "attach_block_to"]
    assert actions[1].category == Category.BUILD
    assert sorted(engine.replay(actions).blocks) == [0, 1]
    with pytest.raises(ProtocolError):
        trajectory_actions('{"name": "start"}\nnot json')


def test_machine_file_needs_a_finalized_scene(catalog, car):
    scene, _ = car
    with pytest.raises(UnfinalizedScene):
        export_machine_file(scene, catalog)


def test_machine_file_refuses_overlapping_blocks(engine, catalog):
    scene, _ = build_car(engine)
    assert engine.run(scene, "advance_phase", target="finalized").ok
    document = export_native(scene, catalog)
    document["blocks"][1]["position"] = [0.0, 0.25, 0.0]
    broken = import_native(document, catalog)
    assert broken.phase == scene.phase
    with pytest.raises(UnsoundScene) as excinfo:
        export_machine_file(broken, catalog, builder=engine.builder)
    assert "blocks 0 and 1 overlap" in str(excinfo.value)


def test_machine_file_content(engine, catalog):
    scene, wheels = build_car(engine)
    assert engine.run(scene, "advance_phase", target="finalized").ok
    text = export_machine_file(scene, catalog)
    assert text == export_machine_file(scene, catalog)

    root = ET.fromstring(text.encode("utf-8"))
    assert root.tag == "Machine"
    assert root.find(f"{EXT}Frame").get("verified") == "false"
    blocks = root.find("Blocks").findall("Block")
    assert len(blocks) == 7
    assert len({b.get("guid") for b in blocks}) == 7
    assert [b.get(f"{EXT}block") for b in blocks] == [str(i) for i in range(7)]

    wheel = blocks[wheels[0]]
    assert wheel.get(f"{EXT}type") == "PoweredWheel"
    binding = wheel.find("Data").find(f"{EXT}KeyBinding")
    assert binding.get("key") == "UpArrow"
    assert binding.get("code") == "273"
    flipped = blocks[wheels[1]].find("Data").find("Boolean")
    assert flipped.get("key") == "flipped"


def test_axis_mapping():
    assert convert_vector((1.0, 2.0, 3.0)) == [1.0, 3.0, 2.0]
    assert convert_quaternion((1.0, 0.0, 0.0, 0.0)) == [0.0, 0.0, 0.0, 1.0]
    assert convert_quaternion((0.5, 0.1, 0.2, 0.3)) == [-0.1, -0.3, -0.2, 0.5]
