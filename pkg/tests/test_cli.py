import json

import pytest

import main as cli
from conftest import build_heated_engine
from services.scene_io import save_scene


@pytest.fixture(autouse=True)
def cli_config(config, monkeypatch):
    monkeypatch.setattr(cli, "load_config", lambda: config)
    return config


@pytest.fixture
def scene_file(engine, catalog, tmp_path):
    scene, _, _ = build_heated_engine(engine)
    return save_scene(scene, catalog, tmp_path / "engine.json")


def test_build_then_replay(tmp_path, capsys):
    script = tmp_path / "actions.jsonl"
    script.write_text(
        "\n".join(
            json.dumps(line)
            for line in (
                {"category": "build", "name": "start", "arguments": {}},
                {"category": "build", "name": "attach_block_to", "arguments": {"base_block": 0, "face": "top", "new_block": "SmallWoodenBlock"}},
                {"category": "build", "name": "attach_block_to", "arguments": {"base_block": 0, "face": "top", "new_block": "SmallWoodenBlock"}},
            )
        ),
        encoding="utf-8",
    )
    out = tmp_path / "scene.json"
    assert cli.main(["build", "--script", str(script), "--out", str(out)]) == 0
    printed = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert [p["ok"] for p in printed] == [True, True, False]
    assert out.exists()

    assert cli.main(["replay", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["match"] is True
    assert cli.main(["build", "--replay", str(out)]) == 0


def test_replay_detects_a_tampered_scene(scene_file, capsys):
    document = json.loads(scene_file.read_text(encoding="utf-8"))
    document["phase"] = "refine"
    scene_file.write_text(json.dumps(document), encoding="utf-8")
    assert cli.main(["replay", str(scene_file)]) == 1
    assert json.loads(capsys.readouterr().out)["match"] is False


def test_evaluate(scene_file, capsys):
    assert cli.main(["evaluate", "--scene", str(scene_file), "--task", "lift_1"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["success"] is True
    assert record["parts"] == 2


def test_describe(scene_file, capsys):
    assert cli.main(["describe", "--block-type", "PoweredWheel"]) == 0
    assert capsys.readouterr().out.startswith("PoweredWheel")
    assert cli.main(["describe", "--scene", str(scene_file)]) == 0
    assert "Machine with 3 block(s)" in capsys.readouterr().out
    assert cli.main(["describe", "--scene", str(scene_file), "--block", "heater"]) == 0
    assert "Torch" in capsys.readouterr().out


def test_export(engine, catalog, scene_file, tmp_path):
    out = tmp_path / "machine.bsg"
    assert cli.main(["export", "--scene", str(scene_file), "--out", str(out)]) == 1
    assert not out.exists()
    assert cli.main(["export", "--scene", str(scene_file), "--format", "native", "--out", str(out)]) == 0
    assert json.loads(out.read_text(encoding="utf-8"))["format"] == "buildyard-scene"

    scene, _, _ = build_heated_engine(engine)
    engine.run(scene, "advance_phase", target="finalized")
    finalized = save_scene(scene, catalog, tmp_path / "final.json")
    assert cli.main(["export", "--scene", str(finalized), "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8").startswith("<?xml")


def test_input_errors_exit_with_one(scene_file, tmp_path):
    assert cli.main(["evaluate", "--scene", str(scene_file), "--task", "lift_9"]) == 1
    assert cli.main(["replay", str(tmp_path / "missing.json")]) == 1
    assert cli.main(["describe"]) == 1


def test_usage_errors_exit_with_two():
    with pytest.raises(SystemExit) as excinfo:
        cli.main([])
    assert excinfo.value.code == 2


def test_bad_configuration(cli_config):
    cli_config["catalog_path"] = "/nonexistent/catalog.json"
    assert cli.main(["describe", "--block-type", "Torch"]) == 1


def test_bench(tmp_path, capsys):
    def tool(name, **arguments):
        return f"<tool_call>{json.dumps({'name': name, 'arguments': arguments})}</tool_call>"

    script = {
        "entities": {
            "Planner": ["<building_plan>cannon under a torch</building_plan>"],
            "Drafter": ["draft"],
            "Reviewer": ["TERMINATE"],
            "Guidance": ["Start.", "Add the cannon.", "Add the torch.", "TERMINATE"],
            "Builder": [
                tool("start"),
                tool("attach_block_to", base_block=0, face="east", new_block="WaterCannon", pointing="down"),
                tool("attach_block_to", base_block=0, face="top", new_block="Torch", pointing="east"),
            ],
        }
    }
    scripts = tmp_path / "scripts.json"
    scripts.write_text(json.dumps(script), encoding="utf-8")
    out = tmp_path / "report"
    assert cli.main(["bench", "--task", "lift_1", "--backend", f"scripted:{scripts}", "--n", "2", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n"] == 2
    assert summary["success_rate"] == 100.0
    assert (out / "summary.json").exists()
    assert cli.main(["bench", "--task", "lift_1", "--backend", "carrier-pigeon", "--n", "1", "--out", str(out)]) == 1
