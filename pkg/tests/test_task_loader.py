import json
from pathlib import Path

import pytest

from services.task_loader import list_tasks, load_task, parse_task
from utils.errors import ConfigError


def test_all_shipped_tasks_load(config):
    ids = list_tasks(config["tasks_dir"])
    assert ids == [f"{kind}_{level}" for kind in ("lift", "support", "transport") for level in (1, 2, 3)]
    for task_id in ids:
        task = load_task(task_id, config["tasks_dir"])
        assert task.task_id == task_id
        assert task.prompt.startswith("**Constraints:**")


def test_task_fields(config):
    lift = load_task("lift_1", config["tasks_dir"])
    assert lift.indicator == "twr"
    assert lift.threshold == 1.0
    assert not lift.requires_controls

    cargo = load_task("transport_2", config["tasks_dir"])
    assert cargo.indicator_subject == "cargo"
    assert cargo.requires_controls
    assert cargo.protocol["cargo_mass"] == 50.0
    assert "threshold" in cargo.non_source_values


def test_success_is_strict_exceedance(config):
    lift = load_task("lift_1", config["tasks_dir"])
    assert not lift.succeeded(1.0)
    assert lift.succeeded(1.0001)


def test_load_by_path(config, tmp_path):
    raw = json.loads((Path(config["tasks_dir"]) / "support_1.json").read_text(encoding="utf-8"))
    raw["task_id"] = "support_custom"
    path = tmp_path / "custom.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    assert load_task(str(path)).task_id == "support_custom"


BASE = {
    "task_id": "t",
    "task": "lift",
    "level": 1,
    "prompt": "p",
    "indicator": "twr",
    "threshold": 1.0,
    "requires_controls": False,
}


@pytest.mark.parametrize(
    "change, field_name",
    [
        ({"task": "fly"}, "task"),
        ({"indicator": "load"}, "indicator"),
        ({"level": 4}, "level"),
        ({"threshold": "high"}, "threshold"),
        ({"threshold": True}, "threshold"),
        ({"duration": 0}, "duration"),
        ({"indicator_subject": "crew"}, "indicator_subject"),
        ({"protocol": []}, "protocol"),
    ],
)
def test_invalid_task_configs(change, field_name):
    raw = {**BASE, **change}
    with pytest.raises(ConfigError) as excinfo:
        parse_task(raw)
    assert excinfo.value.field_name == field_name


def test_task_specific_protocol_fields():
    support = {**BASE, "task": "support", "indicator": "load"}
    with pytest.raises(ConfigError) as excinfo:
        parse_task(support)
    assert excinfo.value.field_name == "protocol.gap_width"

    cargo = {**BASE, "task": "transport", "indicator": "displacement", "indicator_subject": "cargo"}
    with pytest.raises(ConfigError) as excinfo:
        parse_task(cargo)
    assert excinfo.value.field_name == "protocol.cargo_drop"


def test_missing_task_file(tmp_path):
    with pytest.raises(ConfigError):
        load_task("lift_9", tmp_path)
    bad = tmp_path / "broken.json"
    bad.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_task(str(bad))


def test_missing_required_field():
    raw = dict(BASE)
    del raw["prompt"]
    with pytest.raises(ConfigError) as excinfo:
        parse_task(raw)
    assert excinfo.value.field_name == "prompt"
