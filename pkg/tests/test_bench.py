import csv
import json

import pytest

from bench_runner import BenchRunner
from services.agent_backends import ScriptedBackend
from services.task_loader import load_task


def tool_call(name, **arguments):
    return f"<tool_call>{json.dumps({'name': name, 'arguments': arguments})}</tool_call>"


def engine_script(heated):
    builder = [
        tool_call("start"),
        tool_call("attach_block_to", base_block=0, face="east", new_block="WaterCannon", pointing="down"),
    ]
    guidance = ["Start.", "Add the cannon."]
    if heated:
        builder.append(tool_call("attach_block_to", base_block=0, face="top", new_block="Torch", pointing="east"))
        guidance.append("Add the torch.")
    return {
        "usage": {"input_tokens": 100, "output_tokens": 20},
        "entities": {
            "Planner": ["<building_plan>cannon engine</building_plan>"],
            "Drafter": ["draft"],
            "Reviewer": ["TERMINATE"],
            "Guidance": guidance + ["TERMINATE"],
            "Builder": builder,
        },
    }


@pytest.fixture
def scripts_file(tmp_path):
    # 5 heated out of every 16 samples
    samples = [engine_script(heated=i < 5) for i in range(16)]
    path = tmp_path / "scripts.json"
    path.write_text(json.dumps({"samples": samples}), encoding="utf-8")
    return path


@pytest.fixture
def runner(config):
    return BenchRunner(config)


def test_single_sample_scores_the_build(runner, config):
    task = load_task("lift_1", config["tasks_dir"])
    record = runner.run_sample(task, ScriptedBackend.from_dict(engine_script(heated=True)))
    assert record.success
    assert record.parts == 2
    assert record.indicator == pytest.approx(1376 / 275)
    assert record.cost.llm_requests == 10
    assert record.cost.input_tokens == 1000


def test_failed_run_records_its_reason(runner, config):
    task = load_task("lift_1", config["tasks_dir"])
    script = engine_script(heated=True)
    script["entities"]["Planner"] = ["no plan", "still none"]
    record = runner.run_sample(task, ScriptedBackend.from_dict(script))
    assert not record.success
    assert record.failure_reason == "format"
    assert record.parts == 0


def test_small_bench_writes_reports(runner, config, scripts_file, tmp_path):
    task = load_task("lift_1", config["tasks_dir"])
    out = tmp_path / "report"
    records, summary = runner.run(task, f"scripted:{scripts_file}", n=4, out_dir=out)
    assert [r.sample_index for r in records] == [0, 1, 2, 3]
    assert summary.success_rate == pytest.approx(100.0)
    with open(out / "records.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 4
    assert json.loads((out / "summary.json").read_text(encoding="utf-8"))["n"] == 4
    assert (out / "transcripts" / "sample_000.jsonl").exists()
    assert (out / "machines" / "sample_003.bsg").read_text(encoding="utf-8").startswith("<?xml")


@pytest.mark.slow
def test_full_bench_success_rate(runner, config, scripts_file):
    task = load_task("lift_1", config["tasks_dir"])
    records, summary = runner.run(task, f"scripted:{scripts_file}", n=64)
    assert len(records) == 64
    assert sum(r.success for r in records) == 20
    assert summary.success_rate == pytest.approx(31.25)
    assert summary.mean_llm_requests == pytest.approx((20 * 10 + 44 * 8) / 64)
    assert summary.mean_parts == pytest.approx((20 * 2 + 44 * 1) / 64)


def test_bench_rejects_bad_input(runner, config):
    task = load_task("lift_1", config["tasks_dir"])
    with pytest.raises(ValueError):
        runner.run(task, lambda index: None, n=0)
    bad = dict(config)
    bad["bench_workers"] = 0
    with pytest.raises(ValueError, match="Configuration errors"):
        BenchRunner(bad)


def test_runs_are_isolated(runner, config):
    task = load_task("lift_1", config["tasks_dir"])
    first = runner.run_sample(task, ScriptedBackend.from_dict(engine_script(heated=True)))
    second = runner.run_sample(task, ScriptedBackend.from_dict(engine_script(heated=True)))
    assert first.state_hash == second.state_hash
