"""Benchmark orchestration: n workflow samples per task, evaluation and reports."""

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from models.metrics import AggregateRow, MetricsRecord
from models.task import TaskConfig
from models.workflow import EntityName, WorkflowPhase, WorkflowRun
from services.action_engine import ActionEngine
from services.agent_backends import AgentBackend, ScriptedBackend, create_backend, load_scripts
from services.catalog_loader import load_catalog_file, load_templates
from services.evaluator import aggregate
from services.scene_builder import part_count, state_hash
from services.scene_io import dumps_native
from services.workflow_engine import WorkflowEngine, account_costs, load_prompts, write_transcript
from utils.config import load_config, validate_config
from utils.retry import retry_file_operation

logger = logging.getLogger(__name__)

BackendFactory = Callable[[int], AgentBackend]


class BenchRunner:
    """Runs the construction workflow n times for one task and reports the outcome."""

    def __init__(self, config: Optional[Dict] = None):
        """Initialize the runner with configuration.

        Raises:
            ValueError: the configuration does not validate
        """
        self.config = config or load_config()

        config_errors = validate_config(self.config)
        if config_errors:
            error_msg = "Configuration errors: " + "; ".join(config_errors)
            logger.error(error_msg)
            raise ValueError(error_msg)

        self.catalog = load_catalog_file(self.config["catalog_path"])
        self.templates = load_templates(self.config["templates_path"])
        self.prompts: Dict[EntityName, str] = load_prompts(self.config["prompts_dir"])
        self.workers = int(self.config.get("bench_workers", 4))

        logger.info(f"Bench runner initialized (catalog {self.catalog.content_hash[:12]})")

    def backend_factory(self, backend_spec: str) -> BackendFactory:
        """Per-sample backends: scripted samples cycle through the script list."""
        if backend_spec.startswith("scripted:"):
            scripts = load_scripts(backend_spec.split(":", 1)[1])
            if not scripts:
                raise ValueError("script file holds no samples")
            return lambda index: ScriptedBackend.from_dict(scripts[index % len(scripts)])
        shared = create_backend(backend_spec, self.config)
        return lambda index: shared

    def run_sample(
        self,
        task: TaskConfig,
        backend: AgentBackend,
        index: int = 0,
        out_dir: Optional[Path] = None,
    ) -> MetricsRecord:
        """One isolated workflow run followed by evaluation."""
        engine = ActionEngine(self.catalog, self.config, self.templates)
        workflow = WorkflowEngine(engine, backend, self.config, self.prompts)
        run = workflow.run(task)
        record = self._score(engine, task, run)
        record.sample_index = index
        record.cost = account_costs(run)
        if out_dir is not None:
            self._write_artifacts(run, index, out_dir)
        logger.info(
            f"Sample {index}: {'success' if record.success else 'fail'} "
            f"(indicator {record.indicator:g}, {record.parts} parts)"
        )
        return record

    def _score(self, engine: ActionEngine, task: TaskConfig, run: WorkflowRun) -> MetricsRecord:
        if run.phase == WorkflowPhase.DONE and run.scene is not None:
            return engine.evaluator.evaluate_task(run.scene, task)
        scene = run.scene
        return MetricsRecord(
            task_id=task.task_id,
            level=task.level,
            parts=part_count(scene, starting_type=self.catalog.starting_type) if scene else 0,
            success=False,
            indicator=0.0,
            failure_reason=run.failure_reason.value if run.failure_reason else "unknown",
            state_hash=state_hash(scene) if scene else "",
            details={"failure_detail": run.failure_detail},
        )

    def _write_artifacts(self, run: WorkflowRun, index: int, out_dir: Path) -> None:
        name = f"sample_{index:03d}"
        write_transcript(run, out_dir / "transcripts" / f"{name}.jsonl")
        if run.scene is not None:
            _write_text(out_dir / "scenes" / f"{name}.json", dumps_native(run.scene, self.catalog))
        if run.machine_file:
            _write_text(out_dir / "machines" / f"{name}.bsg", run.machine_file)

    def run(
        self,
        task: TaskConfig,
        backend_spec: Union[str, BackendFactory],
        n: int = 64,
        out_dir: Optional[Union[str, Path]] = None,
    ) -> Tuple[List[MetricsRecord], AggregateRow]:
        """Run n samples in parallel, aggregate them and write the reports."""
        if n < 1:
            raise ValueError("n must be >= 1")
        factory = backend_spec if callable(backend_spec) else self.backend_factory(backend_spec)
        out_path = Path(out_dir) if out_dir is not None else None
        start_time = time.time()
        logger.info(f"Benchmarking {task.task_id}: {n} samples on {self.workers} workers")

        records: List[MetricsRecord] = []
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            futures = {
                executor.submit(self.run_sample, task, factory(index), index, out_path): index
                for index in range(n)
            }
            for future in as_completed(futures):
                records.append(future.result())
        records.sort(key=lambda r: r.sample_index)

        summary = aggregate(records)
        if out_path is not None:
            write_reports(records, summary, out_path)
        logger.info(
            f"{task.task_id}: success rate {summary.success_rate:g}% over {n} samples "
            f"in {time.time() - start_time:.1f}s"
        )
        return records, summary


@retry_file_operation(max_retries=3, base_delay=0.5)
def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _csv_text(rows: List[Dict[str, Any]]) -> str:
    if not rows:
        return ""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def write_reports(records: List[MetricsRecord], summary: AggregateRow, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """records.csv, records.jsonl, summary.csv and summary.json under out_dir."""
    out_dir = Path(out_dir)
    paths = {
        "records_csv": out_dir / "records.csv",
        "records_jsonl": out_dir / "records.jsonl",
        "summary_csv": out_dir / "summary.csv",
        "summary_json": out_dir / "summary.json",
    }
    _write_text(paths["records_csv"], _csv_text([r.to_row() for r in records]))
    _write_text(
        paths["records_jsonl"],
        "".join(json.dumps(r.to_dict(), sort_keys=True, default=str) + "\n" for r in records),
    )
    _write_text(paths["summary_csv"], _csv_text([summary.to_row()]))
    _write_text(paths["summary_json"], json.dumps(asdict(summary), indent=2, sort_keys=True) + "\n")
    logger.info(f"Reports written to {out_dir}")
    return paths
