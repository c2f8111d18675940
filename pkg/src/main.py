"""Command line entry point for buildyard."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from models.scene import Scene
from services.action_engine import ActionEngine
from services.catalog_loader import describe_block_type, load_catalog_file, load_templates
from services.scene_builder import state_hash
from services.scene_io import (
    dumps_native,
    export_machine_file,
    load_scene,
    save_scene,
    trajectory_actions,
)
from services.task_loader import load_task
from services.tool_server import serve_tools
from utils.config import load_config, setup_logging, validate_config
from utils.errors import BuildyardError

logger = logging.getLogger(__name__)


class BuildyardApp:
    """Loads configuration and assets once and runs one command."""

    def __init__(self, config: Optional[dict] = None):
        self.config = config or load_config()
        config_errors = validate_config(self.config)
        if config_errors:
            error_msg = "Configuration errors: " + "; ".join(config_errors)
            logger.error(error_msg)
            raise ValueError(error_msg)
        self.catalog = load_catalog_file(self.config["catalog_path"])
        self.templates = load_templates(self.config["templates_path"])
        self.engine = ActionEngine(self.catalog, self.config, self.templates)

    # build / replay

    def build(self, script: str, out: Optional[str]) -> int:
        actions = trajectory_actions(Path(script).read_text(encoding="utf-8"))
        scene = Scene()
        failures = 0
        for action in actions:
            result = self.engine.apply(scene, action)
            print(json.dumps({"action": action.name, **result.to_dict()}, ensure_ascii=False))
            if not result.ok:
                failures += 1
        logger.info(
            f"Applied {len(actions)} actions ({failures} rejected); "
            f"{len(scene.blocks)} blocks, state {state_hash(scene)[:12]}"
        )
        if out:
            save_scene(scene, self.catalog, out)
            logger.info(f"Scene written to {out}")
        return 0

    def replay(self, scene_path: str) -> int:
        original = load_scene(scene_path, self.catalog)
        text = Path(scene_path).read_text(encoding="utf-8")
        replayed = self.engine.replay(trajectory_actions(text))
        expected, actual = state_hash(original), state_hash(replayed)
        matches = expected == actual
        print(json.dumps({"expected": expected, "replayed": actual, "match": matches}))
        if not matches:
            logger.error("Replayed trajectory does not reproduce the stored scene")
            return 1
        logger.info("Replay reproduces the stored state hash")
        return 0

    # evaluate / describe / export

    def evaluate(self, scene_path: str, task_ref: str) -> int:
        scene = load_scene(scene_path, self.catalog)
        task = load_task(task_ref, self.config["tasks_dir"])
        record = self.engine.evaluator.evaluate_task(scene, task)
        print(json.dumps(record.to_dict(), indent=2, sort_keys=True, default=str))
        return 0

    def describe(self, scene_path: Optional[str], block: Optional[str], block_type: Optional[str]) -> int:
        if block_type:
            print(describe_block_type(self.catalog, block_type, self.templates))
            return 0
        if not scene_path:
            raise ValueError("describe needs --scene or --block-type")
        scene = load_scene(scene_path, self.catalog)
        describer = self.engine.describer
        if block is not None:
            ref = int(block) if block.isdigit() else block
            print(describer.block_detail(scene, ref))
        else:
            print(describer.machine_summary(scene))
        return 0

    def export(self, scene_path: str, fmt: str, out: str) -> int:
        scene = load_scene(scene_path, self.catalog)
        if fmt == "machine":
            text = export_machine_file(scene, self.catalog, builder=self.engine.builder)
        else:
            text = dumps_native(scene, self.catalog)
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"Exported {fmt} document to {out}")
        return 0

    # serve / bench

    def serve(self) -> int:
        serve_tools(sys.stdin.buffer, sys.stdout, self.engine)
        return 0

    def bench(self, task_ref: str, backend: str, n: int, out: Optional[str]) -> int:
        from bench_runner import BenchRunner

        task = load_task(task_ref, self.config["tasks_dir"])
        out_dir = out or str(Path(self.config["output_folder"]) / task.task_id)
        _, summary = BenchRunner(self.config).run(task, backend, n, out_dir)
        print(json.dumps(summary.to_row(), sort_keys=True))
        return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="buildyard",
        description="Language-driven block construction engine with surrogate task evaluators.",
    )
    parser.add_argument("--log-level", default=None, help="override LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    build = commands.add_parser("build", help="apply an action log, or replay a scene")
    source = build.add_mutually_exclusive_group(required=True)
    source.add_argument("--script", help="JSON-lines file with one action per line")
    source.add_argument("--replay", help="native scene document whose trajectory is re-run")
    build.add_argument("--out", help="write the resulting scene here")

    replay = commands.add_parser("replay", help="re-run a scene's trajectory and compare state hashes")
    replay.add_argument("scene")

    evaluate = commands.add_parser("evaluate", help="score a scene against a task")
    evaluate.add_argument("--scene", required=True)
    evaluate.add_argument("--task", required=True, help="task id (e.g. lift_1) or task file")

    commands.add_parser("serve", help="run the line-delimited tool server on stdin/stdout")

    describe = commands.add_parser("describe", help="describe a scene, one block, or a block type")
    describe.add_argument("--scene")
    describe.add_argument("--block", help="block id or note")
    describe.add_argument("--block-type")

    export = commands.add_parser("export", help="export a scene document")
    export.add_argument("--scene", required=True)
    export.add_argument("--format", choices=("machine", "native"), default="machine")
    export.add_argument("--out", required=True)

    bench = commands.add_parser("bench", help="run n workflow samples and write reports")
    bench.add_argument("--task", required=True)
    bench.add_argument("--backend", required=True, help="scripted:SCRIPTS.json or gemini")
    bench.add_argument("--n", type=int, default=64)
    bench.add_argument("--out", help="report directory (default OUTPUT_FOLDER/<task_id>)")
    return parser


def run_command(app: BuildyardApp, args: argparse.Namespace) -> int:
    if args.command == "build":
        if args.replay:
            return app.replay(args.replay)
        return app.build(args.script, args.out)
    if args.command == "replay":
        return app.replay(args.scene)
    if args.command == "evaluate":
        return app.evaluate(args.scene, args.task)
    if args.command == "serve":
        return app.serve()
    if args.command == "describe":
        return app.describe(args.scene, args.block, args.block_type)
    if args.command == "export":
        return app.export(args.scene, args.format, args.out)
    if args.command == "bench":
        return app.bench(args.task, args.backend, args.n, args.out)
    raise ValueError(f"unknown command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point. Exit codes: 0 done, 1 configuration or input error, 2 usage error."""
    args = build_parser().parse_args(argv)
    config = load_config()
    setup_logging(args.log_level or config["log_level"], config.get("log_file"))

    try:
        app = BuildyardApp(config)
        return run_command(app, args)
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 0
    except (BuildyardError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
