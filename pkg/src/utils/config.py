"""Configuration loading and validation for buildyard."""

import os
import logging
from typing import Dict, List
from pathlib import Path
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler


PROJECT_ROOT = Path(__file__).parent.parent.parent

# .env next to the entry script; real environment variables win
load_dotenv(PROJECT_ROOT / ".env")


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


def _project_path(env_name: str, default_relative: str) -> str:
    value = os.getenv(env_name)
    path = Path(value) if value else Path(default_relative)
    return str(path if path.is_absolute() else PROJECT_ROOT / path)


def load_config() -> Dict:
    """Read every setting from the environment, falling back to the defaults below.

    Relative paths are taken from the project root, not the working directory.
    """
    config = {
        "catalog_path": _project_path("BUILDYARD_CATALOG", "assets/catalog.json"),
        "templates_path": _project_path("BUILDYARD_TEMPLATES", "assets/templates.json"),
        "prompts_dir": _project_path("BUILDYARD_PROMPTS_DIR", "assets/prompts"),
        "tasks_dir": _project_path("BUILDYARD_TASKS_DIR", "assets/tasks"),
        "output_folder": _project_path("OUTPUT_FOLDER", "output"),
        "log_level": os.getenv("LOG_LEVEL", "INFO"),
        "log_file": _project_path("LOG_FILE", "buildyard.log"),
        # Construction constraints
        "contact_tolerance": float(os.getenv("CONTACT_TOLERANCE", "1e-6")),
        "max_connectors_per_face": int(os.getenv("MAX_CONNECTORS_PER_FACE", "1")),
        "connector_max_span": float(os.getenv("CONNECTOR_MAX_SPAN", "10.0")),
        "remove_cascade": _env_bool("REMOVE_CASCADE", "false"),
        "starting_block_immovable": _env_bool("STARTING_BLOCK_IMMOVABLE", "true"),
        # Workflow budgets
        "draft_review_max_rounds": int(os.getenv("DRAFT_REVIEW_MAX_ROUNDS", "5")),
        "build_guidance_max_turns": int(os.getenv("BUILD_GUIDANCE_MAX_TURNS", "120")),
        "malformed_output_retries": int(os.getenv("MALFORMED_OUTPUT_RETRIES", "2")),
        # Surrogate evaluator constants
        "attachment_strength": float(os.getenv("ATTACHMENT_STRENGTH", "100.0")),
        "brace_strength": float(os.getenv("BRACE_STRENGTH", "60.0")),
        "winch_strength": float(os.getenv("WINCH_STRENGTH", "20.0")),
        "min_bearing": float(os.getenv("MIN_BEARING", "0.5")),
        "sample_period": float(os.getenv("SAMPLE_PERIOD", "0.04")),
        # Bench
        "bench_workers": int(os.getenv("BENCH_WORKERS", "4")),
        # Live backend (optional)
        "gemini_api_key": os.getenv("GEMINI_API_KEY"),
        "gemini_model": os.getenv("GEMINI_MODEL", "gemini-2.0-flash"),
    }

    return config


def validate_config(config: Dict) -> List[str]:
    """Validate configuration and return list of errors."""
    errors = []

    for key in ("catalog_path", "templates_path"):
        if not Path(config.get(key, "")).is_file():
            errors.append(f"{key} does not point to a file: {config.get(key)}")

    for key in ("prompts_dir", "tasks_dir"):
        if not Path(config.get(key, "")).is_dir():
            errors.append(f"{key} does not point to a directory: {config.get(key)}")

    if config.get("contact_tolerance", 0) < 0:
        errors.append("CONTACT_TOLERANCE must be >= 0")

    if config.get("max_connectors_per_face", 0) < 1:
        errors.append("MAX_CONNECTORS_PER_FACE must be >= 1")

    if config.get("connector_max_span", 0) <= 0:
        errors.append("CONNECTOR_MAX_SPAN must be > 0")

    for key in (
        "draft_review_max_rounds",
        "build_guidance_max_turns",
        "bench_workers",
    ):
        if config.get(key, 0) < 1:
            errors.append(f"{key.upper()} must be >= 1")

    if config.get("malformed_output_retries", 0) < 1:
        errors.append("MALFORMED_OUTPUT_RETRIES must be >= 1")

    for key in ("attachment_strength", "brace_strength", "winch_strength"):
        if config.get(key, 0) <= 0:
            errors.append(f"{key.upper()} must be > 0")

    if config.get("sample_period", 0) <= 0:
        errors.append("SAMPLE_PERIOD must be > 0")

    # The Gemini key is only checked when the live backend is requested

    return errors


QUIET_LOGGERS = ("httpx", "httpcore", "google_genai", "google_genai.models", "urllib3")


def setup_logging(log_level: str = "INFO", log_file: str | None = None) -> None:
    """Route logs to a Rich console on stderr and, optionally, a plain-text file.

    stdout is left alone: the tool server and the commands print their
    results there.
    """
    logging.root.handlers.clear()

    handlers: List[logging.Handler] = [
        RichHandler(
            console=Console(stderr=True),
            show_path=False,
            rich_tracebacks=True,
            markup=False,
        )
    ]
    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)-8s %(name)s: %(message)s")
        )
        handlers.append(file_handler)

    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.INFO),
        handlers=handlers,
        format="%(message)s",
    )
    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


def get_legal_keys() -> List[str]:
    """Return the control keys a binding may use."""
    arrows = ["UpArrow", "DownArrow", "LeftArrow", "RightArrow"]
    alpha = [f"Alpha{i}" for i in range(10)]
    keypad = [f"Keypad{i}" for i in range(10)]
    return arrows + alpha + keypad
