#!/usr/bin/env python3
"""
Entry point wrapper that can be run from the project root directory.
"""

import sys
from pathlib import Path


def setup_and_run() -> int:
    """Put src/ on the import path and run the command line."""
    project_root = Path(__file__).parent
    src_path = project_root / "src"
    sys.path.insert(0, str(src_path))

    from main import main

    return main()


if __name__ == "__main__":
    sys.exit(setup_and_run())
