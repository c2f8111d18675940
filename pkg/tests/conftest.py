"""Shared fixtures: the shipped catalog, a test config and canned machines."""

import sys
from pathlib import Path

import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from services.action_engine import ActionEngine  # noqa: E402
from services.catalog_loader import load_catalog_file, load_templates  # noqa: E402
from utils.config import load_config  # noqa: E402


@pytest.fixture(scope="session")
def base_config():
    config = load_config()
    config["log_file"] = None
    config["bench_workers"] = 2
    return config


@pytest.fixture
def config(base_config):
    return dict(base_config)


@pytest.fixture(scope="session")
def catalog(base_config):
    return load_catalog_file(base_config["catalog_path"])


@pytest.fixture(scope="session")
def templates(base_config):
    return load_templates(base_config["templates_path"])


@pytest.fixture
def engine(catalog, config, templates):
    return ActionEngine(catalog, config, templates)


def attach(engine, scene, base, face, block_type, **extra):
    result = engine.run(scene, "attach_block_to", base_block=base, face=face, new_block=block_type, **extra)
    assert result.ok, result.description
    return result.state_delta.created_blocks[0]


def build_car(engine, drive_seconds=3.0):
    """Four-wheel car driving north on UpArrow for `drive_seconds`."""
    scene = engine.start()
    front = attach(engine, scene, 0, "north", "SmallWoodenBlock", note="front axle")
    rear = attach(engine, scene, 0, "south", "SmallWoodenBlock", note="rear axle")
    wheels = []
    for base in (front, rear):
        for side in ("east", "west"):
            wheel = attach(engine, scene, base, side, "PoweredWheel", note=f"{side} wheel {base}")
            if side == "west":
                assert engine.run(scene, "flip_block", block=wheel).ok
            wheels.append(wheel)
    for wheel in wheels:
        assert engine.run(scene, "bind_key", key="UpArrow", action="spin_forward", block=wheel).ok
    assert engine.run(scene, "add_control_sequence", time=0, key="UpArrow", hold_for=drive_seconds).ok
    return scene, wheels


def build_heated_engine(engine, with_torch=True):
    """Downward cannon on the east face, optionally heated by a torch on top."""
    scene = engine.start()
    cannon = attach(engine, scene, 0, "east", "WaterCannon", pointing="down", note="lift cannon")
    torch = None
    if with_torch:
        torch = attach(engine, scene, 0, "top", "Torch", pointing="east", note="heater")
    return scene, cannon, torch


def build_beam(engine, north=3, south=2):
    """Straight beam of wooden blocks along y through the starting block."""
    scene = engine.start()
    ids = {"north": [], "south": []}
    for side, count in (("north", north), ("south", south)):
        base = 0
        for _ in range(count):
            base = attach(engine, scene, base, side, "SmallWoodenBlock")
            ids[side].append(base)
    return scene, ids


@pytest.fixture
def car(engine):
    return build_car(engine)


@pytest.fixture
def heated_engine(engine):
    return build_heated_engine(engine)


@pytest.fixture
def beam(engine):
    return build_beam(engine)


FUZZ_TYPES = ("SmallWoodenBlock", "SmallWoodenBlock", "PoweredWheel", "WaterCannon", "Torch", "Balloon")
FUZZ_FACES = ("top", "bottom", "north", "south", "east", "west", "A", "left")
FUZZ_POINTING = ("up", "down", "north", "south", "east", "west", None)


def random_action(rng, scene):
    """One (name, arguments) pair; roughly a third of them are expected to fail."""
    ids = sorted(scene.blocks) or [0]
    block = rng.choice(ids + [max(ids) + 5])
    kind = rng.random()
    if kind < 0.5:
        arguments = {"base_block": block, "face": rng.choice(FUZZ_FACES), "new_block": rng.choice(FUZZ_TYPES)}
        pointing = rng.choice(FUZZ_POINTING)
        if pointing is not None:
            arguments["pointing"] = pointing
        return "attach_block_to", arguments
    if kind < 0.6:
        return "twist_block", {"block": block, "angle": rng.choice((90, -90, 45, 180))}
    if kind < 0.7:
        return "translate_block", {"block": block, "shift": [rng.choice((-0.5, 0.0, 0.5)) for _ in range(3)]}
    if kind < 0.75:
        return "flip_block", {"block": block}
    if kind < 0.82:
        return "remove_block", {"block": block, "cascade": rng.random() < 0.5}
    if kind < 0.92:
        return "connect_blocks", {
            "a": block,
            "face_a": rng.choice(FUZZ_FACES),
            "b": rng.choice(ids),
            "face_b": rng.choice(FUZZ_FACES),
            "connector": rng.choice(("Brace", "Winch")),
        }
    return "get_block_detail", {"block": block}
