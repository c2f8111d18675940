import json

import pytest

from services.catalog_loader import (
    block_spec,
    describe_block_type,
    load_catalog,
    serialize_catalog,
)
from utils.errors import CatalogValidationError, ParseError, UnknownBlockTypeError


def test_shipped_catalog_has_the_required_types(catalog):
    for type_id in ("StartingBlock", "SmallWoodenBlock", "PoweredWheel", "Torch", "WaterCannon", "Brace", "Winch"):
        assert type_id in catalog
    assert catalog.starting_type == "StartingBlock"
    assert block_spec(catalog, "WaterCannon").is_cannon
    assert block_spec(catalog, "Brace").is_connector
    assert block_spec(catalog, "Torch").faces == ()


def test_wheel_constants(catalog):
    wheel = block_spec(catalog, "PoweredWheel")
    assert wheel.physical.wheel_rpm == 100
    assert wheel.control_actions == ("spin_forward", "spin_backward")
    assert [f.face_id for f in wheel.faces] == ["A"]


def test_serialized_catalog_reloads_with_the_same_hash(catalog):
    reloaded = load_catalog(serialize_catalog(catalog))
    assert reloaded.content_hash == catalog.content_hash
    assert reloaded.type_ids == catalog.type_ids


def test_unknown_block_type(catalog):
    with pytest.raises(UnknownBlockTypeError) as excinfo:
        block_spec(catalog, "Balloon")
    assert excinfo.value.context["type_id"] == "Balloon"


@pytest.mark.parametrize("text", ["", "   ", "{not json", "[]"])
def test_malformed_documents(text):
    with pytest.raises(ParseError):
        load_catalog(text)


def test_version_is_required(catalog):
    data = json.loads(serialize_catalog(catalog))
    data["version"] = "9.9"
    with pytest.raises(ParseError):
        load_catalog(data)


def test_negative_mass_is_rejected(catalog):
    data = json.loads(serialize_catalog(catalog))
    data["blocks"][0]["mass"] = -1
    with pytest.raises(CatalogValidationError) as excinfo:
        load_catalog(data)
    assert excinfo.value.field_name == "mass"


def test_missing_required_type(catalog):
    data = json.loads(serialize_catalog(catalog))
    data["blocks"] = [b for b in data["blocks"] if b["type_id"] != "Torch"]
    with pytest.raises(CatalogValidationError):
        load_catalog(data)


def test_describe_block_type(catalog, templates):
    text = describe_block_type(catalog, "PoweredWheel", templates)
    assert text.startswith("PoweredWheel:")
    assert "100 rpm" in text
    assert "10.472" in text
    assert "spin_forward" in text

    cannon = describe_block_type(catalog, "WaterCannon", templates)
    assert "13.76" in cannon
