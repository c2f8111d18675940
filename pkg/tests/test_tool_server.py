import io
import json
import random
from types import SimpleNamespace

import pytest

from conftest import random_action
from services.tool_server import ToolServer, serve_tools


def request(request_id, name, /, session=None, **arguments):
    payload = {"id": request_id, "action": {"name": name, "arguments": arguments}}
    if session is not None:
        payload["session"] = session
    return json.dumps(payload)


def serve(engine, lines):
    instream = io.BytesIO(("\n".join(lines) + "\n").encode("utf-8"))
    outstream = io.StringIO()
    server = serve_tools(instream, outstream, engine)
    responses = [json.loads(line) for line in outstream.getvalue().splitlines()]
    return server, responses


def test_one_response_per_request_in_order(engine):
    server, responses = serve(
        engine,
        [
            request(1, "start"),
            request(2, "attach_block_to", base_block=0, face="top", new_block="SmallWoodenBlock"),
            request(3, "attach_block_to", base_block=0, face="top", new_block="SmallWoodenBlock"),
            request(4, "get_machine_summary"),
        ],
    )
    assert [r["id"] for r in responses] == [1, 2, 3, 4]
    assert [r["ok"] for r in responses] == [True, True, False, True]
    assert responses[2]["error"] == "FaceOccupied"
    assert responses[1]["state_delta"]["created_blocks"] == [1]
    assert responses[3]["description"].startswith("Machine with 2 block(s)")
    assert len(server.sessions["default"].transcript) == 4


def test_undecodable_lines_keep_the_server_running(engine):
    instream = io.BytesIO(b'{"id": 1, "name": "start"}\nnot json\n\xff\xfe\n[1, 2]\n\n{"id": 5, "name": "get_machine_summary"}\n')
    outstream = io.StringIO()
    server = serve_tools(instream, outstream, engine)
    responses = [json.loads(line) for line in outstream.getvalue().splitlines()]
    assert [r["id"] for r in responses] == [1, None, None, None, 5]
    assert [r.get("error") for r in responses[1:4]] == ["ProtocolError"] * 3
    assert responses[-1]["ok"]
    assert server.requests_seen == 6


def test_envelope_errors_echo_the_id(engine):
    server = ToolServer(engine)
    assert server.handle_line('{"id": 7, "action": {"arguments": {}}}')["error"] == "ProtocolError"
    assert server.handle_line('{"id": 8, "name": "start", "arguments": [1]}')["id"] == 8
    assert server.handle_line('{"id": 9, "name": "start", "category": "magic"}')["error"] == "ProtocolError"
    assert server.handle_line("   ") is None


def test_sessions_are_isolated(engine):
    server, responses = serve(
        engine,
        [
            request(1, "start", session="a"),
            request(2, "start", session="b"),
            request(3, "attach_block_to", session="a", base_block=0, face="north", new_block="SmallWoodenBlock"),
            request(4, "list_sessions"),
            request(5, "close_session", session="b"),
            request(6, "close_session", session="b"),
        ],
    )
    assert sorted(server.sessions["a"].scene.blocks) == [0, 1]
    assert "b" not in server.sessions
    assert responses[3]["sessions"] == ["a", "b"]
    assert responses[4]["ok"]
    assert not responses[5]["ok"]


def test_substructures_are_shared_across_sessions(engine):
    _, responses = serve(
        engine,
        [
            request(1, "start", session="engine"),
            request(2, "attach_block_to", session="engine", base_block=0, face="east", new_block="WaterCannon", pointing="down"),
            request(3, "register_substructure", session="engine", name="pod"),
            request(4, "advance_phase", session="engine", target="finalized"),
            request(5, "register_substructure", session="engine", name="pod"),
            request(6, "start", session="frame"),
            request(7, "advance_phase", session="frame", target="assemble"),
            request(8, "merge_substructure", session="frame", name="pod", base_block=0, base_face="top", anchor_block=0, anchor_face="bottom"),
        ],
    )
    assert responses[2]["error"] == "PhaseViolation"
    assert responses[4]["ok"]
    assert responses[7]["ok"], responses[7]["description"]
    assert responses[7]["state_delta"]["created_blocks"] == [1, 2]
    assert "pod" in engine.substructures


def test_register_needs_a_name(engine):
    server = ToolServer(engine)
    response = server.handle_line('{"id": 1, "name": "register_substructure", "arguments": {}}')
    assert response["error"] == "ProtocolError"
    assert response["id"] == 1


@pytest.mark.parametrize("name", ["get_block_detail", "list_free_faces"])
def test_missing_arguments_are_malformed(engine, name):
    server = ToolServer(engine)
    server.handle_line(request(1, "start"))
    response = server.handle_line(request(2, name))
    assert response["error"] == "MalformedArguments"


def _fuzz_lines(seed, count):
    rng = random.Random(seed)
    sessions = ("a", "b")
    for session in sessions:
        yield json.dumps({"id": f"{session}-start", "session": session, "name": "start"}).encode("utf-8")
    for index in range(count):
        roll = rng.random()
        if roll < 0.1:
            yield b"#" + bytes(rng.randrange(256) for _ in range(rng.randrange(1, 40))).replace(b"\n", b" ")
        elif roll < 0.2:
            yield json.dumps({"id": index, "action": rng.choice([None, 3, "x", {"arguments": {}}, []])}).encode("utf-8")
        elif roll < 0.3:
            yield json.dumps({"id": index, "name": rng.choice(["attach_block_to", "bind_key", "teleport"]), "arguments": {"junk": index}}).encode("utf-8")
        else:
            # block ids are guessed; most of them exist once the scenes have grown
            guess = SimpleNamespace(blocks=range(min(index // 10 + 1, 40)))
            name, arguments = random_action(rng, guess)
            yield json.dumps({"id": index, "session": rng.choice(sessions), "name": name, "arguments": arguments}).encode("utf-8")


@pytest.mark.slow
def test_fuzzed_session_leaves_scenes_sound(engine):
    lines = list(_fuzz_lines(7, 1000))
    instream = io.BytesIO(b"\n".join(lines) + b"\n")
    outstream = io.StringIO()
    server = serve_tools(instream, outstream, engine)
    responses = outstream.getvalue().split("\n")[:-1]
    assert len(responses) == sum(1 for line in lines if line.strip())
    assert all(isinstance(json.loads(r), dict) for r in responses)
    for session in server.sessions.values():
        if session.scene.blocks:
            assert engine.builder.check_invariants(session.scene) == []
