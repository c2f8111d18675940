"""Line-delimited JSON tool server exposing the action space to external agents.

One request per line on the input stream, one response per line on the
output stream. A request carries an ``id`` (echoed back), an optional
``session`` name and an action envelope::

    {"id": 1, "session": "a", "action": {"name": "start", "arguments": {}}}

The envelope may also be given inline (``name``/``arguments`` at the top
level). Unknown fields are ignored. Lines that cannot be decoded are answered
with ``"error": "ProtocolError"`` and ``"id": null``; the server keeps
reading until end of stream.
"""

import json
import logging
import threading
from typing import Any, Dict, IO, List, Optional, Union

from models.action import Action, Category
from models.scene import Scene
from services.action_engine import ActionEngine, category_of
from utils.errors import ProtocolError

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = "1.0"
DEFAULT_SESSION = "default"
SERVER_OPERATIONS = ("register_substructure", "list_sessions", "close_session")


class ToolSession:
    """One isolated scene plus the request/response log for it."""

    def __init__(self, name: str):
        self.name = name
        self.scene = Scene()
        self.transcript: List[Dict[str, Any]] = []
        self.lock = threading.Lock()


class ToolServer:
    """Dispatches tool requests to per-session scenes through one action engine."""

    def __init__(self, engine: ActionEngine):
        self.engine = engine
        self.sessions: Dict[str, ToolSession] = {}
        self._sessions_lock = threading.Lock()
        self.requests_seen = 0

    def session(self, name: str) -> ToolSession:
        with self._sessions_lock:
            if name not in self.sessions:
                self.sessions[name] = ToolSession(name)
                logger.debug(f"Opened tool session '{name}'")
            return self.sessions[name]

    @staticmethod
    def decode(line: Union[str, bytes]) -> Dict[str, Any]:
        """Parse one request line.

        Raises:
            ProtocolError: bytes that are not UTF-8, not JSON, or not an object
        """
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as e:
                raise ProtocolError(f"request is not UTF-8: {e}")
        try:
            request = json.loads(line)
        except json.JSONDecodeError as e:
            raise ProtocolError(f"request is not valid JSON: {e}")
        if not isinstance(request, dict):
            raise ProtocolError("request must be a JSON object")
        return request

    @staticmethod
    def envelope(request: Dict[str, Any]) -> Action:
        """The action carried by a decoded request.

        Raises:
            ProtocolError: missing name, non-object arguments or an unknown category
        """
        raw = request.get("action", request)
        if not isinstance(raw, dict):
            raise ProtocolError("'action' must be an object")
        name = raw.get("name")
        if not isinstance(name, str) or not name:
            raise ProtocolError("action needs a string 'name'")
        arguments = raw.get("arguments", {})
        if arguments is None:
            arguments = {}
        if not isinstance(arguments, dict):
            raise ProtocolError("'arguments' must be an object")
        category = raw.get("category")
        if category is None:
            resolved = category_of(name) or Category.QUERY
        else:
            try:
                resolved = Category(category)
            except ValueError:
                raise ProtocolError(f"unknown category {category!r}")
        note = raw.get("note", request.get("note"))
        return Action(resolved, name, arguments, note if isinstance(note, str) else None)

    def handle_line(self, line: Union[str, bytes]) -> Optional[Dict[str, Any]]:
        """Answer one input line. Blank lines get no response."""
        self.requests_seen += 1
        text = line.decode("utf-8", errors="replace") if isinstance(line, bytes) else line
        if not text.strip():
            return None

        request_id = None
        try:
            request = self.decode(line)
            request_id = request.get("id")
            return self.handle(request)
        except ProtocolError as e:
            logger.info(f"Protocol error on request {request_id}: {e}")
            return self._protocol_error(request_id, str(e))
        except Exception as e:
            logger.error(f"Request {request_id} failed unexpectedly: {e}", exc_info=True)
            return {
                "id": request_id,
                "ok": False,
                "error": "InternalError",
                "description": f"The request could not be completed: {e}",
            }

    def handle(self, request: Dict[str, Any]) -> Dict[str, Any]:
        """Dispatch a decoded request within its session."""
        request_id = request.get("id")
        session_name = request.get("session", DEFAULT_SESSION)
        if not isinstance(session_name, str):
            raise ProtocolError("'session' must be a string")
        action = self.envelope(request)

        if action.name in SERVER_OPERATIONS:
            return self._server_operation(request_id, session_name, action)

        session = self.session(session_name)
        with session.lock:
            result = self.engine.apply(session.scene, action)
            response = {"id": request_id, "session": session_name, **result.to_dict()}
            session.transcript.append({"request": action.to_dict(), "response": result.to_dict()})
        logger.debug(f"[{session_name}] {action.name} -> {'ok' if result.ok else result.error.value}")
        return response

    def _server_operation(self, request_id: Any, session_name: str, action: Action) -> Dict[str, Any]:
        if action.name == "list_sessions":
            with self._sessions_lock:
                names = sorted(self.sessions)
            return {
                "id": request_id,
                "ok": True,
                "description": "Open sessions: " + (", ".join(names) if names else "none") + ".",
                "error": None,
                "sessions": names,
            }
        if action.name == "close_session":
            with self._sessions_lock:
                closed = self.sessions.pop(session_name, None)
            return {
                "id": request_id,
                "ok": closed is not None,
                "description": (
                    f"Session '{session_name}' closed."
                    if closed
                    else f"There is no session named '{session_name}'."
                ),
                "error": None if closed else "ProtocolError",
            }

        name = action.arguments.get("name")
        if not isinstance(name, str) or not name:
            raise ProtocolError("register_substructure needs a string 'name' argument")
        session = self.session(session_name)
        with session.lock:
            result = self.engine.register_substructure(name, session.scene)
        return {"id": request_id, "session": session_name, **result.to_dict()}

    @staticmethod
    def _protocol_error(request_id: Any, message: str) -> Dict[str, Any]:
        return {
            "id": request_id,
            "ok": False,
            "error": "ProtocolError",
            "description": f"The request could not be decoded: {message}",
        }

    def serve(self, instream: IO, outstream: IO) -> int:
        """Read requests until end of stream; returns the number of lines read.

        The input may be binary so that undecodable bytes reach the protocol
        error path; the output is a text stream.
        """
        logger.info(f"Tool server ready (protocol {PROTOCOL_VERSION})")
        count = 0
        while True:
            try:
                line = instream.readline()
            except (UnicodeDecodeError, ValueError) as e:
                self._write(outstream, self._protocol_error(None, str(e)))
                continue
            if not line:
                break
            count += 1
            response = self.handle_line(line)
            if response is not None:
                self._write(outstream, response)
        logger.info(f"Tool server stopped after {count} lines, {len(self.sessions)} sessions")
        return count

    @staticmethod
    def _write(outstream: IO, response: Dict[str, Any]) -> None:
        outstream.write(json.dumps(response, ensure_ascii=False, default=str) + "\n")
        outstream.flush()


def serve_tools(instream: IO, outstream: IO, engine: ActionEngine) -> ToolServer:
    """Run a tool server over the given streams until end of stream.

    Substructures registered by any session land in the engine's registry
    and can be merged by every other session.
    """
    server = ToolServer(engine)
    server.serve(instream, outstream)
    return server
