"""Agent backends: scripted transcript replay and an optional Gemini adapter."""

import json
import logging
import threading
from abc import ABC, abstractmethod
from collections import deque
from pathlib import Path
from typing import Any, Deque, Dict, List, Optional, Sequence, Tuple, Union

from google.genai import Client
from google.genai import types

from models.workflow import AgentReply, Entity, Message
from utils.errors import BackendError
from utils.retry import RetryableError, classify_backend_error, retry_api_call

logger = logging.getLogger(__name__)

ScriptItem = Union[str, Dict[str, Any]]


class AgentBackend(ABC):
    """Produces the next message of an entity given its conversation so far."""

    @abstractmethod
    def reply(self, entity: Entity, conversation: Sequence[Message]) -> AgentReply:
        """Return the entity's next message with reported token usage.

        Raises:
            BackendError: the backend cannot answer
        """


class ScriptedBackend(AgentBackend):
    """Replays fixed per-entity replies in order.

    Script items are plain strings or objects with text, input_tokens and
    output_tokens. Plain strings report the default usage. Every request is
    kept in ``requests`` as (entity, conversation).
    """

    def __init__(
        self,
        script: Dict[str, Sequence[ScriptItem]],
        input_tokens: int = 10,
        output_tokens: int = 5,
    ):
        self.queues: Dict[str, Deque[ScriptItem]] = {
            str(entity): deque(items) for entity, items in script.items()
        }
        self.input_tokens = input_tokens
        self.output_tokens = output_tokens
        self.calls = 0
        self.requests: List[Tuple[Entity, Tuple[Message, ...]]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ScriptedBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScriptedBackend":
        usage = data.get("usage", {})
        return cls(
            data.get("entities", data),
            input_tokens=int(usage.get("input_tokens", 10)),
            output_tokens=int(usage.get("output_tokens", 5)),
        )

    def reply(self, entity: Entity, conversation: Sequence[Message]) -> AgentReply:
        name = entity.name.value
        with self._lock:
            queue = self.queues.get(name)
            if not queue:
                raise BackendError(f"script for {name} is exhausted")
            item = queue.popleft()
            self.calls += 1
            self.requests.append((entity, tuple(conversation)))
        if isinstance(item, dict):
            return AgentReply(
                text=str(item.get("text", "")),
                input_tokens=int(item.get("input_tokens", self.input_tokens)),
                output_tokens=int(item.get("output_tokens", self.output_tokens)),
            )
        return AgentReply(str(item), self.input_tokens, self.output_tokens)


class GeminiBackend(AgentBackend):
    """Live backend over Google GenAI. Every entity uses the same model."""

    def __init__(self, api_key: str, model_name: str = "gemini-2.0-flash", temperature: float = 0.7):
        """Initialize Google GenAI client.

        Args:
            api_key: Google GenAI API key
            model_name: Gemini model to use
            temperature: Sampling temperature shared by all entities
        """
        self.model_name = model_name
        self.temperature = temperature
        self.client = Client(api_key=api_key)

        logger.info(f"Initialized Gemini backend with model: {model_name}")

    def reply(self, entity: Entity, conversation: Sequence[Message]) -> AgentReply:
        try:
            return self._generate(entity, conversation)
        except RetryableError as e:
            raise BackendError(f"{entity.name.value} call failed after retries: {e}")

    @retry_api_call(max_retries=5, base_delay=2.0)
    def _generate(self, entity: Entity, conversation: Sequence[Message]) -> AgentReply:
        contents = [
            types.Content(
                role="model" if message.role == "assistant" else "user",
                parts=[types.Part(text=message.content)],
            )
            for message in conversation
            if message.role != "system"
        ]
        try:
            response = self.client.models.generate_content(
                model=self.model_name,
                contents=contents,
                config=types.GenerateContentConfig(
                    system_instruction=entity.prompt,
                    temperature=self.temperature,
                ),
            )
        except Exception as e:
            logger.error(f"{entity.name.value} request failed: {e}")
            retryable = classify_backend_error(e)
            if retryable is not None:
                raise retryable from e
            raise BackendError(f"{entity.name.value} request failed: {e}")

        if not response.text:
            logger.error("Model response is empty")
            raise BackendError(f"{entity.name.value} returned an empty response")
        usage = getattr(response, "usage_metadata", None)
        return AgentReply(
            text=response.text,
            input_tokens=int(getattr(usage, "prompt_token_count", 0) or 0),
            output_tokens=int(getattr(usage, "candidates_token_count", 0) or 0),
        )


def create_backend(spec: str, config: Optional[Dict] = None) -> AgentBackend:
    """Build a backend from 'scripted:PATH' or 'gemini'.

    Raises:
        ValueError: unknown spec or missing API key
    """
    if spec.startswith("scripted:"):
        return ScriptedBackend.from_file(spec.split(":", 1)[1])
    if spec == "gemini":
        config = config or {}
        api_key = config.get("gemini_api_key")
        if not api_key:
            raise ValueError("GEMINI_API_KEY is required for the gemini backend")
        return GeminiBackend(api_key, config.get("gemini_model", "gemini-2.0-flash"))
    raise ValueError(f"unknown backend '{spec}' (use scripted:PATH or gemini)")


def load_scripts(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Per-sample scripts: a JSON list of scripts, or one script reused for every sample."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "samples" in data:
        return list(data["samples"])
    if isinstance(data, list):
        return data
    return [data]
