"""Chat-completion backends used by the synthesis workers."""

import json
import re
import threading
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Mapping, Optional, Sequence

from policy.errors import RemoteUnavailable
from policy.remote import ChatClient
from system.logs import get_logger
from system.storage import canonical_json

from .errors import BackendFailure, ContractViolation

logger = get_logger(__name__)

Messages = List[Dict[str, str]]

BRIEF_MARKER = "\n\nBRIEF:\n"

_FENCE = re.compile(r"^```[a-zA-Z]*\s*|\s*```$")


def request_messages(prompt: str, payload: Mapping[str, Any]) -> Messages:
    """System prompt plus one user message carrying the canonical JSON payload."""
    return [{"role": "system", "content": prompt},
            {"role": "user", "content": canonical_json(payload)}]


def with_brief(system_text: str, brief: Mapping[str, Any]) -> str:
    """Attach a JSON brief to a dialogue system prompt."""
    return f"{system_text}{BRIEF_MARKER}{canonical_json(brief)}"


def read_brief(messages: Sequence[Mapping[str, str]]) -> Dict[str, Any]:
    """The brief attached by ``with_brief``, or ``{}``."""
    if not messages:
        return {}
    system = messages[0].get("content", "")
    if BRIEF_MARKER not in system:
        return {}
    try:
        return json.loads(system.rsplit(BRIEF_MARKER, 1)[1])
    except json.JSONDecodeError:
        return {}


def decode_json(text: str, stage: str) -> Any:
    """Parse the JSON body of a backend response, tolerating code fences and chatter.

    Raises:
        ContractViolation: no JSON value can be recovered
    """
    body = _FENCE.sub("", (text or "").strip())
    try:
        return json.loads(body)
    except json.JSONDecodeError:
        pass
    start, end = body.find("{"), body.rfind("}")
    if start != -1 and end > start:
        try:
            return json.loads(body[start:end + 1])
        except json.JSONDecodeError:
            pass
    raise ContractViolation(stage, f"response is not JSON: {body[:80]!r}")


def decode_object(text: str, stage: str) -> Dict[str, Any]:
    value = decode_json(text, stage)
    if not isinstance(value, dict):
        raise ContractViolation(stage, "response must be a JSON object")
    return value


class Backend(ABC):
    """Proposes artifacts; never trusted for verdicts the environment can decide."""

    name = "backend"

    @abstractmethod
    def complete(self, purpose: str, messages: Messages, seed: int) -> str:
        """One completion for ``purpose`` (a worker or stage id).

        Raises:
            BackendFailure: no response could be produced
        """


class LiveBackend(Backend):
    """Any OpenAI-compatible endpoint, through the shared chat client."""

    def __init__(self, client: ChatClient):
        self.client = client
        self.name = f"live:{client.config.model}"

    def complete(self, purpose: str, messages: Messages, seed: int) -> str:
        try:
            return self.client.complete(messages)
        except RemoteUnavailable as e:
            raise BackendFailure(f"{purpose}: {e}") from e


class ScriptedBackend(Backend):
    """Replays canned responses per purpose, falling back to another backend when exhausted."""

    name = "scripted"

    def __init__(self, responses: Mapping[str, Sequence[str]], fallback: Optional[Backend] = None):
        self._queues = {purpose: list(texts) for purpose, texts in responses.items()}
        self.fallback = fallback
        self.requests: List[Dict[str, Any]] = []
        self._lock = threading.Lock()

    def complete(self, purpose: str, messages: Messages, seed: int) -> str:
        with self._lock:
            self.requests.append({"purpose": purpose, "messages": messages, "seed": seed})
            queue = self._queues.get(purpose)
            if queue:
                return queue.pop(0)
        if self.fallback is None:
            raise BackendFailure(f"no scripted response left for {purpose}")
        return self.fallback.complete(purpose, messages, seed)
