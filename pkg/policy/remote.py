"""Chat-completion client and the policy that wraps it."""

import json
import threading
import time
from typing import Any, Callable, Dict, List, Optional

import openai

from arena.types import Event, EventKind, Observation, Role
from system.config import RemoteConfig
from system.logs import get_logger

from .base import Policy
from .errors import RemoteUnavailable
from .parsing import PolicyOutput

logger = get_logger(__name__)

AGENT_FORMAT = (
    "Respond with an optional <think>...</think> block followed by EXACTLY ONE of:\n"
    '<function>{"name": "<tool name>", "arguments": {...}}</function>\n'
    "<message>text for the user</message>\n"
    "Never emit both a function call and a message."
)

USER_FORMAT = (
    "Respond with an optional <think>...</think> block followed by <answer>your reply</answer>. "
    "When your goal is met end the answer with ###STOP###; if you are transferred end it with "
    "###TRANSFER###; if the request cannot be handled end it with ###OUT-OF-SCOPE###. "
    "Use at most one of these markers."
)


class ChatClient:
    """Bounded, retrying chat-completion client.

    Returns the raw assistant text and never interprets it.
    """

    def __init__(self, config: RemoteConfig, client: Any = None,
                 sleep: Callable[[float], None] = time.sleep, backoff: float = 1.0):
        self.config = config
        self._client = client
        self._sleep = sleep
        self._backoff = backoff
        self._slots = threading.BoundedSemaphore(config.max_in_flight)

    @property
    def client(self):
        if self._client is None:
            self._client = openai.OpenAI(
                api_key=self.config.api_key() or "EMPTY",
                base_url=self.config.base_url,
                timeout=self.config.timeout,
                max_retries=0,
            )
        return self._client

    def complete(self, messages: List[Dict[str, str]], temperature: Optional[float] = None) -> str:
        """One chat-completion round trip.

        Args:
            messages: ``[{role, content}]`` conversation
            temperature: Overrides the configured temperature

        Returns:
            Assistant message content

        Raises:
            RemoteUnavailable: every attempt failed
        """
        attempts = self.config.retry_count + 1
        last_error: Optional[Exception] = None
        for attempt in range(attempts):
            try:
                with self._slots:
                    response = self.client.chat.completions.create(
                        model=self.config.model,
                        messages=messages,
                        temperature=self.config.temperature if temperature is None else temperature,
                    )
                return response.choices[0].message.content or ""
            except (openai.OpenAIError, IndexError, AttributeError) as e:
                last_error = e
                if attempt + 1 < attempts:
                    delay = self._backoff * (2 ** attempt)
                    logger.warning("chat completion failed (attempt %d/%d): %s; retrying in %.1fs",
                                   attempt + 1, attempts, e, delay)
                    self._sleep(delay)
        raise RemoteUnavailable(f"chat completion failed after {attempts} attempts: {last_error}")


def _tool_listing(obs: Observation) -> str:
    return json.dumps([t.to_dict() for t in obs.tools], indent=1)


def _event_text(event: Event) -> str:
    if event.kind is EventKind.TOOL_CALL:
        return f"<function>{event.content}</function>"
    if event.kind is EventKind.TOOL_RESULT:
        return f"<tool_result name=\"{event.tool}\">{event.content}</tool_result>"
    return event.content


def observation_messages(obs: Observation) -> List[Dict[str, str]]:
    """Chat messages for an observation, written from the observer's side."""
    if obs.role is Role.AGENT:
        system = f"{obs.system_context}\n\nTools:\n{_tool_listing(obs)}\n\n{AGENT_FORMAT}"
    else:
        system = f"{obs.system_context}\n\n{USER_FORMAT}"
        if obs.tools:
            system += f"\nYou may call these tools with a <function> tag:\n{_tool_listing(obs)}"
    messages = [{"role": "system", "content": system}]
    for event in obs.history:
        if event.kind is EventKind.SIGNAL:
            continue
        own = event.role is obs.role and event.kind is not EventKind.TOOL_RESULT
        messages.append({"role": "assistant" if own else "user", "content": _event_text(event)})
    return messages


class RemotePolicy(Policy):
    """Agent or user policy backed by a chat-completion endpoint."""

    name = "remote"

    def __init__(self, role: Role, client: ChatClient, name: Optional[str] = None):
        super().__init__(role)
        self.client = client
        self.name = name or f"remote:{client.config.model}"

    def _generate(self, obs: Observation, rng_seed: int) -> PolicyOutput:
        text = self.client.complete(observation_messages(obs))
        return PolicyOutput(raw_text=text, parsed=self.parse(text))
