"""Agent implementations behind one interface, plus evaluator verdict parsing.

Three agents ship: scripted playback for deterministic tests, a seeded random
policy over the possible actions encoded in the prompt (a monkey-testing
baseline), and a remote chat-completion client for real models.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import random
import time
from dataclasses import dataclass
from enum import Enum

import requests

from .actions import ActionCommand, extract_first_json_object, format_action
from .prompts import PromptDocument
from .widgets import PossibleAction, parse_tree, possible_actions


class AgentError(Exception):
    """An agent could not produce a response."""


class ScriptExhausted(AgentError):
    """A scripted agent ran out of lines."""


class RemoteAgentError(AgentError):
    """The chat-completion request failed permanently."""


class VerdictParseError(ValueError):
    """An evaluator response could not be turned into a Verdict."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


AGENT_ROLES = ("controller", "evaluator")


@dataclass(frozen=True)
class AgentRequest:
    prompt: PromptDocument
    role: str

    def __post_init__(self) -> None:
        if self.role not in AGENT_ROLES:
            raise ValueError(f"unknown agent role {self.role!r}")
        if self.role == "evaluator" and len(self.prompt.attachments) != 2:
            raise ValueError("evaluator requests carry exactly two attachments")


class VerdictState(Enum):
    OKAY = "okay"
    PROBLEM = "problem"


@dataclass(frozen=True)
class Verdict:
    """The evaluator's judgment: okay, or a problem with a reason."""

    state: VerdictState
    reason: str | None = None

    def __post_init__(self) -> None:
        if self.state is VerdictState.PROBLEM and not self.reason:
            raise ValueError("a problem verdict requires a reason")
        if self.state is VerdictState.OKAY and self.reason is not None:
            raise ValueError("an okay verdict carries no reason")


def parse_verdict(raw: str) -> Verdict:
    """Extract the verdict JSON from raw evaluator output."""
    try:
        obj = extract_first_json_object(raw)
    except ValueError as exc:
        raise VerdictParseError(str(exc), raw=raw) from None
    state = obj.get("state")
    if state is None:
        raise VerdictParseError("verdict JSON lacks a state", raw=raw)
    if state == VerdictState.OKAY.value:
        return Verdict(VerdictState.OKAY)
    if state == VerdictState.PROBLEM.value:
        reason = obj.get("reason")
        if not isinstance(reason, str) or not reason:
            raise VerdictParseError("problem verdict without a reason", raw=raw)
        return Verdict(VerdictState.PROBLEM, reason)
    raise VerdictParseError(f"unknown state {state!r}", raw=raw)


def verdict_to_json(verdict: Verdict) -> str:
    if verdict.state is VerdictState.OKAY:
        return json.dumps({"state": "okay"})
    return json.dumps({"state": "problem", "reason": verdict.reason})


class Agent:
    """Uniform interface: one raw text response per request."""

    def respond(self, request: AgentRequest) -> str:
        raise NotImplementedError

    @property
    def finished(self) -> bool:
        """True once the agent can produce no further responses."""
        return False


class ScriptedAgent(Agent):
    """Plays back a fixed list of responses, then raises ScriptExhausted."""

    def __init__(self, lines: list[str]):
        self._lines = list(lines)
        self._next = 0

    def respond(self, request: AgentRequest) -> str:
        if self._next >= len(self._lines):
            raise ScriptExhausted(f"script exhausted after {len(self._lines)} responses")
        line = self._lines[self._next]
        self._next += 1
        return line

    @property
    def finished(self) -> bool:
        return self._next >= len(self._lines)


GUI_SECTION_MARKER = "The current state of the GUI:\n"

_WRITE_POOL = (
    "test",
    "1.0",
    "/tmp/work",
    "C:\\tools\\mytool",
    "42",
    "hello world",
    "mapping.xml",
)


class RandomAgent(Agent):
    """Controller-only monkey policy: picks uniformly among possible actions.

    The per-request RNG is derived from (seed, prompt text), so the same
    request always yields the same response and a whole run is reproducible
    from its seed.
    """

    def __init__(self, seed: int):
        self.seed = seed

    def respond(self, request: AgentRequest) -> str:
        if request.role != "controller":
            raise AgentError("the random agent only supports the controller role")
        prompt_text = request.prompt.text()
        tree = self._extract_tree(prompt_text)
        candidates = [pa for pa in possible_actions(tree) if self._satisfiable(pa)]
        if not candidates:
            raise AgentError("no possible actions encoded in the prompt")
        digest = hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()
        rng = random.Random(f"{self.seed}:{digest}")
        chosen = rng.choice(candidates)
        arg: str | None = None
        if chosen.arg.kind == "free_text":
            arg = rng.choice(_WRITE_POOL)
        elif chosen.arg.kind == "one_of":
            arg = rng.choice(chosen.arg.choices)
        command = format_action(ActionCommand(chosen.verb, chosen.control_id, arg))
        explanation = f"try {chosen.verb.value} on control {chosen.control_id}"
        return json.dumps({"action": command, "explanation": explanation})

    @staticmethod
    def _extract_tree(prompt_text: str):
        start = prompt_text.find(GUI_SECTION_MARKER)
        if start == -1:
            raise AgentError("prompt carries no GUI section")
        return parse_tree(_first_json_text(prompt_text[start + len(GUI_SECTION_MARKER):]))

    @staticmethod
    def _satisfiable(pa: PossibleAction) -> bool:
        return not (pa.arg.kind == "one_of" and not pa.arg.choices)


def _first_json_text(text: str) -> str:
    obj = extract_first_json_object(text)
    return json.dumps(obj)


@dataclass(frozen=True)
class RemoteAgentConfig:
    """Connection settings for a chat-completion-style endpoint.

    The credential is read from the named environment variable at request
    time and is never stored on the config, logged, or persisted.
    """

    endpoint: str
    model: str
    api_key_env: str = "GUISCOUT_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    temperature: float = 1.0
    retry_backoff: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")

    def to_json_obj(self) -> dict:
        return {
            "endpoint": self.endpoint,
            "model": self.model,
            "api_key_env": self.api_key_env,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "temperature": self.temperature,
        }


class RemoteAgent(Agent):
    """Sends the prompt as one user message; attachments become image parts."""

    def __init__(self, config: RemoteAgentConfig):
        self.config = config

    def _build_body(self, request: AgentRequest) -> dict:
        content: list[dict] = [{"type": "text", "text": request.prompt.text()}]
        for ref in request.prompt.attachments:
            encoded = base64.b64encode(ref.data).decode("ascii")
            content.append(
                {
                    "type": "image_url",
                    "image_url": {"url": f"data:{ref.media_type};base64,{encoded}"},
                }
            )
        return {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": content}],
        }

    def respond(self, request: AgentRequest) -> str:
        key = os.environ.get(self.config.api_key_env)
        if not key:
            raise RemoteAgentError(
                f"environment variable {self.config.api_key_env} is not set"
            )
        body = self._build_body(request)
        headers = {"Authorization": f"Bearer {key}"}
        delay = self.config.retry_backoff
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt > 0:
                time.sleep(delay)
                delay *= 2
            try:
                response = requests.post(
                    self.config.endpoint, json=body, headers=headers, timeout=self.config.timeout
                )
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
                continue
            if response.status_code == 200:
                try:
                    payload = response.json()
                    return payload["choices"][0]["message"]["content"]
                except (ValueError, LookupError, TypeError) as exc:
                    raise RemoteAgentError(f"malformed completion response: {exc}") from exc
            if response.status_code == 429 or response.status_code >= 500:
                last_error = f"service returned {response.status_code}"
                continue
            raise RemoteAgentError(
                f"service error {response.status_code}: {response.text[:200]}"
            )
        raise RemoteAgentError(
            f"request failed after {self.config.max_retries + 1} attempts: {last_error}"
        )
