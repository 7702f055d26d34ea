"""Code generators behind one small port.

A generator turns a :class:`GenerationRequest` into MCScript source text.
Three implementations ship: replay (canned fixtures, used by tests and
offline evals), template (regex extraction for simple point-to-point
instructions), and remote (an OpenAI-style chat completion endpoint).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Protocol

from ..errors import GeneratorUnavailable, RemoteError
from .decompose import Decomposition, decompose
from .retrieval import Chunk

DEFAULT_PROMPT = """You are a motion-control programmer. Write an MCScript program \
for the task below. Use only documented commands, one statement per line, with \
key=value arguments. Reply with the program only.

Task:
{instruction}

Relevant documentation and samples:
{chunks}

Previous attempt failed with:
{error}
"""


@dataclass(frozen=True)
class GenerationRequest:
    """Everything a generator may condition on for one attempt."""

    task_id: str
    instruction: str
    attempt: int = 1
    decomposition: Decomposition | None = None
    chunks: tuple[Chunk, ...] = ()
    prior_error: str | None = None


class GeneratorPort(Protocol):
    def generate(self, request: GenerationRequest) -> str: ...


def render_prompt(template: str, request: GenerationRequest) -> str:
    """Fill the prompt template's {instruction}, {chunks}, {error} slots."""
    blocks = [f"[{c.id}]\n{c.text.rstrip()}" for c in request.chunks]
    return template.format(
        instruction=request.instruction,
        chunks="\n\n".join(blocks) if blocks else "(none)",
        error=request.prior_error or "(no previous attempt)",
    )


class ReplayGenerator:
    """Replays canned programs keyed by task id.

    A fixture may be a single string (returned every attempt) or a sequence
    of strings indexed by attempt; attempts past the end repeat the last
    entry.  Unknown task ids raise :class:`GeneratorUnavailable`.
    """

    def __init__(self, fixtures: dict):
        self.fixtures = dict(fixtures)

    def generate(self, request: GenerationRequest) -> str:
        fixture = self.fixtures.get(request.task_id)
        if fixture is None:
            raise GeneratorUnavailable(
                f"no fixture for task {request.task_id!r}")
        if isinstance(fixture, str):
            return fixture
        idx = min(request.attempt - 1, len(fixture) - 1)
        return fixture[idx]


_MOVE_RE = re.compile(r"\bmove\s+axis\s+(\d+)\b", re.IGNORECASE)
_TARGET_RE = re.compile(r"\bposition\s+(-?\d+(?:\.\d+)?)", re.IGNORECASE)
_VEL_RE = re.compile(r"\bspeed\s+(?:of\s+)?(-?\d+(?:\.\d+)?)", re.IGNORECASE)
_ACC_RE = re.compile(r"\bacceleration\s+(?:of\s+)?(-?\d+(?:\.\d+)?)", re.IGNORECASE)
_DEC_RE = re.compile(r"\bdeceleration\s+(?:of\s+)?(-?\d+(?:\.\d+)?)", re.IGNORECASE)
_RATIO_RE = re.compile(r"\bjerk\W*acc\W*ratio\s+(?:of\s+)?(\d+(?:\.\d+)?)", re.IGNORECASE)
_ENDVEL_RE = re.compile(r"\bend\s+velocity\s+(?:of\s+)?(-?\d+(?:\.\d+)?)", re.IGNORECASE)
_SLEEP_RE = re.compile(r"\b(?:wait|sleep)\s+(?:for\s+)?(\d+)\s*ms\b", re.IGNORECASE)
_OUT_RE = re.compile(r"\b(?:set\s+)?output\s+(\d+)\s+(?:to\s+)?(high|low|1|0)\b",
                     re.IGNORECASE)


def _profile_name(text: str) -> str | None:
    low = text.casefold()
    if re.search(r"jerk\W*(acc\W*)?ratio|jerkratio", low):
        return "JerkRatio"
    if re.search(r"s\W*curve|scurve", low):
        return "SCurve"
    if "trapezoid" in low:
        return "Trapezoidal"
    return None


def _fmt_num(text: str) -> str:
    return text if re.fullmatch(r"-?\d+", text) else repr(float(text))


class TemplateGenerator:
    """Regex extraction for simple instructions; a fallback, not a model.

    Handles point-to-point moves, millisecond waits, and output toggles.
    Subtasks it cannot parse are skipped, which the verifier then catches.
    """

    def generate(self, request: GenerationRequest) -> str:
        decomposition = request.decomposition or decompose(request.instruction)
        lines: list[str] = []
        for subtask in decomposition.subtasks or (request.instruction,):
            lines.extend(self._emit(subtask))
        if not lines:
            raise GeneratorUnavailable(
                f"no template matches task {request.task_id!r}")
        return "\n".join(lines) + "\n"

    def _emit(self, subtask: str) -> list[str]:
        move = _MOVE_RE.search(subtask)
        if move:
            target = _TARGET_RE.search(subtask)
            vel = _VEL_RE.search(subtask)
            acc = _ACC_RE.search(subtask)
            if not (target and vel and acc):
                return []
            axis = move.group(1)
            parts = [f"StartPos axis={axis} target={_fmt_num(target.group(1))} "
                     f"vel={_fmt_num(vel.group(1))} acc={_fmt_num(acc.group(1))}"]
            dec = _DEC_RE.search(subtask)
            if dec:
                parts[0] += f" dec={_fmt_num(dec.group(1))}"
            profile = _profile_name(subtask)
            if profile:
                parts[0] += f" profile={profile}"
            ratio = _RATIO_RE.search(subtask)
            if ratio:
                if not profile:
                    parts[0] += " profile=JerkRatio"
                parts[0] += f" jerk_ratio={repr(float(ratio.group(1)))}"
            endvel = _ENDVEL_RE.search(subtask)
            if endvel:
                parts[0] += f" end_vel={_fmt_num(endvel.group(1))}"
            parts.append(f"Wait axis={axis}")
            return parts
        sleep = _SLEEP_RE.search(subtask)
        if sleep:
            return [f"Sleep ms={sleep.group(1)}"]
        out = _OUT_RE.search(subtask)
        if out:
            level = out.group(2).casefold()
            value = 1 if level in ("high", "1") else 0
            return [f"SetOut bit={out.group(1)} level={value}"]
        return []


_FENCE_RE = re.compile(r"```(?:[\w-]*)\n(.*?)```", re.DOTALL)


class RemoteGenerator:
    """Chat-completion client for an OpenAI-style endpoint.

    The API key is read from the environment (``api_key_env``); requests
    time out and non-200 responses raise :class:`RemoteError` with the
    status attached.  A fenced code block in the reply is unwrapped.
    """

    def __init__(self, endpoint: str, model: str,
                 api_key_env: str = "MOCSIM_API_KEY",
                 prompt_template: str | None = None,
                 timeout: float = 60.0, temperature: float = 0.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.prompt_template = prompt_template or DEFAULT_PROMPT
        self.timeout = timeout
        self.temperature = temperature

    def generate(self, request: GenerationRequest) -> str:
        if not self.endpoint:
            raise GeneratorUnavailable("no remote endpoint configured")
        import os

        import requests

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "user",
                 "content": render_prompt(self.prompt_template, request)},
            ],
        }
        try:
            resp = requests.post(self.endpoint, json=payload, headers=headers,
                                 timeout=self.timeout)
        except requests.RequestException as e:
            raise RemoteError(f"request to {self.endpoint} failed: {e}") from e
        if resp.status_code != 200:
            raise RemoteError(
                f"endpoint returned status {resp.status_code}",
                status=resp.status_code)
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError, ValueError) as e:
            raise RemoteError(f"malformed completion response: {e}") from e
        fenced = _FENCE_RE.search(content)
        return fenced.group(1) if fenced else content
