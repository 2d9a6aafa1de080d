"""LLM provider abstraction plus the deterministic mocks used for testing.

Real backends are configured purely through environment variables and are
never exercised by the hermetic test suite; the mocks replay scripted
transcripts (or echo prompt evidence) so the full annotation pipeline is
reproducible byte-for-byte.
"""

from __future__ import annotations

import json
import os
import urllib.request
from dataclasses import dataclass, field
from typing import Sequence

from .errors import InvalidInputError, ProviderTransportError

# a scripted transcript entry equal to this sentinel simulates a transport failure
TRANSPORT_ERROR = "<<TRANSPORT_ERROR>>"

ENV_ENDPOINT = "EMOANNOT_LLM_ENDPOINT"
ENV_API_KEY = "EMOANNOT_LLM_API_KEY"
ENV_MODEL = "EMOANNOT_LLM_MODEL"


@dataclass
class Attachment:
    """Keyframe image reference handed to image-capable providers."""

    uri: str
    frame_index: int


class LlmProvider:
    """Interface contract: complete(prompt, attachments) -> response text."""

    model_id: str = "unconfigured"
    image_input: bool = False

    def complete(self, prompt: str, attachments: Sequence[Attachment] = ()) -> str:
        raise NotImplementedError


def _between(text: str, start_marker: str, end_marker: str) -> str:
    try:
        start = text.index(start_marker) + len(start_marker)
        end = text.index(end_marker, start)
    except ValueError:
        return ""
    return text[start:end].strip()


class EchoProvider(LlmProvider):
    """Deterministic mock: answers by echoing the evidence block of the prompt."""

    model_id = "mock-echo"
    image_input = False

    def complete(self, prompt: str, attachments: Sequence[Attachment] = ()) -> str:
        if "multimodal_description:" in prompt:
            priors = _between(prompt, "--- prior descriptions ---", "--- end prior ---")
            flat = " | ".join(ln.strip() for ln in priors.splitlines() if ln.strip())
            return (
                f"multimodal_description: combined evidence: {flat}\n"
                "emotion_descriptor: neutral"
            )
        evidence = _between(prompt, "--- features ---", "--- end features ---")
        if not evidence:
            evidence = _between(prompt, "--- keyframes ---", "--- end keyframes ---")
        flat = " | ".join(ln.strip() for ln in evidence.splitlines() if ln.strip())
        return f"description: observed {flat if flat else 'no evidence'}"


@dataclass
class ScriptedProvider(LlmProvider):
    """Replays a fixed transcript of responses, one per complete() call."""

    responses: list[str] = field(default_factory=list)
    model_id: str = "mock-scripted"
    image_input: bool = False
    calls: list[str] = field(default_factory=list)  # prompts seen, for assertions

    def complete(self, prompt: str, attachments: Sequence[Attachment] = ()) -> str:
        self.calls.append(prompt)
        if not self.responses:
            raise ProviderTransportError("scripted transcript exhausted")
        response = self.responses.pop(0)
        if response == TRANSPORT_ERROR:
            raise ProviderTransportError("scripted transport failure")
        return response


class HttpProvider(LlmProvider):
    """Minimal OpenAI-style chat endpoint client, configured via environment.

    Carries no determinism guarantee; excluded from the hermetic tests.
    """

    def __init__(self, endpoint: str, api_key: str, model_id: str, image_input: bool = False):
        self.endpoint = endpoint
        self.api_key = api_key
        self.model_id = model_id
        self.image_input = image_input

    @classmethod
    def from_env(cls) -> "HttpProvider":
        endpoint = os.environ.get(ENV_ENDPOINT)
        model = os.environ.get(ENV_MODEL)
        if not endpoint or not model:
            raise InvalidInputError(
                f"real provider needs {ENV_ENDPOINT} and {ENV_MODEL} set in the environment"
            )
        return cls(endpoint, os.environ.get(ENV_API_KEY, ""), model)

    def complete(self, prompt: str, attachments: Sequence[Attachment] = ()) -> str:
        content: object = prompt
        if attachments and self.image_input:
            content = [{"type": "text", "text": prompt}] + [
                {"type": "image_url", "image_url": {"url": f"{a.uri}#frame={a.frame_index}"}}
                for a in attachments
            ]
        body = json.dumps(
            {"model": self.model_id, "messages": [{"role": "user", "content": content}]}
        ).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint,
            data=body,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.api_key}",
            },
        )
        try:
            with urllib.request.urlopen(req, timeout=120) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except Exception as exc:  # transport problems are retryable by the caller
            raise ProviderTransportError(str(exc)) from exc
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderTransportError(f"malformed provider payload: {payload!r}") from exc


def make_provider(name: str, transcript: list[str] | None = None) -> LlmProvider:
    """CLI/API entry: `mock` (echo), `scripted` (transcript), `real` (env-configured)."""
    if name == "mock":
        return ScriptedProvider(responses=list(transcript)) if transcript else EchoProvider()
    if name == "scripted":
        if transcript is None:
            raise InvalidInputError("scripted provider needs a transcript")
        return ScriptedProvider(responses=list(transcript))
    if name == "real":
        return HttpProvider.from_env()
    raise InvalidInputError(f"unknown provider {name!r}")
