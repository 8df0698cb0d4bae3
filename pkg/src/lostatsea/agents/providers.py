"""Text-in/text-out completion providers with retry handling.

Vendor differences live in ``ProviderConfig``; every provider exposes
``complete(prompt, config) -> str`` and raises a ``ProviderError`` subclass
on failure so retries can be classified in the trace.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import httpx

from ..models import StageId
from ..seeding import rng_for
from .prompts import StagePrompt

log = logging.getLogger(__name__)


class ProviderError(Exception):
    kind = "transport"


class TransportError(ProviderError):
    pass


class RateLimitError(ProviderError):
    kind = "rate_limit"


class ProviderTimeout(ProviderError):
    kind = "timeout"


class CredentialsError(ProviderError):
    kind = "credentials"


class ProviderExhausted(ProviderError):
    kind = "exhausted"

    def __init__(self, message: str, attempts: tuple["AttemptRecord", ...]):
        super().__init__(message)
        self.attempts = attempts


@dataclass(frozen=True)
class ProviderConfig:
    provider: str = "stub"
    model: str = "stub"
    endpoint: str = ""
    temperature: float = 1.0
    max_tokens: int = 1024
    timeout: float = 60.0
    parallelism: int = 1
    max_attempts: int = 3
    backoff: float = 1.0
    api_key_env: str = "LLM_API_KEY"
    reask_limit: int = 3
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if self.reask_limit < 0:
            raise ValueError("reask_limit must be non-negative")


@dataclass(frozen=True)
class AttemptRecord:
    attempt: int
    outcome: str  # "ok" | ProviderError.kind | "parse_error"
    detail: str = ""
    started: float = 0.0
    finished: float = 0.0

    def to_dict(self) -> dict:
        return {
            "attempt": self.attempt,
            "outcome": self.outcome,
            "detail": self.detail,
            "started": self.started,
            "finished": self.finished,
        }


@dataclass(frozen=True)
class Completion:
    text: str
    attempts: tuple[AttemptRecord, ...]

    @property
    def attempt_count(self) -> int:
        return len(self.attempts)


class Provider(Protocol):
    def complete(self, prompt: StagePrompt, config: ProviderConfig) -> str: ...


class StubProvider:
    """Offline provider producing valid, seed-deterministic replies.

    Replies depend only on the seed and the prompt (participant, stage, text),
    so results do not change with worker count or scheduling. ``script`` may
    override the reply for any prompt by returning a string (or None to fall
    through to the default).
    """

    def __init__(self, seed: int = 0, script: Callable[[StagePrompt], str | None] | None = None):
        self.seed = seed
        self.script = script

    def complete(self, prompt: StagePrompt, config: ProviderConfig) -> str:
        if self.script is not None:
            reply = self.script(prompt)
            if reply is not None:
                return reply
        rng = rng_for(self.seed, prompt.participant, prompt.stage.value, prompt.text)
        if prompt.stage is StageId.PROFILE:
            return "Understood. I will take part as the person described and work with the group."
        if prompt.stage is StageId.DISCUSSION:
            return "Each member contributed ideas; I noted who seemed most confident about the survival items."
        if prompt.stage is StageId.SELF_NOMINATION:
            return f"I weighed my own knowledge against the group.\nANSWER: {rng.randint(0, 10)}"
        if prompt.stage is StageId.ELECTION_BALLOT:
            order = list(prompt.options)
            rng.shuffle(order)
            ranked = " ".join(f"{i + 1}. {label}" for i, label in enumerate(order))
            return f"My preference follows the discussion.\nANSWER: {ranked}"
        return "\n".join(f"{qid}: {rng.choice('AB')}" for qid in prompt.options)


class OpenAICompatibleProvider:
    """Chat-completions over HTTPS (OpenAI-style wire format).

    The API key is read from the environment variable named by
    ``config.api_key_env``; it is never taken from files or flags.
    """

    def __init__(self, transport: httpx.BaseTransport | None = None):
        self._transport = transport

    def complete(self, prompt: StagePrompt, config: ProviderConfig) -> str:
        key = os.environ.get(config.api_key_env)
        if not key:
            raise CredentialsError(f"environment variable {config.api_key_env} is not set")
        if not config.endpoint:
            raise TransportError("no endpoint configured")
        body = {
            "model": config.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
        }
        url = config.endpoint.rstrip("/") + "/chat/completions"
        try:
            with httpx.Client(transport=self._transport, timeout=config.timeout) as client:
                resp = client.post(url, json=body, headers={"Authorization": f"Bearer {key}"})
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429:
            raise RateLimitError(f"HTTP 429 from {url}")
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion payload: {exc}") from exc


def make_provider(config: ProviderConfig, seed: int = 0) -> Provider:
    if config.provider == "stub":
        return StubProvider(seed)
    if config.provider in ("openai", "openai_compatible", "http"):
        return OpenAICompatibleProvider()
    raise ValueError(f"unknown provider {config.provider!r}")


def request_completion(
    prompt: StagePrompt,
    config: ProviderConfig,
    provider: Provider,
    sleep: Callable[[float], None] = time.sleep,
    clock: Callable[[], float] = time.time,
) -> Completion:
    """Call the provider, retrying transport-level failures with exponential backoff."""
    attempts: list[AttemptRecord] = []
    for n in range(1, config.max_attempts + 1):
        started = clock()
        try:
            text = provider.complete(prompt, config)
        except CredentialsError as exc:
            attempts.append(AttemptRecord(n, exc.kind, str(exc), started, clock()))
            raise ProviderExhausted(str(exc), tuple(attempts)) from exc
        except ProviderError as exc:
            attempts.append(AttemptRecord(n, exc.kind, str(exc), started, clock()))
            log.warning("attempt %d/%d failed (%s): %s", n, config.max_attempts, exc.kind, exc)
            if n < config.max_attempts and config.backoff > 0:
                sleep(config.backoff * 2 ** (n - 1))
            continue
        attempts.append(AttemptRecord(n, "ok", "", started, clock()))
        return Completion(text, tuple(attempts))
    raise ProviderExhausted(f"provider failed after {config.max_attempts} attempts", tuple(attempts))
