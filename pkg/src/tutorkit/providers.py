"""HTTP clients for OpenAI-compatible chat-completion and embedding endpoints.

Both clients retry transient failures (connection errors and 5xx) with a
short exponential backoff before giving up with ``ProviderUnavailable``.
Auth is a bearer token read from an environment variable.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import requests

from .errors import ProviderUnavailable

Message = dict[str, str]  # {"role": ..., "content": ...}

DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"


class ChatProvider(Protocol):
    def complete(
        self,
        model: str,
        messages: Sequence[Message],
        *,
        temperature: float | None = None,
        top_p: float | None = None,
        max_tokens: int | None = None,
        extra: dict | None = None,
    ) -> str: ...


class EmbeddingProvider(Protocol):
    def embed_text(self, model: str, text: str) -> list[float]: ...


@dataclass
class RetryPolicy:
    max_retries: int = 2
    backoff_seconds: float = 0.5

    def attempts(self) -> int:
        return self.max_retries + 1


def _auth_headers(api_key_env: str) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(api_key_env, "")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    return headers


def _post_with_retries(
    url: str,
    payload: dict,
    *,
    timeout: float,
    retry: RetryPolicy,
    api_key_env: str,
) -> dict:
    last_error: Exception | None = None
    for attempt in range(retry.attempts()):
        try:
            response = requests.post(
                url, json=payload, headers=_auth_headers(api_key_env), timeout=timeout
            )
            if response.status_code >= 500:
                last_error = ProviderUnavailable(
                    f"{url} returned {response.status_code}"
                )
            else:
                response.raise_for_status()
                return response.json()
        except requests.RequestException as exc:
            last_error = exc
        if attempt + 1 < retry.attempts():
            time.sleep(retry.backoff_seconds * (2**attempt))
    raise ProviderUnavailable(f"provider at {url} unavailable: {last_error}")


@dataclass
class OpenAIChatClient:
    """Chat client for a single OpenAI-compatible completions endpoint."""

    endpoint_url: str
    timeout_seconds: float = 60.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    api_key_env: str = DEFAULT_API_KEY_ENV

    def complete(
        self,
        model: str,
        messages: Sequence[Message],
        *,
        temperature: float | None = None,
        top_p: float | None = None,
        max_tokens: int | None = None,
        extra: dict | None = None,
    ) -> str:
        payload: dict = {"model": model, "messages": list(messages)}
        if temperature is not None:
            payload["temperature"] = temperature
        if top_p is not None:
            payload["top_p"] = top_p
        if max_tokens is not None:
            payload["max_tokens"] = max_tokens
        if extra:
            payload.update(extra)
        data = _post_with_retries(
            self.endpoint_url,
            payload,
            timeout=self.timeout_seconds,
            retry=self.retry,
            api_key_env=self.api_key_env,
        )
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(
                f"malformed chat completion response from {self.endpoint_url}"
            ) from exc

    def is_reachable(self) -> bool:
        try:
            requests.head(self.endpoint_url, timeout=2.0)
            return True
        except requests.RequestException:
            return False


@dataclass
class OpenAIEmbeddingClient:
    """Embedding client for an OpenAI-compatible embeddings endpoint."""

    endpoint_url: str
    timeout_seconds: float = 30.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    api_key_env: str = DEFAULT_API_KEY_ENV

    def embed_text(self, model: str, text: str) -> list[float]:
        data = _post_with_retries(
            self.endpoint_url,
            {"model": model, "input": text},
            timeout=self.timeout_seconds,
            retry=self.retry,
            api_key_env=self.api_key_env,
        )
        try:
            return [float(x) for x in data["data"][0]["embedding"]]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderUnavailable(
                f"malformed embedding response from {self.endpoint_url}"
            ) from exc

    def is_reachable(self) -> bool:
        try:
            requests.head(self.endpoint_url, timeout=2.0)
            return True
        except requests.RequestException:
            return False
