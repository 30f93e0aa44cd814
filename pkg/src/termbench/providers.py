"""Completion providers: recorded-transcript replay and chat-completions HTTP.

Every request/response is a transcript row `{prompt_hash, request,
response, timestamp}` (JSON Lines). The HTTP provider appends rows as it
goes; the replay provider serves responses from such a file by prompt
hash, which makes evaluations reproducible byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Protocol

from .errors import ConsistencyError, ParseError, PermanentHttpError, ProtocolError, TransportError
from .ratelimit import TokenBucket

COMPLETION_API_KEY_ENV = "TERMBENCH_COMPLETION_API_KEY"

RETRY_BASE_SECONDS = 1.0
RETRY_FACTOR = 2.0
MAX_ATTEMPTS = 5


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.0
    max_tokens: int = 32


def prompt_hash(prompt_text: str) -> str:
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()


class CompletionProvider(Protocol):
    def complete(self, prompt_text: str, model_id: str, params: DecodingParams) -> str: ...


def request_body(prompt_text: str, model_id: str, params: DecodingParams) -> dict:
    return {
        "model": model_id,
        "messages": [{"role": "user", "content": prompt_text}],
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
    }


class ReplayProvider:
    """Serve completions from a recorded transcript, keyed by prompt hash."""

    def __init__(self, responses: dict[str, str]):
        self._responses = responses

    def __len__(self) -> int:
        return len(self._responses)

    @classmethod
    def from_transcript(cls, path: str | Path) -> "ReplayProvider":
        responses: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"bad JSON: {exc}", lineno) from exc
                responses[row["prompt_hash"]] = row["response"]["text"]
        return cls(responses)

    def complete(self, prompt_text: str, model_id: str, params: DecodingParams) -> str:
        key = prompt_hash(prompt_text)
        if key not in self._responses:
            raise ConsistencyError(f"no transcript entry for prompt hash {key[:12]}…")
        return self._responses[key]


class TranscriptWriter:
    """Append-only transcript sink, safe under concurrent completions."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def record(self, prompt_text: str, request: dict, response_text: str) -> None:
        row = {
            "prompt_hash": prompt_hash(prompt_text),
            "request": request,
            "response": {"text": response_text},
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")


class HttpCompletionProvider:
    """Chat-completions POST client with retry, rate limit and transcript."""

    def __init__(
        self,
        url: str,
        api_key: str | None = None,
        transcript: TranscriptWriter | None = None,
        rate_limiter: TokenBucket | None = None,
        transport: Callable[[str, dict, dict], tuple[int, str]] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.url = url
        self.api_key = api_key
        self.transcript = transcript
        self.rate_limiter = rate_limiter
        self._transport = transport or self._requests_transport
        self._sleep = sleep

    @staticmethod
    def _requests_transport(url: str, body: dict, headers: dict) -> tuple[int, str]:
        import requests

        try:
            resp = requests.post(url, json=body, headers=headers, timeout=120)
        except requests.RequestException as exc:
            raise TransportError(f"completion request failed: {exc}") from exc
        return resp.status_code, resp.text

    def complete(self, prompt_text: str, model_id: str, params: DecodingParams) -> str:
        body = request_body(prompt_text, model_id, params)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        delay = RETRY_BASE_SECONDS
        last_error: Exception | None = None
        for attempt in range(MAX_ATTEMPTS):
            if attempt > 0:
                self._sleep(delay)
                delay *= RETRY_FACTOR
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            try:
                status, text = self._transport(self.url, body, headers)
            except TransportError as exc:
                last_error = exc
                continue
            if status == 429 or 500 <= status < 600:
                last_error = TransportError(f"HTTP {status} from completion endpoint")
                continue
            if 400 <= status < 500:
                raise PermanentHttpError(status, text[:200])
            output = self._parse_output(text)
            if self.transcript is not None:
                self.transcript.record(prompt_text, body, output)
            return output
        raise TransportError(f"completion failed after {MAX_ATTEMPTS} attempts: {last_error}")

    @staticmethod
    def _parse_output(text: str) -> str:
        try:
            payload = json.loads(text)
            return payload["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"unexpected completion payload: {exc}") from exc
