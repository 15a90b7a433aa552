"""Model backends: HTTP providers, deterministic replay, and a mock.

`send` posts a prompt plus an image to the configured backend and returns the
raw reply text. HTTP backends retry transient failures (429 and 5xx) with
exponential backoff and can record replies into a replay store; the replay
backend answers purely from that store, keyed by prompt fingerprint and image
content hash, and never touches the network.

Credentials come from environment variables only and are never logged.
"""
from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import httpx

from .errors import (
    AuthError,
    BackendError,
    MissingKeyError,
    NoJsonFoundError,
    NonStringValueError,
    RateLimitedError,
    ReplayMissError,
    RequestTimeoutError,
)
from .prompt import PromptSpec

logger = logging.getLogger(__name__)

BACKENDS = ("openai-style", "anthropic-style", "google-style", "replay", "mock")

DEFAULT_KEY_ENV = {
    "openai-style": "OPENAI_API_KEY",
    "anthropic-style": "ANTHROPIC_API_KEY",
    "google-style": "GOOGLE_API_KEY",
}

OBSERVATION_KEYS = ("SymptomAbnormality", "ColorAbnormality", "ShapeOfSymptomAbnormality")

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8\xff"


@dataclass(frozen=True)
class ImageRef:
    """Image bytes plus detected media type and a stable content hash."""

    data: bytes
    media_type: str
    path: str | None = None

    def __post_init__(self):
        if not self.data:
            raise ValueError("image bytes must be non-empty")
        if self.media_type not in ("png", "jpeg"):
            raise ValueError(f"unsupported media type {self.media_type!r}")

    @classmethod
    def from_bytes(cls, data: bytes, path: str | None = None) -> "ImageRef":
        if data.startswith(_PNG_MAGIC):
            media = "png"
        elif data.startswith(_JPEG_MAGIC):
            media = "jpeg"
        else:
            raise ValueError("unsupported image format (expected PNG or JPEG)")
        return cls(data=data, media_type=media, path=path)

    @classmethod
    def from_path(cls, path: str | Path) -> "ImageRef":
        p = Path(path)
        return cls.from_bytes(p.read_bytes(), path=str(p))

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.data).hexdigest()[:16]

    @property
    def mime(self) -> str:
        return f"image/{self.media_type}"


@dataclass(frozen=True)
class Observation:
    """The parsed reply triple; None marks an N/A field.

    `raw_text` keeps the unmodified reply for audit.
    """

    symptom: str | None
    color: str | None
    shape: str | None
    raw_text: str = ""
    model_fingerprint: str = ""

    @property
    def is_all_na(self) -> bool:
        return self.symptom is None and self.color is None and self.shape is None

    def value(self, kind: str) -> str | None:
        return getattr(self, kind)


@dataclass
class ModelConfig:
    backend: str = "replay"
    model_name: str = "simulated"
    temperature: float = 0.7
    top_p: float = 1.0
    max_output_tokens: int = 1024
    endpoint_url: str = ""
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 1.0
    requests_per_minute: float | None = None
    fixture_dir: str = "fixtures/replies"
    record_dir: str | None = None
    mock_reply: str | None = None
    api_key_env: str | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be in [0, 2]")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")

    @property
    def fingerprint(self) -> str:
        return f"{self.backend}/{self.model_name}"


class TokenBucket:
    """Thread-safe token bucket limiting requests per minute."""

    def __init__(
        self,
        requests_per_minute: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if requests_per_minute <= 0:
            raise ValueError("requests_per_minute must be positive")
        self.capacity = requests_per_minute
        self.rate = requests_per_minute / 60.0
        self.tokens = requests_per_minute
        self.clock = clock
        self.sleep = sleep
        self.updated = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            self.sleep(wait)


_buckets: dict[tuple[str, str], TokenBucket] = {}
_buckets_lock = threading.Lock()
_record_lock = threading.Lock()


def _bucket_for(config: ModelConfig) -> TokenBucket | None:
    if config.requests_per_minute is None:
        return None
    key = (config.backend, config.endpoint_url)
    with _buckets_lock:
        bucket = _buckets.get(key)
        if bucket is None or bucket.capacity != config.requests_per_minute:
            bucket = TokenBucket(config.requests_per_minute)
            _buckets[key] = bucket
    return bucket


def replay_key(prompt: PromptSpec, image: ImageRef) -> str:
    return f"{prompt.fingerprint}-{image.content_hash}"


def replay_path(config: ModelConfig, prompt: PromptSpec, image: ImageRef) -> Path:
    base = Path(config.record_dir or config.fixture_dir)
    return base / config.model_name / f"{replay_key(prompt, image)}.txt"


def send(prompt: PromptSpec, image: ImageRef, config: ModelConfig) -> str:
    """Return the model's raw reply text for a prompt/image pair."""
    if config.backend == "replay":
        return _send_replay(prompt, image, config)
    if config.backend == "mock":
        if config.mock_reply is None:
            raise BackendError("mock backend has no configured reply")
        return config.mock_reply
    reply = _send_http(prompt, image, config)
    if config.record_dir:
        _record(prompt, image, config, reply)
    return reply


def _send_replay(prompt: PromptSpec, image: ImageRef, config: ModelConfig) -> str:
    path = Path(config.fixture_dir) / config.model_name / f"{replay_key(prompt, image)}.txt"
    if not path.is_file():
        raise ReplayMissError(replay_key(prompt, image), path)
    return path.read_text(encoding="utf-8")


def _record(prompt: PromptSpec, image: ImageRef, config: ModelConfig, reply: str) -> None:
    path = replay_path(config, prompt, image)
    with _record_lock:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(reply, encoding="utf-8")
    logger.info("recorded reply at %s", path)


def _api_key(config: ModelConfig) -> str:
    env = config.api_key_env or DEFAULT_KEY_ENV[config.backend]
    key = os.environ.get(env)
    if not key:
        raise AuthError(f"environment variable {env} is not set")
    return key


def _send_http(prompt: PromptSpec, image: ImageRef, config: ModelConfig) -> str:
    key = _api_key(config)
    url, headers, body, extract = _build_request(prompt, image, config, key)
    bucket = _bucket_for(config)
    safe_url = url.split("?", 1)[0]

    attempts = config.max_retries + 1
    for attempt in range(attempts):
        if bucket is not None:
            bucket.acquire()
        try:
            response = httpx.post(url, headers=headers, json=body, timeout=config.timeout)
        except httpx.TimeoutException as exc:
            raise RequestTimeoutError(f"request to {safe_url} timed out") from exc
        status = response.status_code
        logger.debug("POST %s -> %s (attempt %d)", safe_url, status, attempt + 1)
        if status in (401, 403):
            raise AuthError(f"backend rejected credentials (HTTP {status})")
        if status == 429 or 500 <= status < 600:
            if attempt + 1 < attempts:
                time.sleep(config.backoff_base * (2 ** attempt))
                continue
            if status == 429:
                raise RateLimitedError(f"still rate limited after {config.max_retries} retries")
            raise BackendError(f"backend error HTTP {status} after retries", status)
        if status != 200:
            raise BackendError(f"unexpected HTTP {status} from {safe_url}", status)
        try:
            return extract(response.json())
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
            raise BackendError(f"unexpected response shape from {safe_url}: {exc}") from exc
    raise BackendError("retry loop exhausted")  # pragma: no cover


def _build_request(prompt: PromptSpec, image: ImageRef, config: ModelConfig, key: str):
    b64 = base64.b64encode(image.data).decode("ascii")
    base = config.endpoint_url.rstrip("/")
    if config.backend == "openai-style":
        url = f"{base}/chat/completions"
        headers = {"Authorization": f"Bearer {key}"}
        body = {
            "model": config.model_name,
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_output_tokens,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": prompt.text},
                        {
                            "type": "image_url",
                            "image_url": {"url": f"data:{image.mime};base64,{b64}"},
                        },
                    ],
                }
            ],
        }
        extract = lambda data: str(data["choices"][0]["message"]["content"])  # noqa: E731
        return url, headers, body, extract
    if config.backend == "anthropic-style":
        url = f"{base}/v1/messages"
        headers = {"x-api-key": key, "anthropic-version": "2023-06-01"}
        body = {
            "model": config.model_name,
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_output_tokens,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {
                            "type": "image",
                            "source": {
                                "type": "base64",
                                "media_type": image.mime,
                                "data": b64,
                            },
                        },
                        {"type": "text", "text": prompt.text},
                    ],
                }
            ],
        }
        extract = lambda data: str(data["content"][0]["text"])  # noqa: E731
        return url, headers, body, extract
    # google-style: the key travels as a query parameter, so URLs are never
    # logged with their query string.
    url = f"{base}/v1beta/models/{config.model_name}:generateContent?key={key}"
    headers = {}
    body = {
        "contents": [
            {
                "parts": [
                    {"text": prompt.text},
                    {"inline_data": {"mime_type": image.mime, "data": b64}},
                ]
            }
        ],
        "generationConfig": {
            "temperature": config.temperature,
            "topP": config.top_p,
            "maxOutputTokens": config.max_output_tokens,
        },
    }
    extract = lambda data: str(  # noqa: E731
        data["candidates"][0]["content"]["parts"][0]["text"]
    )
    return url, headers, body, extract


# --- reply parsing --------------------------------------------------------------------


def parse_observation(raw: str, model_fingerprint: str = "") -> Observation:
    """Extract the first well-formed JSON object from a reply.

    Markdown fences and surrounding prose are skipped by scanning for the
    first position where a JSON object parses. All three keys must be present
    with their exact spelling; "N/A" in any case maps to the N/A marker, as
    does an empty string. Values are trimmed.
    """
    obj = _first_json_object(raw)
    if obj is None:
        raise NoJsonFoundError(raw)
    values: dict[str, str | None] = {}
    for name in OBSERVATION_KEYS:
        if name not in obj:
            raise MissingKeyError(name)
        value = obj[name]
        if not isinstance(value, str):
            raise NonStringValueError(name, value)
        value = value.strip()
        values[name] = None if (not value or value.upper() == "N/A") else value
    return Observation(
        symptom=values["SymptomAbnormality"],
        color=values["ColorAbnormality"],
        shape=values["ShapeOfSymptomAbnormality"],
        raw_text=raw,
        model_fingerprint=model_fingerprint,
    )


def _first_json_object(raw: str) -> dict | None:
    decoder = json.JSONDecoder()
    start = raw.find("{")
    while start != -1:
        try:
            value, _ = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            start = raw.find("{", start + 1)
            continue
        if isinstance(value, dict):
            return value
        start = raw.find("{", start + 1)
    return None
