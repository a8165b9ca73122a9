"""Model clients: a JSON-over-HTTP chat endpoint and a deterministic mock oracle.

Both expose ``complete(prompt, *, metadata=None, rng=None) -> str``. The
HTTP client ignores the extras; the mock ignores the prompt text and answers
from the metadata the harness supplies out-of-band, flipping a coin with its
configured ground-truth accuracy. Because that accuracy is known exactly,
the mock lets the whole certification loop be validated against the
coverage guarantee without touching a real model.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import random
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Mapping

from .errors import (
    HttpStatusError,
    MalformedResponseError,
    ModelTimeoutError,
)
from .rand import choice, derive_rng

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "MODEL_API_KEY"


@dataclass(frozen=True)
class PromptMetadata:
    """Ground truth a mock needs to answer without parsing the prompt."""
    correct_index: int  # 1-based
    n_options: int
    hops: int
    distractor_index: int | None = None  # 1-based, when an option is distractor-sourced


@dataclass(frozen=True)
class ModelEndpoint:
    base_url: str
    model_name: str
    api_key_ref: str = DEFAULT_API_KEY_ENV  # environment variable holding the key
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    rate_limit: float | None = None  # requests per second
    max_tokens: int = 512
    max_in_flight: int = 4
    backoff_base: float = 0.25

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")


class HttpModelClient:
    """Synchronous client for an OpenAI-style /chat/completions endpoint.

    Transient failures (timeouts, connection errors, 429, 5xx) are retried
    with exponential backoff up to ``max_retries``; exhaustion raises so a
    certification run aborts instead of silently dropping the sample, which
    would bias the estimated probability.
    """

    def __init__(self, endpoint: ModelEndpoint):
        self.endpoint = endpoint
        self._throttle_lock = threading.Lock()
        self._next_allowed = 0.0
        self._in_flight = threading.Semaphore(endpoint.max_in_flight)

    @property
    def name(self) -> str:
        return self.endpoint.model_name

    def describe(self) -> dict:
        return {
            "kind": "http",
            "base_url": self.endpoint.base_url,
            "model_name": self.endpoint.model_name,
            "temperature": self.endpoint.temperature,
        }

    def _wait_for_slot(self) -> None:
        if self.endpoint.rate_limit is None:
            return
        interval = 1.0 / self.endpoint.rate_limit
        with self._throttle_lock:
            now = time.monotonic()
            wait = self._next_allowed - now
            self._next_allowed = max(now, self._next_allowed) + interval
        if wait > 0:
            time.sleep(wait)

    def _post_once(self, body: bytes) -> str:
        url = self.endpoint.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.endpoint.api_key_ref)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        request = urllib.request.Request(url, data=body, headers=headers, method="POST")
        with urllib.request.urlopen(request, timeout=self.endpoint.timeout) as resp:
            raw = resp.read()
        try:
            payload = json.loads(raw)
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"cannot extract completion: {exc}") from exc
        if not isinstance(text, str):
            raise MalformedResponseError("completion content is not a string")
        return text

    def complete(self, prompt: str, *, metadata: PromptMetadata | None = None,
                 rng: random.Random | None = None) -> str:
        """Return the first candidate message for ``prompt``."""
        if not prompt:
            raise ValueError("prompt must be non-empty")
        body = json.dumps({
            "model": self.endpoint.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.endpoint.temperature,
            "max_tokens": self.endpoint.max_tokens,
        }).encode("utf-8")

        last_error: Exception | None = None
        with self._in_flight:
            for attempt in range(self.endpoint.max_retries + 1):
                if attempt:
                    delay = self.endpoint.backoff_base * (2 ** (attempt - 1))
                    log.warning("retrying model request in %.2fs (%s)", delay, last_error)
                    time.sleep(delay)
                self._wait_for_slot()
                try:
                    return self._post_once(body)
                except urllib.error.HTTPError as exc:
                    if exc.code == 429 or 500 <= exc.code < 600:
                        last_error = HttpStatusError(exc.code, "transient")
                        continue
                    raise HttpStatusError(exc.code, exc.reason or "") from exc
                except MalformedResponseError as exc:
                    last_error = exc
                    continue
                except urllib.error.URLError as exc:
                    last_error = ModelTimeoutError(f"request failed: {exc.reason}")
                    continue
                except OSError:
                    last_error = ModelTimeoutError("request timed out")
                    continue
        assert last_error is not None
        raise last_error


# ---------------------------------------------------------------------------
# Mock oracle
# ---------------------------------------------------------------------------

class MockMode(str, enum.Enum):
    FIXED_ACCURACY = "fixed"
    PER_HOP_ACCURACY = "per-hop"
    ALWAYS_CORRECT = "always-correct"
    ALWAYS_DISTRACTED = "always-distracted"


@dataclass(frozen=True)
class MockOracleConfig:
    mode: MockMode
    accuracy: float = 1.0
    per_hop_accuracy: Mapping[int, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError("accuracy must be in [0, 1]")
        for hops, p in self.per_hop_accuracy.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"per-hop accuracy for {hops} must be in [0, 1]")

    @classmethod
    def fixed(cls, accuracy: float, seed: int = 0) -> "MockOracleConfig":
        return cls(MockMode.FIXED_ACCURACY, accuracy=accuracy, seed=seed)

    @classmethod
    def per_hop(cls, table: Mapping[int, float], seed: int = 0) -> "MockOracleConfig":
        return cls(MockMode.PER_HOP_ACCURACY, per_hop_accuracy=dict(table), seed=seed)

    @classmethod
    def always_correct(cls, seed: int = 0) -> "MockOracleConfig":
        return cls(MockMode.ALWAYS_CORRECT, seed=seed)

    @classmethod
    def always_distracted(cls, seed: int = 0) -> "MockOracleConfig":
        return cls(MockMode.ALWAYS_DISTRACTED, seed=seed)

    def label(self) -> str:
        if self.mode is MockMode.FIXED_ACCURACY:
            return f"mock:fixed:{self.accuracy}"
        if self.mode is MockMode.PER_HOP_ACCURACY:
            inner = ",".join(f"{h}={p}" for h, p in sorted(self.per_hop_accuracy.items()))
            return f"mock:per-hop:{inner}"
        return f"mock:{self.mode.value}"


def mock_complete(config: MockOracleConfig, metadata: PromptMetadata,
                  rng: random.Random) -> str:
    """Deterministic checker-compliant answer with known success probability.

    Success emits the correct option number; failure prefers the
    distractor-sourced option and otherwise picks a wrong option uniformly.
    """
    if config.mode is MockMode.ALWAYS_CORRECT:
        success = True
    elif config.mode is MockMode.ALWAYS_DISTRACTED:
        success = False
    elif config.mode is MockMode.FIXED_ACCURACY:
        success = rng.random() < config.accuracy
    else:
        if metadata.hops not in config.per_hop_accuracy:
            raise ValueError(f"no configured accuracy for {metadata.hops} hops")
        success = rng.random() < config.per_hop_accuracy[metadata.hops]

    if success:
        index = metadata.correct_index
        reason = "the context supports it"
    else:
        wrong = [
            i for i in range(1, metadata.n_options + 1) if i != metadata.correct_index
        ]
        if metadata.distractor_index is not None and metadata.distractor_index in wrong:
            index = metadata.distractor_index
        elif wrong:
            index = choice(rng, wrong)
        else:
            index = metadata.correct_index  # degenerate single-option prompt
        reason = "the context seems to point there"
    return f"correct answer: {index}. option {index}, because {reason}"


class MockModelClient:
    """Client wrapper over :func:`mock_complete`.

    When the caller supplies no rng, one is derived from (config seed, call
    index), so standalone use is a deterministic function of the call
    sequence; the certification loop passes per-sample rngs instead.
    """

    def __init__(self, config: MockOracleConfig):
        self.config = config
        self._lock = threading.Lock()
        self._calls = 0

    @property
    def name(self) -> str:
        return self.config.label()

    def describe(self) -> dict:
        info: dict = {"kind": "mock", "mode": self.config.mode.value, "seed": self.config.seed}
        if self.config.mode is MockMode.FIXED_ACCURACY:
            info["accuracy"] = self.config.accuracy
        if self.config.mode is MockMode.PER_HOP_ACCURACY:
            info["per_hop_accuracy"] = {
                str(h): p for h, p in sorted(self.config.per_hop_accuracy.items())
            }
        return info

    def complete(self, prompt: str, *, metadata: PromptMetadata | None = None,
                 rng: random.Random | None = None) -> str:
        if metadata is None:
            raise ValueError("mock client requires prompt metadata")
        if rng is None:
            with self._lock:
                call_index = self._calls
                self._calls += 1
            rng = derive_rng(self.config.seed, "mock-call", call_index)
        return mock_complete(self.config, metadata, rng)
