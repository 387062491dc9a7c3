"""HTTP transport to agent services.

Each endpoint owns a semaphore sized ``max_parallel``, so no matter how many
worker threads submit queries the number of requests in flight against one
service never exceeds it. Transient failures (connection errors, timeouts,
429 and 5xx) are retried with exponential backoff; anything else fails fast.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import httpx
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt, wait_exponential

from ..codec import ParseOutcome, parse_action

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "GUIPROBE_API_KEY"
SAMPLE_HEADER = "X-Guiprobe-Sample"
PROBE_HEADER = "X-Guiprobe-Probe"


class TransportError(RuntimeError):
    """The agent could not be reached for one step, after all retries."""

    def __init__(self, sample_id: str, message: str, attempts: int = 0) -> None:
        super().__init__(f"{sample_id}: {message}")
        self.sample_id = sample_id
        self.attempts = attempts


class _Transient(Exception):
    pass


@dataclass(frozen=True)
class AgentEndpoint:
    base_url: str
    model_name: str
    dialect_id: str = "json"
    timeout: float = 60.0
    max_parallel: int = 4
    max_retries: int = 3
    # seconds; doubles per retry, capped at 30
    backoff: float = 0.5
    api_key_env: str = DEFAULT_API_KEY_ENV
    # decoding parameters forwarded verbatim
    params: dict = field(default_factory=dict, hash=False)

    def __post_init__(self) -> None:
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    @property
    def url(self) -> str:
        base = self.base_url.rstrip("/")
        return base if base.endswith("/chat/completions") else base + "/chat/completions"


@dataclass(frozen=True)
class AgentResponse:
    raw: str
    parsed: ParseOutcome
    latency: float
    attempt_count: int


def response_text(body) -> str:
    """Pull the assistant text out of a chat-completion response body."""
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"unexpected response shape: {exc!r}") from exc
    if isinstance(content, list):
        content = "".join(p.get("text", "") for p in content if isinstance(p, dict))
    if not isinstance(content, str):
        raise ValueError("response content is not text")
    return content


@dataclass(frozen=True, eq=False)
class Query:
    """Everything an agent might need to answer one step.

    Remote agents only see ``payload``; reference agents read ``step`` and
    ``perturbed`` directly. ``probe`` is the canonical JSON of the probe spec,
    or ``"baseline"``.
    """

    sample_id: str
    probe: str
    payload: dict
    screen: object
    step: object = None
    perturbed: object = None


class HttpAgent:
    """Client for one chat-completion endpoint."""

    def __init__(self, endpoint: AgentEndpoint, *, client: httpx.Client | None = None,
                 agent_id: str | None = None) -> None:
        self.endpoint = endpoint
        self.agent_id = agent_id or endpoint.model_name
        self.max_parallel = endpoint.max_parallel
        self._slots = threading.BoundedSemaphore(endpoint.max_parallel)
        self._client = client or httpx.Client(timeout=endpoint.timeout)
        self._owns_client = client is None

    def close(self) -> None:
        if self._owns_client:
            self._client.close()

    def __enter__(self) -> HttpAgent:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _headers(self, extra: dict | None) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.endpoint.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        if extra:
            headers.update(extra)
        return headers

    def _post(self, payload: dict, headers: dict) -> str:
        with self._slots:
            try:
                resp = self._client.post(self.endpoint.url, json=payload, headers=headers)
            except (httpx.TransportError, httpx.TimeoutException) as exc:
                raise _Transient(repr(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise _Transient(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ValueError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return response_text(resp.json())
        except ValueError as exc:
            raise ValueError(f"bad response body: {exc}") from exc

    def query(self, payload: dict, *, sample_id: str, screen=None, headers: dict | None = None) -> AgentResponse:
        """Send one request and parse the reply in the endpoint's dialect.

        Raises:
            TransportError: retries exhausted or a non-retryable HTTP error.
        """
        ep = self.endpoint
        retrying = Retrying(
            stop=stop_after_attempt(ep.max_retries + 1),
            wait=wait_exponential(multiplier=ep.backoff, max=30),
            retry=retry_if_exception_type(_Transient),
            reraise=True,
        )
        hdrs = self._headers(headers)
        attempts = 0
        t0 = time.perf_counter()
        try:
            for attempt in retrying:
                with attempt:
                    attempts = attempt.retry_state.attempt_number
                    text = self._post(payload, hdrs)
        except _Transient as exc:
            raise TransportError(sample_id, f"gave up after {attempts} attempt(s): {exc}", attempts) from exc
        except ValueError as exc:
            raise TransportError(sample_id, str(exc), attempts) from exc
        latency = time.perf_counter() - t0
        return AgentResponse(text, parse_action(text, ep.dialect_id, screen), latency, attempts)

    def respond(self, query: Query) -> AgentResponse:
        headers = {SAMPLE_HEADER: query.sample_id, PROBE_HEADER: query.probe}
        return self.query(query.payload, sample_id=query.sample_id, screen=query.screen, headers=headers)


def query_agent(endpoint: AgentEndpoint, payload: dict, *, sample_id: str, screen=None,
                headers: dict | None = None) -> AgentResponse:
    """One-shot convenience wrapper around :class:`HttpAgent`."""
    with HttpAgent(endpoint) as agent:
        return agent.query(payload, sample_id=sample_id, screen=screen, headers=headers)


def run_bounded(fn: Callable[[object], object], items: Iterable, max_parallel: int) -> list:
    """Apply ``fn`` to every item on at most ``max_parallel`` threads.

    Results keep input order. Exceptions are returned in place of results so
    one failing item never hides the others.
    """
    items = list(items)

    def guarded(item):
        try:
            return fn(item)
        except Exception as exc:  # noqa: BLE001 - reported per item
            return exc

    if max_parallel <= 1 or len(items) <= 1:
        return [guarded(i) for i in items]
    with ThreadPoolExecutor(max_workers=max_parallel) as pool:
        return list(pool.map(guarded, items))
