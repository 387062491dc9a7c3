"""A local chat-completion server for tests and self-validation runs.

The server answers ``POST .../chat/completions`` by calling a responder with
the request body and headers. It can inject failures and delays, and records
how many requests were in flight at once so tests can check parallelism
bounds.
"""

from __future__ import annotations

import json
import threading
import time
from collections.abc import Callable
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..dataset import EpisodeCorpus
from ..perturb import PerturbationSpec, apply_perturbation
from .client import PROBE_HEADER, SAMPLE_HEADER
from .reference import reference_reply

Responder = Callable[[dict, dict], str]


class MockChatServer:
    """Threaded HTTP server on an ephemeral localhost port.

    Args:
        responder: ``(body, headers) -> text``.
        fail_first: the first N requests get ``fail_status``.
        fail_always: every request gets ``fail_status``.
        delay: seconds to sleep inside each request (widens overlap windows).
    """

    def __init__(self, responder: Responder, *, fail_first: int = 0, fail_always: bool = False,
                 fail_status: int = 503, delay: float = 0.0) -> None:
        self.responder = responder
        self.fail_first = fail_first
        self.fail_always = fail_always
        self.fail_status = fail_status
        self.delay = delay
        self.request_count = 0
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), self._handler())
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/v1"

    def start(self) -> MockChatServer:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> MockChatServer:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _enter(self) -> int:
        with self._lock:
            self.request_count += 1
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
            return self.request_count

    def _leave(self) -> None:
        with self._lock:
            self.in_flight -= 1

    def _handler(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args) -> None:
                pass

            def _send(self, status: int, body: dict) -> None:
                data = json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self) -> None:
                n = server._enter()
                try:
                    length = int(self.headers.get("Content-Length", 0))
                    body = json.loads(self.rfile.read(length) or b"{}")
                    if server.delay:
                        time.sleep(server.delay)
                    if not self.path.rstrip("/").endswith("/chat/completions"):
                        self._send(404, {"error": "not found"})
                        return
                    if server.fail_always or n <= server.fail_first:
                        self._send(server.fail_status, {"error": "injected failure"})
                        return
                    try:
                        text = server.responder(body, dict(self.headers))
                    except Exception as exc:  # noqa: BLE001 - surfaced to the client as a 500
                        self._send(500, {"error": repr(exc)})
                        return
                    self._send(200, {
                        "object": "chat.completion",
                        "model": body.get("model", ""),
                        "choices": [{"index": 0, "finish_reason": "stop",
                                     "message": {"role": "assistant", "content": text}}],
                    })
                finally:
                    server._leave()

        return Handler


def fixed_responder(text: str) -> Responder:
    return lambda body, headers: text


def _header(headers: dict, name: str) -> str | None:
    lname = name.lower()
    for k, v in headers.items():
        if k.lower() == lname:
            return v
    return None


def reference_responder(corpus: EpisodeCorpus, kind: str, dialect_id: str = "json", *,
                        seed: int = 0) -> Responder:
    """Serve a reference agent over HTTP.

    The runner tags every request with the sample id and the probe spec, which
    is how the served agent knows what it was shown.
    """
    steps = corpus.step_map()
    cache: dict[tuple[str, str], object] = {}
    lock = threading.Lock()

    def respond(body: dict, headers: dict) -> str:
        sid = _header(headers, SAMPLE_HEADER)
        probe = _header(headers, PROBE_HEADER) or "baseline"
        if sid not in steps:
            raise KeyError(f"unknown sample {sid!r}")
        step = steps[sid]
        perturbed = None
        if probe != "baseline":
            key = (probe, sid)
            with lock:
                perturbed = cache.get(key)
            if perturbed is None:
                perturbed = apply_perturbation(step, PerturbationSpec.from_dict(json.loads(probe)))
                with lock:
                    cache[key] = perturbed
        return reference_reply(kind, step, perturbed, dialect_id, seed=seed)

    return respond
