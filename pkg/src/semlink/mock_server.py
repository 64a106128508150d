"""In-process embedding service speaking the ``/embed`` wire protocol,
backed by the deterministic hash encoder.

Exists so the gateway's protocol tests, CI runs, and the remote-backend
code path never need a real model server. Runs on a background thread;
use as a context manager.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from .embedding import EMBED_DIM, MAX_BATCH, hash_embed

MODEL_NAME = "hash-mock"


class _Handler(BaseHTTPRequestHandler):
    server_version = "semlink-mock/0.1"

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):  # noqa: N802 (stdlib handler naming)
        if self.path == "/health":
            self._send_json(
                200, {"status": "ok", "model": self.server.model_name, "dim": self.server.dim}
            )
        else:
            self._send_json(404, {"error": "not found"})

    def do_POST(self):  # noqa: N802
        if self.path != "/embed":
            self._send_json(404, {"error": "not found"})
            return
        with self.server.counter_lock:
            self.server.embed_requests += 1
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
            texts = payload["texts"]
            if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
                raise ValueError("texts must be a list of strings")
        except (ValueError, KeyError) as exc:
            self._send_json(400, {"error": f"bad request: {exc}"})
            return
        if not texts:
            self._send_json(400, {"error": "texts must be non-empty"})
            return
        if len(texts) > self.server.max_batch:
            self._send_json(
                413, {"error": f"at most {self.server.max_batch} texts per request"}
            )
            return
        try:
            vectors = [self.server.encode(t) for t in texts]
        except Exception as exc:  # pragma: no cover - defensive 500 path
            self._send_json(500, {"error": str(exc)})
            return
        self._send_json(
            200,
            {"model": self.server.model_name, "dim": self.server.dim, "vectors": vectors},
        )

    def log_message(self, fmt, *args):  # silence request logging in tests
        pass


class MockEmbedServer:
    """Protocol-conformant embedding service on an ephemeral port."""

    def __init__(
        self,
        port: int = 0,
        model_name: str = MODEL_NAME,
        dim: int = EMBED_DIM,
        max_batch: int = MAX_BATCH,
    ):
        self._server = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
        self._server.model_name = model_name
        self._server.dim = dim
        self._server.max_batch = max_batch
        self._server.encode = lambda text: hash_embed(text).tolist()
        self._server.embed_requests = 0
        self._server.counter_lock = threading.Lock()
        self._thread: Optional[threading.Thread] = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def embed_requests(self) -> int:
        """Number of /embed POSTs served so far."""
        with self._server.counter_lock:
            return self._server.embed_requests

    def start(self) -> "MockEmbedServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockEmbedServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
