"""In-process mock of the wrist-band's REST device.

Serves POST /vibrate, answers {"ok": true}, and records every request with a
receipt timestamp so tests can assert on the exact dispatch sequence. A
configurable response latency exercises the engine's non-blocking dispatch.
"""
from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


@dataclass(frozen=True)
class RecordedRequest:
    received_at: float  # time.monotonic()
    path: str
    body: dict | None
    status: int


class MockHapticServer:
    """Threaded HTTP server on an OS-assigned (or given) port."""

    def __init__(self, port: int = 0):
        self.requests: list[RecordedRequest] = []
        self.latency_s = 0.0
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                if outer.latency_s > 0:
                    time.sleep(outer.latency_s)
                if self.path != "/vibrate":
                    outer._record(self.path, None, 404)
                    self._reply(404, {"ok": False, "error": "unknown path"})
                    return
                try:
                    body = json.loads(raw)
                    if not all(isinstance(body.get(k), int) for k in ("bpm", "intensity", "pulse_ms")):
                        raise ValueError("bpm, intensity, pulse_ms must be integers")
                except (ValueError, json.JSONDecodeError) as exc:
                    outer._record(self.path, None, 400)
                    self._reply(400, {"ok": False, "error": str(exc)})
                    return
                outer._record(self.path, body, 200)
                self._reply(200, {"ok": True})

            def _reply(self, status: int, payload: dict):
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass  # keep test output clean

        self._server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    def _record(self, path: str, body: dict | None, status: int) -> None:
        with self._lock:
            self.requests.append(RecordedRequest(time.monotonic(), path, body, status))

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def vibrate_bodies(self) -> list[dict]:
        with self._lock:
            return [r.body for r in self.requests if r.path == "/vibrate" and r.status == 200]

    def start(self) -> "MockHapticServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
