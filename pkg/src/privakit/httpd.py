"""Minimal threaded JSON-HTTP server shared by the mock backend and annotation service."""

from __future__ import annotations

import json
import logging
import re
import signal
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

log = logging.getLogger(__name__)


@dataclass
class Response:
    status: int = 200
    payload: object = None
    content_type: str = "application/json"
    body: bytes | None = None  # overrides payload when set

    def encode(self) -> bytes:
        if self.body is not None:
            return self.body
        return json.dumps(self.payload).encode("utf-8")


class HttpError(Exception):
    def __init__(self, status: int, message: str, **extra):
        super().__init__(message)
        self.status = status
        self.extra = extra


Handler = Callable[..., Response]


class Router:
    """Method + path-pattern dispatch; {name} segments become kwargs."""

    def __init__(self, token: str | None = None):
        self.token = token
        self._routes: list[tuple[str, re.Pattern, Handler]] = []

    def add(self, method: str, pattern: str, handler: Handler) -> None:
        regex = re.sub(r"\{(\w+)\}", r"(?P<\1>[^/]+)", pattern)
        self._routes.append((method, re.compile(f"^{regex}$"), handler))

    def dispatch(self, method: str, path: str, query: dict, body: dict | None) -> Response:
        for m, regex, handler in self._routes:
            if m != method:
                continue
            match = regex.match(path)
            if match:
                return handler(body=body, query=query, **match.groupdict())
        raise HttpError(404, f"no route for {method} {path}")


def make_handler(router: Router):
    class JsonHandler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s - %s", self.address_string(), fmt % args)

        def _authorized(self) -> bool:
            if router.token is None:
                return True
            header = self.headers.get("authorization", "")
            return header == f"Bearer {router.token}"

        def _respond(self, response: Response) -> None:
            data = response.encode()
            self.send_response(response.status)
            self.send_header("content-type", response.content_type)
            self.send_header("content-length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _handle(self, method: str) -> None:
            try:
                if not self._authorized():
                    raise HttpError(401, "missing or invalid bearer token")
                path, _, raw_query = self.path.partition("?")
                query = {}
                for part in raw_query.split("&"):
                    if "=" in part:
                        k, _, v = part.partition("=")
                        query[k] = v
                body = None
                length = int(self.headers.get("content-length") or 0)
                if length:
                    raw = self.rfile.read(length)
                    try:
                        body = json.loads(raw)
                    except json.JSONDecodeError as exc:
                        raise HttpError(400, f"invalid JSON body: {exc}")
                self._respond(router.dispatch(method, path, query, body))
            except HttpError as exc:
                self._respond(
                    Response(exc.status, {"error": str(exc), **exc.extra})
                )
            except Exception as exc:  # handler bug: report, keep serving
                log.exception("unhandled error for %s %s", method, self.path)
                self._respond(Response(500, {"error": f"{type(exc).__name__}: {exc}"}))

        def do_GET(self):
            self._handle("GET")

        def do_POST(self):
            self._handle("POST")

    return JsonHandler


class JsonHttpServer:
    """ThreadingHTTPServer wrapper with clean SIGTERM/SIGINT shutdown."""

    def __init__(self, router: Router, host: str = "127.0.0.1", port: int = 0):
        self._server = ThreadingHTTPServer((host, port), make_handler(router))
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def serve_until_signal(self) -> None:
        stop = threading.Event()

        def _signal(_signum, _frame):
            stop.set()

        signal.signal(signal.SIGTERM, _signal)
        signal.signal(signal.SIGINT, _signal)
        self.start()
        try:
            stop.wait()
        finally:
            self.stop()
