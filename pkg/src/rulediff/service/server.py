"""HTTP front end for the simulated rule service (stdlib ``http.server``)."""

from __future__ import annotations

import contextlib
import json
import logging
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Iterator, Sequence

from ..rules import Rule, Schema
from .faults import FaultConfig, ServiceResult, validate_message

log = logging.getLogger(__name__)

VALIDATION_PATH = "/api/messages/validation"
HEALTH_PATH = "/health"


class RuleService(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], rules: Sequence[Rule], schema: Schema, faults: FaultConfig):
        faults.check(rules, schema)
        self.rules = tuple(rules)
        self.schema = dict(schema)
        self.faults = faults
        super().__init__(address, _Handler)

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


class _Handler(BaseHTTPRequestHandler):
    server: RuleService
    protocol_version = "HTTP/1.1"
    # headers and body go out as separate writes; avoid the delayed-ACK stall
    disable_nagle_algorithm = True

    def log_message(self, format, *args):  # noqa: A002
        log.debug("%s - %s", self.address_string(), format % args)

    def _send(self, status: int, body: bytes = b"", content_type: str = "application/json") -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body:
            self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path == HEALTH_PATH:
            self._send(HTTPStatus.OK, b"ok", "text/plain")
        else:
            self._send(HTTPStatus.NOT_FOUND, b'{"error": "not found"}')

    def do_POST(self) -> None:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        if self.path != VALIDATION_PATH:
            self._send(HTTPStatus.NOT_FOUND, b'{"error": "not found"}')
            return
        try:
            message = json.loads(raw)
            if not isinstance(message, dict):
                raise ValueError("message must be a JSON object")
        except ValueError as exc:
            self._send(HTTPStatus.BAD_REQUEST, json.dumps({"error": str(exc)}).encode())
            return

        srv = self.server
        response = validate_message(message, srv.rules, srv.schema, srv.faults)
        if response.whole is ServiceResult.HTTP_500:
            self._send(HTTPStatus.INTERNAL_SERVER_ERROR, b'{"error": "invalid message"}')
        elif response.whole is ServiceResult.EMPTY:
            self._send(HTTPStatus.OK)
        else:
            body = [
                {"ruleId": r.id, "version": r.version, "result": response.results[r.key].value}
                for r in srv.rules
            ]
            self._send(HTTPStatus.OK, json.dumps(body).encode())


def make_server(host: str, port: int, rules: Sequence[Rule], schema: Schema, faults: FaultConfig) -> RuleService:
    return RuleService((host, port), rules, schema, faults)


@contextlib.contextmanager
def embedded_service(
    rules: Sequence[Rule], schema: Schema, faults: FaultConfig, host: str = "127.0.0.1", port: int = 0
) -> Iterator[RuleService]:
    """Run the service on a background thread; port 0 picks an ephemeral port."""
    server = make_server(host, port, rules, schema, faults)
    thread = threading.Thread(target=server.serve_forever, name="rule-service", daemon=True)
    thread.start()
    try:
        yield server
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)
