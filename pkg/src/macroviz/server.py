"""HTTP surface over the pipeline.

Endpoints:
    POST /v1/visualize   JSON {csv_base64, prompt, mode, options} or
                         multipart/form-data with a ``csv`` file part
    GET  /v1/charts      the shipped chart catalog document
    GET  /v1/health      {"status": "ok"}

Requests are handled on a thread pool (ThreadingHTTPServer); shared state
(catalog, templates, function index, replay store) is read-only, and each
request builds its own provider cursor and SQL session.
"""

from __future__ import annotations

import base64
import binascii
import json
import threading
from email.parser import BytesParser
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from .catalog import ChartCatalog
from .config import PipelineConfig
from .errors import BadCsv, BindError, EmptyPrompt
from .pipeline import PipelineRuntime, RequestOptions, VisualizeRequest, run_pipeline


def _parse_multipart(content_type: str, body: bytes) -> dict[str, bytes]:
    """Minimal multipart/form-data field extraction via the email parser."""
    header = f"Content-Type: {content_type}\r\n\r\n".encode("latin-1")
    message = BytesParser().parsebytes(header + body)
    fields: dict[str, bytes] = {}
    if not message.is_multipart():
        return fields
    for part in message.get_payload():
        name = part.get_param("name", header="content-disposition")
        if name:
            payload = part.get_payload(decode=True)
            fields[str(name)] = payload if payload is not None else b""
    return fields


class _Handler(BaseHTTPRequestHandler):
    runtime: PipelineRuntime  # set by serve()
    catalog: ChartCatalog
    quiet: bool = True

    def log_message(self, format: str, *args) -> None:  # noqa: A002
        if not self.quiet:
            super().log_message(format, *args)

    def _send_json(self, status: int, payload: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(payload)

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json(status, json.dumps({"error": message}).encode("utf-8"))

    def do_OPTIONS(self) -> None:  # CORS preflight for the webapp
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self) -> None:
        if self.path == "/v1/health":
            self._send_json(200, b'{"status":"ok"}')
        elif self.path == "/v1/charts":
            payload = json.dumps(self.catalog.raw_doc, ensure_ascii=True).encode("utf-8")
            self._send_json(200, payload)
        else:
            self._send_error_json(404, f"no such path: {self.path}")

    def do_POST(self) -> None:
        if self.path != "/v1/visualize":
            self._send_error_json(404, f"no such path: {self.path}")
            return
        length = int(self.headers.get("Content-Length", "0"))
        if length > self.runtime.config.max_csv_bytes * 2:
            self._send_error_json(413, "request body too large")
            return
        body = self.rfile.read(length)
        content_type = self.headers.get("Content-Type", "")
        try:
            request = self._build_request(content_type, body)
        except ValueError as exc:
            self._send_error_json(400, str(exc))
            return
        try:
            response = run_pipeline(request, self.runtime)
        except (BadCsv, EmptyPrompt) as exc:
            self._send_error_json(400, f"{type(exc).__name__}: {exc}")
            return
        self._send_json(200, response.to_json_bytes())

    def _build_request(self, content_type: str, body: bytes) -> VisualizeRequest:
        if content_type.startswith("multipart/form-data"):
            fields = _parse_multipart(content_type, body)
            if "csv" not in fields:
                raise ValueError("multipart request needs a 'csv' file part")
            options = {}
            if fields.get("options"):
                options = json.loads(fields["options"].decode("utf-8"))
            return VisualizeRequest(
                csv=fields["csv"],
                prompt=fields.get("prompt", b"").decode("utf-8"),
                mode=fields.get("mode", b"recommend").decode("utf-8"),
                options=RequestOptions.from_dict(options),
            )
        try:
            doc = json.loads(body.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ValueError(f"request body is not JSON: {exc}") from exc
        if not isinstance(doc, dict) or "csv_base64" not in doc:
            raise ValueError("JSON request needs csv_base64 and prompt")
        try:
            csv_bytes = base64.b64decode(doc["csv_base64"], validate=True)
        except (binascii.Error, TypeError) as exc:
            raise ValueError(f"csv_base64 is not valid base64: {exc}") from exc
        return VisualizeRequest(
            csv=csv_bytes,
            prompt=str(doc.get("prompt", "")),
            mode=str(doc.get("mode", "recommend")),
            options=RequestOptions.from_dict(doc.get("options") or {}),
        )


class VisualizeServer:
    """Running HTTP service wrapper with clean startup/shutdown."""

    def __init__(self, config: PipelineConfig, host: str = "127.0.0.1", port: int = 8080):
        self.runtime = PipelineRuntime(config)
        handler = type(
            "BoundHandler",
            (_Handler,),
            {"runtime": self.runtime, "catalog": self.runtime.catalog},
        )
        try:
            self._httpd = ThreadingHTTPServer((host, port), handler)
        except OSError as exc:
            raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def start_background(self) -> "VisualizeServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)


def serve(config: PipelineConfig, host: str = "127.0.0.1", port: int = 8080) -> VisualizeServer:
    """Bind and return a server; call serve_forever() or start_background()."""
    return VisualizeServer(config, host=host, port=port)
