"""Minimal threaded HTTP endpoint serving model recommendations.

One immutable model is shared across handler threads; queries never
mutate it, so no locking is needed on the read path.  Responses reuse the
same prediction serializer as batch inference, keeping the two output
paths byte-identical for identical inputs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .graph import Model, UnknownLeafError
from .inference import (
    DEFAULT_K,
    DEFAULT_MAX_PREDICTIONS,
    Alignment,
    Query,
    predictions_to_dicts,
    recommend,
)

log = logging.getLogger("graphex.server")


@dataclass
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    default_k: int = DEFAULT_K
    align: Alignment = Alignment.LTA
    max_predictions: int = DEFAULT_MAX_PREDICTIONS
    max_body_bytes: int = 1 << 20
    # When true, unknown leaf categories answer 200 with an empty
    # prediction list instead of 404.
    unknown_leaf_empty: bool = False


class BadRequest(ValueError):
    pass


def _parse_recommend_body(raw: bytes, config: ServeConfig) -> tuple[str, int, int, Alignment]:
    try:
        body = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadRequest(f"body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise BadRequest("body must be a JSON object")
    title = body.get("title")
    if not isinstance(title, str):
        raise BadRequest("'title' must be a string")
    leaf = body.get("leaf_category")
    if isinstance(leaf, bool) or not isinstance(leaf, int):
        raise BadRequest("'leaf_category' must be an integer")
    k = body.get("k", config.default_k)
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise BadRequest("'k' must be an integer >= 1")
    align_name = body.get("align", config.align.value)
    try:
        align = Alignment(align_name)
    except ValueError:
        raise BadRequest(
            f"'align' must be one of lta, wmr, jac; got {align_name!r}"
        ) from None
    return title, leaf, k, align


class RecommendServer(ThreadingHTTPServer):
    """HTTP server carrying the shared model and serving configuration."""

    daemon_threads = True
    request_queue_size = 128

    def __init__(self, config: ServeConfig, model: Model | None = None):
        super().__init__((config.host, config.port), _Handler)
        self.config = config
        self.model = model


class _Handler(BaseHTTPRequestHandler):
    server: RecommendServer
    protocol_version = "HTTP/1.1"

    def log_message(self, format: str, *args) -> None:
        log.debug("%s %s", self.address_string(), format % args)

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path != "/healthz":
            self._send_json(404, {"error": f"no such path: {self.path}"})
            return
        model = self.server.model
        if model is None:
            self._send_json(503, {"status": "loading"})
            return
        self._send_json(
            200,
            {
                "status": "ok",
                "meta_category": model.meta_category,
                "format_version": model.version,
                "leaves": len(model.leaf_graphs),
                "keyphrases": model.num_keyphrases,
            },
        )

    def do_POST(self) -> None:
        if self.path != "/recommend":
            self._send_json(404, {"error": f"no such path: {self.path}"})
            return
        model = self.server.model
        config = self.server.config
        if model is None:
            self._send_json(503, {"error": "model not loaded"})
            return
        length = int(self.headers.get("Content-Length", 0) or 0)
        if length > config.max_body_bytes:
            self._send_json(413, {"error": f"body exceeds {config.max_body_bytes} bytes"})
            return
        raw = self.rfile.read(length)
        try:
            title, leaf, k, align = _parse_recommend_body(raw, config)
        except BadRequest as exc:
            self._send_json(400, {"error": str(exc)})
            return
        try:
            predictions = recommend(
                model,
                Query(title=title, leaf_category=leaf, k=k),
                align=align,
                max_predictions=config.max_predictions,
            )
        except UnknownLeafError as exc:
            if config.unknown_leaf_empty:
                self._send_json(200, {"predictions": []})
            else:
                self._send_json(404, {"error": str(exc)})
            return
        self._send_json(200, {"predictions": predictions_to_dicts(predictions)})


def serve(config: ServeConfig, model: Model) -> None:
    """Run the endpoint until interrupted (blocking)."""
    with RecommendServer(config, model) as server:
        log.info("listening on %s:%d", config.host, config.port)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            log.info("shutting down")
