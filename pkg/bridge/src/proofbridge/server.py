"""Request dispatch plus the stdio and HTTP serving loops.

The protocol is two JSON operations:

    {"op": "generate", "hypothesis": str, "context": [str],
     "partial_proof": str, "n": int}
        -> {"candidates": [{"step": str, "score": float}]}

    {"op": "score", "premises": [str], "conclusion": str}
        -> {"score": float}

Every response satisfies the client's range checks: scores are clamped into
[0, 1], and failures of any kind (bad fields, malformed JSON, a model
exception) come back as {"error": str} on a live connection, never as a
crash or silence.
"""

from __future__ import annotations

import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import IO, Protocol, Sequence

GENERATE_OP = "generate"
SCORE_OP = "score"


class StepModel(Protocol):
    def generate(
        self, hypothesis: str, context: Sequence[str], partial_proof: str, n: int
    ) -> list[tuple[str, float]]:
        ...

    def confidence(self, premises: Sequence[str], conclusion: str) -> float:
        ...


class RequestError(ValueError):
    """A request that fails validation; reported, never raised outward."""


def clamp01(value: float) -> float:
    if value < 0.0:
        return 0.0
    if value > 1.0:
        return 1.0
    return float(value)


def _require_str(payload: dict, key: str) -> str:
    value = payload.get(key)
    if not isinstance(value, str):
        raise RequestError(f"{key!r} must be a string, got {type(value).__name__}")
    return value


def _require_str_list(payload: dict, key: str) -> list[str]:
    value = payload.get(key)
    if not isinstance(value, list) or any(not isinstance(item, str) for item in value):
        raise RequestError(f"{key!r} must be a list of strings")
    return value


def _require_count(payload: dict, key: str) -> int:
    value = payload.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise RequestError(f"{key!r} must be an integer, got {type(value).__name__}")
    if value < 1:
        raise RequestError(f"{key!r} must be >= 1, got {value}")
    return value


def handle_request(model: StepModel, payload: object) -> dict:
    """One decoded request to one response object; never raises."""
    try:
        if not isinstance(payload, dict):
            raise RequestError("request must be a JSON object")
        op = payload.get("op")
        if op == GENERATE_OP:
            hypothesis = _require_str(payload, "hypothesis")
            context = _require_str_list(payload, "context")
            partial_proof = _require_str(payload, "partial_proof")
            n = _require_count(payload, "n")
            candidates = model.generate(hypothesis, context, partial_proof, n)
            return {
                "candidates": [
                    {"step": step, "score": clamp01(score)}
                    for step, score in candidates
                ]
            }
        if op == SCORE_OP:
            premises = _require_str_list(payload, "premises")
            conclusion = _require_str(payload, "conclusion")
            return {"score": clamp01(model.confidence(premises, conclusion))}
        raise RequestError(f"unknown op {op!r}")
    except RequestError as exc:
        return {"error": str(exc)}
    except Exception as exc:  # a model failure must not drop the connection
        return {"error": f"model failure: {type(exc).__name__}: {exc}"}


def handle_frame(model: StepModel, frame: str) -> dict:
    """One raw text frame to one response object; bad JSON is reported."""
    try:
        payload = json.loads(frame)
    except json.JSONDecodeError as exc:
        return {"error": f"malformed JSON: {exc}"}
    return handle_request(model, payload)


def serve_stdio(
    model: StepModel, stdin: IO[str] | None = None, stdout: IO[str] | None = None
) -> int:
    """Answer newline-delimited JSON until EOF; blank lines are skipped."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    for line in stdin:
        if not line.strip():
            continue
        response = handle_frame(model, line)
        stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        stdout.flush()
    return 0


def serve_http(
    model: StepModel, port: int, host: str = "127.0.0.1"
) -> ThreadingHTTPServer:
    """An HTTP server answering POSTed request bodies; caller runs/stops it."""

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self) -> None:
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length).decode("utf-8", errors="replace")
            data = json.dumps(handle_frame(model, body), ensure_ascii=False).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, format: str, *args: object) -> None:
            pass

    return ThreadingHTTPServer((host, port), Handler)


def run_http(model: StepModel, port: int, host: str = "127.0.0.1") -> int:
    """Serve until interrupted, announcing the bound address on stderr."""
    server = serve_http(model, port, host)
    bound = server.server_address[1]
    print(f"serving on http://{host}:{bound}/", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def start_http_background(
    model: StepModel, port: int = 0, host: str = "127.0.0.1"
) -> tuple[ThreadingHTTPServer, str]:
    """The HTTP server on a daemon thread, plus its URL; for embedding."""
    server = serve_http(model, port, host)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, f"http://{host}:{server.server_address[1]}/"
