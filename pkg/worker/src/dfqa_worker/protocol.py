"""Newline-delimited JSON worker loop (protocol_version 1).

On start the worker announces itself with a hello frame, then answers exec
frames one at a time until stdin closes:

    {"type": "hello", "protocol_version": 1}
    {"type": "exec", "request_id": ..., "table": {...}, "query": "...",
     "limits": {...}}
    {"type": "result", "request_id": ..., "result": {...}, "wall_ms": N}

One frame per line, UTF-8. The worker is strictly single-threaded, holds no
state between requests, opens no files, and never touches the network.
"""

from __future__ import annotations

import json
import sys
import time
from typing import Any, TextIO

from .runtime import run

PROTOCOL_VERSION = 1


def _write_frame(stream: TextIO, frame: dict[str, Any]) -> None:
    stream.write(json.dumps(frame, ensure_ascii=False) + "\n")
    stream.flush()


def handle_exec(frame: dict[str, Any]) -> dict[str, Any]:
    request_id = frame.get("request_id")
    started = time.monotonic()
    table = frame.get("table")
    query = frame.get("query")
    if not isinstance(table, dict) or not isinstance(query, str):
        result: dict[str, Any] = {
            "kind": "error",
            "error_kind": "runtime_error",
            "message": "malformed exec frame: missing table or query",
        }
    else:
        result = run(table, query, frame.get("limits") or {})
    return {
        "type": "result",
        "request_id": request_id,
        "result": result,
        "wall_ms": round((time.monotonic() - started) * 1000.0, 3),
    }


def serve(stdin: TextIO | None = None, stdout: TextIO | None = None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    _write_frame(stdout, {"type": "hello", "protocol_version": PROTOCOL_VERSION})
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            frame = json.loads(line)
        except json.JSONDecodeError as e:
            _write_frame(stdout, {
                "type": "result",
                "request_id": None,
                "result": {"kind": "error", "error_kind": "runtime_error",
                           "message": f"undecodable frame: {e}"},
                "wall_ms": 0.0,
            })
            continue
        if frame.get("type") != "exec":
            _write_frame(stdout, {
                "type": "result",
                "request_id": frame.get("request_id"),
                "result": {"kind": "error", "error_kind": "runtime_error",
                           "message": f"unexpected frame type {frame.get('type')!r}"},
                "wall_ms": 0.0,
            })
            continue
        _write_frame(stdout, handle_exec(frame))


if __name__ == "__main__":
    serve()
