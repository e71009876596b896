"""Worker-pool supervisor for sandboxed query execution.

Workers are separate processes speaking newline-delimited JSON over
stdin/stdout (protocol_version 1):

    worker -> host   {"type": "hello", "protocol_version": 1}
    host -> worker   {"type": "exec", "request_id": ..., "table": {...},
                      "query": "...", "limits": {...}}
    worker -> host   {"type": "result", "request_id": ..., "result": {...},
                      "wall_ms": N}

The table payload is ``{"columns": [{"name", "dtype"}], "rows": [[cell, ...]]}``
with cells encoded as JSON scalars (datetimes tagged ``{"$dt": iso}``); the
result payload mirrors the canonical result taxonomy with a ``kind``
discriminator. One frame per line, UTF-8, embedded newlines JSON-escaped.

The host owns the wall clock: a worker that misses its deadline is killed and
replaced, and the request resolves to a timeout error. Queue saturation
blocks submitters (backpressure); requests are never dropped.
"""

from __future__ import annotations

import json
import queue
import subprocess
import sys
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Any, Sequence

from .model import (
    CanonResult,
    DataTable,
    ErrorKind,
    ExecError,
    QueryText,
    result_from_dict,
    table_to_wire,
)

PROTOCOL_VERSION = 1


class SandboxError(Exception):
    pass


class SpawnError(SandboxError):
    pass


class HandshakeMismatch(SandboxError):
    pass


@dataclass(frozen=True)
class Limits:
    wall_seconds: float = 10.0
    memory_mb: int = 512
    max_result_cells: int = 100_000

    def __post_init__(self) -> None:
        if self.wall_seconds <= 0 or self.memory_mb <= 0 or self.max_result_cells <= 0:
            raise ValueError("limits must be strictly positive")

    def to_dict(self) -> dict[str, Any]:
        return {
            "wall_seconds": self.wall_seconds,
            "memory_mb": self.memory_mb,
            "max_result_cells": self.max_result_cells,
        }


@dataclass(frozen=True)
class ExecRequest:
    request_id: str
    table: DataTable
    query: QueryText
    limits: Limits = Limits()


@dataclass(frozen=True)
class ExecResponse:
    request_id: str
    result: CanonResult
    wall_ms: float


def default_worker_command() -> list[str]:
    """Launch command for the bundled restricted executor package."""
    return [sys.executable, "-m", "dfqa_worker"]


class _Worker:
    def __init__(self, command: Sequence[str], handshake_timeout: float, cwd: str | None = None):
        try:
            self.proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
                cwd=cwd,
            )
        except OSError as e:
            raise SpawnError(f"cannot launch worker {command!r}: {e}") from e
        self.lines: queue.Queue[str | None] = queue.Queue()
        self.stderr_tail: deque[str] = deque(maxlen=20)
        self._stdout_thread = threading.Thread(target=self._read_stdout, daemon=True)
        self._stderr_thread = threading.Thread(target=self._read_stderr, daemon=True)
        self._stdout_thread.start()
        self._stderr_thread.start()
        self._handshake(handshake_timeout)

    def _read_stdout(self) -> None:
        try:
            for line in self.proc.stdout:  # type: ignore[union-attr]
                self.lines.put(line)
        except ValueError:
            pass
        self.lines.put(None)

    def _read_stderr(self) -> None:
        try:
            for line in self.proc.stderr:  # type: ignore[union-attr]
                self.stderr_tail.append(line.rstrip("\n"))
        except ValueError:
            pass

    def _handshake(self, timeout: float) -> None:
        try:
            line = self.lines.get(timeout=timeout)
        except queue.Empty:
            self.kill()
            raise SpawnError("worker produced no hello frame before timeout") from None
        if line is None:
            self.kill()
            raise SpawnError(
                f"worker exited during handshake (stderr: {'; '.join(self.stderr_tail) or 'empty'})"
            )
        try:
            frame = json.loads(line)
        except json.JSONDecodeError:
            self.kill()
            raise SpawnError(f"worker sent a non-JSON hello: {line!r}") from None
        if frame.get("type") != "hello":
            self.kill()
            raise SpawnError(f"expected hello frame, got {frame.get('type')!r}")
        version = frame.get("protocol_version")
        if version != PROTOCOL_VERSION:
            self.kill()
            raise HandshakeMismatch(
                f"worker speaks protocol {version!r}, host expects {PROTOCOL_VERSION}"
            )

    def send(self, frame: dict[str, Any]) -> None:
        assert self.proc.stdin is not None
        self.proc.stdin.write(json.dumps(frame, ensure_ascii=False) + "\n")
        self.proc.stdin.flush()

    def alive(self) -> bool:
        return self.proc.poll() is None

    def kill(self) -> None:
        try:
            self.proc.kill()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            pass

    def close(self) -> None:
        try:
            if self.proc.stdin is not None:
                self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self.kill()


class WorkerPool:
    """Fixed-size pool of executor processes, safe for concurrent submission.

    Each worker handles one request at a time; a killed or crashed worker is
    replaced in the background so the pool size recovers after faults.
    """

    def __init__(
        self,
        size: int,
        command: Sequence[str] | None = None,
        handshake_timeout: float = 30.0,
        grace_seconds: float = 1.0,
        worker_cwd: str | None = None,
    ):
        if size < 1:
            raise ValueError("pool size must be >= 1")
        self.command = list(command) if command is not None else default_worker_command()
        self.handshake_timeout = handshake_timeout
        self.grace_seconds = grace_seconds
        self.worker_cwd = worker_cwd
        self._idle: queue.Queue[_Worker] = queue.Queue()
        self._lock = threading.Lock()
        self._workers: list[_Worker] = []
        self._respawn_threads: list[threading.Thread] = []
        self._closed = False
        self.counters = {"executed": 0, "timeouts": 0, "crashes": 0, "spawn_failures": 0}
        spawned: list[_Worker] = []
        try:
            for _ in range(size):
                worker = _Worker(self.command, handshake_timeout, cwd=worker_cwd)
                spawned.append(worker)
        except SandboxError:
            for w in spawned:
                w.kill()
            raise
        for w in spawned:
            self._workers.append(w)
            self._idle.put(w)

    @property
    def size(self) -> int:
        with self._lock:
            return len(self._workers)

    def alive_count(self) -> int:
        with self._lock:
            return sum(1 for w in self._workers if w.alive())

    def _discard(self, worker: _Worker) -> None:
        worker.kill()
        with self._lock:
            if worker in self._workers:
                self._workers.remove(worker)

    def _respawn_async(self) -> None:
        def run() -> None:
            for _ in range(3):
                if self._closed:
                    return
                try:
                    worker = _Worker(self.command, self.handshake_timeout, cwd=self.worker_cwd)
                except SandboxError:
                    with self._lock:
                        self.counters["spawn_failures"] += 1
                    time.sleep(0.2)
                    continue
                with self._lock:
                    if self._closed:
                        worker.kill()
                        return
                    self._workers.append(worker)
                self._idle.put(worker)
                return

        t = threading.Thread(target=run, daemon=True)
        t.start()
        with self._lock:
            self._respawn_threads.append(t)

    def _fail(self, worker: _Worker, kind: ErrorKind, message: str, counter: str, started: float) -> ExecResponse:
        self._discard(worker)
        with self._lock:
            self.counters[counter] += 1
            self.counters["executed"] += 1
        if not self._closed:
            self._respawn_async()
        return ExecResponse(
            request_id="",
            result=ExecError(kind, message),
            wall_ms=(time.monotonic() - started) * 1000.0,
        )

    def execute(self, req: ExecRequest) -> ExecResponse:
        """Run one request on an idle worker, enforcing the wall clock host-side."""
        if self._closed:
            raise SandboxError("pool is shut down")
        worker = self._idle.get()
        if not worker.alive():
            response = self._fail(
                worker, ErrorKind.RUNTIME_ERROR, "worker died while idle", "crashes", time.monotonic()
            )
            return ExecResponse(req.request_id, response.result, response.wall_ms)

        frame = {
            "type": "exec",
            "request_id": req.request_id,
            "table": table_to_wire(req.table),
            "query": req.query.source,
            "limits": req.limits.to_dict(),
        }
        started = time.monotonic()
        try:
            worker.send(frame)
        except (OSError, ValueError):
            response = self._fail(
                worker, ErrorKind.RUNTIME_ERROR, "worker pipe closed on send", "crashes", started
            )
            return ExecResponse(req.request_id, response.result, response.wall_ms)

        deadline = started + req.limits.wall_seconds + self.grace_seconds
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                response = self._fail(
                    worker,
                    ErrorKind.TIMEOUT,
                    f"wall clock limit of {req.limits.wall_seconds}s exceeded; worker killed",
                    "timeouts",
                    started,
                )
                return ExecResponse(req.request_id, response.result, response.wall_ms)
            try:
                line = worker.lines.get(timeout=remaining)
            except queue.Empty:
                continue
            if line is None:
                code = worker.proc.poll()
                note = "; ".join(worker.stderr_tail)
                response = self._fail(
                    worker,
                    ErrorKind.RUNTIME_ERROR,
                    f"worker crashed (exit {code}){': ' + note if note else ''}",
                    "crashes",
                    started,
                )
                return ExecResponse(req.request_id, response.result, response.wall_ms)
            try:
                payload = json.loads(line)
            except json.JSONDecodeError:
                continue
            if payload.get("type") != "result":
                continue
            if payload.get("request_id") != req.request_id:
                response = self._fail(
                    worker,
                    ErrorKind.RUNTIME_ERROR,
                    f"protocol corruption: reply for {payload.get('request_id')!r} "
                    f"while awaiting {req.request_id!r}",
                    "crashes",
                    started,
                )
                return ExecResponse(req.request_id, response.result, response.wall_ms)
            try:
                result = result_from_dict(payload["result"])
            except (KeyError, ValueError) as e:
                response = self._fail(
                    worker, ErrorKind.RUNTIME_ERROR, f"undecodable result payload: {e}", "crashes", started
                )
                return ExecResponse(req.request_id, response.result, response.wall_ms)
            with self._lock:
                self.counters["executed"] += 1
            self._idle.put(worker)
            return ExecResponse(
                request_id=req.request_id,
                result=result,
                wall_ms=float(payload.get("wall_ms", (time.monotonic() - started) * 1000.0)),
            )

    def shutdown(self) -> dict[str, int]:
        """Terminate every worker and return the execution counters."""
        self._closed = True
        with self._lock:
            threads = list(self._respawn_threads)
        for t in threads:
            t.join(timeout=3.0)
        with self._lock:
            workers = list(self._workers)
            self._workers.clear()
        for w in workers:
            w.close()
        while True:
            try:
                self._idle.get_nowait()
            except queue.Empty:
                break
        return {k: v for k, v in self.counters.items() if k in ("executed", "timeouts", "crashes")}


def start_pool(size: int, worker_launch_command: Sequence[str] | None = None, **kwargs: Any) -> WorkerPool:
    return WorkerPool(size, worker_launch_command, **kwargs)


def execute(pool: WorkerPool, req: ExecRequest) -> ExecResponse:
    return pool.execute(req)


def shutdown(pool: WorkerPool) -> dict[str, int]:
    return pool.shutdown()
