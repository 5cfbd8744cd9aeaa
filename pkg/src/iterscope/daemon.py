"""Session orchestration: run or replay profiling, fit models, serve clients.

One daemon process hosts one session (one entry file). Profiling data comes
from either a recorded trace (replay) or a collector subprocess invoked per
batch size. Analysis runs off the connection-handling path; at most one
analysis executes at a time and at most one follow-up request is queued
(latest wins), which replaces save-event debouncing.
"""

from __future__ import annotations

import asyncio
import logging
import os
import shlex
import subprocess
import tempfile
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path

from . import breakdown as bd
from . import mutate, protocol
from .model import ProfileSnapshot, compute_throughput, untracked_memory, untracked_run_time
from .predict import (
    BatchSamplePlan,
    LinearModel,
    PredictError,
    fit_linear,
    max_throughput,
    plan_batches,
)
from .traceio import TraceContents, TraceFormatError, read_trace

log = logging.getLogger("iterscope.daemon")

CAPABILITIES = ["predictions", "breakdown", "inline_markers", "mutation"]


class BackendError(RuntimeError):
    """Profiling data could not be obtained (bad trace, collector failure)."""


class BindError(OSError):
    pass


@dataclass
class SessionConfig:
    project_root: Path
    entry_file: Path  # relative to project_root
    trace_path: Path | None = None
    collector_cmd: str | None = None
    provider_name: str = "input_provider"
    kwarg_name: str = "batch_size"
    capacity_override: int | None = None

    def __post_init__(self):
        self.project_root = Path(self.project_root).resolve()
        self.entry_file = Path(self.entry_file)
        if self.entry_file.is_absolute():
            self.entry_file = self.entry_file.relative_to(self.project_root)
        if (self.trace_path is None) == (self.collector_cmd is None):
            raise ValueError("exactly one of trace_path or collector_cmd must be set")

    @property
    def entry_path(self) -> Path:
        return self.project_root / self.entry_file


@dataclass
class AnalysisResult:
    user_batch: int
    snapshots: dict[int, ProfileSnapshot]
    plan: BatchSamplePlan | None
    run_time_model: LinearModel | None
    memory_model: LinearModel | None
    models_disabled_reason: str | None
    tree: bd.BreakdownNode
    batch_span: mutate.LiteralSpan | None

    @property
    def user_snapshot(self) -> ProfileSnapshot:
        return self.snapshots[self.user_batch]

    @property
    def dragging_enabled(self) -> bool:
        return self.run_time_model is not None and self.memory_model is not None


class _ReplayBackend:
    """Serves snapshots from a recorded trace; batches must match exactly."""

    def __init__(self, trace_path: Path):
        try:
            contents = read_trace(trace_path.read_bytes())
        except (OSError, TraceFormatError) as exc:
            raise BackendError(f"cannot replay {trace_path}: {exc}") from exc
        self.by_batch = contents.by_batch()
        self.oom_batches = set(contents.oom_batches)

    def snapshot(self, batch: int) -> ProfileSnapshot | None:
        return self.by_batch.get(batch)


class _CollectorBackend:
    """Invokes the collector command with `--batch N`, reads the trace it emits."""

    def __init__(self, command: str, cwd: Path):
        self.command = shlex.split(command)
        self.cwd = cwd
        self.oom_batches: set[int] = set()

    def snapshot(self, batch: int) -> ProfileSnapshot | None:
        proc = subprocess.run(
            self.command + ["--batch", str(batch)],
            cwd=self.cwd,
            capture_output=True,
        )
        if proc.returncode != 0:
            raise BackendError(
                f"collector exited with {proc.returncode}: {proc.stderr.decode(errors='replace').strip()}"
            )
        try:
            contents = read_trace(proc.stdout)
        except TraceFormatError as exc:
            raise BackendError(f"collector emitted an unreadable trace: {exc}") from exc
        self.oom_batches.update(contents.oom_batches)
        return contents.by_batch().get(batch)


def _make_backend(config: SessionConfig):
    if config.trace_path is not None:
        return _ReplayBackend(Path(config.trace_path))
    return _CollectorBackend(config.collector_cmd, config.project_root)


def _locate_span(config: SessionConfig, source: str) -> mutate.LiteralSpan | None:
    target = mutate.MutationTarget(str(config.entry_file), config.provider_name, config.kwarg_name)
    try:
        return mutate.locate_batch_kwarg(source, target)
    except mutate.MutationError as exc:
        log.warning("batch literal not found: %s", exc)
        return None


def run_analysis(config: SessionConfig, backend=None) -> AnalysisResult:
    """Execute the full measurement/fit/breakdown pipeline once."""
    backend = backend or _make_backend(config)
    try:
        source = config.entry_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BackendError(f"cannot read entry file: {exc}") from exc
    span = _locate_span(config, source)

    if span is not None:
        user_batch = span.current_value
    elif isinstance(backend, _ReplayBackend) and backend.by_batch:
        # No batch literal to read; fall back to the smallest recorded batch
        # so the breakdown can still be served (dragging stays disabled).
        user_batch = min(backend.by_batch)
    else:
        raise BackendError(
            f"cannot determine the batch size: no integer "
            f"{config.kwarg_name!r} default in {config.entry_file}"
        )

    snapshots: dict[int, ProfileSnapshot] = {}
    disabled_reason: str | None = None
    plan: BatchSamplePlan | None = None

    def obtain(batch: int) -> ProfileSnapshot | None:
        if batch in snapshots:
            return snapshots[batch]
        snap = backend.snapshot(batch)
        if snap is not None:
            snapshots[batch] = snap
        return snap

    user_snap = obtain(user_batch)
    if user_snap is None:
        if user_batch in backend.oom_batches:
            raise BackendError(f"the user's batch size {user_batch} runs out of memory")
        raise BackendError(f"no profiling data available for batch size {user_batch}")

    def attempt(oom: set[int]) -> tuple[BatchSamplePlan, list[int]]:
        chosen = plan_batches(user_batch, oom)
        missing = [b for b in chosen.batches if obtain(b) is None]
        return chosen, missing

    try:
        known_oom = set(backend.oom_batches)
        plan, missing = attempt(known_oom)
        if missing:
            # Out-of-memory feedback (or absent replay data): re-plan downward once.
            plan, missing = attempt(known_oom | set(backend.oom_batches) | set(missing))
        if missing:
            raise PredictError(
                f"fewer than 3 feasible batch sizes: no data for {sorted(missing)}"
            )
    except PredictError as exc:
        plan = None
        disabled_reason = str(exc)

    run_time_model = memory_model = None
    if plan is not None:
        fit_snaps = [snapshots[b] for b in plan.batches]
        run_time_model = fit_linear(
            [(s.iteration.batch_size, s.iteration.per_iteration_ms) for s in fit_snaps],
            role="run_time",
        )
        memory_model = fit_linear(
            [(s.iteration.batch_size, float(s.iteration.peak_memory_bytes)) for s in fit_snaps],
            role="memory",
        )
        if run_time_model.degenerate or memory_model.degenerate:
            disabled_reason = "degenerate fit: non-positive slope"
            run_time_model = memory_model = None

    tree = bd.build_tree(user_snap.operations, user_snap.weights)
    return AnalysisResult(
        user_batch=user_batch,
        snapshots=snapshots,
        plan=plan,
        run_time_model=run_time_model,
        memory_model=memory_model,
        models_disabled_reason=disabled_reason,
        tree=tree,
        batch_span=span,
    )


def serialize_node(node: bd.BreakdownNode, path: list[int]) -> dict:
    return {
        "kind": node.kind,
        "display_name": node.display_name,
        "file": node.frame.file_path,
        "line": node.frame.line_number,
        "run_time_ms": node.run_time_ms,
        "weight_bytes": node.weight_bytes,
        "activation_bytes": node.activation_bytes,
        "leaf_count": node.leaf_count,
        "path": path,
        "children": [serialize_node(child, path + [i]) for i, child in enumerate(node.children)],
    }


def serialize_markers(markers: list[bd.InlineMarker]) -> list[dict]:
    return [
        {
            "file": m.frame.file_path,
            "line": m.frame.line_number,
            "run_time_ms": m.run_time_ms,
            "weight_bytes": m.weight_bytes,
            "activation_bytes": m.activation_bytes,
            "scoped": m.scoped,
        }
        for m in markers
    ]


def key_metrics_message(result: AnalysisResult, capacity_override: int | None = None) -> dict:
    snap = result.user_snapshot
    msg: dict = {
        "type": "key_metrics",
        "batch_size": result.user_batch,
        "throughput_samples_per_s": compute_throughput(snap.iteration),
        "peak_memory_bytes": snap.iteration.peak_memory_bytes,
        "capacity_bytes": capacity_override or snap.device.memory_capacity_bytes,
    }
    untracked_ms, _ = untracked_run_time(snap)
    untracked_bytes, _ = untracked_memory(snap)
    msg["untracked_run_time_ms"] = untracked_ms
    msg["untracked_memory_bytes"] = untracked_bytes
    if result.dragging_enabled:
        msg["max_throughput_samples_per_s"] = max_throughput(result.run_time_model)
        msg["run_time_model"] = {
            "a_ms": result.run_time_model.slope,
            "b_ms": result.run_time_model.intercept,
        }
        msg["memory_model"] = {
            "c_bytes": result.memory_model.slope,
            "d_bytes": result.memory_model.intercept,
        }
    elif result.models_disabled_reason:
        msg["models_disabled_reason"] = result.models_disabled_reason
    if result.batch_span is not None:
        msg["batch_span"] = {
            "line": result.batch_span.line_number,
            "byte_start": result.batch_span.byte_start,
            "byte_end": result.batch_span.byte_end,
        }
    return msg


def breakdown_message(tree: bd.BreakdownNode, path: tuple[int, ...] | list[int] = (), sort_key: str = bd.RUN_TIME) -> dict:
    # Serialized paths always index the canonical (run-time) child order so a
    # client can drill into a node no matter which sort it is looking at.
    if path:
        parent = bd.resolve_path(tree, path)
        canonical = {id(child): i for i, child in enumerate(parent.children)}
        serialized = [
            serialize_node(child, list(path) + [canonical[id(child)]])
            for child in bd.children_at(tree, path, sort_key)
        ]
    else:
        serialized = [serialize_node(tree, [])]
    return {"type": "breakdown", "path": list(path), "sort_key": sort_key, "nodes": serialized}


def inline_markers_message(tree: bd.BreakdownNode, scope: tuple[int, ...] | list[int] = ()) -> dict:
    return {"type": "inline_markers", "markers": serialize_markers(bd.inline_markers(tree, scope))}


class _Client:
    """One connected client, whatever the transport."""

    def __init__(self, send_json):
        self._send_json = send_json
        self.ready = False

    async def send(self, msg: dict) -> None:
        await self._send_json(msg)


class ProfilerDaemon:
    """Hosts one profiling session over the TCP and WebSocket transports."""

    def __init__(
        self,
        config: SessionConfig,
        tcp_port: int = protocol.DEFAULT_TCP_PORT,
        ws_port: int | None = protocol.DEFAULT_WS_PORT,
        host: str = "127.0.0.1",
        analysis_hold_s: float = 0.0,
    ):
        self.config = config
        self.tcp_port = tcp_port
        self.ws_port = ws_port
        self.host = host
        self.analysis_hold_s = analysis_hold_s  # test hook: stretches each run
        self.session_id = uuid.uuid4().hex
        self.clients: set[_Client] = set()
        self.latest: AnalysisResult | None = None
        self._analysis_task: asyncio.Task | None = None
        self._pending_trigger: str | None = None
        self._file_lock = threading.Lock()
        self._servers: list = []
        self._backend = None

    # -- lifecycle -----------------------------------------------------------

    async def start(self) -> None:
        self._backend = _make_backend(self.config)
        try:
            server = await asyncio.start_server(self._handle_tcp, self.host, self.tcp_port)
        except OSError as exc:
            raise BindError(f"cannot bind tcp port {self.tcp_port}: {exc}") from exc
        self.tcp_port = server.sockets[0].getsockname()[1]
        self._servers.append(server)
        if self.ws_port is not None:
            try:
                import websockets.asyncio.server as ws_server

                ws = await ws_server.serve(self._handle_ws, self.host, self.ws_port)
            except OSError as exc:
                raise BindError(f"cannot bind websocket port {self.ws_port}: {exc}") from exc
            self.ws_port = ws.sockets[0].getsockname()[1]
            self._servers.append(ws)
        log.info("session %s listening on tcp:%d ws:%s", self.session_id, self.tcp_port, self.ws_port)

    async def stop(self) -> None:
        for server in self._servers:
            server.close()
            wait = getattr(server, "wait_closed", None)
            if wait is not None:
                await wait()
        self._servers.clear()
        if self._analysis_task is not None:
            self._analysis_task.cancel()

    async def serve_forever(self) -> None:
        await asyncio.gather(*(s.serve_forever() for s in self._servers if hasattr(s, "serve_forever")))

    # -- transports ----------------------------------------------------------

    async def _handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        lock = asyncio.Lock()

        async def send_json(msg: dict) -> None:
            async with lock:
                writer.write(protocol.encode_frame(msg))
                await writer.drain()

        client = _Client(send_json)
        buffer = b""

        async def read_message() -> dict | None:
            nonlocal buffer
            while True:
                decoded = protocol.decode_frame(buffer)
                if decoded is not None:
                    msg, buffer = decoded
                    return msg
                chunk = await reader.read(65536)
                if not chunk:
                    return None
                buffer += chunk

        try:
            await self._converse(client, read_message)
        except protocol.ProtocolError as exc:
            try:
                await send_json({"type": "analysis_error", "code": "protocol", "message": str(exc)})
            except (ConnectionError, OSError):
                pass
        except (ConnectionError, OSError):
            pass
        finally:
            self.clients.discard(client)
            writer.close()

    async def _handle_ws(self, connection) -> None:
        async def send_json(msg: dict) -> None:
            await connection.send(protocol.encode_payload(msg).decode("utf-8"))

        client = _Client(send_json)

        async def read_message() -> dict | None:
            try:
                raw = await connection.recv()
            except Exception:
                return None
            return protocol.decode_payload(raw)

        try:
            await self._converse(client, read_message)
        except protocol.ProtocolError as exc:
            try:
                await send_json({"type": "analysis_error", "code": "protocol", "message": str(exc)})
            except Exception:
                pass
        finally:
            self.clients.discard(client)

    # -- conversation --------------------------------------------------------

    async def _converse(self, client: _Client, read_message) -> None:
        first = await read_message()
        if first is None:
            return
        reply, accepted = protocol.handshake(
            first, self.session_id, str(self.config.entry_file), CAPABILITIES
        )
        await client.send(reply)
        if not accepted:
            return
        client.ready = True
        self.clients.add(client)

        while True:
            msg = await read_message()
            if msg is None:
                return
            await self._dispatch(client, msg)

    async def _dispatch(self, client: _Client, msg: dict) -> None:
        kind = msg["type"]
        if kind == "analyze":
            self.request_analysis(msg.get("trigger", "manual"))
        elif kind == "get_breakdown":
            if self.latest is None:
                await client.send(
                    {"type": "analysis_error", "code": "state", "message": "no analysis available yet"}
                )
                return
            try:
                await client.send(breakdown_message(self.latest.tree, msg["path"], msg["sort_key"]))
                await client.send(inline_markers_message(self.latest.tree, msg["path"]))
            except bd.BreakdownError as exc:
                await client.send({"type": "analysis_error", "code": "path", "message": str(exc)})
        elif kind == "set_batch_size":
            await self._set_batch_size(client, msg["batch_size"])
        elif kind == "hello":
            await client.send(
                {"type": "analysis_error", "code": "protocol", "message": "session already established"}
            )
        else:
            await client.send(
                {"type": "analysis_error", "code": "protocol", "message": f"unexpected message {kind!r}"}
            )

    # -- analysis ------------------------------------------------------------

    def request_analysis(self, trigger: str = "manual") -> None:
        """Coalescing entry point: at most one running, at most one pending."""
        if self._analysis_task is not None and not self._analysis_task.done():
            self._pending_trigger = trigger  # latest wins
            return
        self._analysis_task = asyncio.get_running_loop().create_task(self._run_analysis_once())

    async def _run_analysis_once(self) -> None:
        await self.broadcast({"type": "analysis_begin"})
        try:
            if self.analysis_hold_s:
                await asyncio.sleep(self.analysis_hold_s)
            result = await asyncio.to_thread(run_analysis, self.config, self._backend)
        except (BackendError, bd.BreakdownError, TraceFormatError) as exc:
            await self.broadcast({"type": "analysis_error", "code": "backend", "message": str(exc)})
        else:
            self.latest = result
            await self.broadcast(key_metrics_message(result, self.config.capacity_override))
            await self.broadcast(breakdown_message(result.tree))
            await self.broadcast(inline_markers_message(result.tree))
        finally:
            if self._pending_trigger is not None:
                self._pending_trigger = None
                self._analysis_task = asyncio.get_running_loop().create_task(self._run_analysis_once())

    async def broadcast(self, msg: dict) -> None:
        for client in list(self.clients):
            if not client.ready:
                continue
            try:
                await client.send(msg)
            except Exception:
                self.clients.discard(client)

    # -- mutation ------------------------------------------------------------

    async def _set_batch_size(self, client: _Client, new_batch: int) -> None:
        try:
            span = await asyncio.to_thread(self._mutate_entry_file, new_batch)
        except mutate.MutationError as exc:
            await client.send({"type": "analysis_error", "code": "mutation", "message": str(exc)})
            return
        await self.broadcast({"type": "source_mutated", "new_batch_size": new_batch, "line": span.line_number})

    def _mutate_entry_file(self, new_batch: int) -> mutate.LiteralSpan:
        target = mutate.MutationTarget(
            str(self.config.entry_file), self.config.provider_name, self.config.kwarg_name
        )
        with self._file_lock:
            path = self.config.entry_path
            source = path.read_text(encoding="utf-8")
            span = mutate.locate_batch_kwarg(source, target)
            try:
                updated = mutate.apply_batch_size(source, span, new_batch)
            except mutate.StaleSpan:
                span = mutate.locate_batch_kwarg(source, target)  # relocate, retry once
                updated = mutate.apply_batch_size(source, span, new_batch)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as handle:
                    handle.write(updated)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            return mutate.locate_batch_kwarg(updated, target)
