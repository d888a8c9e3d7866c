"""Session orchestration: transcript replay, persistence, network service.

The replayer paces a recorded transcript against the wall clock (scaled by
a speed multiplier) and pushes everything through one Engine. The server
wraps the same engine in an asyncio loop, serving the wire protocol over
WebSocket and, for headless tests, newline-delimited JSON over TCP.
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from classdeck.config import SessionConfig, load_config
from classdeck.engine import Engine, Envelope
from classdeck.errors import (
    BadTranscript,
    EngineError,
    ProtocolViolation,
    StorageFailure,
)
from classdeck import protocol

REQUIRED_FIELDS = ("t_ms", "group", "q", "text")


def read_transcript(path: str | Path) -> list[dict]:
    """Parse a JSON Lines transcript; report the first malformed line."""
    path = Path(path)
    if not path.exists():
        raise BadTranscript(f"transcript not found: {path}", line=0)
    rows = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            row = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise BadTranscript(f"line {lineno}: {exc}", line=lineno) from exc
        if not isinstance(row, dict) or any(k not in row for k in REQUIRED_FIELDS):
            raise BadTranscript(f"line {lineno}: missing fields", line=lineno)
        rows.append(row)
    rows.sort(key=lambda r: int(r["t_ms"]))
    return rows


@dataclass(frozen=True)
class ScriptEntry:
    at_ms: int
    kind: str  # "command" | "edit" | "history" | "resolve_suggestion" | "advance" | "viewport"
    payload: dict


def read_script(path: str | Path) -> list[ScriptEntry]:
    entries = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        try:
            data = json.loads(raw)
            entries.append(ScriptEntry(at_ms=int(data["at_ms"]), kind=data["kind"],
                                        payload=data.get("payload", {})))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise BadTranscript(f"script line {lineno}: {exc}", line=lineno) from exc
    entries.sort(key=lambda e: e.at_ms)
    return entries


@dataclass
class Replayer:
    """Delivers a transcript to an engine at t_ms / speed wall pacing.

    speed <= 0 means "no pacing": events are folded as fast as possible
    with the session clock still advancing through every timestamp. The
    queue is the transcript itself, so nothing can be dropped; when the
    engine falls behind, delivery (and with it the session clock) simply
    lags the wall clock rather than skipping events.
    """

    engine: Engine
    rows: list[dict]
    speed: float = 1.0
    script: list[ScriptEntry] = field(default_factory=list)
    probes: dict[int, Callable[[Engine], None]] = field(default_factory=dict)
    paused: bool = False
    delivered: int = 0

    def timeline(self) -> list[tuple[int, str, dict]]:
        events = [(int(r["t_ms"]), "utterance", r) for r in self.rows]
        events += [(e.at_ms, e.kind, e.payload) for e in self.script]
        events += [(t, "probe", {}) for t in self.probes]
        events.sort(key=lambda e: (e[0], 0 if e[1] == "utterance" else 1))
        return events

    def run(self, on_envelopes: Optional[Callable[[list[Envelope]], None]] = None) -> None:
        start_wall = time.monotonic()
        for t_ms, kind, payload in self.timeline():
            if self.speed > 0:
                target_wall = start_wall + (t_ms / 1000.0) / self.speed
                delay = target_wall - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            out = self._deliver(t_ms, kind, payload)
            if on_envelopes and out:
                on_envelopes(out)
        final = self.engine.advance(self.engine.config.duration_ms)
        if on_envelopes and final:
            on_envelopes(final)

    def _deliver(self, t_ms: int, kind: str, payload: dict) -> list[Envelope]:
        if kind == "utterance":
            self.delivered += 1
            return self.engine.ingest(payload)
        if kind == "probe":
            out = self.engine.advance(t_ms)
            probe = self.probes.get(t_ms)
            if probe:
                probe(self.engine)
            return out
        if kind == "advance":
            return self.engine.advance(payload.get("t_ms", t_ms))
        if kind == "command":
            self.engine.advance(t_ms, _log=False)
            return self.engine.handle_command(payload)
        if kind == "edit":
            self.engine.advance(t_ms, _log=False)
            return self.engine.edit(payload)
        if kind == "history":
            return self.engine.history(payload["direction"])
        if kind == "resolve_suggestion":
            return self.engine.resolve_suggestion(
                payload["suggestion_id"], payload["action"], payload.get("edited_text", "")
            )
        if kind == "viewport":
            self.engine.viewport(payload["visible"])
            return []
        raise ProtocolViolation(f"unknown script entry kind {kind!r}")


def run_replay(
    config: SessionConfig,
    speed: float = 1.0,
    script: Optional[list[ScriptEntry]] = None,
    probes: Optional[dict[int, Callable[[Engine], None]]] = None,
) -> Replayer:
    """Build engine + replayer for a config; caller invokes .run()."""
    if speed is None:
        speed = 1.0
    rows = read_transcript(config.transcript_path)
    engine = Engine(config)
    return Replayer(engine=engine, rows=rows, speed=speed, script=script or [],
                    probes=probes or {})


# --- persistence ----------------------------------------------------------------


def persist_session(engine: Engine, path: str | Path) -> None:
    """Append-only input log with a final state snapshot."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with path.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({"header": {
                "session_id": engine.config.session_id,
                "protocol": protocol.PROTOCOL_VERSION,
            }}, sort_keys=True) + "\n")
            for entry in engine.input_log:
                fh.write(json.dumps({"input": entry}, sort_keys=True) + "\n")
            fh.write(json.dumps({"snapshot": {
                "digest": engine.state_digest(),
                "inputs": len(engine.input_log),
            }}, sort_keys=True) + "\n")
    except OSError as exc:
        raise StorageFailure(f"cannot persist session: {exc}") from exc


def restore_session(config: SessionConfig, path: str | Path) -> Engine:
    """Fold the persisted input log through a fresh engine; verify digest."""
    path = Path(path)
    if not path.exists():
        raise StorageFailure(f"no session file: {path}")
    engine = Engine(config)
    snapshot = None
    last_valid = 0
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise StorageFailure(
                f"log truncated or corrupt at line {lineno}", last_valid_seq=last_valid
            ) from exc
        if "header" in record:
            if record["header"]["session_id"] != config.session_id:
                raise StorageFailure("session id mismatch")
            continue
        if "input" in record:
            engine.apply_input(record["input"])
            last_valid = record["input"]["n"]
            continue
        if "snapshot" in record:
            snapshot = record["snapshot"]
    if snapshot is not None:
        digest = engine.state_digest()
        if digest != snapshot["digest"]:
            raise StorageFailure(
                "restored state does not match snapshot digest", last_valid_seq=last_valid
            )
    return engine


# --- network service ---------------------------------------------------------------


class SessionServer:
    """One engine behind an asyncio loop, many protocol clients."""

    def __init__(self, config: SessionConfig, replay_speed: float = 1.0):
        self.config = config
        self.engine = Engine(config)
        self.replay_speed = replay_speed
        self._clients: set[asyncio.Queue] = set()
        self._inbox: asyncio.Queue = asyncio.Queue()
        self._replay_task: Optional[asyncio.Task] = None
        self._closed = False

    # --- engine loop ------------------------------------------------------

    async def engine_loop(self) -> None:
        while not self._closed:
            message, reply = await self._inbox.get()
            try:
                envelopes = self._dispatch(message)
            except EngineError as exc:
                # Errors go back to the requester only; state envelopes broadcast.
                error = {
                    "kind": "Error",
                    "payload": {
                        "req_id": message.get("payload", {}).get("req_id", ""),
                        "code": exc.code,
                        "message": str(exc),
                    },
                    "seq": 0,
                    "t_ms": self.engine.now_ms,
                }
                if reply is not None:
                    await reply.put([error])
                continue
            self._broadcast([e.as_dict() for e in envelopes])
            if reply is not None:
                await reply.put([])

    def _dispatch(self, message: dict) -> list[Envelope]:
        kind = message["kind"]
        if kind == "Command":
            return self.engine.handle_command(message.get("payload", {}))
        if kind == "Edit":
            return self.engine.edit(message.get("payload", {}))
        if kind == "History":
            return self.engine.history(message["payload"]["direction"])
        if kind == "ResolveSuggestion":
            p = message["payload"]
            return self.engine.resolve_suggestion(
                p["suggestion_id"], p["action"], p.get("edited_text", "")
            )
        if kind == "ToggleBinding":
            return self.engine.toggle_binding(message["payload"]["binding_id"])
        if kind == "Viewport":
            self.engine.viewport(message["payload"]["visible"])
            return []
        if kind == "Utterance":
            return self.engine.ingest(message["payload"])
        if kind == "Playback":
            return self._playback(message["payload"].get("action", ""))
        raise ProtocolViolation(f"server cannot handle {kind!r}")

    def _playback(self, action: str) -> list[Envelope]:
        if self._replayer is None:
            raise ProtocolViolation("no replay attached")
        if action == "pause":
            self._replayer.paused = True
        elif action == "resume":
            self._replayer.paused = False
        else:
            raise ProtocolViolation(f"unknown playback action {action!r}")
        return []

    def _broadcast(self, out: list[dict]) -> None:
        if not out:
            return
        for queue in list(self._clients):
            for env in out:
                queue.put_nowait(env)

    # --- replay feed ---------------------------------------------------------

    _replayer: Optional[Replayer] = None

    async def replay_transcript(self) -> None:
        rows = read_transcript(self.config.transcript_path)
        self._replayer = Replayer(engine=self.engine, rows=rows, speed=self.replay_speed)
        start_wall = time.monotonic()
        for t_ms, kind, payload in self._replayer.timeline():
            while self._replayer.paused:
                await asyncio.sleep(0.05)
            if self.replay_speed > 0:
                target = start_wall + (t_ms / 1000.0) / self.replay_speed
                delay = target - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
            envelopes = self._replayer._deliver(t_ms, kind, payload)
            self._broadcast([e.as_dict() for e in envelopes])
        self._broadcast([e.as_dict() for e in self.engine.advance(self.config.duration_ms)])

    # --- client handling ---------------------------------------------------------

    async def _handle_client(self, send, receive) -> None:
        queue: asyncio.Queue = asyncio.Queue()

        async def pump_out():
            while True:
                env = await queue.get()
                await send(protocol.encode(env))

        pump = asyncio.create_task(pump_out())
        try:
            async for raw in receive:
                try:
                    message = protocol.decode(raw)
                except ProtocolViolation as exc:
                    await send(protocol.encode({
                        "kind": "Error", "seq": 0, "t_ms": self.engine.now_ms,
                        "payload": {"code": exc.code, "message": str(exc)},
                    }))
                    continue
                if message["kind"] in ("Hello", "Resync"):
                    # Subscribe and enqueue the snapshot in one task step so
                    # no broadcast can interleave between snapshot state and
                    # the envelopes that follow it.
                    self._clients.add(queue)
                    queue.put_nowait({
                        "kind": "SnapshotSync",
                        "seq": 0,
                        "t_ms": self.engine.now_ms,
                        "payload": self.engine.snapshot_payload(),
                    })
                    continue
                reply: asyncio.Queue = asyncio.Queue()
                await self._inbox.put((message, reply))
                for env in await reply.get():  # errors only; state broadcasts
                    await send(protocol.encode(env))
        finally:
            pump.cancel()
            self._clients.discard(queue)

    async def serve_websocket(self, host: str, port: int):
        import websockets

        async def handler(ws):
            async def send(text: str):
                await ws.send(text)

            async def receive():
                async for raw in ws:
                    yield raw

            await self._handle_client(send, receive())

        return await websockets.serve(handler, host, port)

    async def serve_tcp(self, host: str, port: int):
        async def handler(reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
            async def send(text: str):
                writer.write(text.encode("utf-8") + b"\n")
                await writer.drain()

            async def receive():
                while True:
                    line = await reader.readline()
                    if not line:
                        return
                    yield line.decode("utf-8")

            try:
                await self._handle_client(send, receive())
            finally:
                writer.close()

        return await asyncio.start_server(handler, host, port)

    async def run(self, host: str, port: int, tcp_port: Optional[int] = None,
                  with_replay: bool = True) -> None:
        ws_server = await self.serve_websocket(host, port)
        tcp_server = await self.serve_tcp(host, tcp_port) if tcp_port else None
        loop_task = asyncio.create_task(self.engine_loop())
        if with_replay and self.config.transcript_path:
            self._replay_task = asyncio.create_task(self.replay_transcript())
        try:
            if self._replay_task is not None:
                await self._replay_task
            await loop_task
        finally:
            self._closed = True
            ws_server.close()
            if tcp_server:
                tcp_server.close()


def serve(config_path: str, addr: str, speed: float = 1.0, tcp_port: Optional[int] = None) -> None:
    config = load_config(config_path)
    host, _, port = addr.partition(":")
    server = SessionServer(config, replay_speed=speed)
    asyncio.run(server.run(host or "127.0.0.1", int(port or 8765), tcp_port=tcp_port))
