"""WebSocket control API: JSON state out, JSON commands in.

The server lives on its own thread with its own asyncio loop; the 100 Hz
session loop never awaits anything. The two sides meet at exactly two
places, both bounded: a command queue (client -> loop) and per-client
send buffers (loop -> client). When a slow client falls behind, its
oldest state snapshots are dropped and counted — the control loop is
never the one that waits.

Roles: every connection starts as a viewer. The first client to send
``{"type": "claim"}`` becomes the controller; mutating commands from
anyone else are rejected at the server without touching the session.
The controller slot frees on release or disconnect.
"""

from __future__ import annotations

import asyncio
import json
import queue
import threading
from dataclasses import dataclass, field

from websockets.asyncio.server import serve

# Commands forwarded to the session loop; everything else is either
# connection management (claim/release) or an error.
SESSION_COMMANDS = frozenset(
    ("set_input", "set_block", "record_start", "record_stop", "set_params", "stop")
)


class ApiError(Exception):
    """Server failed to start (bad port, bind failure, …)."""


@dataclass
class _Client:
    id: int
    ws: object
    outbox: asyncio.Queue = field(default_factory=lambda: asyncio.Queue(maxsize=64))
    dropped: int = 0

    def push(self, text: str) -> int:
        """Queue one outgoing message, dropping the oldest if full.
        Returns how many messages were dropped to make room."""
        dropped = 0
        while True:
            try:
                self.outbox.put_nowait(text)
                return dropped
            except asyncio.QueueFull:
                try:
                    self.outbox.get_nowait()
                    dropped += 1
                except asyncio.QueueEmpty:  # pragma: no cover - tiny race window
                    return dropped


class ApiServer:
    """Session-facing surface (called from the loop thread):
    ``poll_commands``, ``send_reply``, ``broadcast_state``, ``close``.
    Everything websocket happens on the server thread."""

    COMMAND_QUEUE_SIZE = 256

    def __init__(self, port: int, hello: dict, host: str = "127.0.0.1") -> None:
        self._host = host
        self._requested_port = port
        self._hello = hello
        self.port: int | None = None
        self._commands: queue.Queue = queue.Queue(maxsize=self.COMMAND_QUEUE_SIZE)
        self._clients: dict[int, _Client] = {}  # server-thread only
        self._controller: int | None = None
        self._next_id = 1
        self._dropped_total = 0
        self._dropped_seen = 0
        self._loop: asyncio.AbstractEventLoop | None = None
        self._stop: asyncio.Future | None = None
        self._startup_error: BaseException | None = None
        self._ready = threading.Event()
        self._thread = threading.Thread(target=self._run, name="dexmouse-api", daemon=True)
        self._thread.start()
        self._ready.wait(timeout=10.0)
        if self._startup_error is not None:
            raise ApiError(f"API server failed to start: {self._startup_error}")
        if self.port is None:
            raise ApiError("API server did not come up within 10 s")

    # -- session side ---------------------------------------------------------

    def poll_commands(self) -> list[tuple[int, dict]]:
        commands = []
        while True:
            try:
                commands.append(self._commands.get_nowait())
            except queue.Empty:
                return commands

    def send_reply(self, client_id: int, reply: dict) -> None:
        self._call(self._deliver, client_id, json.dumps(reply))

    def broadcast_state(self, state: dict) -> int:
        self._call(self._fanout, json.dumps(state))
        newly = self._dropped_total - self._dropped_seen
        self._dropped_seen = self._dropped_total
        return newly

    def close(self) -> None:
        if self._loop is not None and not self._loop.is_closed():
            self._loop.call_soon_threadsafe(self._shutdown)
        self._thread.join(timeout=10.0)

    def _call(self, fn, *args) -> None:
        if self._loop is not None and not self._loop.is_closed():
            self._loop.call_soon_threadsafe(fn, *args)

    # -- server thread ----------------------------------------------------------

    def _run(self) -> None:
        try:
            asyncio.run(self._main())
        except BaseException as exc:  # surface bind errors to the constructor
            self._startup_error = exc
            self._ready.set()

    async def _main(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._stop = self._loop.create_future()
        async with serve(self._handler, self._host, self._requested_port) as server:
            self.port = server.sockets[0].getsockname()[1]
            self._ready.set()
            await self._stop

    def _shutdown(self) -> None:
        if self._stop is not None and not self._stop.done():
            self._stop.set_result(None)

    def _deliver(self, client_id: int, text: str) -> None:
        client = self._clients.get(client_id)
        if client is not None:
            self._dropped_total += client.push(text)

    def _fanout(self, text: str) -> None:
        for client in self._clients.values():
            self._dropped_total += client.push(text)

    async def _sender(self, client: _Client) -> None:
        while True:
            await client.ws.send(await client.outbox.get())

    async def _handler(self, ws) -> None:
        client = _Client(id=self._next_id, ws=ws)
        self._next_id += 1
        self._clients[client.id] = client
        sender = asyncio.create_task(self._sender(client))
        try:
            await ws.send(json.dumps({"type": "welcome", "role": "viewer", **self._hello}))
            async for raw in ws:
                reply = self._route(client, raw)
                if reply is not None:
                    client.push(json.dumps(reply))
        finally:
            sender.cancel()
            del self._clients[client.id]
            if self._controller == client.id:
                self._controller = None

    def _route(self, client: _Client, raw) -> dict | None:
        """Classify one inbound message; returns an immediate reply, or
        None when the session loop will answer instead."""
        try:
            command = json.loads(raw)
        except (json.JSONDecodeError, TypeError):
            return {"type": "error", "message": "malformed JSON"}
        if not isinstance(command, dict) or not isinstance(command.get("type"), str):
            return {"type": "error", "message": "command must be an object with a string 'type'"}
        kind = command["type"]
        if kind == "claim":
            if self._controller in (None, client.id):
                self._controller = client.id
                return {"type": "claim_result", "role": "controller"}
            return {"type": "error", "message": "controller busy"}
        if kind == "release":
            if self._controller == client.id:
                self._controller = None
            return {"type": "claim_result", "role": "viewer"}
        if kind in SESSION_COMMANDS:
            if self._controller != client.id:
                return {"type": "error", "message": "viewer is read-only (claim control first)"}
            try:
                self._commands.put_nowait((client.id, command))
                return None
            except queue.Full:
                return {"type": "error", "message": "command queue full"}
        return {"type": "error", "message": f"unknown command type {kind!r}"}
