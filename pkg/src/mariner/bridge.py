"""Tick-synchronized pub/sub bridge over a self-contained TCP protocol.

Wire format: every frame is a 4-byte little-endian length prefix followed
by a canonical UTF-8 JSON body (sorted keys, no whitespace), so equal
envelopes always encode to byte-identical frames. Frame types are
SUBSCRIBE, PUBLISH, COMMAND, and ERROR.

The simulation tick loop only ever appends encoded frames to bounded
per-client queues (depth 1024, drop-oldest); dedicated writer threads do
the network I/O, so a stalled client can never stall the simulation.
"""

from __future__ import annotations

import fnmatch
import json
import socket
import struct
import threading
from collections import deque
from dataclasses import dataclass, field

DEFAULT_PORT = 28510
QUEUE_DEPTH = 1024

# schema registry: versioned tag -> required payload fields
SCHEMAS = {
    "mariner.State.v1": ("eta", "nu", "fin_angles", "prop_speed"),
    "mariner.SonarEcho.v1": ("range", "intensity"),
    "mariner.MultibeamScan.v1": ("ranges", "intensities"),
    "mariner.SidescanLine.v1": ("bins",),
    "mariner.PointCloud.v1": ("points",),
    "mariner.Imu.v1": ("specific_force", "angular_rate"),
    "mariner.Dvl.v1": ("velocity",),
    "mariner.Depth.v1": ("depth",),
    "mariner.Command.v1": ("mode",),
}


class BridgeError(RuntimeError):
    pass


class ProtocolError(BridgeError):
    pass


@dataclass
class Envelope:
    topic: str
    schema: str
    tick: int
    stamp: float
    payload: dict


@dataclass
class CommandMsg:
    agent: str
    command: dict  # mariner.Command.v1 payload


def _canonical(body: dict) -> bytes:
    return json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _frame(body: dict) -> bytes:
    raw = _canonical(body)
    return struct.pack("<I", len(raw)) + raw


def encode(envelope: Envelope) -> bytes:
    """Envelope -> PUBLISH frame; byte-deterministic for equal envelopes."""
    if not envelope.topic:
        raise BridgeError("topic must be non-empty")
    required = SCHEMAS.get(envelope.schema)
    if required is None:
        raise BridgeError(f"unknown schema {envelope.schema!r}")
    missing = [f for f in required if f not in envelope.payload]
    if missing:
        raise BridgeError(
            f"payload for {envelope.schema} missing fields {missing}")
    return _frame({
        "type": "PUBLISH",
        "topic": envelope.topic,
        "schema": envelope.schema,
        "tick": envelope.tick,
        "stamp": envelope.stamp,
        "payload": envelope.payload,
    })


def subscribe_frame(glob: str) -> bytes:
    return _frame({"type": "SUBSCRIBE", "glob": glob})


def command_frame(agent: str, command: dict) -> bytes:
    return _frame({"type": "COMMAND", "agent": agent, "command": command})


def error_frame(message: str) -> bytes:
    return _frame({"type": "ERROR", "message": message})


def decode_body(raw: bytes):
    """Decode one complete frame body into a typed message."""
    try:
        body = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed frame body: {exc}") from exc
    if not isinstance(body, dict) or "type" not in body:
        raise ProtocolError("frame body must be an object with a 'type'")
    kind = body["type"]
    if kind == "PUBLISH":
        for key in ("topic", "schema", "tick", "stamp", "payload"):
            if key not in body:
                raise ProtocolError(f"PUBLISH frame missing {key!r}")
        if body["schema"] not in SCHEMAS:
            raise ProtocolError(f"unknown schema {body['schema']!r}")
        return Envelope(topic=body["topic"], schema=body["schema"],
                        tick=body["tick"], stamp=body["stamp"],
                        payload=body["payload"])
    if kind == "SUBSCRIBE":
        if "glob" not in body:
            raise ProtocolError("SUBSCRIBE frame missing 'glob'")
        return body
    if kind == "COMMAND":
        if "agent" not in body or "command" not in body:
            raise ProtocolError("COMMAND frame missing 'agent' or 'command'")
        return CommandMsg(agent=body["agent"], command=body["command"])
    if kind == "ERROR":
        return body
    raise ProtocolError(f"unknown frame type {kind!r}")


def decode(frame: bytes):
    """Inverse of encode for a complete length-prefixed frame."""
    if len(frame) < 4:
        raise ProtocolError("frame shorter than its length prefix")
    (length,) = struct.unpack("<I", frame[:4])
    if len(frame) - 4 < length:
        raise ProtocolError(
            f"truncated frame: prefix says {length} bytes, got {len(frame) - 4}")
    return decode_body(frame[4:4 + length])


def read_frame(sock: socket.socket):
    """Blocking read of one frame from a socket; None on clean EOF."""
    header = _read_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack("<I", header)
    raw = _read_exact(sock, length)
    if raw is None:
        raise ProtocolError("connection closed mid-frame")
    return decode_body(raw)


def _read_exact(sock, n):
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            if buf:
                raise ProtocolError("connection closed mid-frame")
            return None
        buf += chunk
    return buf


class _Client:
    def __init__(self, sock: socket.socket, addr):
        self.sock = sock
        self.addr = addr
        self.subscriptions: list = []
        self.queue: deque = deque(maxlen=QUEUE_DEPTH)
        self.cond = threading.Condition()
        self.alive = True

    def matches(self, topic: str) -> bool:
        return any(fnmatch.fnmatchcase(topic, g) for g in self.subscriptions)

    def offer(self, frame: bytes) -> None:
        with self.cond:
            self.queue.append(frame)  # deque maxlen drops the oldest
            self.cond.notify()

    def close(self) -> None:
        self.alive = False
        with self.cond:
            self.cond.notify()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


@dataclass
class BridgeDiagnostics:
    published: int = 0
    dropped_unknown_agent: int = 0
    clients_seen: int = 0


class BridgeServer:
    """Fan-out publisher and command sink for external clients."""

    def __init__(self, port: int = DEFAULT_PORT, agents=()):
        self.port = port
        self.agents = set(agents)
        self.diagnostics = BridgeDiagnostics()
        self._clients: list = []
        self._clients_lock = threading.Lock()
        self._commands: list = []
        self._commands_lock = threading.Lock()
        self._last_tick: dict = {}
        self._listener: socket.socket | None = None
        self._accept_thread = None
        self._running = False

    # -- lifecycle

    def start(self) -> None:
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind(("127.0.0.1", self.port))
        self.port = self._listener.getsockname()[1]
        self._listener.listen()
        self._running = True
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               daemon=True)
        self._accept_thread.start()

    def stop(self) -> None:
        self._running = False
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.close()

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()

    # -- publishing (called from the tick loop; never blocks on I/O)

    def publish(self, envelope: Envelope) -> None:
        last = self._last_tick.get(envelope.topic)
        if last is not None and envelope.tick < last:
            raise BridgeError(
                f"tick regression on topic {envelope.topic!r}: "
                f"{envelope.tick} after {last}")
        self._last_tick[envelope.topic] = envelope.tick
        frame = encode(envelope)
        self.diagnostics.published += 1
        with self._clients_lock:
            clients = list(self._clients)
        for client in clients:
            if client.alive and client.matches(envelope.topic):
                client.offer(frame)

    def poll_commands(self) -> list:
        """Commands since the last poll, last-writer-wins per agent."""
        with self._commands_lock:
            drained = self._commands
            self._commands = []
        latest: dict = {}
        for msg in drained:
            if msg.agent not in self.agents:
                self.diagnostics.dropped_unknown_agent += 1
                continue
            latest[msg.agent] = msg
        return list(latest.values())

    # -- internals

    def _accept_loop(self) -> None:
        while self._running:
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            client = _Client(sock, addr)
            self.diagnostics.clients_seen += 1
            with self._clients_lock:
                self._clients.append(client)
            threading.Thread(target=self._reader_loop, args=(client,),
                             daemon=True).start()
            threading.Thread(target=self._writer_loop, args=(client,),
                             daemon=True).start()

    def _drop_client(self, client: _Client) -> None:
        client.close()
        with self._clients_lock:
            if client in self._clients:
                self._clients.remove(client)

    def _reader_loop(self, client: _Client) -> None:
        try:
            while client.alive:
                msg = read_frame(client.sock)
                if msg is None:
                    break
                if isinstance(msg, dict) and msg.get("type") == "SUBSCRIBE":
                    client.subscriptions.append(msg["glob"])
                elif isinstance(msg, CommandMsg):
                    with self._commands_lock:
                        self._commands.append(msg)
                else:
                    raise ProtocolError(
                        "clients may only send SUBSCRIBE or COMMAND frames")
        except ProtocolError as exc:
            try:
                client.sock.sendall(error_frame(str(exc)))
            except OSError:
                pass
        except OSError:
            pass
        finally:
            self._drop_client(client)

    def _writer_loop(self, client: _Client) -> None:
        while client.alive:
            with client.cond:
                while client.alive and not client.queue:
                    client.cond.wait(timeout=0.5)
                if not client.alive:
                    return
                frame = client.queue.popleft() if client.queue else None
            if frame is None:
                continue
            try:
                client.sock.sendall(frame)
            except OSError:
                self._drop_client(client)
                return
