"""Blocking client session for the mariner bridge.

Single-threaded, timeout-driven reads; suitable for scripting a mission
against a live simulation run.
"""

from __future__ import annotations

import socket
import time

from . import wire
from .wire import ClientError, Envelope, ErrorMsg, ProtocolError


class ClientSession:
    """One TCP connection to a bridge: subscribe, receive, command."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.subscriptions: list = []

    # -- lifecycle

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- outbound

    def subscribe(self, glob: str) -> None:
        self.sock.sendall(wire.subscribe_frame(glob))
        self.subscriptions.append(glob)

    def send_command(self, agent: str, command: dict) -> None:
        self.sock.sendall(wire.command_frame(agent, command))

    # -- inbound

    def recv(self, timeout: float | None = None):
        """Next envelope, or None on clean end of stream.

        Raises socket.timeout if nothing arrives in time and ProtocolError
        if the bridge reports a protocol violation (ERROR frame).
        """
        self.sock.settimeout(timeout)
        msg = wire.read_frame(self.sock)
        if msg is None:
            return None
        if isinstance(msg, ErrorMsg):
            raise ProtocolError(f"bridge reported: {msg.message}")
        if not isinstance(msg, Envelope):
            raise ProtocolError("bridge sent a non-PUBLISH frame")
        return msg

    def envelopes(self, timeout: float | None = None):
        """Iterate envelopes until the stream ends."""
        while True:
            msg = self.recv(timeout)
            if msg is None:
                return
            yield msg


def connect(host: str, port: int, timeout: float = 5.0,
            retry_interval: float = 0.05) -> ClientSession:
    """Connect to a bridge, retrying until `timeout` so a client started
    alongside the simulator wins the startup race."""
    deadline = time.monotonic() + timeout
    last_exc: OSError | None = None
    while True:
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            return ClientSession(sock)
        except OSError as exc:
            last_exc = exc
            if time.monotonic() >= deadline:
                raise ConnectionError(
                    f"could not reach bridge at {host}:{port}: {exc}") \
                    from last_exc
            time.sleep(retry_interval)
