"""Wire protocol for the mariner bridge, standard library only.

Every frame is a 4-byte little-endian length prefix followed by a
canonical UTF-8 JSON body (sorted keys, no whitespace). Frame types are
SUBSCRIBE, PUBLISH, COMMAND, and ERROR. This module is an independent
implementation of that grammar: it must accept every frame the bridge
emits and emit frames the bridge accepts, without importing the
simulator.
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass

# schema registry copy: versioned tag -> required payload fields
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


class ClientError(RuntimeError):
    pass


class ProtocolError(ClientError):
    pass


@dataclass
class Envelope:
    topic: str
    schema: str
    tick: int
    stamp: float
    payload: dict


@dataclass
class ErrorMsg:
    message: str


def canonical(body: dict) -> bytes:
    return json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")


def frame(body: dict) -> bytes:
    raw = canonical(body)
    return struct.pack("<I", len(raw)) + raw


def subscribe_frame(glob: str) -> bytes:
    return frame({"type": "SUBSCRIBE", "glob": glob})


def command_frame(agent: str, command: dict) -> bytes:
    if "mode" not in command:
        raise ClientError("command payload must carry a 'mode' field")
    return frame({"type": "COMMAND", "agent": agent, "command": command})


def publish_frame(envelope: Envelope) -> bytes:
    """Envelope -> PUBLISH frame; byte-identical to the bridge encoding."""
    required = SCHEMAS.get(envelope.schema)
    if required is None:
        raise ClientError(f"unknown schema {envelope.schema!r}")
    missing = [f for f in required if f not in envelope.payload]
    if missing:
        raise ClientError(
            f"payload for {envelope.schema} missing fields {missing}")
    return frame({
        "type": "PUBLISH",
        "topic": envelope.topic,
        "schema": envelope.schema,
        "tick": envelope.tick,
        "stamp": envelope.stamp,
        "payload": envelope.payload,
    })


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
    if kind == "ERROR":
        if "message" not in body:
            raise ProtocolError("ERROR frame missing 'message'")
        return ErrorMsg(message=body["message"])
    if kind in ("SUBSCRIBE", "COMMAND"):
        # client-to-server frames; accepted for corpus replay symmetry
        return body
    raise ProtocolError(f"unknown frame type {kind!r}")


def decode(data: bytes):
    """Inverse of the frame encoders for one complete length-prefixed frame."""
    if len(data) < 4:
        raise ProtocolError("frame shorter than its length prefix")
    (length,) = struct.unpack("<I", data[:4])
    if len(data) - 4 < length:
        raise ProtocolError(
            f"truncated frame: prefix says {length} bytes, got {len(data) - 4}")
    return decode_body(data[4:4 + length])


def iter_frames(data: bytes):
    """Yield every complete frame (prefix included) in a byte stream."""
    offset = 0
    while offset < len(data):
        if len(data) - offset < 4:
            raise ProtocolError("trailing bytes shorter than a length prefix")
        (length,) = struct.unpack("<I", data[offset:offset + 4])
        end = offset + 4 + length
        if end > len(data):
            raise ProtocolError("truncated final frame")
        yield data[offset:end]
        offset = end


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
