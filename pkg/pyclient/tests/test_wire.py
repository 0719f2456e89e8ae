"""Wire protocol tests: golden corpus replay, frame layout, and
rejection of malformed frames."""

import json
import os
import struct

import pytest

from mariner_client import wire
from mariner_client.wire import Envelope, ErrorMsg, ProtocolError

CORPUS = os.path.join(os.path.dirname(__file__), "data", "golden_frames.bin")


def read_corpus():
    with open(CORPUS, "rb") as fh:
        return fh.read()


def test_golden_corpus_decodes_completely():
    """Every frame the simulator's bridge encoder produced must decode."""
    frames = list(wire.iter_frames(read_corpus()))
    assert len(frames) == 510
    decoded = [wire.decode(f) for f in frames]
    assert all(d is not None for d in decoded)
    kinds = {type(d).__name__ if not isinstance(d, dict) else d["type"]
             for d in decoded}
    assert kinds == {"Envelope", "ErrorMsg", "SUBSCRIBE", "COMMAND"}


def test_golden_corpus_publish_round_trip_identity():
    """Re-encoding a decoded PUBLISH frame reproduces the original bytes."""
    for frame in wire.iter_frames(read_corpus()):
        msg = wire.decode(frame)
        if isinstance(msg, Envelope):
            assert wire.publish_frame(msg) == frame


def test_frame_layout_is_canonical_json():
    frame = wire.subscribe_frame("auv0/*")
    (length,) = struct.unpack("<I", frame[:4])
    body = frame[4:]
    assert len(body) == length
    assert body == b'{"glob":"auv0/*","type":"SUBSCRIBE"}'


def test_command_frame_layout():
    frame = wire.command_frame("auv0", {"mode": "setpoint", "depth": 10.0})
    body = json.loads(frame[4:].decode("utf-8"))
    assert body == {"type": "COMMAND", "agent": "auv0",
                    "command": {"mode": "setpoint", "depth": 10.0}}


def test_command_frame_requires_mode():
    with pytest.raises(wire.ClientError, match="mode"):
        wire.command_frame("auv0", {"depth": 10.0})


def test_publish_frame_rejects_unknown_schema_and_missing_fields():
    env = Envelope(topic="t", schema="mariner.Nope.v1", tick=1, stamp=0.1,
                   payload={})
    with pytest.raises(wire.ClientError, match="unknown schema"):
        wire.publish_frame(env)
    env = Envelope(topic="t", schema="mariner.Depth.v1", tick=1, stamp=0.1,
                   payload={})
    with pytest.raises(wire.ClientError, match="missing fields"):
        wire.publish_frame(env)


def test_decode_error_frame():
    msg = wire.decode(wire.frame({"type": "ERROR", "message": "boom"}))
    assert msg == ErrorMsg(message="boom")


@pytest.mark.parametrize("data,pattern", [
    (b"\x01\x02", "shorter than"),
    (struct.pack("<I", 10) + b"{}", "truncated"),
    (struct.pack("<I", 3) + b"{no", "malformed"),
    (wire.frame({"no_type": 1}), "'type'"),
    (wire.frame({"type": "WIBBLE"}), "unknown frame type"),
    (wire.frame({"type": "PUBLISH", "topic": "t"}), "missing"),
    (wire.frame({"type": "PUBLISH", "topic": "t", "schema": "mariner.X.v9",
                 "tick": 1, "stamp": 0.0, "payload": {}}), "unknown schema"),
    (wire.frame({"type": "ERROR"}), "message"),
])
def test_decode_rejections(data, pattern):
    with pytest.raises(ProtocolError, match=pattern):
        wire.decode(data)


def test_iter_frames_rejects_trailing_garbage():
    data = wire.subscribe_frame("*") + b"\x01\x02"
    with pytest.raises(ProtocolError, match="trailing"):
        list(wire.iter_frames(data))
    data = wire.subscribe_frame("*") + struct.pack("<I", 50) + b"{}"
    with pytest.raises(ProtocolError, match="truncated final"):
        list(wire.iter_frames(data))
