"""Standard-library client for the mariner pub/sub bridge."""

from .client import ClientSession, connect
from .wire import (SCHEMAS, ClientError, Envelope, ErrorMsg, ProtocolError,
                   command_frame, decode, iter_frames, publish_frame,
                   subscribe_frame)

__all__ = [
    "SCHEMAS", "ClientError", "ClientSession", "Envelope", "ErrorMsg",
    "ProtocolError", "command_frame", "connect", "decode", "iter_frames",
    "publish_frame", "subscribe_frame",
]
