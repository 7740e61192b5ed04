"""Wire encoding: length-delimited JSON frames plus field codecs.

Every message is one frame: a 4-byte big-endian payload length followed by
UTF-8 JSON of the form {"v": 1, "seq": ..., "type": ..., "body": {...}}
with an optional "reply_to" naming the request a reply answers.  Big
integers travel as lowercase hex strings, instance sets as base64-encoded
little-endian bit arrays.  Both transports (in-process and TCP) move these
same bytes, so byte accounting does not depend on the transport.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

WIRE_VERSION = 1

_LEN_BYTES = 4


class WireError(ValueError):
    """Frame or field that does not follow the wire format."""


@dataclass
class Message:
    type: str
    body: dict
    seq: int
    reply_to: int | None = None


def encode_frame(msg: Message) -> bytes:
    payload: dict = {"v": WIRE_VERSION, "seq": msg.seq, "type": msg.type, "body": msg.body}
    if msg.reply_to is not None:
        payload["reply_to"] = msg.reply_to
    data = json.dumps(payload, separators=(",", ":")).encode("utf-8")
    return len(data).to_bytes(_LEN_BYTES, "big") + data


def decode_payload(data: bytes) -> Message:
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WireError(f"undecodable frame: {exc}") from None
    if not isinstance(payload, dict) or payload.get("v") != WIRE_VERSION:
        raise WireError(f"unsupported wire version: {payload.get('v') if isinstance(payload, dict) else payload!r}")
    for key in ("seq", "type", "body"):
        if key not in payload:
            raise WireError(f"frame missing {key!r}")
    if not isinstance(payload["body"], dict):
        raise WireError("body must be an object")
    return Message(type=payload["type"], body=payload["body"], seq=payload["seq"],
                   reply_to=payload.get("reply_to"))


def decode_frame(frame: bytes) -> Message:
    if len(frame) < _LEN_BYTES:
        raise WireError("truncated frame header")
    n = int.from_bytes(frame[:_LEN_BYTES], "big")
    if len(frame) != _LEN_BYTES + n:
        raise WireError(f"frame length mismatch: header says {n}, got {len(frame) - _LEN_BYTES}")
    return decode_payload(frame[_LEN_BYTES:])


def read_frame(read: Callable[[int], bytes]) -> Message | None:
    """Read one frame via ``read(k)``; returns None on clean end of stream."""
    head = read(_LEN_BYTES)
    if not head:
        return None
    if len(head) < _LEN_BYTES:
        raise WireError("stream ended inside a frame header")
    n = int.from_bytes(head, "big")
    data = read(n)
    if len(data) < n:
        raise WireError("stream ended inside a frame body")
    return decode_payload(data)


def bitmap_to_b64(mask: np.ndarray) -> str:
    """Pack a boolean vector, bit i of byte j being row 8*j + i."""
    packed = np.packbits(np.asarray(mask, dtype=bool), bitorder="little")
    return base64.b64encode(packed.tobytes()).decode("ascii")


def b64_to_bitmap(text: str, n_rows: int) -> np.ndarray:
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except Exception as exc:
        raise WireError(f"bad bitmap: {exc}") from None
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    if bits.size < n_rows:
        raise WireError(f"bitmap too short: {bits.size} bits for {n_rows} rows")
    if bits[n_rows:].any():
        raise WireError("bitmap has bits set beyond the row count")
    return bits[:n_rows].astype(bool)
