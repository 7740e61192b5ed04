"""Request-reply channels carrying the wire format of messages.py.

The active party drives the protocol, so a channel is a client: request()
sends one frame and blocks for the matching reply.  InProcChannel hands the
encoded bytes straight to a passive-party handler in the same process,
which keeps tests single threaded and deterministic while still exercising
the real encoding.  TcpChannel speaks the identical frames over a socket;
PassiveServer hosts a handler behind one.
"""

from __future__ import annotations

import socket
import threading
from typing import Callable

from vfxgb.federation.ledger import PartyCounters, timed
from vfxgb.federation.messages import Message, decode_frame, encode_frame

Handler = Callable[[bytes], bytes]


class ProtocolError(RuntimeError):
    """Peer misbehaviour: unexpected replies, desyncs, reported errors."""


class BaseChannel:
    def __init__(self, counters: PartyCounters | None = None, record_trace: bool = False) -> None:
        self.counters = counters if counters is not None else PartyCounters()
        self.record_trace = record_trace
        self.trace: list[tuple[str, Message]] = []
        self._seq = 0

    def request(self, msg_type: str, body: dict) -> Message:
        msg = Message(type=msg_type, body=body, seq=self._seq)
        self._seq += 1
        with timed(self.counters, "transfer"):
            frame = encode_frame(msg)
        self.counters.wire_bytes_sent += len(frame)
        if self.record_trace:
            self.trace.append(("sent", msg))
        reply_frame = self._roundtrip(frame)
        with timed(self.counters, "transfer"):
            reply = decode_frame(reply_frame)
        if self.record_trace:
            self.trace.append(("received", reply))
        if reply.type == "error":
            raise ProtocolError(f"peer reported: {reply.body.get('message', 'unknown error')}")
        if reply.reply_to != msg.seq:
            raise ProtocolError(
                f"desync: sent seq {msg.seq}, reply references {reply.reply_to!r}"
            )
        return reply

    def _roundtrip(self, frame: bytes) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass


class InProcChannel(BaseChannel):
    """Synchronous in-process link to a passive-party frame handler."""

    def __init__(self, handler: Handler, counters: PartyCounters | None = None,
                 record_trace: bool = False) -> None:
        super().__init__(counters=counters, record_trace=record_trace)
        self._handler = handler

    def _roundtrip(self, frame: bytes) -> bytes:
        return self._handler(frame)


class TcpChannel(BaseChannel):
    def __init__(self, host: str, port: int, counters: PartyCounters | None = None,
                 record_trace: bool = False, connect_timeout: float = 10.0) -> None:
        super().__init__(counters=counters, record_trace=record_trace)
        self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        self._sock.settimeout(None)
        self._file = self._sock.makefile("rb")

    def _roundtrip(self, frame: bytes) -> bytes:
        self._sock.sendall(frame)
        head = self._file.read(4)
        if len(head) < 4:
            raise ProtocolError("peer closed the connection mid-exchange")
        n = int.from_bytes(head, "big")
        data = self._file.read(n)
        if len(data) < n:
            raise ProtocolError("peer closed the connection mid-frame")
        return head + data

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self._sock.close()


class PassiveServer:
    """Single-connection TCP host for a passive-party frame handler."""

    def __init__(self, handler: Handler, host: str = "127.0.0.1", port: int = 0) -> None:
        self._handler = handler
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(1)
        self.address = self._listener.getsockname()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._serve, name="vfxgb-passive", daemon=True)
        self._thread.start()

    def _serve(self) -> None:
        try:
            conn, _ = self._listener.accept()
        except OSError:
            return
        with conn:
            reader = conn.makefile("rb")
            while True:
                head = reader.read(4)
                if len(head) < 4:
                    return
                n = int.from_bytes(head, "big")
                data = reader.read(n)
                if len(data) < n:
                    return
                conn.sendall(self._handler(head + data))

    def close(self) -> None:
        try:
            self._listener.close()
        finally:
            if self._thread is not None:
                self._thread.join(timeout=5.0)
