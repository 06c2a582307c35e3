"""Length-prefixed framing over TCP, plus an in-process loopback.

Each connection carries exactly one query frame and one response frame.  A
frame is a u32 little-endian byte count followed by the message.
"""
from __future__ import annotations

import logging
import os
import socket
import socketserver
import struct
import threading

from .backbone import Backbone
from .pipeline import server_run
from .protocol import (
    MAX_PAYLOAD,
    LengthError,
    ProtocolError,
    QueryMessage,
    ResponseMessage,
    decode,
    decode_response,
    encode,
    encode_response,
)

log = logging.getLogger(__name__)

LISTEN_ENV = "DUETFACE_LISTEN"
DEFAULT_LISTEN = "127.0.0.1:7700"


def parse_address(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {addr!r}")
    return host or "0.0.0.0", int(port)


def listen_address(cli_value: str | None = None) -> tuple[str, int]:
    """Environment variable beats the command-line value, which beats the default."""
    return parse_address(os.environ.get(LISTEN_ENV) or cli_value or DEFAULT_LISTEN)


def send_frame(sock: socket.socket, payload: bytes) -> None:
    sock.sendall(struct.pack("<I", len(payload)) + payload)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(min(n, 1 << 20))
        if not chunk:
            raise LengthError("connection closed mid-frame")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> bytes:
    (n,) = struct.unpack("<I", _recv_exact(sock, 4))
    if n > MAX_PAYLOAD:
        raise LengthError(f"frame of {n} bytes exceeds the 1 GiB cap")
    return _recv_exact(sock, n)


def handle_query(data: bytes, model: Backbone, mode: int | None = None) -> bytes:
    """Server-side byte path shared by the socket handler and the loopback.

    With ``mode`` set, queries in the other transmission mode are refused.
    """
    msg = decode(data)
    if mode is not None and msg.mode != mode:
        raise ProtocolError(f"server accepts mode {mode}, query uses mode {msg.mode}")
    return encode_response(server_run(msg, model))


def loopback(msg: QueryMessage, model: Backbone, mode: int | None = None) -> ResponseMessage:
    return decode_response(handle_query(encode(msg), model, mode))


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        try:
            reply = handle_query(recv_frame(self.request), self.server.model, self.server.mode)
        except ProtocolError as exc:
            log.warning("rejected query from %s: %s: %s", self.client_address, type(exc).__name__, exc)
            return
        send_frame(self.request, reply)


class QueryServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], model: Backbone, mode: int | None = None):
        self.model = model
        self.mode = mode
        super().__init__(address, _Handler)

    @property
    def address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def start_background(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t


def query_server(msg: QueryMessage, address: str, timeout: float = 60.0) -> ResponseMessage:
    payload = encode(msg)
    with socket.create_connection(parse_address(address), timeout=timeout) as sock:
        send_frame(sock, payload)
        resp = decode_response(recv_frame(sock))
    if resp.query_id != msg.query_id:
        raise ProtocolError(f"response for query {resp.query_id}, expected {msg.query_id}")
    return resp
