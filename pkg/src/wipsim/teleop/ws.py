"""Minimal WebSocket (RFC 6455) layer over asyncio streams.

Only what the teleop link needs: the HTTP upgrade handshake, text frames,
ping/pong and clean closes. Written in-tree because no WebSocket package
is available in the deployment environment; the browser side uses the
native WebSocket API.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import os
import struct

from ..errors import ProtocolError

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA

_MAX_PAYLOAD = 1 << 20  # frames are small JSON; anything bigger is abuse


def _accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def encode_frame(opcode: int, payload: bytes, mask: bool = False) -> bytes:
    head = bytearray([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0x00
    if n < 126:
        head.append(mask_bit | n)
    elif n < (1 << 16):
        head.append(mask_bit | 126)
        head += struct.pack(">H", n)
    else:
        head.append(mask_bit | 127)
        head += struct.pack(">Q", n)
    if mask:
        key = os.urandom(4)
        head += key
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return bytes(head) + payload


async def _read_exact(reader: asyncio.StreamReader, n: int) -> bytes:
    try:
        return await reader.readexactly(n)
    except asyncio.IncompleteReadError as exc:
        raise ConnectionResetError("websocket peer went away") from exc


async def read_frame(reader: asyncio.StreamReader) -> tuple[int, bool, bytes]:
    """One raw frame: (opcode, fin, payload), unmasked."""
    b0, b1 = await _read_exact(reader, 2)
    fin = bool(b0 & 0x80)
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    n = b1 & 0x7F
    if n == 126:
        (n,) = struct.unpack(">H", await _read_exact(reader, 2))
    elif n == 127:
        (n,) = struct.unpack(">Q", await _read_exact(reader, 8))
    if n > _MAX_PAYLOAD:
        raise ProtocolError(f"frame of {n} bytes exceeds the payload cap")
    key = await _read_exact(reader, 4) if masked else None
    payload = await _read_exact(reader, n)
    if key is not None:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return opcode, fin, payload


class WsConnection:
    """One established WebSocket endpoint (either side)."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter,
                 client_side: bool):
        self._reader = reader
        self._writer = writer
        self._mask = client_side  # clients mask, servers do not
        self.closed = False

    async def send_text(self, text: str):
        if self.closed:
            raise ConnectionResetError("websocket already closed")
        self._writer.write(encode_frame(OP_TEXT, text.encode(), mask=self._mask))
        await self._writer.drain()

    async def recv_text(self) -> str | None:
        """Next text message, or None once the connection is closed."""
        buffer = b""
        while True:
            if self.closed:
                return None
            try:
                opcode, fin, payload = await read_frame(self._reader)
            except (ConnectionResetError, OSError):
                self.closed = True
                return None
            if opcode == OP_PING:
                self._writer.write(encode_frame(OP_PONG, payload, mask=self._mask))
                await self._writer.drain()
                continue
            if opcode == OP_PONG:
                continue
            if opcode == OP_CLOSE:
                await self.close()
                return None
            if opcode in (OP_TEXT, OP_BINARY, OP_CONT):
                buffer += payload
                if not fin:
                    continue
                try:
                    return buffer.decode()
                except UnicodeDecodeError as exc:
                    raise ProtocolError("non-UTF-8 text frame") from exc
            raise ProtocolError(f"unsupported opcode {opcode}")

    async def close(self):
        if self.closed:
            return
        self.closed = True
        try:
            self._writer.write(encode_frame(OP_CLOSE, b"", mask=self._mask))
            await self._writer.drain()
        except (ConnectionResetError, OSError):
            pass
        self._writer.close()
        try:
            await self._writer.wait_closed()
        except (ConnectionResetError, OSError):
            pass


async def accept(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> WsConnection:
    """Server side of the upgrade handshake."""
    request = await reader.readuntil(b"\r\n\r\n")
    lines = request.decode("latin-1").split("\r\n")
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            name, _, value = line.partition(":")
            headers[name.strip().lower()] = value.strip()
    key = headers.get("sec-websocket-key")
    if (
        key is None
        or "websocket" not in headers.get("upgrade", "").lower()
        or "upgrade" not in headers.get("connection", "").lower()
    ):
        writer.write(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        await writer.drain()
        writer.close()
        raise ProtocolError("not a websocket upgrade request")
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {_accept_key(key)}\r\n"
        "\r\n"
    )
    writer.write(response.encode("latin-1"))
    await writer.drain()
    return WsConnection(reader, writer, client_side=False)


async def connect(host: str, port: int, path: str = "/") -> WsConnection:
    """Client side of the upgrade handshake (used by tests and tools)."""
    reader, writer = await asyncio.open_connection(host, port)
    key = base64.b64encode(os.urandom(16)).decode()
    request = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}:{port}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n"
        "\r\n"
    )
    writer.write(request.encode("latin-1"))
    await writer.drain()
    response = await reader.readuntil(b"\r\n\r\n")
    status = response.split(b"\r\n", 1)[0]
    if b"101" not in status:
        writer.close()
        raise ProtocolError(f"websocket upgrade refused: {status.decode('latin-1')}")
    for line in response.decode("latin-1").split("\r\n")[1:]:
        name, _, value = line.partition(":")
        if name.strip().lower() == "sec-websocket-accept":
            if value.strip() != _accept_key(key):
                writer.close()
                raise ProtocolError("bad Sec-WebSocket-Accept from server")
    return WsConnection(reader, writer, client_side=True)
