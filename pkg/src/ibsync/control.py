"""Control channel: a WebSocket server speaking newline-free JSON text frames.

Outbound: {"type": "hello"|"update"|"ack", ...} snapshots of engine state.
Inbound commands: {"cmd": "set_condition"|"mark_trial"|"set_modality"|
"set_synth_coupling", ...}. Every command is answered with an ack carrying
ok/error plus the post-command session state; UIs should only flip state on
the ack.

The server implements the minimal RFC 6455 subset needed here: handshake,
masked client text frames, unmasked server text frames, ping/pong, close.
No extensions, no fragmentation.
"""
from __future__ import annotations

import base64
import hashlib
import json
import logging
import socket
import struct
import threading

log = logging.getLogger(__name__)

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def encode_text_frame(payload: str, masked: bool = False, mask_key: bytes = b"\x00\x00\x00\x00") -> bytes:
    data = payload.encode("utf-8")
    head = bytes([0x80 | OP_TEXT])
    mask_bit = 0x80 if masked else 0x00
    n = len(data)
    if n < 126:
        head += bytes([mask_bit | n])
    elif n < 1 << 16:
        head += bytes([mask_bit | 126]) + struct.pack(">H", n)
    else:
        head += bytes([mask_bit | 127]) + struct.pack(">Q", n)
    if masked:
        data = bytes(b ^ mask_key[i % 4] for i, b in enumerate(data))
        return head + mask_key + data
    return head + data


def _read_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("socket closed")
        buf += chunk
    return buf


def read_frame(sock: socket.socket) -> tuple[int, bytes]:
    """(opcode, payload); raises ConnectionError when the peer goes away."""
    header = _read_exact(sock, 2)
    opcode = header[0] & 0x0F
    masked = bool(header[1] & 0x80)
    length = header[1] & 0x7F
    if length == 126:
        (length,) = struct.unpack(">H", _read_exact(sock, 2))
    elif length == 127:
        (length,) = struct.unpack(">Q", _read_exact(sock, 8))
    mask_key = _read_exact(sock, 4) if masked else None
    payload = _read_exact(sock, length) if length else b""
    if mask_key:
        payload = bytes(b ^ mask_key[i % 4] for i, b in enumerate(payload))
    return opcode, payload


class ControlChannelServer:
    """Broadcasts engine updates and routes inbound commands to the engine."""

    def __init__(self, engine, port: int = 0, host: str = "127.0.0.1"):
        self.engine = engine
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(8)
        self._clients: list[socket.socket] = []
        self._clients_lock = threading.Lock()
        self._stopping = threading.Event()
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="ibsync-control-accept", daemon=True
        )
        self.last_update_json: str | None = None
        engine.update_listeners.append(self._on_update)

    @property
    def port(self) -> int:
        return self._listener.getsockname()[1]

    def start(self) -> "ControlChannelServer":
        self._accept_thread.start()
        return self

    def stop(self) -> None:
        self._stopping.set()
        try:
            self._listener.close()
        except OSError:
            pass
        with self._clients_lock:
            for client in self._clients:
                try:
                    client.close()
                except OSError:
                    pass
            self._clients.clear()

    # -- outbound ------------------------------------------------------------

    def _on_update(self, update) -> None:
        from .engine import update_as_dict

        self.last_update_json = json.dumps(update_as_dict(update))
        self._broadcast(self.last_update_json)

    def _broadcast(self, text: str) -> None:
        frame = encode_text_frame(text)
        with self._clients_lock:
            stale = []
            for client in self._clients:
                try:
                    client.sendall(frame)
                except OSError:
                    stale.append(client)
            for client in stale:
                self._clients.remove(client)

    # -- inbound -------------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(
                target=self._client_loop, args=(conn,), name="ibsync-control-client", daemon=True
            ).start()

    def _handshake(self, conn: socket.socket) -> bool:
        conn.settimeout(5.0)
        data = b""
        while b"\r\n\r\n" not in data:
            chunk = conn.recv(4096)
            if not chunk:
                return False
            data += chunk
        headers = {}
        for line in data.split(b"\r\n")[1:]:
            if b":" in line:
                key, value = line.split(b":", 1)
                headers[key.strip().lower().decode()] = value.strip().decode()
        key = headers.get("sec-websocket-key")
        if not key or "websocket" not in headers.get("upgrade", "").lower():
            conn.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
            return False
        response = (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept_key(key)}\r\n\r\n"
        )
        conn.sendall(response.encode())
        conn.settimeout(None)
        return True

    def _client_loop(self, conn: socket.socket) -> None:
        try:
            if not self._handshake(conn):
                conn.close()
                return
            hello = json.dumps({"type": "hello", "state": self.engine.session_state()})
            conn.sendall(encode_text_frame(hello))
            if self.last_update_json is not None:
                conn.sendall(encode_text_frame(self.last_update_json))
            with self._clients_lock:
                self._clients.append(conn)
            while not self._stopping.is_set():
                opcode, payload = read_frame(conn)
                if opcode == OP_CLOSE:
                    break
                if opcode == OP_PING:
                    conn.sendall(bytes([0x80 | OP_PONG, len(payload)]) + payload)
                    continue
                if opcode != OP_TEXT:
                    continue
                reply = self._handle_command(payload.decode("utf-8"))
                conn.sendall(encode_text_frame(reply))
        except (ConnectionError, OSError):
            pass
        finally:
            with self._clients_lock:
                if conn in self._clients:
                    self._clients.remove(conn)
            try:
                conn.close()
            except OSError:
                pass

    def _handle_command(self, text: str) -> str:
        try:
            message = json.loads(text)
            cmd = message.get("cmd")
        except json.JSONDecodeError:
            return json.dumps({"type": "ack", "ok": False, "error": "invalid JSON"})
        ok, error = False, f"unknown command {cmd!r}"
        if cmd == "set_condition":
            ok, error = self.engine.set_condition(message.get("condition", ""))
        elif cmd == "mark_trial":
            ok, error = self.engine.mark_trial(message.get("action", ""))
        elif cmd == "set_modality":
            ok, error = self.engine.set_modality(message.get("modality", ""))
        elif cmd == "set_synth_coupling":
            try:
                value = float(message.get("value"))
            except (TypeError, ValueError):
                value = -1.0
            ok, error = self.engine.set_synth_coupling(value)
        return json.dumps(
            {
                "type": "ack",
                "cmd": cmd,
                "ok": ok,
                "error": error,
                "state": self.engine.session_state(),
            }
        )
