"""GCS-facing network front: raw TCP frame stream and HTTP/WebSocket.

Both endpoints carry the same binary protocol frames. Exactly one client
holds control authority (first come, first served, released on disconnect);
frames from monitors are answered with a STATUSTEXT rejection. The sim loop
never touches sockets: inbound frames arrive through a queue drained at
loop boundaries, outbound frames fan out through per-client bounded queues
so a stalled client cannot block the simulation.
"""

import base64
import hashlib
import queue
import socket
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .messages import COMP_GCS, SEV_INFO, SEV_WARNING, SYSTEM_ID
from .wire import FrameDecoder, FrameEncoder, encode_text

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
SEND_QUEUE_DEPTH = 256


def ws_encode(payload: bytes, opcode: int = 0x2) -> bytes:
    head = bytearray([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head.append(n)
    elif n < 65536:
        head.append(126)
        head += n.to_bytes(2, "big")
    else:
        head.append(127)
        head += n.to_bytes(8, "big")
    return bytes(head) + payload


def ws_read_frame(sock):
    """(opcode, payload) of the next client frame; None on EOF/close."""
    head = _read_exact(sock, 2)
    if head is None:
        return None
    opcode = head[0] & 0x0F
    masked = head[1] & 0x80
    length = head[1] & 0x7F
    if length == 126:
        ext = _read_exact(sock, 2)
        if ext is None:
            return None
        length = int.from_bytes(ext, "big")
    elif length == 127:
        ext = _read_exact(sock, 8)
        if ext is None:
            return None
        length = int.from_bytes(ext, "big")
    mask = b"\x00" * 4
    if masked:
        mask = _read_exact(sock, 4)
        if mask is None:
            return None
    payload = _read_exact(sock, length) if length else b""
    if payload is None:
        return None
    if masked:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return opcode, payload


def _read_exact(sock, n):
    buf = b""
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except OSError:
            return None
        if not chunk:
            return None
        buf += chunk
    return buf


class _Client:
    """One connected GCS, TCP or WebSocket."""

    _ids = iter(range(1, 1 << 30))

    def __init__(self, server, sock, kind: str):
        self.server = server
        self.sock = sock
        self.kind = kind
        self.client_id = next(self._ids)
        self.alive = True
        self.decoder = FrameDecoder(server.registry)
        self.sendq = queue.Queue(maxsize=SEND_QUEUE_DEPTH)
        self.dropped = 0
        self._writer = threading.Thread(target=self._write_loop, daemon=True)
        self._writer.start()

    def offer(self, raw: bytes) -> None:
        try:
            self.sendq.put_nowait(raw)
        except queue.Full:
            try:  # latest wins; a stalled client only hurts itself
                self.sendq.get_nowait()
                self.dropped += 1
                self.sendq.put_nowait(raw)
            except (queue.Empty, queue.Full):
                pass

    def _write_loop(self):
        while self.alive:
            try:
                raw = self.sendq.get(timeout=0.25)
            except queue.Empty:
                continue
            data = ws_encode(raw) if self.kind == "ws" else raw
            try:
                self.sock.sendall(data)
            except OSError:
                self.close()

    def close(self):
        if not self.alive:
            return
        self.alive = False
        try:
            self.sock.close()
        except OSError:
            pass
        self.server._client_gone(self)


class GcsServer:
    """Serves one live SimSession over TCP and HTTP/WebSocket."""

    def __init__(self, session, host: str = "127.0.0.1", http_port: int = 0,
                 tcp_port: int = 0, ui_dir=None):
        self.session = session
        self.registry = session.registry
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.inbound = queue.Queue()
        session.inbound = self.inbound
        session.broadcast = self.broadcast
        session.authority_age_s = self.authority_age_s

        self._encoder = FrameEncoder(self.registry, SYSTEM_ID, COMP_GCS)
        self._enc_lock = threading.Lock()
        self._clients = []
        self._clients_lock = threading.Lock()
        self._authority = None
        self._authority_last_rx = None

        self._tcp = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._tcp.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._tcp.bind((host, tcp_port))
        self._tcp.listen(8)
        self.tcp_addr = self._tcp.getsockname()

        server_ref = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):
                pass

            def do_GET(self):
                if self.path == "/ws":
                    server_ref._upgrade_websocket(self)
                    return
                server_ref._serve_http(self)

        self._http = ThreadingHTTPServer((host, http_port), Handler)
        self.http_addr = self._http.server_address
        self._threads = []
        self._stop = threading.Event()

    # -- lifecycle -----------------------------------------------------------

    def start(self):
        self._threads = [
            threading.Thread(target=self._accept_tcp, daemon=True),
            threading.Thread(target=self._http.serve_forever, daemon=True),
        ]
        for t in self._threads:
            t.start()

    def stop(self):
        self._stop.set()
        try:
            self._tcp.close()
        except OSError:
            pass
        self._http.shutdown()
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.close()

    # -- plumbing shared with the session -------------------------------------

    def broadcast(self, raw: bytes) -> None:
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.offer(raw)

    def authority_age_s(self) -> float:
        last = self._authority_last_rx
        if self._authority is None or last is None:
            return float("inf")
        return time.monotonic() - last

    def _client_gone(self, client) -> None:
        with self._clients_lock:
            if client in self._clients:
                self._clients.remove(client)
        if self._authority is client:
            self._authority = None
            self._authority_last_rx = None

    def _statustext(self, client, severity, text) -> None:
        with self._enc_lock:
            raw = self._encoder.encode("STATUSTEXT", {
                "severity": severity, "text": encode_text(text, 50)})
        client.offer(raw)

    # -- TCP ----------------------------------------------------------------

    def _accept_tcp(self):
        while not self._stop.is_set():
            try:
                sock, _addr = self._tcp.accept()
            except OSError:
                return
            client = _Client(self, sock, "tcp")
            self._register(client)
            threading.Thread(target=self._tcp_read_loop, args=(client,),
                             daemon=True).start()

    def _register(self, client):
        with self._clients_lock:
            self._clients.append(client)

    def _tcp_read_loop(self, client):
        while client.alive:
            try:
                data = client.sock.recv(4096)
            except OSError:
                break
            if not data:
                break
            self._ingest(client, data)
        client.close()

    # -- WebSocket / HTTP ------------------------------------------------------

    def _upgrade_websocket(self, handler) -> None:
        key = handler.headers.get("Sec-WebSocket-Key")
        if handler.headers.get("Upgrade", "").lower() != "websocket" or not key:
            handler.send_error(400, "this endpoint speaks WebSocket")
            return
        accept = base64.b64encode(
            hashlib.sha1((key + WS_GUID).encode()).digest()).decode()
        handler.send_response_only(101, "Switching Protocols")
        handler.send_header("Upgrade", "websocket")
        handler.send_header("Connection", "Upgrade")
        handler.send_header("Sec-WebSocket-Accept", accept)
        handler.end_headers()
        handler.wfile.flush()

        sock = handler.connection
        client = _Client(self, sock, "ws")
        self._register(client)
        while client.alive:
            frame = ws_read_frame(sock)
            if frame is None:
                break
            opcode, payload = frame
            if opcode == 0x8:  # close
                break
            if opcode == 0x9:  # ping -> pong
                try:
                    sock.sendall(ws_encode(payload, opcode=0xA))
                except OSError:
                    break
                continue
            if opcode in (0x1, 0x2):
                self._ingest(client, payload)
        client.close()
        handler.close_connection = True

    def _serve_http(self, handler) -> None:
        path = handler.path.split("?", 1)[0]
        if path == "/dialect.xml":
            from importlib import resources
            body = resources.files("hexsim.data").joinpath(
                "core_dialect.xml").read_bytes()
            self._http_ok(handler, body, "application/xml")
            return
        if self.ui_dir is not None:
            rel = "index.html" if path in ("/", "") else path.lstrip("/")
            target = (self.ui_dir / rel).resolve()
            if target.is_file() and self.ui_dir.resolve() in target.parents:
                ctype = {
                    ".html": "text/html", ".js": "text/javascript",
                    ".css": "text/css", ".map": "application/json",
                }.get(target.suffix, "application/octet-stream")
                self._http_ok(handler, target.read_bytes(), ctype)
                return
        handler.send_error(404)

    @staticmethod
    def _http_ok(handler, body: bytes, ctype: str) -> None:
        handler.send_response(200)
        handler.send_header("Content-Type", ctype)
        handler.send_header("Content-Length", str(len(body)))
        handler.end_headers()
        handler.wfile.write(body)

    # -- inbound frames ---------------------------------------------------------

    COMMAND_IDS = frozenset((11, 39, 65, 76))  # SET_MODE, MISSION_ITEM, RC, COMMAND

    def _ingest(self, client, data: bytes) -> None:
        for frame in client.decoder.feed(data):
            if self._authority is None and frame.msg_id in self.COMMAND_IDS \
                    or self._authority is client:
                if self._authority is None:
                    self._authority = client
                    self._statustext(client, SEV_INFO, "control authority granted")
                self._authority_last_rx = time.monotonic()
                self.inbound.put(frame)
            elif frame.msg_id in self.COMMAND_IDS:
                self._statustext(client, SEV_WARNING,
                                 "monitor only: authority held")
            # heartbeats from monitors need no action
