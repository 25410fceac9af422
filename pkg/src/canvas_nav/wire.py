"""Policy wire protocol: newline-delimited JSON over TCP, with the same
payload accepted over HTTP POST /act.

Request:  {"tick": n, "language": str, "front_view_png_b64": str,
           "canvas_png_b64": str, "codebook_k": int}
Response: {"tokens": [t0,t1,t2,t3]} or {"waypoints": [[x,y]*4]}
          or {"error": "message"}
"""

from __future__ import annotations

import json
import socket
import threading
import time
from typing import Callable, Optional
from urllib.parse import urlparse

from .errors import PolicyTimeout, ProtocolError
from .policies import PolicyRequest, PolicyResponse, parse_response_dict
from .tokenizer import WaypointCodebook

DEFAULT_TIMEOUT = 2.0
MAX_FRAME_BYTES = 16 * 1024 * 1024


class WireClient:
    """One connection per episode; calls are strictly sequential.

    Endpoints: "tcp://host:port" (persistent NDJSON stream) or an
    "http(s)://..." URL (POST per call).
    """

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT):
        self.endpoint = endpoint
        self.timeout = timeout
        parsed = urlparse(endpoint)
        if parsed.scheme not in ("tcp", "http", "https"):
            raise ProtocolError(f"unsupported endpoint scheme {parsed.scheme!r}")
        self._scheme = parsed.scheme
        self._host = parsed.hostname
        self._port = parsed.port
        self._sock: Optional[socket.socket] = None
        self._buf = b""

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None
                self._buf = b""

    def _connect(self) -> socket.socket:
        if self._sock is None:
            try:
                self._sock = socket.create_connection((self._host, self._port), timeout=self.timeout)
            except socket.timeout as e:
                raise PolicyTimeout(f"connect to {self.endpoint} timed out") from e
            except OSError as e:
                raise ProtocolError(f"cannot reach {self.endpoint}: {e}") from e
        return self._sock

    def _read_line(self, sock: socket.socket) -> bytes:
        while b"\n" not in self._buf:
            if len(self._buf) > MAX_FRAME_BYTES:
                raise ProtocolError("response frame too large")
            try:
                chunk = sock.recv(65536)
            except socket.timeout as e:
                raise PolicyTimeout(f"no response within {self.timeout} s") from e
            if not chunk:
                raise ProtocolError("connection closed mid-frame")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def act(self, request: PolicyRequest, codebook: Optional[WaypointCodebook] = None) -> PolicyResponse:
        payload = request.to_dict()
        start = time.monotonic()
        if self._scheme == "tcp":
            sock = self._connect()
            try:
                sock.sendall(json.dumps(payload).encode() + b"\n")
                line = self._read_line(sock)
            except (PolicyTimeout, ProtocolError):
                self.close()
                raise
            except OSError as e:
                self.close()
                raise ProtocolError(f"socket error: {e}") from e
            try:
                data = json.loads(line.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as e:
                raise ProtocolError(f"malformed response frame: {e}") from None
        else:
            import httpx
            try:
                resp = httpx.post(self.endpoint, json=payload, timeout=self.timeout)
            except httpx.TimeoutException as e:
                raise PolicyTimeout(f"no response within {self.timeout} s") from e
            except httpx.HTTPError as e:
                raise ProtocolError(f"http error: {e}") from e
            try:
                data = resp.json()
            except (json.JSONDecodeError, ValueError) as e:
                raise ProtocolError(f"malformed response body: {e}") from None
        response = parse_response_dict(data, codebook)
        response.latency_s = time.monotonic() - start
        return response


class ReferencePolicyServer:
    """Threaded NDJSON-over-TCP server for tests and local policy stubs.

    The handler maps a request dict to a response dict; returning a raw
    string sends it verbatim (useful for malformed-frame tests), returning
    None closes the connection without answering.
    """

    def __init__(self, handler: Callable[[dict], object], host: str = "127.0.0.1", port: int = 0):
        self.handler = handler
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._server.bind((host, port))
        self._server.listen(8)
        self.address = self._server.getsockname()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._serve, daemon=True)

    @property
    def endpoint(self) -> str:
        return f"tcp://{self.address[0]}:{self.address[1]}"

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self) -> None:
        self._stop.set()
        try:
            self._server.close()
        except OSError:
            pass

    def _serve(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._server.accept()
            except OSError:
                return
            threading.Thread(target=self._handle_conn, args=(conn,), daemon=True).start()

    def _handle_conn(self, conn: socket.socket) -> None:
        buf = b""
        with conn:
            while not self._stop.is_set():
                try:
                    chunk = conn.recv(65536)
                except OSError:
                    return
                if not chunk:
                    return
                buf += chunk
                while b"\n" in buf:
                    line, buf = buf.split(b"\n", 1)
                    try:
                        request = json.loads(line.decode("utf-8"))
                    except (UnicodeDecodeError, json.JSONDecodeError):
                        conn.sendall(json.dumps({"error": "bad request frame"}).encode() + b"\n")
                        continue
                    result = self.handler(request)
                    if result is None:
                        return
                    if isinstance(result, str):
                        conn.sendall(result.encode() + b"\n")
                    else:
                        conn.sendall(json.dumps(result).encode() + b"\n")


def echo_tokens_handler(tokens=(0, 0, 0, 0)):
    """Handler that replies with a fixed token action."""
    def handler(request: dict) -> dict:
        return {"tokens": list(tokens)}
    return handler
