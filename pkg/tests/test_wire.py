import json
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from canvas_nav.errors import PolicyTimeout, ProtocolError, TokenOutOfRange
from canvas_nav.policies import PolicyRequest
from canvas_nav.wire import ReferencePolicyServer, WireClient, echo_tokens_handler

from test_tokenizer import lattice_codebook


def make_request(tick=0):
    return PolicyRequest(tick=tick, language="head to the door",
                         front_view_png_b64="aGk=", canvas_png_b64="aGk=", codebook_k=128)


def test_echo_tokens_decodes_to_centroid_zero():
    cb = lattice_codebook()
    with ReferencePolicyServer(echo_tokens_handler((0, 0, 0, 0))) as server:
        client = WireClient(server.endpoint, timeout=2.0)
        resp = client.act(make_request(), codebook=cb)
        client.close()
    ego = resp.resolve(cb)
    assert np.allclose(ego, np.repeat(cb.centroids[:1], 4, axis=0))
    assert resp.latency_s is not None and resp.latency_s >= 0


def test_waypoints_variant():
    def handler(request):
        return {"waypoints": [[0.5, 0.0], [1.0, 0.0], [1.5, 0.0], [2.0, 0.0]]}

    with ReferencePolicyServer(handler) as server:
        client = WireClient(server.endpoint)
        resp = client.act(make_request())
        client.close()
    assert np.allclose(resp.resolve(None), [(0.5, 0), (1, 0), (1.5, 0), (2, 0)])


def test_three_tokens_is_protocol_error():
    with ReferencePolicyServer(lambda req: {"tokens": [0, 0, 0]}) as server:
        client = WireClient(server.endpoint)
        with pytest.raises(ProtocolError):
            client.act(make_request(), codebook=lattice_codebook())
        client.close()


def test_malformed_frame_is_protocol_error():
    with ReferencePolicyServer(lambda req: "this is not json{{{") as server:
        client = WireClient(server.endpoint)
        with pytest.raises(ProtocolError):
            client.act(make_request())
        client.close()


def test_error_payload_is_protocol_error():
    with ReferencePolicyServer(lambda req: {"error": "model exploded"}) as server:
        client = WireClient(server.endpoint)
        with pytest.raises(ProtocolError) as exc:
            client.act(make_request())
        client.close()
    assert "model exploded" in str(exc.value)


def test_token_out_of_range_distinct_error():
    cb = lattice_codebook()
    with ReferencePolicyServer(lambda req: {"tokens": [0, 0, 0, cb.K]}) as server:
        client = WireClient(server.endpoint)
        with pytest.raises(TokenOutOfRange):
            client.act(make_request(), codebook=cb)
        client.close()


def test_timeout_path():
    def slow_handler(request):
        time.sleep(1.0)
        return {"tokens": [0, 0, 0, 0]}

    with ReferencePolicyServer(slow_handler) as server:
        client = WireClient(server.endpoint, timeout=0.2)
        t0 = time.monotonic()
        with pytest.raises(PolicyTimeout):
            client.act(make_request())
        assert time.monotonic() - t0 < 0.9
        client.close()


def test_persistent_connection_sequential_calls():
    calls = []

    def handler(request):
        calls.append(request["tick"])
        return {"tokens": [0, 0, 0, 0]}

    cb = lattice_codebook()
    with ReferencePolicyServer(handler) as server:
        client = WireClient(server.endpoint)
        for tick in range(5):
            client.act(make_request(tick), codebook=cb)
        client.close()
    assert calls == [0, 1, 2, 3, 4]


def test_request_payload_shape_on_the_wire():
    seen = {}

    def handler(request):
        seen.update(request)
        return {"tokens": [0, 0, 0, 0]}

    with ReferencePolicyServer(handler) as server:
        client = WireClient(server.endpoint)
        client.act(make_request(tick=7), codebook=lattice_codebook())
        client.close()
    assert set(seen) == {"tick", "language", "front_view_png_b64", "canvas_png_b64", "codebook_k"}
    assert seen["tick"] == 7 and seen["codebook_k"] == 128


class _ActHTTPHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers["Content-Length"])
        json.loads(self.rfile.read(length))
        body = json.dumps({"waypoints": [[0.5, 0], [1, 0], [1.5, 0], [2, 0]]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


def test_http_post_act_transport():
    httpd = HTTPServer(("127.0.0.1", 0), _ActHTTPHandler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    try:
        endpoint = f"http://127.0.0.1:{httpd.server_address[1]}/act"
        client = WireClient(endpoint, timeout=2.0)
        resp = client.act(make_request())
        assert resp.waypoints.shape == (4, 2)
    finally:
        httpd.shutdown()


def test_unsupported_scheme_rejected():
    with pytest.raises(ProtocolError):
        WireClient("ftp://example.com:21")
