import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from stba.errors import BudgetExhaustedError, FormatError, TransportError
from stba.oracle import (
    CountingOracle,
    HttpOracle,
    MlpOracle,
    decode_wire_image,
    encode_wire_image,
    load_model_spec,
    model_spec_to_dict,
)


def spec_doc(layers, input_shape=(1, 1, 2), num_classes=2):
    return {
        "input_shape": list(input_shape),
        "num_classes": num_classes,
        "layers": layers,
    }


def identity_layer(dim, activation="identity"):
    return {
        "weights": np.eye(dim).tolist(),
        "bias": [0.0] * dim,
        "activation": activation,
    }


class TestLoadModelSpec:
    def test_minimal_valid(self):
        spec = load_model_spec(json.dumps(spec_doc([identity_layer(2)])))
        assert len(spec.layers) == 1
        assert spec.num_classes == 2

    def test_dimension_mismatch_names_layer(self):
        layers = [
            {"weights": np.ones((8, 2)).tolist(), "bias": [0.0] * 8, "activation": "relu"},
            {"weights": np.ones((2, 9)).tolist(), "bias": [0.0] * 2, "activation": "identity"},
        ]
        with pytest.raises(FormatError, match=r"layers\[1\]"):
            load_model_spec(spec_doc(layers))

    def test_softmax_nonfinal_rejected(self):
        layers = [identity_layer(2, "softmax"), identity_layer(2)]
        with pytest.raises(FormatError, match="softmax"):
            load_model_spec(spec_doc(layers))

    def test_invalid_json(self):
        with pytest.raises(FormatError):
            load_model_spec(b"{nope")

    def test_round_trip(self):
        spec = load_model_spec(spec_doc([identity_layer(2, "softmax")]))
        again = load_model_spec(model_spec_to_dict(spec))
        assert np.array_equal(again.layers[0].weights, spec.layers[0].weights)


class TestMlpOracle:
    def test_identity_network(self):
        oracle = MlpOracle(load_model_spec(spec_doc([identity_layer(2)])))
        img = np.array([[[0.2, 0.8]]])
        assert np.allclose(oracle.predict(img), [0.2, 0.8])

    def test_softmax_bias_only(self):
        layers = [
            {
                "weights": np.zeros((2, 2)).tolist(),
                "bias": [0.3, 0.7],
                "activation": "softmax",
            }
        ]
        oracle = MlpOracle(load_model_spec(spec_doc(layers)))
        scores = oracle.predict(np.zeros((1, 1, 2)))
        expected = np.exp([0.3, 0.7]) / np.exp([0.3, 0.7]).sum()
        assert np.allclose(scores, expected)

    def test_purity(self):
        rng = np.random.default_rng(0)
        layers = [
            {
                "weights": rng.normal(size=(2, 2)).tolist(),
                "bias": [0.1, -0.1],
                "activation": "softmax",
            }
        ]
        oracle = MlpOracle(load_model_spec(spec_doc(layers)))
        img = rng.random((1, 1, 2))
        a = oracle.predict(img)
        b = oracle.predict(img)
        assert np.array_equal(a, b)

    def test_matches_reference_forward(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            dims = [int(d) for d in rng.integers(2, 64, size=rng.integers(1, 4))]
            shape = (1, 1, int(rng.integers(2, 32)))
            chain = [shape[2]] + dims
            layers = []
            for i in range(len(dims)):
                layers.append(
                    {
                        "weights": rng.normal(size=(chain[i + 1], chain[i])).tolist(),
                        "bias": rng.normal(size=chain[i + 1]).tolist(),
                        "activation": "relu" if i < len(dims) - 1 else "identity",
                    }
                )
            doc = spec_doc(layers, input_shape=shape, num_classes=dims[-1])
            if dims[-1] < 2:
                continue
            oracle = MlpOracle(load_model_spec(doc))
            img = rng.random(shape)
            # independent straightforward reference
            x = img.ravel().copy()
            for layer in layers:
                w = np.asarray(layer["weights"])
                x = w.dot(x) + np.asarray(layer["bias"])
                if layer["activation"] == "relu":
                    x[x < 0] = 0
            assert np.allclose(oracle.predict(img), x, atol=1e-6)

    def test_shape_mismatch(self):
        oracle = MlpOracle(load_model_spec(spec_doc([identity_layer(2)])))
        with pytest.raises(ValueError):
            oracle.predict(np.zeros((1, 2, 2)))


class TestCountingOracle:
    def _oracle(self, limit):
        inner = MlpOracle(load_model_spec(spec_doc([identity_layer(2)])))
        return CountingOracle(inner, limit=limit)

    def test_counting_exact(self):
        oracle = self._oracle(10)
        img = np.zeros((1, 1, 2))
        for i in range(7):
            oracle.predict(img)
        assert oracle.used == 7

    def test_budget_error_leaves_counter(self):
        oracle = self._oracle(2)
        img = np.zeros((1, 1, 2))
        oracle.predict(img)
        oracle.predict(img)
        with pytest.raises(BudgetExhaustedError):
            oracle.predict(img)
        assert oracle.used == 2


class TestWireFormat:
    def test_round_trip_bit_exact(self):
        rng = np.random.default_rng(2)
        img32 = rng.random((3, 4, 4)).astype(np.float32)
        body = encode_wire_image(img32)
        back = decode_wire_image(body)
        assert np.array_equal(back.astype(np.float32), img32)

    def test_bad_length(self):
        with pytest.raises(FormatError):
            decode_wire_image({"shape": [1, 2, 2], "data": [0.0] * 3})


class _StubHandler(BaseHTTPRequestHandler):
    meta = {"num_classes": 2, "input_shape": [1, 2, 2]}
    scores = [0.9, 0.1]

    def do_GET(self):
        body = json.dumps(self.meta).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        self.rfile.read(int(self.headers["Content-Length"]))
        body = json.dumps({"scores": self.scores}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestHttpOracle:
    def test_fixed_scores(self, stub_server):
        oracle = HttpOracle(stub_server)
        assert oracle.num_classes == 2
        scores = oracle.predict(np.zeros((1, 2, 2)))
        assert np.allclose(scores, [0.9, 0.1])

    def test_score_length_mismatch(self, stub_server):
        oracle = HttpOracle(stub_server)
        _StubHandler.scores = [0.5, 0.3, 0.2]
        try:
            with pytest.raises(TransportError):
                oracle.predict(np.zeros((1, 2, 2)))
        finally:
            _StubHandler.scores = [0.9, 0.1]

    def test_unreachable(self):
        with pytest.raises(TransportError):
            HttpOracle("http://127.0.0.1:9", timeout=0.5)
