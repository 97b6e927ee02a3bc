"""Black-box scorers: in-process MLP inference, HTTP client, query counting.

Scores may be probabilities or logits; the attack only uses differences and
argmax, so no normalization contract is imposed. A campaign must not mix
backends mid-run (softmax preserves ranking but not values).
"""

import json
from dataclasses import dataclass, field

import numpy as np
import requests

from .errors import BudgetExhaustedError, FormatError, TransportError

_ACTIVATIONS = ("relu", "identity", "softmax")


@dataclass(frozen=True)
class DenseLayer:
    weights: np.ndarray  # (out, in), row-major
    bias: np.ndarray  # (out,)
    activation: str


@dataclass(frozen=True)
class ModelSpec:
    input_shape: tuple[int, int, int]
    num_classes: int
    layers: tuple[DenseLayer, ...]


def load_model_spec(doc: bytes | str | dict) -> ModelSpec:
    """Parse and validate the weights-JSON schema."""
    if isinstance(doc, (bytes, str)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise FormatError(f"$: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("$: expected a JSON object")
    try:
        input_shape = tuple(int(d) for d in doc["input_shape"])
        num_classes = int(doc["num_classes"])
        raw_layers = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"$: missing or malformed field: {exc}") from exc
    if len(input_shape) != 3 or any(d < 1 for d in input_shape):
        raise FormatError(f"$.input_shape: expected [C,H,W] positive, got {input_shape}")
    if num_classes < 2:
        raise FormatError("$.num_classes: need at least 2 classes")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise FormatError("$.layers: expected a non-empty array")

    layers = []
    expect_in = input_shape[0] * input_shape[1] * input_shape[2]
    for i, raw in enumerate(raw_layers):
        path = f"$.layers[{i}]"
        try:
            weights = np.asarray(raw["weights"], dtype=np.float64)
            bias = np.asarray(raw["bias"], dtype=np.float64)
            activation = raw["activation"]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: missing or malformed field: {exc}") from exc
        if weights.ndim != 2:
            raise FormatError(f"{path}.weights: expected a 2-D matrix")
        if bias.ndim != 1 or bias.shape[0] != weights.shape[0]:
            raise FormatError(f"{path}.bias: length must match weight rows")
        if activation not in _ACTIVATIONS:
            raise FormatError(f"{path}.activation: unknown activation {activation!r}")
        if weights.shape[1] != expect_in:
            raise FormatError(
                f"{path}: layer {i + 1} in-dim {weights.shape[1]} "
                f"does not match expected {expect_in}"
            )
        if activation == "softmax" and i != len(raw_layers) - 1:
            raise FormatError(f"{path}: softmax only permitted on the final layer")
        layers.append(DenseLayer(weights=weights, bias=bias, activation=activation))
        expect_in = weights.shape[0]
    if expect_in != num_classes:
        raise FormatError(
            f"$.layers[{len(layers) - 1}]: final out-dim {expect_in} "
            f"!= num_classes {num_classes}"
        )
    return ModelSpec(
        input_shape=input_shape, num_classes=num_classes, layers=tuple(layers)
    )


def model_spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "input_shape": list(spec.input_shape),
        "num_classes": spec.num_classes,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in spec.layers
        ],
    }


class MlpOracle:
    """In-process feed-forward scorer over a validated ModelSpec."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.input_shape = spec.input_shape
        self.num_classes = spec.num_classes

    def predict(self, img: np.ndarray) -> np.ndarray:
        img = np.asarray(img, dtype=np.float64)
        if img.shape != self.input_shape:
            raise ValueError(
                f"image shape {img.shape} does not match oracle {self.input_shape}"
            )
        x = img.ravel()
        for layer in self.spec.layers:
            x = layer.weights @ x + layer.bias
            if layer.activation == "relu":
                x = np.maximum(x, 0.0)
            elif layer.activation == "softmax":
                x = _softmax(x)
        return x


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


@dataclass
class QueryCounter:
    limit: int
    used: int = 0

    @property
    def remaining(self) -> int:
        return self.limit - self.used


class CountingOracle:
    """Wraps a scorer, counting every successful query against a hard limit."""

    def __init__(self, inner, limit: int):
        self.inner = inner
        self.counter = QueryCounter(limit=limit)
        self.input_shape = inner.input_shape
        self.num_classes = inner.num_classes

    @property
    def used(self) -> int:
        return self.counter.used

    def predict(self, img: np.ndarray) -> np.ndarray:
        if self.counter.used >= self.counter.limit:
            raise BudgetExhaustedError(
                f"query budget {self.counter.limit} exhausted"
            )
        scores = self.inner.predict(img)
        self.counter.used += 1
        return scores


def encode_wire_image(img: np.ndarray) -> dict:
    """Body of POST /v1/scores: shape plus row-major float32 data."""
    img32 = np.asarray(img, dtype=np.float32)
    return {"shape": list(img32.shape), "data": [float(v) for v in img32.ravel()]}


def decode_wire_image(body: dict) -> np.ndarray:
    try:
        shape = tuple(int(d) for d in body["shape"])
        data = np.asarray(body["data"], dtype=np.float32)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"wire image: {exc}") from exc
    if len(shape) != 3 or data.size != shape[0] * shape[1] * shape[2]:
        raise FormatError(
            f"wire image: data length {data.size} does not match shape {shape}"
        )
    return data.reshape(shape).astype(np.float64)


class HttpOracle:
    """Scores images against a remote server speaking the /v1 wire protocol."""

    def __init__(self, endpoint: str, timeout: float = 10.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        try:
            resp = requests.get(f"{self.endpoint}/v1/meta", timeout=self.timeout)
            resp.raise_for_status()
            meta = resp.json()
            self.num_classes = int(meta["num_classes"])
            self.input_shape = tuple(int(d) for d in meta["input_shape"])
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            raise TransportError(f"GET /v1/meta failed: {exc}") from exc

    def predict(self, img: np.ndarray) -> np.ndarray:
        img = np.asarray(img, dtype=np.float64)
        if img.shape != self.input_shape:
            raise ValueError(
                f"image shape {img.shape} does not match oracle {self.input_shape}"
            )
        try:
            resp = requests.post(
                f"{self.endpoint}/v1/scores",
                json=encode_wire_image(img),
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(f"POST /v1/scores failed: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(
                f"POST /v1/scores returned {resp.status_code}: {resp.text[:200]}"
            )
        try:
            scores = np.asarray(resp.json()["scores"], dtype=np.float64)
        except (ValueError, KeyError, TypeError) as exc:
            raise TransportError(f"malformed scores response: {exc}") from exc
        if scores.shape != (self.num_classes,):
            raise TransportError(
                f"server returned {scores.size} scores, meta declared {self.num_classes}"
            )
        return scores
