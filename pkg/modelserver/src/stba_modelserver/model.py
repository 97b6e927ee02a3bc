"""Served models: the weights-JSON MLP format or a user-supplied callable.

The JSON schema matches the attack toolkit's documented model format:
{"input_shape":[C,H,W],"num_classes":N,"layers":[{"weights":[[...]],
"bias":[...],"activation":"relu"|"identity"|"softmax"}]}.
"""

import importlib
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

_ACTIVATIONS = ("relu", "identity", "softmax")


class ModelLoadError(ValueError):
    pass


@dataclass(frozen=True)
class ServedModel:
    input_shape: tuple[int, int, int]
    num_classes: int
    scorer: Callable[[np.ndarray], np.ndarray]


def load_json_mlp(path: str) -> ServedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        input_shape = tuple(int(d) for d in doc["input_shape"])
        num_classes = int(doc["num_classes"])
        raw_layers = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelLoadError(f"{path}: malformed model document: {exc}") from exc
    if len(input_shape) != 3 or not raw_layers:
        raise ModelLoadError(f"{path}: need input_shape [C,H,W] and layers")

    layers = []
    expect_in = int(np.prod(input_shape))
    for i, raw in enumerate(raw_layers):
        weights = np.asarray(raw["weights"], dtype=np.float64)
        bias = np.asarray(raw["bias"], dtype=np.float64)
        activation = raw["activation"]
        if activation not in _ACTIVATIONS:
            raise ModelLoadError(f"{path}: layer {i}: bad activation {activation!r}")
        if weights.ndim != 2 or weights.shape[1] != expect_in:
            raise ModelLoadError(f"{path}: layer {i}: dimension mismatch")
        if bias.shape != (weights.shape[0],):
            raise ModelLoadError(f"{path}: layer {i}: bias length mismatch")
        if activation == "softmax" and i != len(raw_layers) - 1:
            raise ModelLoadError(f"{path}: layer {i}: softmax must be final")
        layers.append((weights, bias, activation))
        expect_in = weights.shape[0]
    if expect_in != num_classes:
        raise ModelLoadError(f"{path}: final out-dim != num_classes")

    def scorer(img: np.ndarray) -> np.ndarray:
        x = np.asarray(img, dtype=np.float64).ravel()
        for weights, bias, activation in layers:
            x = weights @ x + bias
            if activation == "relu":
                x = np.maximum(x, 0.0)
            elif activation == "softmax":
                e = np.exp(x - x.max())
                x = e / e.sum()
        return x

    return ServedModel(input_shape=input_shape, num_classes=num_classes, scorer=scorer)


def load_callable(spec: str, input_shape, num_classes) -> ServedModel:
    """spec is "module:attribute"; the callable maps (C,H,W) array to scores."""
    module_name, _, attr = spec.partition(":")
    if not attr:
        raise ModelLoadError(f"{spec!r}: expected module:callable")
    fn = getattr(importlib.import_module(module_name), attr)
    return ServedModel(
        input_shape=tuple(input_shape), num_classes=num_classes, scorer=fn
    )
