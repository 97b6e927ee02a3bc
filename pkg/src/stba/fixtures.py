"""Desk-scale synthetic victim models and datasets for tests and demos.

The fixture classifier is linear-softmax with a high-pass decision
direction, so class evidence lives almost entirely in the image's
high-frequency component and small spatial warps can cross the boundary.
The dataset generator keeps only items that are provably flippable by a
small rigid translation, which makes campaign-level success thresholds
meaningful at this scale.
"""

import numpy as np

from .imagecore import LabeledImage, frequency_split, gaussian_blur3, recompose
from .oracle import DenseLayer, MlpOracle, ModelSpec
from .warp import apply_flow, zero_flow


def make_fixture_model(
    shape: tuple[int, int, int] = (3, 8, 8),
    seed: int = 1234,
    logit_scale: float = 8.0,
) -> ModelSpec:
    """2-class linear-softmax model whose decision direction is high-pass."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(shape)
    d = (z - gaussian_blur3(z)).ravel()
    d -= d.mean()
    d *= logit_scale / np.linalg.norm(d)
    weights = np.stack([d / 2.0, -d / 2.0])
    layer = DenseLayer(weights=weights, bias=np.zeros(2), activation="softmax")
    return ModelSpec(input_shape=shape, num_classes=2, layers=(layer,))


def _translation_flippable(oracle, item: LabeledImage, max_shift: float = 0.25) -> bool:
    high, low = frequency_split(item.image)
    _, h, w = item.image.shape
    for du in np.linspace(-max_shift, max_shift, 6):
        for dv in np.linspace(-max_shift, max_shift, 6):
            flow = zero_flow(h, w)
            flow[0] += du
            flow[1] += dv
            scores = oracle.predict(recompose(apply_flow(high, flow), low))
            if int(np.argmax(scores)) != item.label:
                return True
    return False


def make_fixture_dataset(
    n: int,
    seed: int = 0,
    model: ModelSpec | None = None,
    margin_damp: float = 0.99,
) -> list[LabeledImage]:
    """Synthetic noisy images labeled by the fixture model.

    Most of each image's projection onto the decision direction is removed
    (margin_damp) so margins stay small, then candidates are rejected unless
    a sub-pixel translation of their high-frequency part flips the label.
    Deterministic for a fixed seed.
    """
    if model is None:
        model = make_fixture_model()
    oracle = MlpOracle(model)
    shape = model.input_shape
    d = model.layers[0].weights[0] * 2.0
    d_unit = (d / np.dot(d, d)).reshape(shape)
    rng = np.random.default_rng(seed)
    items: list[LabeledImage] = []
    while len(items) < n:
        smooth = gaussian_blur3(rng.standard_normal(shape))
        fine = rng.standard_normal(shape)
        img = np.clip(0.5 + 0.15 * smooth + 0.2 * fine, 0.0, 1.0)
        proj = float(np.dot(d, img.ravel()))
        img = np.clip(img - margin_damp * proj * d_unit, 0.0, 1.0)
        item = LabeledImage(image=img, label=int(np.argmax(oracle.predict(img))))
        if _translation_flippable(oracle, item):
            items.append(item)
    return items
