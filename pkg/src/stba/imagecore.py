"""Image tensors, frequency decomposition, dataset I/O and quality metrics.

Images are float64 numpy arrays of shape (C, H, W) with displayable
intensities in [0, 1]. High-frequency residuals may be negative; they are
only clamped when recomposed into a displayable image.
"""

import csv
import logging
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d
from scipy.signal import correlate2d

from .errors import FormatError

log = logging.getLogger(__name__)

CIFAR10_RECORD_BYTES = 1 + 3 * 32 * 32
CIFAR10_NUM_CLASSES = 10

# 1D binomial kernel; the separable product gives [[1,2,1],[2,4,2],[1,2,1]]/16
_BLUR_KERNEL_1D = np.array([1.0, 2.0, 1.0]) / 4.0

# SSIM constants (Wang et al. defaults, dynamic range L = 1)
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_SSIM_C1 = (_SSIM_K1 * 1.0) ** 2
_SSIM_C2 = (_SSIM_K2 * 1.0) ** 2
_SSIM_WIN = 11
_SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class LabeledImage:
    image: np.ndarray  # (C, H, W) float64
    label: int


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate an image array: (C, H, W), finite values."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3:
        raise ValueError(f"image must be (C, H, W), got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return img


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def gaussian_blur3(img: np.ndarray) -> np.ndarray:
    """3x3 binomial blur per channel with replicate border padding."""
    img = check_image(img)
    out = correlate1d(img, _BLUR_KERNEL_1D, axis=1, mode="nearest")
    out = correlate1d(out, _BLUR_KERNEL_1D, axis=2, mode="nearest")
    return out


def frequency_split(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split into (high, low) so that high + low == img exactly.

    low is the blurred image; high is the residual and may be negative.
    """
    img = check_image(img)
    high = img - gaussian_blur3(img)
    # recompute low from the rounded residual so high + low == img bitwise;
    # it differs from the blur by at most one ulp
    low = img - high
    return high, low


def recompose(high: np.ndarray, low: np.ndarray) -> np.ndarray:
    """Sum frequency components and clamp into the displayable range [0, 1]."""
    high = np.asarray(high, dtype=np.float64)
    low = np.asarray(low, dtype=np.float64)
    _check_same_shape(high, low)
    return np.clip(high + low, 0.0, 1.0)


def load_cifar10_batch(data: bytes) -> list[LabeledImage]:
    """Parse CIFAR-10 binary records: 1 label byte + 3072 plane-order pixels."""
    if len(data) % CIFAR10_RECORD_BYTES != 0:
        raise FormatError(
            f"stream length {len(data)} is not a multiple of {CIFAR10_RECORD_BYTES}"
        )
    raw = np.frombuffer(data, dtype=np.uint8)
    records = raw.reshape(-1, CIFAR10_RECORD_BYTES)
    items = []
    for i, rec in enumerate(records):
        label = int(rec[0])
        if label >= CIFAR10_NUM_CLASSES:
            raise FormatError(f"record {i}: label byte {label} out of range")
        pixels = rec[1:].reshape(3, 32, 32).astype(np.float64) / 255.0
        items.append(LabeledImage(image=pixels, label=label))
    return items


def dump_cifar10_batch(items: list[LabeledImage]) -> bytes:
    """Inverse of load_cifar10_batch (exact round-trip for loaded records)."""
    out = bytearray()
    for item in items:
        out.append(item.label)
        out.extend(np.rint(item.image * 255.0).astype(np.uint8).tobytes())
    return bytes(out)


def load_png_dir(
    path: str, num_classes: int | None = None
) -> tuple[list[LabeledImage], list[tuple[str, str]]]:
    """Load labeled PNGs from a directory with a `labels.csv` sidecar.

    Returns (items sorted by filename, per-file error records). Files absent
    from the CSV are skipped with a warning. A malformed CSV is fatal.
    """
    from PIL import Image as PILImage

    csv_path = os.path.join(path, "labels.csv")
    try:
        with open(csv_path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["filename", "label"]:
                raise FormatError(f"{csv_path}: expected header 'filename,label'")
            labels = {}
            for row in reader:
                if len(row) != 2:
                    raise FormatError(f"{csv_path}: malformed row {row!r}")
                labels[row[0]] = int(row[1])
    except (OSError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{csv_path}: {exc}") from exc

    items: list[LabeledImage] = []
    errors: list[tuple[str, str]] = []
    for name in sorted(os.listdir(path)):
        if not name.lower().endswith(".png"):
            continue
        if name not in labels:
            log.warning("%s: no label in labels.csv, skipping", name)
            continue
        label = labels[name]
        if label < 0 or (num_classes is not None and label >= num_classes):
            errors.append((name, f"label {label} out of range"))
            continue
        try:
            with PILImage.open(os.path.join(path, name)) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        except OSError as exc:
            errors.append((name, str(exc)))
            continue
        items.append(LabeledImage(image=arr.transpose(2, 0, 1), label=label))
    return items, errors


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB on [0, 1] intensities; inf if equal."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _ssim_window() -> np.ndarray:
    half = (_SSIM_WIN - 1) / 2.0
    coords = np.arange(_SSIM_WIN) - half
    g = np.exp(-(coords**2) / (2.0 * _SSIM_SIGMA**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM (11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03, L=1).

    Windowed statistics use valid positions only; images smaller than the
    window fall back to global statistics over each channel.
    """
    a = check_image(a)
    b = check_image(b)
    _check_same_shape(a, b)
    _, h, w = a.shape
    if h < _SSIM_WIN or w < _SSIM_WIN:
        return float(np.mean([_ssim_global(a[c], b[c]) for c in range(a.shape[0])]))
    win = _ssim_window()
    vals = []
    for c in range(a.shape[0]):
        vals.append(np.mean(_ssim_map(a[c], b[c], win)))
    return float(np.mean(vals))


def _ssim_map(x: np.ndarray, y: np.ndarray, win: np.ndarray) -> np.ndarray:
    mu_x = correlate2d(x, win, mode="valid")
    mu_y = correlate2d(y, win, mode="valid")
    var_x = correlate2d(x * x, win, mode="valid") - mu_x**2
    var_y = correlate2d(y * y, win, mode="valid") - mu_y**2
    cov = correlate2d(x * y, win, mode="valid") - mu_x * mu_y
    num = (2 * mu_x * mu_y + _SSIM_C1) * (2 * cov + _SSIM_C2)
    den = (mu_x**2 + mu_y**2 + _SSIM_C1) * (var_x + var_y + _SSIM_C2)
    return num / den


def _ssim_global(x: np.ndarray, y: np.ndarray) -> float:
    mu_x, mu_y = x.mean(), y.mean()
    var_x, var_y = x.var(), y.var()
    cov = float(np.mean((x - mu_x) * (y - mu_y)))
    num = (2 * mu_x * mu_y + _SSIM_C1) * (2 * cov + _SSIM_C2)
    den = (mu_x**2 + mu_y**2 + _SSIM_C1) * (var_x + var_y + _SSIM_C2)
    return float(num / den)
