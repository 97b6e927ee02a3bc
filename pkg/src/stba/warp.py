"""Flow fields and backward bilinear warping.

A flow field is a float64 array of shape (2, H, W): plane 0 holds the
horizontal displacement du (columns, u axis), plane 1 the vertical
displacement dv (rows, v axis), both in pixel units. One field displaces
all channels of an image identically.
"""

import numpy as np

SMOOTHNESS_EPS = 1e-12


def zero_flow(height: int, width: int) -> np.ndarray:
    return np.zeros((2, height, width), dtype=np.float64)


def check_flow(flow: np.ndarray) -> np.ndarray:
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[0] != 2:
        raise ValueError(f"flow must be (2, H, W), got shape {flow.shape}")
    if not np.all(np.isfinite(flow)):
        raise ValueError("flow contains non-finite values")
    return flow


def apply_flow(src: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Backward-warp src by flow with bilinear interpolation.

    Output pixel (row v, col u) samples src at (u + du, v + dv); sample
    coordinates are clamped to the image rectangle before interpolation.
    """
    src = np.asarray(src, dtype=np.float64)
    flow = check_flow(flow)
    if src.ndim != 3:
        raise ValueError(f"image must be (C, H, W), got shape {src.shape}")
    _, h, w = src.shape
    if flow.shape[1:] != (h, w):
        raise ValueError(f"flow shape {flow.shape[1:]} does not match image ({h}, {w})")

    cols, rows = np.meshgrid(np.arange(w), np.arange(h))
    u = np.clip(cols + flow[0], 0.0, w - 1.0)
    v = np.clip(rows + flow[1], 0.0, h - 1.0)

    u0 = np.floor(u).astype(np.intp)
    v0 = np.floor(v).astype(np.intp)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    wu = u - u0
    wv = v - v0

    out = (
        src[:, v0, u0] * ((1.0 - wu) * (1.0 - wv))
        + src[:, v0, u1] * (wu * (1.0 - wv))
        + src[:, v1, u0] * ((1.0 - wu) * wv)
        + src[:, v1, u1] * (wu * wv)
    )
    return out


def clip_flow(flow: np.ndarray, xi: float) -> np.ndarray:
    """Clamp displacements elementwise to [-xi, +xi]."""
    if xi < 0:
        raise ValueError("flow budget must be nonnegative")
    return np.clip(check_flow(flow), -xi, xi)


def flow_smoothness_loss(flow: np.ndarray) -> float:
    """Total spatial movement between 4-neighbors.

    Sums sqrt((du_p - du_q)^2 + (dv_p - dv_q)^2 + eps) over every ordered
    in-bounds neighbor pair, so each unordered pair contributes twice. The
    eps stabilizer keeps the root differentiable at zero difference.
    """
    flow = check_flow(flow)
    du, dv = flow[0], flow[1]
    total = 0.0
    # vertical and horizontal forward differences; doubled for both endpoints
    for ddu, ddv in (
        (du[1:, :] - du[:-1, :], dv[1:, :] - dv[:-1, :]),
        (du[:, 1:] - du[:, :-1], dv[:, 1:] - dv[:, :-1]),
    ):
        total += 2.0 * float(np.sum(np.sqrt(ddu**2 + ddv**2 + SMOOTHNESS_EPS)))
    return total
