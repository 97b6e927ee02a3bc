"""Walkthrough: frequency decomposition and flow-field warping.

The attack never edits pixels directly. It splits an image into a blurred
low-frequency part and a high-frequency residual, then spatially warps only
the residual. This script shows each primitive on tiny arrays you can check
by hand.
"""

import numpy as np

from stba import apply_flow, frequency_split, gaussian_blur3, recompose
from stba.warp import flow_smoothness_loss, zero_flow

# --- the 3x3 binomial blur -------------------------------------------------
impulse = np.zeros((1, 3, 3))
impulse[0, 1, 1] = 1.0
print("blurred impulse (center should be 4/16 = 0.25):")
print(gaussian_blur3(impulse)[0])

# --- splitting preserves the image exactly ---------------------------------
rng = np.random.default_rng(0)
img = rng.random((3, 8, 8))
high, low = frequency_split(img)
print("\nmax |high + low - img| =", np.max(np.abs(high + low - img)))
print("high-frequency range:", high.min(), "to", high.max())

# --- warping a row by a flow field -----------------------------------------
row = np.array([[[0.0, 1.0, 2.0, 3.0]]])
flow = zero_flow(1, 4)
flow[0] += 0.5  # push every sample half a pixel to the right
print("\nrow [0,1,2,3] warped by du=+0.5:", apply_flow(row, flow)[0, 0])
# midpoints appear; the last sample clamps at the image border

# --- smoothness of a flow field --------------------------------------------
ragged = zero_flow(4, 4)
ragged[0, 1, 1] = 1.0
print("\nsmoothness loss, all-zero flow:", flow_smoothness_loss(zero_flow(4, 4)))
print("smoothness loss, one displaced pixel:", flow_smoothness_loss(ragged))

# --- recomposition clamps back into [0, 1] ---------------------------------
adv = recompose(apply_flow(high, zero_flow(8, 8)), low)
print("\nzero-flow recomposition equals the original:", np.allclose(adv, img))
