"""
Tracking landmarks with pyramidal Lucas-Kanade
==============================================

Shift a synthetic face by a few pixels, track its 68 landmarks, then
track them back. The round-trip distance, the forward-backward error,
says how much each track can be trusted.
"""

import numpy as np

from landmark_stab.flow import FlowParams, forward_backward
from landmark_stab.geometry import Homography, warp_image
from landmark_stab.synthetic import synthetic_face

img, lms = synthetic_face()
shift = np.array([3.0, -2.0])
moved = warp_image(img, Homography.translation(*shift))

fb = forward_backward(img, moved, lms.points, FlowParams(window=10, pyramid_levels=3))
err = np.hypot(*(fb.forward.xy - (lms.points + shift)).T)
print(f"tracking error: median {np.median(err):.4f} px, max {err.max():.4f} px")
print(f"forward-backward error: max {fb.fb_error.max():.4f} px")

# A point in a textureless patch cannot be tracked: it is reported lost and
# its forward-backward error is infinite.
flat = np.full((128, 128), 0.5)
lost = forward_backward(flat, flat, [(64.0, 64.0)])
print(f"flat patch: status {lost.forward.status[0]}, fb error {lost.fb_error[0]}")
