"""
Fusing detections with optical flow
===================================

A per-frame detector jitters. Optical flow from the previous frame does
not, but it can drift or get lost. For every landmark the fused point is
``alpha * detection + (1 - alpha) * tracking``, where ``alpha`` rises
when the two disagree or when the track fails its forward-backward check.
"""

import numpy as np

from landmark_stab.augmentation import generate_pseudo_video, static_storyboard
from landmark_stab.detector import DetectorSpec, simulate_detections
from landmark_stab.fusion import FusionParams, alpha_weight, stabilize_sequence
from landmark_stab.metrics import sdd, track_nme
from landmark_stab.noise import NoiseSpec
from landmark_stab.synthetic import synthetic_face

# How alpha responds to the two distances (taus in pixels here).
p = FusionParams(tau_dt=5.0, tau_fb=5.0, normalize_by_d=False)
for d_dt, d_fb in ((0, 0), (1, 0), (5, 0), (1, 2), (0, np.inf)):
    print(f"d_dt={d_dt:>3} d_fb={d_fb:>4}: alpha={alpha_weight(d_dt, d_fb, p):.3f}")

# A 60-frame video of a still face with sensor noise, and a detector that
# jitters by 2% of the ocular distance.
img, lms = synthetic_face()
video = generate_pseudo_video(img, lms, static_storyboard(60, pixel_noise_sigma=0.01, seed=0))
gt = video.track("gt")
detections = simulate_detections(gt, DetectorSpec(NoiseSpec("gaussian", sigma=0.02, seed=3)))

fused = stabilize_sequence(video.with_track("detected", detections))
print(f"\nraw   SDD {sdd(detections, gt, 100.0).mean():.4f}  NME {track_nme(detections, gt).mean():.4f}")
print(f"fused SDD {sdd(fused.landmarks, gt, 100.0).mean():.4f}  NME {track_nme(fused.landmarks, gt).mean():.4f}")
print(f"mean alpha after frame 1: {fused.alphas[1:].mean():.3f}")
