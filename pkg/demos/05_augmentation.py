"""
A pseudo-video from one annotated image
=======================================

A storyboard gives a start and an end state: geometry (a homography),
brightness, blur, motion blur and pixel noise. Frames in between are
linear interpolations. The landmarks follow the geometry exactly and
ignore the photometric effects, so the ground truth stays exact.
"""

import tempfile

import numpy as np

from landmark_stab.augmentation import (
    Storyboard,
    StoryboardState,
    generate_pseudo_video_full,
    geometric_homography,
    write_pseudo_video,
)
from landmark_stab.geometry import apply_homography
from landmark_stab.synthetic import synthetic_face

img, lms = synthetic_face()
start = StoryboardState()
end = StoryboardState(
    brightness_gain=1.2,
    pixel_noise_sigma=0.02,
    motion_blur_length=5.0,
    motion_blur_angle=0.5,
    geometric=geometric_homography(img.size, scale=1.1, rotation=0.2, translation=(10, -5)),
)
sb = Storyboard(start, end, n_frames=10, seed=0)
video = generate_pseudo_video_full(img, lms, sb)

# The emitted ground truth is exactly the source landmarks under each
# frame's homography.
worst = max(
    np.abs(g.points - apply_homography(lms, st.geometric).points).max()
    for g, st in zip(video.sequence.track("gt"), video.states)
)
print(f"largest deviation from the homography: {worst:.2e} px")

nose = [g.points[30].round(2).tolist() for g in video.sequence.track("gt")]
print("nose tip per frame:", nose)

with tempfile.TemporaryDirectory() as out:
    write_pseudo_video(video, out, sb)
    print("wrote frames and sequence.json to a temporary directory")
