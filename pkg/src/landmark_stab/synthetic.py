"""Synthetic annotated faces for experiments that must run without datasets."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .geometry import ImageBuffer, LandmarkSet


def template_landmarks(center=(128.0, 128.0), ocular=100.0):
    """A frontal 68-point iBUG-layout face whose outer eye corners are ``ocular`` apart."""
    s = ocular / 100.0
    pts = []

    # contour 1-17: U-shaped jaw from left temple to right temple
    t = np.linspace(np.pi, 0.0, 17)
    pts += list(zip(-62 * np.cos(t), 5 + 72 * np.sin(t) ** 1.2 - 20))
    # brows 18-27
    for side in (-1, 1):
        xs = np.linspace(-52, -12, 5) if side < 0 else np.linspace(12, 52, 5)
        pts += [(x, -40 - 6 * np.sin(np.pi * (x - xs[0]) / 40)) for x in xs]
    # nose bridge 28-31, nostrils 32-36
    pts += [(0.0, y) for y in np.linspace(-22, 8, 4)]
    pts += [(x, 16 - 3 * np.cos(np.pi * x / 20)) for x in np.linspace(-12, 12, 5)]
    # eyes 37-48; 37 and 46 are the outer corners at x = -50 / +50
    for cx, outer_first in ((-33.0, True), (33.0, False)):
        ang = np.array([0, 60, 120, 180, 240, 300]) * np.pi / 180
        ex = -np.cos(ang) if outer_first else np.cos(ang + np.pi)
        ey = np.where(np.sin(ang) > 0, -0.35, 0.35) * np.abs(np.sin(ang))
        pts += list(zip(cx + 17 * ex, -22 + 17 * ey))
    # mouth: outer 49-60, inner 61-68
    ang = np.linspace(np.pi, -np.pi, 13)[:-1]
    pts += list(zip(28 * np.cos(ang), 38 - 12 * np.sin(ang)))
    ang = np.linspace(np.pi, -np.pi, 9)[:-1]
    pts += list(zip(18 * np.cos(ang), 38 - 5 * np.sin(ang)))

    a = np.array(pts, dtype=np.float64) * s + np.asarray(center, dtype=np.float64)
    return LandmarkSet(a)


def textured_image(width=256, height=256, seed=0, grain=2.0, contrast=0.35):
    """Smooth random texture in [0, 1]: blurred white noise around mid-gray."""
    rng = np.random.default_rng(seed)
    a = ndimage.gaussian_filter(rng.standard_normal((height, width)), grain, mode="wrap")
    a = a / (a.std() + 1e-12)
    return ImageBuffer(np.clip(0.5 + contrast * a / 3.0, 0.0, 1.0))


def synthetic_face(width=256, height=256, ocular=100.0, seed=0):
    """Textured face image plus its 68 landmarks, centered in the frame."""
    lms = template_landmarks((width / 2.0, height / 2.0), ocular)
    base = textured_image(width, height, seed).data.copy()
    yy, xx = np.mgrid[0:height, 0:width]
    cx, cy = width / 2.0, height / 2.0
    face = ((xx - cx) / (0.66 * ocular)) ** 2 + ((yy - cy) / (0.85 * ocular)) ** 2 <= 1.0
    base[face] = np.clip(base[face] * 0.8 + 0.15, 0.0, 1.0)
    # dark blobs at the landmarks give every point its own corner-like structure
    marks = np.zeros_like(base)
    for x, y in lms.points:
        marks += np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / (2 * 1.5**2))
    base = np.clip(base - 0.25 * np.clip(marks, 0.0, 1.0), 0.0, 1.0)
    return ImageBuffer(base), lms
