"""Storyboard pseudo-videos: one annotated still image becomes a video.

A storyboard holds a start and an end :class:`StoryboardState`; frame ``j``
renders the state interpolated at ``t = (j - 1) / (n_frames - 1)``. Each
frame is rendered as geometric warp, then blur, then brightness, then pixel
noise. Only the warp moves landmarks, so the emitted ground truth is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .geometry import (
    FrameSequence,
    Homography,
    ImageBuffer,
    LandmarkSet,
    apply_homography,
    encode_png,
    serialize_pts,
    warp_image,
)
from .report import atomic_write

_SCALARS = (
    "brightness_gain",
    "brightness_offset",
    "pixel_noise_sigma",
    "blur_sigma",
    "motion_blur_length",
)


@dataclass(frozen=True)
class StoryboardState:
    brightness_gain: float = 1.0
    brightness_offset: float = 0.0
    pixel_noise_sigma: float = 0.0
    blur_sigma: float = 0.0
    motion_blur_length: float = 0.0
    motion_blur_angle: float = 0.0
    geometric: Homography = field(default_factory=Homography.identity)

    def __post_init__(self):
        if not self.brightness_gain > 0:
            raise ValueError("brightness_gain must be positive")
        if not -1.0 <= self.brightness_offset <= 1.0:
            raise ValueError("brightness_offset must lie in [-1, 1]")
        for name in ("pixel_noise_sigma", "blur_sigma", "motion_blur_length"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self):
        d = {name: getattr(self, name) for name in _SCALARS}
        d["motion_blur_angle"] = self.motion_blur_angle
        d["homography"] = self.geometric.tolist()
        return d

    @classmethod
    def from_dict(cls, d, size=None):
        """Build from JSON data.

        Geometry is either ``"homography"`` (a 3x3 matrix) or a ``"geometric"``
        object with ``scale``, ``rotation`` (radians), ``translation`` and
        ``corner_offsets`` (four (dx, dy) pairs, pixels) composed about the
        image center; the latter needs the image ``size``.
        """
        d = dict(d)
        kwargs = {k: float(d.pop(k)) for k in list(d) if k in _SCALARS or k == "motion_blur_angle"}
        if "homography" in d:
            kwargs["geometric"] = Homography(np.asarray(d.pop("homography"), dtype=np.float64))
        elif "geometric" in d:
            if size is None:
                raise ValueError("parametric geometry needs the image size")
            kwargs["geometric"] = geometric_homography(size, **d.pop("geometric"))
        if d:
            raise ValueError(f"unknown storyboard state fields: {sorted(d)}")
        return cls(**kwargs)


def geometric_homography(size, scale=1.0, rotation=0.0, translation=(0.0, 0.0), corner_offsets=None):
    """Scale and rotate about the image center, translate, then perturb the corners."""
    w, h = size
    c = ((w - 1) / 2.0, (h - 1) / 2.0)
    H = Homography.translation(*translation) @ Homography.rotation(rotation, c) @ Homography.scaling(
        scale, c
    )
    if corner_offsets is not None:
        src = _corners(size)
        dst = H.map(src) + np.asarray(corner_offsets, dtype=np.float64).reshape(4, 2)
        H = Homography.from_correspondences(src, dst)
    return H


def _corners(size):
    w, h = size
    return np.array([[0.0, 0.0], [w - 1.0, 0.0], [w - 1.0, h - 1.0], [0.0, h - 1.0]])


@dataclass(frozen=True)
class Storyboard:
    start: StoryboardState
    end: StoryboardState
    n_frames: int
    fps: float = 30.0
    seed: int = 0

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        if not self.fps > 0:
            raise ValueError("fps must be positive")

    def to_dict(self):
        return {
            "start": self.start.to_dict(),
            "end": self.end.to_dict(),
            "n_frames": self.n_frames,
            "fps": self.fps,
            "seed": self.seed,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d, size=None):
        d = dict(d)
        for key in ("start", "end", "n_frames"):
            if key not in d:
                raise ValueError(f"storyboard is missing {key!r}")
        known = {"start", "end", "n_frames", "fps", "seed"}
        if set(d) - known:
            raise ValueError(f"unknown storyboard fields: {sorted(set(d) - known)}")
        return cls(
            start=StoryboardState.from_dict(d["start"], size),
            end=StoryboardState.from_dict(d["end"], size),
            n_frames=int(d["n_frames"]),
            fps=float(d.get("fps", 30.0)),
            seed=int(d.get("seed", 0)),
        )

    @classmethod
    def from_json(cls, text, size=None):
        return cls.from_dict(json.loads(text), size)


def _lerp(a, b, t):
    return a + (b - a) * t


def _lerp_angle(a, b, t):
    delta = (b - a + math.pi) % (2 * math.pi) - math.pi
    return a + delta * t


def interpolate_state(sb, j, size=(1.0, 1.0)):
    """State of frame ``j`` (1-based).

    The homography is interpolated through the positions of the four
    corners of an image of ``size`` and refitted; endpoints are returned
    unchanged.
    """
    if not 1 <= j <= sb.n_frames:
        raise ValueError(f"frame index {j} outside 1..{sb.n_frames}")
    t = 0.0 if sb.n_frames == 1 else (j - 1) / (sb.n_frames - 1)
    if t == 0.0:
        return sb.start
    if t == 1.0:
        return sb.end
    a, b = sb.start, sb.end
    kwargs = {name: _lerp(getattr(a, name), getattr(b, name), t) for name in _SCALARS}
    kwargs["motion_blur_angle"] = _lerp_angle(a.motion_blur_angle, b.motion_blur_angle, t)
    if a.geometric.is_identity() and b.geometric.is_identity():
        kwargs["geometric"] = a.geometric
    else:
        src = _corners(size)
        dst = _lerp(a.geometric.map(src), b.geometric.map(src), t)
        kwargs["geometric"] = Homography.from_correspondences(src, dst)
    return StoryboardState(**kwargs)


def motion_blur_kernel(length, angle):
    """Normalized line kernel of ``length`` pixels along ``angle`` (radians)."""
    half = length / 2.0
    r = int(math.ceil(half)) + 1
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    ux, uy = math.cos(angle), math.sin(angle)
    along = xx * ux + yy * uy
    across = -xx * uy + yy * ux
    k = np.clip(1.0 - np.abs(across), 0.0, 1.0) * np.clip(half + 0.5 - np.abs(along), 0.0, 1.0)
    return k / k.sum()


def _per_channel(a, fn):
    if a.ndim == 2:
        return fn(a)
    return np.stack([fn(a[:, :, c]) for c in range(a.shape[2])], axis=2)


class RenderedFrame(NamedTuple):
    image: ImageBuffer
    landmarks: LandmarkSet
    outside: tuple  # 0-based indices of landmarks mapped outside the frame


def render_frame(img, lms, state, frame_seed):
    """Render one frame: warp, blur, brightness, noise. Landmarks follow the warp only."""
    out = img
    new_lms = lms
    if not state.geometric.is_identity():
        out = warp_image(img, state.geometric)
        new_lms = apply_homography(lms, state.geometric)
    a = out.data
    if state.blur_sigma > 0:
        a = _per_channel(a, lambda c: ndimage.gaussian_filter(c, state.blur_sigma, mode="nearest"))
    if state.motion_blur_length > 0:
        k = motion_blur_kernel(state.motion_blur_length, state.motion_blur_angle)
        a = _per_channel(a, lambda c: ndimage.convolve(c, k, mode="nearest"))
    if state.brightness_gain != 1.0 or state.brightness_offset != 0.0:
        a = np.clip(a * state.brightness_gain + state.brightness_offset, 0.0, 1.0)
    if state.pixel_noise_sigma > 0:
        rng = np.random.default_rng(frame_seed)
        a = np.clip(a + rng.normal(0.0, state.pixel_noise_sigma, a.shape), 0.0, 1.0)
    if a is not out.data:
        out = ImageBuffer(a)
    p = new_lms.points
    outside = np.flatnonzero(
        (p[:, 0] < 0) | (p[:, 0] > img.width - 1) | (p[:, 1] < 0) | (p[:, 1] > img.height - 1)
    )
    return RenderedFrame(out, new_lms, tuple(int(i) for i in outside))


def frame_seeds(seed, n):
    """Independent per-frame seeds derived from one storyboard seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


@dataclass(frozen=True)
class PseudoVideo:
    """A generated sequence with the per-frame states that produced it."""

    sequence: FrameSequence
    states: tuple
    outside: tuple


def generate_pseudo_video(img, lms, sb):
    """Render every storyboard frame; the result carries an exact ``"gt"`` track."""
    return generate_pseudo_video_full(img, lms, sb).sequence


def generate_pseudo_video_full(img, lms, sb):
    seeds = frame_seeds(sb.seed, sb.n_frames)
    frames, gt, states, outside = [], [], [], []
    for j in range(1, sb.n_frames + 1):
        st = interpolate_state(sb, j, img.size)
        r = render_frame(img, lms, st, seeds[j - 1])
        frames.append(r.image)
        gt.append(r.landmarks)
        states.append(st)
        outside.append(r.outside)
    seq = FrameSequence(tuple(frames), {"gt": tuple(gt)}, sb.fps)
    return PseudoVideo(seq, tuple(states), tuple(outside))


def static_storyboard(n_frames, pixel_noise_sigma=0.0, seed=0, fps=30.0):
    """A storyboard that never moves the face; optional constant pixel noise."""
    st = StoryboardState(pixel_noise_sigma=pixel_noise_sigma)
    return Storyboard(st, st, n_frames, fps, seed)


def write_pseudo_video(video, out_dir, storyboard=None):
    """Write ``frame_%05d.png``/``.pts`` pairs (1-based) and a ``sequence.json`` manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seq = video.sequence
    entries = []
    for j, (frame, lms) in enumerate(zip(seq.frames, seq.track("gt")), start=1):
        stem = f"frame_{j:05d}"
        atomic_write(out / f"{stem}.png", encode_png(frame))
        atomic_write(out / f"{stem}.pts", serialize_pts(lms) + "\n")
        entries.append(
            {
                "index": j,
                "image": f"{stem}.png",
                "pts": f"{stem}.pts",
                "homography": video.states[j - 1].geometric.tolist(),
                "outside": list(video.outside[j - 1]),
            }
        )
    manifest = {
        "n_frames": len(seq),
        "fps": seq.fps,
        "frames": entries,
    }
    if storyboard is not None:
        manifest["storyboard"] = storyboard.to_dict()
    atomic_write(out / "sequence.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return out
