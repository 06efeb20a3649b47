"""Detection / optical-flow fusion with forward-backward trust weighting.

For every landmark the fused position is ``alpha * detection + (1 - alpha) *
tracking``. ``alpha`` grows with two distances: how far the tracked point is
from the detection (``d_dt``), and how far the point lands from its start
after tracking forward and back again (``d_fb``):

    alpha = 1 - exp(-(d_dt / tau_dt + d_fb / tau_fb))

so agreeing, self-consistent tracks are trusted and a lost track
(``d_fb = inf``) falls back to the detection exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .flow import FlowParams, Pyramid, forward_backward_pyramids
from .geometry import LandmarkSet, mean_ocular_distance, serialize_pts
from .report import atomic_write

SEED_FUSED = "fused"
SEED_DETECTION = "detection"


@dataclass(frozen=True)
class FusionParams:
    """Trust scales in pixels; with ``normalize_by_d`` they are multiplied by d / 100.

    ``seed_from`` picks what gets tracked into the next frame: the previous
    fused landmarks (default) or the previous raw detections.
    """

    tau_dt: float = 5.0
    tau_fb: float = 5.0
    flow: FlowParams = field(default_factory=FlowParams)
    normalize_by_d: bool = True
    seed_from: str = SEED_FUSED

    def __post_init__(self):
        if not self.tau_dt > 0 or not self.tau_fb > 0:
            raise ValueError("tau_dt and tau_fb must be positive")
        if self.seed_from not in (SEED_FUSED, SEED_DETECTION):
            raise ValueError(f"seed_from must be {SEED_FUSED!r} or {SEED_DETECTION!r}")

    def resolved(self, d):
        """Copy with pixel taus for a face of outer ocular distance ``d``."""
        if not self.normalize_by_d:
            return self
        k = d / 100.0
        return replace(self, tau_dt=self.tau_dt * k, tau_fb=self.tau_fb * k, normalize_by_d=False)

    def to_dict(self):
        return {
            "tau_dt": self.tau_dt,
            "tau_fb": self.tau_fb,
            "normalize_by_d": self.normalize_by_d,
            "seed_from": self.seed_from,
            "flow": {
                "window": self.flow.window,
                "pyramid_levels": self.flow.pyramid_levels,
                "max_iters": self.flow.max_iters,
                "epsilon": self.flow.epsilon,
                "min_eigen": self.flow.min_eigen,
            },
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        flow = FlowParams(**d.pop("flow", {}))
        known = {"tau_dt", "tau_fb", "normalize_by_d", "seed_from"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown fusion parameters: {sorted(unknown)}")
        return cls(flow=flow, **d)


def alpha_weight(d_dt, d_fb, params):
    """Weight of the detection; scalars or arrays. ``params`` taus are used as pixels."""
    d_dt = np.asarray(d_dt, dtype=np.float64)
    d_fb = np.asarray(d_fb, dtype=np.float64)
    if np.any(d_dt < 0) or np.any(d_fb < 0) or np.any(np.isnan(d_dt)) or np.any(np.isnan(d_fb)):
        raise ValueError("distances must be non-negative")
    with np.errstate(over="ignore"):
        a = -np.expm1(-(d_dt / params.tau_dt + d_fb / params.tau_fb))
    return a if a.ndim else float(a)


def fuse_frame(detection, tracking, fb_error, params):
    """Blend one frame's detection and tracking landmarks; returns ``(fused, alphas)``."""
    if detection.n != tracking.n:
        raise ValueError(f"landmark counts differ: {detection.n} vs {tracking.n}")
    fb = np.asarray(fb_error, dtype=np.float64)
    if fb.shape != (detection.n,):
        raise ValueError("need one forward-backward error per landmark")
    det, trk = detection.points, tracking.points
    d_dt = np.hypot(*(det - trk).T)
    alpha = alpha_weight(d_dt, fb, params)
    a = alpha[:, None]
    blend = a * det + (1.0 - a) * trk
    fused = np.where(a == 1.0, det, blend)
    return LandmarkSet(fused, detection.layout), alpha


@dataclass(frozen=True, eq=False)
class FusedTrack:
    """Fused landmarks per frame plus per-landmark alpha, d_dt and d_fb arrays (n, N)."""

    landmarks: tuple
    alphas: np.ndarray
    d_dt: np.ndarray
    d_fb: np.ndarray

    def __len__(self):
        return len(self.landmarks)

    def alpha_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frame", "landmark", "alpha", "d_dt", "d_fb"])
        n, k = self.alphas.shape
        for j in range(n):
            for i in range(k):
                w.writerow(
                    [
                        j + 1,
                        i + 1,
                        repr(float(self.alphas[j, i])),
                        repr(float(self.d_dt[j, i])),
                        repr(float(self.d_fb[j, i])),
                    ]
                )
        return buf.getvalue()

    def write(self, out_dir, names=None):
        """Write ``frame_%05d.pts`` files (1-based unless ``names`` given) and ``alpha.csv``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if names is None:
            names = [f"frame_{j + 1:05d}.pts" for j in range(len(self))]
        for name, lms in zip(names, self.landmarks):
            atomic_write(out / name, serialize_pts(lms) + "\n")
        atomic_write(out / "alpha.csv", self.alpha_csv())


def _fuse_track(frames, detections, params):
    if not detections:
        raise ValueError("empty sequence")
    if len(frames) != len(detections):
        raise ValueError("need one frame per detection")
    p = params.resolved(mean_ocular_distance(detections)) if params.normalize_by_d else params
    n, k = len(detections), detections[0].n

    fused = [detections[0]]
    alphas = np.ones((n, k))
    d_dt = np.zeros((n, k))
    d_fb = np.full((n, k), np.inf)
    if n == 1:
        return FusedTrack(tuple(fused), alphas, d_dt, d_fb)

    levels = p.flow.pyramid_levels
    prev_pyr = Pyramid(frames[0], levels)
    for j in range(1, n):
        pyr = Pyramid(frames[j], levels)
        seed = fused[j - 1] if p.seed_from == SEED_FUSED else detections[j - 1]
        fb = forward_backward_pyramids(prev_pyr, pyr, seed.points, p.flow)
        tracking = LandmarkSet(fb.forward.xy, seed.layout)
        out, alpha = fuse_frame(detections[j], tracking, fb.fb_error, p)
        fused.append(out)
        alphas[j], d_fb[j] = alpha, fb.fb_error
        d_dt[j] = np.hypot(*(detections[j].points - tracking.points).T)
        prev_pyr = pyr
    return FusedTrack(tuple(fused), alphas, d_dt, d_fb)


def stabilize_sequence(seq, detection_track_label="detected", params=FusionParams()):
    """Fuse the named detection track with optical flow, frame by frame.

    Frame 1 is the detection itself. Every later frame tracks the previous
    fused landmarks forward, measures their forward-backward error, and
    blends with that frame's detection. Only the detection track is read.
    """
    if len(seq) == 0:
        raise ValueError("empty sequence")
    return _fuse_track(seq.frames, seq.track(detection_track_label), params)


def correct_dataset(seq, gt_track_label="gt", params=FusionParams()):
    """Clean noisy video annotations by treating them as detections."""
    return stabilize_sequence(seq, gt_track_label, params)
