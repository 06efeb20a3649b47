"""Accuracy (NME) and stability (STD, SDD) metrics for landmark tracks.

Tracks are sequences of :class:`LandmarkSet`. Per-landmark results are
(N, 2) arrays with columns X and Y, normalized by the face size ``d``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .geometry import mean_ocular_distance, outer_ocular_distance


def _stack(track):
    return np.stack([lms.points for lms in track])


def _check_pair(pred_track, gt_track):
    if len(pred_track) != len(gt_track):
        raise ValueError(f"track lengths differ: {len(pred_track)} vs {len(gt_track)}")
    if len(pred_track) < 2:
        raise ValueError("need at least 2 frames")
    if pred_track[0].n != gt_track[0].n:
        raise ValueError("landmark counts differ")


def _sample_std(a):
    # centring on the first frame keeps constant columns at exactly 0
    return (a - a[:1]).std(axis=0, ddof=1)


def _diff_std(pred, gt):
    """Sample std of ``pred - gt`` with subtraction round-off flushed to zero.

    ``(g + b) - g`` is not exactly ``b`` in floating point, so a track shifted
    by a constant would otherwise show jitter of a few ulps. Deviations from
    the first frame that are within the rounding error of the operands carry
    no information and are set to 0.
    """
    diff = pred - gt
    centred = diff - diff[:1]
    scale = np.abs(pred) + np.abs(gt)
    tol = 4.0 * np.finfo(np.float64).eps * (scale + scale[:1])
    centred[np.abs(centred) <= tol] = 0.0
    return centred.std(axis=0, ddof=1)


def _check_d(d):
    if not d > 0:
        raise ValueError(f"normalizer d must be positive, got {d}")


def nme(pred, gt):
    """Mean point-to-point error divided by the ground truth's outer ocular distance."""
    if pred.n != gt.n:
        raise ValueError(f"landmark counts differ: {pred.n} vs {gt.n}")
    d = outer_ocular_distance(gt)
    return float(np.mean(np.linalg.norm(pred.points - gt.points, axis=1)) / d)


def track_nme(pred_track, gt_track):
    """Per-frame NME of two aligned tracks."""
    if len(pred_track) != len(gt_track):
        raise ValueError(f"track lengths differ: {len(pred_track)} vs {len(gt_track)}")
    return np.array([nme(p, g) for p, g in zip(pred_track, gt_track)])


def per_point_std(track, d):
    """Sample std (n-1) of every landmark coordinate across frames, divided by d."""
    if len(track) < 2:
        raise ValueError("need at least 2 frames")
    _check_d(d)
    return _sample_std(_stack(track)) / d


def sdd(pred_track, gt_track, d):
    """Standard deviation of the prediction-minus-truth difference, divided by d.

    A constant offset between the tracks does not contribute.
    """
    _check_pair(pred_track, gt_track)
    _check_d(d)
    return _diff_std(_stack(pred_track), _stack(gt_track)) / d


def symmetric_histograms(diff, bins):
    """Per-landmark 2D histograms of (dx, dy) over symmetric ranges.

    ``diff`` has shape (n_frames, N, 2). Returns (edges, counts) with edges of
    shape (N, bins + 1), shared by both axes, and counts of shape (N, bins, bins)
    indexed [x_bin, y_bin].
    """
    n_frames, n_pts, _ = diff.shape
    edges = np.empty((n_pts, bins + 1))
    counts = np.empty((n_pts, bins, bins), dtype=np.int64)
    for i in range(n_pts):
        r = float(np.max(np.abs(diff[:, i, :])))
        if r == 0.0:
            r = 1.0
        e = np.linspace(-r, r, bins + 1)
        h, _, _ = np.histogram2d(diff[:, i, 0], diff[:, i, 1], bins=[e, e])
        edges[i] = e
        counts[i] = h.astype(np.int64)
    return edges, counts


@dataclass(frozen=True, eq=False)
class StabilityReport:
    """Per-landmark noise statistics of a predicted track against ground truth.

    ``mean_diff``, ``std`` and ``sdd`` are (N, 2) arrays normalized by
    ``d_used``; ``hist_counts[i]`` is the 2D histogram of landmark ``i``'s
    normalized (dx, dy) over ``hist_edges[i]``. ``std`` describes the
    predicted track on its own.
    """

    mean_diff: np.ndarray
    std: np.ndarray
    sdd: np.ndarray
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    nme: np.ndarray
    d_used: float
    n_frames: int

    @property
    def n_landmarks(self):
        return self.mean_diff.shape[0]

    @property
    def sdd_xy(self):
        return np.hypot(self.sdd[:, 0], self.sdd[:, 1])

    @property
    def std_xy(self):
        return np.hypot(self.std[:, 0], self.std[:, 1])

    @property
    def mean_diff_xy(self):
        return np.hypot(self.mean_diff[:, 0], self.mean_diff[:, 1])

    CSV_COLUMNS = ("landmark", "axis", "mean_diff", "std", "sdd")

    def rows(self):
        """One row per landmark per axis (x, y, and the Euclidean aggregate xy)."""
        for i in range(self.n_landmarks):
            yield (i + 1, "x", self.mean_diff[i, 0], self.std[i, 0], self.sdd[i, 0])
            yield (i + 1, "y", self.mean_diff[i, 1], self.std[i, 1], self.sdd[i, 1])
            yield (i + 1, "xy", self.mean_diff_xy[i], self.std_xy[i], self.sdd_xy[i])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for lm, axis, m, s, q in self.rows():
            w.writerow([lm, axis, repr(float(m)), repr(float(s)), repr(float(q))])
        return buf.getvalue()

    def to_dict(self):
        return {
            "d_used": self.d_used,
            "n_frames": self.n_frames,
            "n_landmarks": self.n_landmarks,
            "nme_mean": float(np.mean(self.nme)),
            "nme": self.nme.tolist(),
            "mean_diff": self.mean_diff.tolist(),
            "std": self.std.tolist(),
            "sdd": self.sdd.tolist(),
            "sdd_xy": self.sdd_xy.tolist(),
            "hist_edges": self.hist_edges.tolist(),
            "hist_counts": self.hist_counts.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def histogram_csv(self, i):
        """Counts matrix of landmark ``i`` (0-based): rows are y bins, columns x bins.

        The first row and column carry the bin centers.
        """
        e = self.hist_edges[i]
        centers = (e[:-1] + e[1:]) / 2
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["y\\x"] + [repr(float(c)) for c in centers])
        for yb in range(len(centers)):
            w.writerow([repr(float(centers[yb]))] + [int(c) for c in self.hist_counts[i][:, yb]])
        return buf.getvalue()


def noise_report(pred_track, gt_track, bins=21, d=None):
    """Assemble mean difference, STD, SDD and 2D histograms for a track pair.

    ``d`` defaults to the mean outer ocular distance of the ground-truth track.
    """
    _check_pair(pred_track, gt_track)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if d is None:
        d = mean_ocular_distance(gt_track)
    _check_d(d)
    pred = _stack(pred_track)
    gt = _stack(gt_track)
    diff = (pred - gt) / d
    edges, counts = symmetric_histograms(diff, bins)
    return StabilityReport(
        mean_diff=diff.mean(axis=0),
        std=_sample_std(pred) / d,
        sdd=_diff_std(pred, gt) / d,
        hist_edges=edges,
        hist_counts=counts,
        nme=track_nme(pred_track, gt_track),
        d_used=float(d),
        n_frames=len(pred_track),
    )
