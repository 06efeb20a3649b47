"""Sparse pyramidal Lucas-Kanade point tracking and forward-backward checks.

Coarse-to-fine iterative LK: at every pyramid level the displacement
increment solves the 2x2 normal equations built from the window's
structure tensor. Windows are sampled bilinearly and spatial gradients use
central differences. All points are tracked together with vectorized
numpy, so a result never depends on processing order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .geometry import ImageBuffer, Point2

_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
MIN_LEVEL_SIZE = 8

OK = "ok"
LOST = "lost"


@dataclass(frozen=True)
class FlowParams:
    window: int = 10
    pyramid_levels: int = 3
    max_iters: int = 30
    epsilon: float = 0.01
    min_eigen: float = 1e-4

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.min_eigen < 0:
            raise ValueError("min_eigen must be >= 0")


@dataclass(frozen=True, eq=False)
class TrackResult:
    """Tracked positions as an (M, 2) array, a per-point ok flag and residuals."""

    xy: np.ndarray
    ok: np.ndarray
    residual: np.ndarray

    @property
    def points(self):
        return [Point2(*p) for p in self.xy]

    @property
    def status(self):
        return [OK if s else LOST for s in self.ok]

    def __len__(self):
        return len(self.xy)


@dataclass(frozen=True, eq=False)
class ForwardBackward:
    forward: TrackResult
    back_xy: np.ndarray
    fb_error: np.ndarray

    @property
    def back_points(self):
        return [Point2(*p) for p in self.back_xy]


def _as_gray(img):
    if isinstance(img, ImageBuffer):
        return np.asarray(img.gray(), dtype=np.float64)
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 3:
        a = a @ np.array([0.299, 0.587, 0.114])
    return a


def build_pyramid(img, levels):
    """Gaussian pyramid: level 0 is the input, each next level is blurred and halved.

    Returns a list of 2D float arrays. Color input is converted to luminance.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    g = _as_gray(img)
    h, w = g.shape
    if min(h, w) >> (levels - 1) < MIN_LEVEL_SIZE:
        raise ValueError(
            f"{w}x{h} image is too small for {levels} pyramid levels "
            f"(each level must be at least {MIN_LEVEL_SIZE}x{MIN_LEVEL_SIZE})"
        )
    pyr = [g]
    for _ in range(levels - 1):
        b = ndimage.convolve1d(pyr[-1], _KERNEL, axis=0, mode="reflect")
        b = ndimage.convolve1d(b, _KERNEL, axis=1, mode="reflect")
        pyr.append(b[::2, ::2])
    return pyr


def _gradients(a):
    # central differences inside, one-sided at the border
    gy, gx = np.gradient(a)
    return gx, gy


class _Level:
    __slots__ = ("img", "gx", "gy", "_padded")

    def __init__(self, img):
        self.img = img
        self.gx, self.gy = _gradients(img)
        self._padded = {}

    def padded(self, pad):
        """(img, gx, gy) stacked and edge-padded by ``pad`` pixels, cached."""
        if pad not in self._padded:
            stack = np.stack([self.img, self.gx, self.gy])
            self._padded[pad] = np.pad(stack, ((0, 0), (pad, pad), (pad, pad)), mode="edge")
        return self._padded[pad]


class Pyramid:
    """Pyramid of one frame with cached gradients, reusable across tracking calls."""

    def __init__(self, img, levels):
        self.levels = [_Level(a) for a in build_pyramid(img, levels)]
        self.shape = self.levels[0].img.shape

    def __len__(self):
        return len(self.levels)


def _windows(padded, pad, r, cx, cy, planes):
    """Bilinear samples of the (2r+1)^2 window around each center (cx, cy).

    ``padded`` is a level from :meth:`_Level.padded`; ``planes`` selects
    which of (img, gx, gy) to sample. Returns arrays of shape (M, K).
    Samples beyond the image border take the nearest edge value.
    """
    k = 2 * r + 2
    _, hp, wp = padded.shape
    fx0 = np.floor(cx)
    fy0 = np.floor(cy)
    fx = (cx - fx0)[:, None, None]
    fy = (cy - fy0)[:, None, None]
    x0 = np.clip(fx0.astype(np.intp) - r + pad, 0, wp - k)
    y0 = np.clip(fy0.astype(np.intp) - r + pad, 0, hp - k)
    out = []
    for c in planes:
        blocks = sliding_window_view(padded[c], (k, k))[y0, x0]
        top = blocks[:, :-1, :-1] + (blocks[:, :-1, 1:] - blocks[:, :-1, :-1]) * fx
        bot = blocks[:, 1:, :-1] + (blocks[:, 1:, 1:] - blocks[:, 1:, :-1]) * fx
        out.append((top + (bot - top) * fy).reshape(len(cx), -1))
    return out


def _track(prev, nxt, xy, params):
    """Track points ``xy`` (M, 2) from pyramid ``prev`` to pyramid ``nxt``."""
    r = params.window
    pad = r + 2
    npix = (2 * r + 1) ** 2

    m = len(xy)
    n_levels = min(len(prev), len(nxt))
    guess = np.zeros((m, 2))
    ok = np.ones(m, dtype=bool)

    for lvl in range(n_levels - 1, -1, -1):
        P = prev.levels[lvl].padded(pad)
        N = nxt.levels[lvl].padded(pad)
        scale = 0.5**lvl
        px = xy[:, 0] * scale
        py = xy[:, 1] * scale
        tmpl, ix, iy = _windows(P, pad, r, px, py, (0, 1, 2))
        gxx = np.sum(ix * ix, axis=1)
        gxy = np.sum(ix * iy, axis=1)
        gyy = np.sum(iy * iy, axis=1)
        det = gxx * gyy - gxy * gxy
        tr = gxx + gyy
        min_eig = 0.5 * (tr - np.sqrt(np.maximum((gxx - gyy) ** 2 + 4 * gxy * gxy, 0.0))) / npix
        solvable = min_eig >= max(params.min_eigen, 1e-12)
        if lvl == 0:
            ok &= solvable

        v = np.zeros((m, 2))
        active = solvable.copy()
        safe_det = np.where(solvable, det, 1.0)
        for _ in range(params.max_iters):
            if not active.any():
                break
            a = np.flatnonzero(active)
            qx = px[a] + guess[a, 0] + v[a, 0]
            qy = py[a] + guess[a, 1] + v[a, 1]
            diff = tmpl[a] - _windows(N, pad, r, qx, qy, (0,))[0]
            bx = np.sum(diff * ix[a], axis=1)
            by = np.sum(diff * iy[a], axis=1)
            d = safe_det[a]
            ex = (gyy[a] * bx - gxy[a] * by) / d
            ey = (gxx[a] * by - gxy[a] * bx) / d
            v[a, 0] += ex
            v[a, 1] += ey
            converged = np.hypot(ex, ey) < params.epsilon
            active[a[converged]] = False

        if lvl > 0:
            guess = 2.0 * (guess + v)
        else:
            guess = guess + v

    out = xy + guess
    h, w = prev.shape
    inside = (out[:, 0] >= 0) & (out[:, 0] <= w - 1) & (out[:, 1] >= 0) & (out[:, 1] <= h - 1)
    ok &= inside & np.all(np.isfinite(out), axis=1)
    out = np.where(np.isfinite(out), out, xy)

    P0 = prev.levels[0].padded(pad)
    N0 = nxt.levels[0].padded(pad)
    (t0,) = _windows(P0, pad, r, xy[:, 0], xy[:, 1], (0,))
    (t1,) = _windows(N0, pad, r, out[:, 0], out[:, 1], (0,))
    residual = np.mean(np.abs(t0 - t1), axis=1)
    return TrackResult(out, ok, residual)


def _points_array(pts):
    xy = np.asarray([tuple(p) for p in pts], dtype=np.float64).reshape(-1, 2)
    if len(xy) == 0:
        raise ValueError("empty point list")
    return xy


def _check_pair(prev, nxt):
    if prev.shape != nxt.shape:
        raise ValueError(f"frame sizes differ: {prev.shape} vs {nxt.shape}")


def track_pyramids(prev, nxt, pts, params=FlowParams()):
    """Like :func:`track_points` but on prebuilt :class:`Pyramid` objects."""
    _check_pair(prev, nxt)
    return _track(prev, nxt, _points_array(pts), params)


def forward_backward_pyramids(prev, nxt, pts, params=FlowParams()):
    _check_pair(prev, nxt)
    xy = _points_array(pts)
    fwd = _track(prev, nxt, xy, params)
    back = _track(nxt, prev, fwd.xy, params)
    err = np.hypot(*(back.xy - xy).T)
    err = np.where(fwd.ok & back.ok, err, np.inf)
    return ForwardBackward(fwd, back.xy, err)


def _pyramids(prev, nxt, params):
    a, b = _as_gray(prev), _as_gray(nxt)
    if a.shape != b.shape:
        raise ValueError(f"frame sizes differ: {a.shape} vs {b.shape}")
    return Pyramid(a, params.pyramid_levels), Pyramid(b, params.pyramid_levels)


def track_points(prev, nxt, pts, params=FlowParams()):
    """Track ``pts`` from image ``prev`` to image ``nxt``.

    A point is lost when the finest-level structure tensor (averaged over
    the window) has minimum eigenvalue below ``params.min_eigen``, or when
    it leaves the image.
    """
    _points_array(pts)
    P, N = _pyramids(prev, nxt, params)
    return track_pyramids(P, N, pts, params)


def forward_backward(prev, nxt, pts, params=FlowParams()):
    """Track forward then back; ``fb_error`` is the round-trip distance (inf if lost)."""
    _points_array(pts)
    P, N = _pyramids(prev, nxt, params)
    return forward_backward_pyramids(P, N, pts, params)
