"""Value types for landmarks, images and homographies, plus pts / PNG I/O.

Landmark coordinates are continuous pixel positions and are never rounded.
All containers are immutable after construction: the arrays they hold are
marked read-only.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import ndimage

IBUG68_GROUPS = {
    "contour": (1, 17),
    "eyebrows": (18, 27),
    "nose": (28, 36),
    "eyes": (37, 48),
    "mouth": (49, 68),
}

# 1-indexed outer eye corners in the iBUG-68 layout
OUTER_EYE_CORNERS = (37, 46)


class PtsParseError(ValueError):
    """Malformed pts text. ``lineno`` is 1-based."""

    def __init__(self, message, lineno):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class LayoutError(ValueError):
    pass


class DegenerateFaceError(ValueError):
    pass


class SingularMappingError(ValueError):
    pass


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class Point2(NamedTuple):
    x: float
    y: float

    @classmethod
    def of(cls, x, y):
        x, y = float(x), float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite point ({x}, {y})")
        return cls(x, y)


@dataclass(frozen=True, eq=False)
class LandmarkSet:
    """Ordered 2D points of one face in one frame, stored as an (N, 2) array."""

    points: np.ndarray
    layout: str = "ibug68"

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"landmarks must have shape (N, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmark coordinates must be finite")
        layout = self.layout
        if layout == "ibug68" and len(pts) != 68:
            layout = "generic"
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "layout", layout)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return Point2(*self.points[i])

    def __iter__(self):
        return (Point2(*p) for p in self.points)

    def __eq__(self, other):
        if not isinstance(other, LandmarkSet):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(
            np.array_equal(self.points, other.points)
        )

    __hash__ = None

    @property
    def n(self):
        return len(self.points)

    @classmethod
    def from_points(cls, pts):
        return cls(np.asarray([tuple(p) for p in pts], dtype=np.float64).reshape(-1, 2))

    def group(self, name):
        """Points of a named iBUG-68 group (contour, eyebrows, nose, eyes, mouth)."""
        if self.n != 68:
            raise LayoutError("semantic groups are defined for the 68-point layout only")
        lo, hi = IBUG68_GROUPS[name]
        return self.points[lo - 1 : hi]

    def translated(self, dx, dy):
        return LandmarkSet(self.points + np.array([dx, dy]))


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Row-major image with samples in [0, 1]; shape (H, W) or (H, W, 3)."""

    data: np.ndarray

    def __post_init__(self):
        a = _frozen(self.data)
        if a.ndim == 3 and a.shape[2] == 1:
            a = _frozen(a[:, :, 0])
        if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] != 3):
            raise ValueError(f"image must be (H, W) or (H, W, 3), got {a.shape}")
        if a.size == 0:
            raise ValueError("empty image")
        if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
            raise ValueError("image samples must lie in [0, 1]")
        object.__setattr__(self, "data", a)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return 1 if self.data.ndim == 2 else 3

    @property
    def size(self):
        return self.width, self.height

    def gray(self):
        """Luminance as a 2D float array (0.299 R + 0.587 G + 0.114 B)."""
        if self.channels == 1:
            return self.data
        return self.data @ np.array([0.299, 0.587, 0.114])

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Homography:
    """Projective 2D transform, normalized so that ``matrix[2, 2] == 1``."""

    matrix: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise ValueError("homography must be a finite 3x3 matrix")
        if abs(m[2, 2]) < 1e-12:
            raise SingularMappingError("homography has zero bottom-right entry")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-12:
            raise SingularMappingError("homography is not invertible")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx, ty):
        return cls(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]]))

    @classmethod
    def scaling(cls, s, center=(0.0, 0.0)):
        cx, cy = center
        return cls(np.array([[s, 0.0, cx - s * cx], [0.0, s, cy - s * cy], [0.0, 0.0, 1.0]]))

    @classmethod
    def rotation(cls, angle, center=(0.0, 0.0)):
        c, s = math.cos(angle), math.sin(angle)
        cx, cy = center
        return cls(
            np.array(
                [
                    [c, -s, cx - c * cx + s * cy],
                    [s, c, cy - s * cx - c * cy],
                    [0.0, 0.0, 1.0],
                ]
            )
        )

    @classmethod
    def from_correspondences(cls, src, dst):
        """Exact fit from four point correspondences (direct linear transform)."""
        src = np.asarray(src, dtype=np.float64)
        dst = np.asarray(dst, dtype=np.float64)
        if src.shape != (4, 2) or dst.shape != (4, 2):
            raise ValueError("need exactly four correspondences")
        A = np.zeros((8, 8))
        b = np.zeros(8)
        for k, ((x, y), (u, v)) in enumerate(zip(src, dst)):
            A[2 * k] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
            A[2 * k + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
            b[2 * k], b[2 * k + 1] = u, v
        try:
            h = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise SingularMappingError("degenerate corner configuration") from exc
        return cls(np.append(h, 1.0).reshape(3, 3))

    def inverse(self):
        return Homography(np.linalg.inv(self.matrix))

    def __matmul__(self, other):
        # (self @ other) applies other first
        return Homography(self.matrix @ other.matrix)

    def map(self, xy):
        """Map an (M, 2) array of points through the transform."""
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        m = self.matrix
        w = m[2, 0] * xy[:, 0] + m[2, 1] * xy[:, 1] + m[2, 2]
        if np.any(np.abs(w) <= 1e-9):
            raise SingularMappingError("point maps to the line at infinity")
        u = (m[0, 0] * xy[:, 0] + m[0, 1] * xy[:, 1] + m[0, 2]) / w
        v = (m[1, 0] * xy[:, 0] + m[1, 1] * xy[:, 1] + m[1, 2]) / w
        return np.stack([u, v], axis=1)

    def is_identity(self):
        return bool(np.array_equal(self.matrix, np.eye(3)))

    def tolist(self):
        return self.matrix.tolist()


@dataclass(frozen=True)
class FrameSequence:
    """Video frames plus named per-frame landmark tracks."""

    frames: tuple
    tracks: dict
    fps: float = 30.0

    def __post_init__(self):
        frames = tuple(self.frames)
        tracks = {k: tuple(v) for k, v in self.tracks.items()}
        n_pts = None
        for label, track in tracks.items():
            if frames and len(track) != len(frames):
                raise ValueError(
                    f"track {label!r} has {len(track)} entries for {len(frames)} frames"
                )
            for lms in track:
                if n_pts is None:
                    n_pts = lms.n
                elif lms.n != n_pts:
                    raise ValueError("all landmark sets in a sequence must share N")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "tracks", tracks)

    def __len__(self):
        if self.frames:
            return len(self.frames)
        return len(next(iter(self.tracks.values()), ()))

    def track(self, label):
        try:
            return self.tracks[label]
        except KeyError:
            raise KeyError(f"sequence has no track {label!r}; have {sorted(self.tracks)}") from None

    def with_track(self, label, track):
        tracks = dict(self.tracks)
        tracks[label] = tuple(track)
        return FrameSequence(self.frames, tracks, self.fps)


# --------------------------------------------------------------------------
# pts format

_HEADER_VERSION = re.compile(r"^version:\s*(\S+)$")
_HEADER_NPOINTS = re.compile(r"^n_points:\s*(\S+)$")


def parse_pts(text):
    """Parse the 300-W / 300-VW ``.pts`` annotation format."""
    lines = text.splitlines()
    idx = 0

    def next_line():
        nonlocal idx
        while idx < len(lines) and not lines[idx].strip():
            idx += 1
        if idx >= len(lines):
            raise PtsParseError("unexpected end of file", idx + 1)
        idx += 1
        return lines[idx - 1].strip(), idx

    line, no = next_line()
    m = _HEADER_VERSION.match(line)
    if not m:
        raise PtsParseError(f"expected 'version: ...', got {line!r}", no)
    line, no = next_line()
    m = _HEADER_NPOINTS.match(line)
    if not m:
        raise PtsParseError(f"expected 'n_points: K', got {line!r}", no)
    try:
        k = int(m.group(1))
    except ValueError:
        raise PtsParseError(f"non-integer point count {m.group(1)!r}", no) from None
    if k < 0:
        raise PtsParseError("negative point count", no)
    line, no = next_line()
    if line != "{":
        raise PtsParseError(f"expected '{{', got {line!r}", no)

    pts = []
    while True:
        line, no = next_line()
        if line == "}":
            break
        fields = line.split()
        if len(fields) != 2:
            raise PtsParseError(f"expected 'x y', got {line!r}", no)
        try:
            x, y = float(fields[0]), float(fields[1])
        except ValueError:
            raise PtsParseError(f"non-numeric coordinate in {line!r}", no) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise PtsParseError(f"non-finite coordinate in {line!r}", no)
        pts.append((x, y))
    if len(pts) != k:
        raise PtsParseError(f"n_points is {k} but {len(pts)} points were given", no)
    return LandmarkSet(np.array(pts, dtype=np.float64).reshape(-1, 2))


def serialize_pts(lms):
    body = "".join(f"{x:.6f} {y:.6f}\n" for x, y in lms.points)
    return f"version: 1\nn_points: {lms.n}\n{{\n{body}}}"


def read_pts(path):
    return parse_pts(Path(path).read_text())


def write_pts(path, lms):
    Path(path).write_text(serialize_pts(lms) + "\n")


# --------------------------------------------------------------------------
# geometry

def outer_ocular_distance(lms):
    """Distance between the outer eye corners (points 37 and 46, 1-indexed)."""
    if lms.n != 68:
        raise LayoutError(f"outer ocular distance needs the 68-point layout, got N={lms.n}")
    a, b = OUTER_EYE_CORNERS
    d = float(np.hypot(*(lms.points[b - 1] - lms.points[a - 1])))
    if d <= 0.0:
        raise DegenerateFaceError("outer eye corners coincide")
    return d


def mean_ocular_distance(track):
    """Mean outer ocular distance over a track; the video normalizer."""
    return float(np.mean([outer_ocular_distance(l) for l in track]))


def apply_homography(lms, H):
    return LandmarkSet(H.map(lms.points), lms.layout)


def warp_image(img, H):
    """Inverse-mapped bilinear warp; output pixel (x, y) samples source at H^-1 (x, y).

    Pixels whose source position falls outside the input are set to 0.
    """
    Hinv = H.inverse()
    h, w = img.height, img.width
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    m = Hinv.matrix
    wz = m[2, 0] * xx + m[2, 1] * yy + m[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = (m[0, 0] * xx + m[0, 1] * yy + m[0, 2]) / wz
        sy = (m[1, 0] * xx + m[1, 1] * yy + m[1, 2]) / wz
    bad = ~np.isfinite(sx) | ~np.isfinite(sy) | (wz <= 0)
    sx[bad] = -10.0
    sy[bad] = -10.0
    coords = np.stack([sy, sx])

    def sample(channel):
        return ndimage.map_coordinates(channel, coords, order=1, mode="constant", cval=0.0)

    if img.channels == 1:
        out = sample(img.data)
    else:
        out = np.stack([sample(img.data[:, :, c]) for c in range(3)], axis=2)
    return ImageBuffer(np.clip(out, 0.0, 1.0))


# --------------------------------------------------------------------------
# PNG

def read_png(path):
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if "A" in im.mode or im.mode == "P" else "L")
        a = np.asarray(im, dtype=np.float64) / 255.0
    return ImageBuffer(a)


def to_uint8(img):
    return np.round(img.data * 255.0).astype(np.uint8)


def encode_png(img):
    import io

    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(to_uint8(img)).save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def write_png(path, img):
    Path(path).write_bytes(encode_png(img))
