"""Plain SVG bar charts and atomic file output for reports."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

X_COLOR = "#1f77b4"
Y_COLOR = "#d62728"
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


def atomic_write(path, data):
    """Write text or bytes to ``path`` through a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    return f"{v:.2f}"


class _Canvas:
    def __init__(self, width, height):
        self.width, self.height = width, height
        self.items = []

    def rect(self, x, y, w, h, fill):
        self.items.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" fill="{fill}"/>'
        )

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0):
        self.items.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{stroke}" stroke-width="{width}"/>'
        )

    def text(self, x, y, s, size=10, anchor="middle", rotate=None):
        tr = f' transform="rotate({rotate} {_fmt(x)} {_fmt(y)})"' if rotate is not None else ""
        self.items.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" font-family="sans-serif" '
            f'text-anchor="{anchor}"{tr}>{escape(str(s))}</text>'
        )

    def render(self):
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">'
        )
        bg = f'<rect width="{self.width}" height="{self.height}" fill="#fff"/>'
        return "\n".join([head, bg, *self.items, "</svg>"]) + "\n"


def _panel(c, top, height, left, right, groups, errors, colors, title, ylabel):
    """Grouped bars for every landmark in one panel; returns nothing."""
    values = np.asarray(groups, dtype=np.float64)  # (series, N)
    errs = None if errors is None else np.asarray(errors, dtype=np.float64)
    n_series, n = values.shape
    lo = min(0.0, float(np.min(values - (errs if errs is not None else 0))))
    hi = max(0.0, float(np.max(values + (errs if errs is not None else 0))))
    if hi == lo:
        hi = lo + 1.0
    span = hi - lo

    def ypos(v):
        return top + height * (hi - v) / span

    c.text((left + right) / 2, top - 8, title, size=12)
    c.line(left, top, left, top + height)
    c.line(left, ypos(0.0), right, ypos(0.0))
    for v in np.linspace(lo, hi, 5):
        c.line(left - 4, ypos(v), left, ypos(v))
        c.text(left - 6, ypos(v) + 3, f"{v:.3g}", size=8, anchor="end")
    c.text(left - 40, top + height / 2, ylabel, size=9, rotate=-90)

    slot = (right - left) / n
    bar = slot * 0.8 / n_series
    for i in range(n):
        x0 = left + i * slot + slot * 0.1
        for s in range(n_series):
            v = values[s, i]
            y = ypos(max(v, 0.0))
            c.rect(x0 + s * bar, y, bar, abs(ypos(v) - ypos(0.0)), colors[s % len(colors)])
            if errs is not None:
                xm = x0 + (s + 0.5) * bar
                c.line(xm, ypos(v - errs[s, i]), xm, ypos(v + errs[s, i]), width=0.6)
        if n <= 20 or (i + 1) % 5 == 0 or i == 0:
            c.text(left + (i + 0.5) * slot, top + height + 12, i + 1, size=7)


def noise_bar_svg(report, title="Detection noise per landmark"):
    """Per-landmark X / Y mean difference with SDD whiskers, one chart."""
    width = max(600, 14 * report.n_landmarks + 120)
    c = _Canvas(width, 320)
    means = report.mean_diff.T
    _panel(c, 40, 220, 70, width - 20, means, report.sdd.T, (X_COLOR, Y_COLOR), title, "diff / d")
    c.text(width / 2, 305, "landmark index (blue: X, red: Y; whiskers: SDD)", size=10)
    return c.render()


def sdd_comparison_svg(series, labels, title="SDD per landmark"):
    """Grouped per-landmark SDD bars for several tracks; X on top, Y below.

    ``series`` is a list of (N, 2) arrays, one per label.
    """
    n = np.asarray(series[0]).shape[0]
    width = max(600, 6 * n * len(series) + 120)
    c = _Canvas(width, 560)
    for k, (axis, top) in enumerate((("X", 40), ("Y", 300))):
        vals = [np.asarray(s)[:, k] for s in series]
        _panel(c, top, 200, 70, width - 20, vals, None, PALETTE, f"{title} ({axis})", "SDD")
    for s, label in enumerate(labels):
        x = 80 + 110 * s
        c.rect(x, 540, 10, 10, PALETTE[s % len(PALETTE)])
        c.text(x + 14, 549, label, size=10, anchor="start")
    return c.render()
