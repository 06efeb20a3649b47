"""A noisy stand-in for a landmark detector, and noise-sweep experiments."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fusion import FusionParams, stabilize_sequence
from .geometry import LandmarkSet, mean_ocular_distance
from .metrics import sdd, track_nme
from .noise import NoiseSpec, inject

THREADS_ENV = "LANDMARK_STAB_THREADS"


def max_threads():
    """Worker cap from ``LANDMARK_STAB_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class DetectorSpec:
    """Detections are ground truth + ``bias`` + AR(1) jitter drawn from ``noise``.

    ``temporal_correlation`` is the AR(1) coefficient; 0 gives independent
    per-frame noise.
    """

    noise: NoiseSpec
    bias: tuple = (0.0, 0.0)
    temporal_correlation: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.temporal_correlation < 1.0:
            raise ValueError("temporal_correlation must lie in [0, 1)")
        b = tuple(float(v) for v in self.bias)
        if len(b) != 2 or not all(math.isfinite(v) for v in b):
            raise ValueError("bias must be a finite (dx, dy) pair")
        object.__setattr__(self, "bias", b)


def _frame_specs(noise, n):
    seeds = np.random.SeedSequence(noise.seed).spawn(n)
    return [noise.with_seed(int(s.generate_state(1)[0])) for s in seeds]


def simulate_detections(gt_track, spec):
    if len(gt_track) == 0:
        raise ValueError("empty ground-truth track")
    rho = spec.temporal_correlation
    innov = math.sqrt(1.0 - rho * rho)
    bias = np.array(spec.bias)
    out = []
    jitter = None
    for gt, fs in zip(gt_track, _frame_specs(spec.noise, len(gt_track))):
        eps = inject(gt, fs).points.points - gt.points
        jitter = eps if jitter is None else rho * jitter + innov * eps
        out.append(LandmarkSet(gt.points + bias + jitter, gt.layout))
    return out


@dataclass(frozen=True, eq=False)
class SweepCell:
    sigma: float
    seed: int
    nme_raw: float
    nme_fused: float
    sdd_raw: np.ndarray  # (N, 2), normalized
    sdd_fused: np.ndarray

    @property
    def mean_sdd_raw(self):
        return float(np.mean(self.sdd_raw))

    @property
    def mean_sdd_fused(self):
        return float(np.mean(self.sdd_fused))


SWEEP_COLUMNS = ("sigma", "seed", "nme_raw", "nme_fused", "mean_sdd_raw", "mean_sdd_fused")


@dataclass(frozen=True, eq=False)
class SweepReport:
    cells: tuple = field(default_factory=tuple)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for c in self.cells:
            w.writerow(
                [
                    repr(c.sigma),
                    c.seed,
                    repr(c.nme_raw),
                    repr(c.nme_fused),
                    repr(c.mean_sdd_raw),
                    repr(c.mean_sdd_fused),
                ]
            )
        return buf.getvalue()

    @staticmethod
    def landmark_csv(cell):
        """Per-landmark SDD of one cell, raw vs fused, X and Y."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["landmark", "sdd_raw_x", "sdd_raw_y", "sdd_fused_x", "sdd_fused_y"])
        for i, (r, f) in enumerate(zip(cell.sdd_raw, cell.sdd_fused), start=1):
            w.writerow([i, repr(float(r[0])), repr(float(r[1])), repr(float(f[0])), repr(float(f[1]))])
        return buf.getvalue()

    def sigmas(self):
        return sorted({c.sigma for c in self.cells})

    def by_sigma(self, attr):
        """Seed-averaged value of a cell attribute for every sigma."""
        return {
            s: float(np.mean([getattr(c, attr) for c in self.cells if c.sigma == s]))
            for s in self.sigmas()
        }

    def mean_landmark_sdd(self, sigma):
        """Seed-averaged per-landmark (raw, fused) SDD arrays for one sigma."""
        cells = [c for c in self.cells if c.sigma == sigma]
        return np.mean([c.sdd_raw for c in cells], axis=0), np.mean([c.sdd_fused for c in cells], axis=0)


def run_cell(seq, gt, d, sigma, seed, params, noise_kind="gaussian"):
    noise = NoiseSpec(noise_kind, sigma=sigma, seed=seed)
    det = simulate_detections(gt, DetectorSpec(noise))
    fused = stabilize_sequence(seq.with_track("detected", det), "detected", params).landmarks
    return SweepCell(
        sigma=float(sigma),
        seed=int(seed),
        nme_raw=float(np.mean(track_nme(det, gt))),
        nme_fused=float(np.mean(track_nme(fused, gt))),
        sdd_raw=sdd(det, gt, d),
        sdd_fused=sdd(fused, gt, d),
    )


def run_noise_sweep(seq, sigmas, params=FusionParams(), seeds=(0,), gt_label="gt"):
    """Raw vs fused NME and SDD for every (sigma, seed) on the frames of ``seq``.

    ``sigma`` is the Gaussian detector noise as a fraction of the face's
    outer ocular distance. Cells are ordered by (sigma, seed).
    """
    gt = seq.track(gt_label)
    if not gt or not sigmas or not seeds:
        raise ValueError("need a ground-truth track, sigmas and seeds")
    d = mean_ocular_distance(gt)
    jobs = sorted((float(s), int(k)) for s in sigmas for k in seeds)
    threads = max_threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cells = list(pool.map(lambda sk: run_cell(seq, gt, d, sk[0], sk[1], params), jobs))
    else:
        cells = [run_cell(seq, gt, d, s, k, params) for s, k in jobs]
    return SweepReport(tuple(cells))
