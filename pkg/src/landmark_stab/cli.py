"""Command-line workflows: metrics, inject, augment, stabilize, correct, sweep.

Exit codes: 0 success, 1 usage error (bad flags or config), 2 data error
(missing, misaligned or malformed input files).

Frames and annotations are paired by the last run of digits in their file
names (``frame_00012.png`` <-> ``frame_00012.pts``); there is no fuzzy
matching.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .augmentation import Storyboard, generate_pseudo_video_full, static_storyboard, write_pseudo_video
from .detector import SweepReport, run_noise_sweep
from .fusion import FusionParams, correct_dataset, stabilize_sequence
from .geometry import FrameSequence, read_png, read_pts, serialize_pts
from .metrics import noise_report
from .noise import NoiseSpec, inject
from .report import atomic_write, noise_bar_svg, sdd_comparison_svg
from .synthetic import synthetic_face

log = logging.getLogger("landmark_stab")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    """The resolved parameters of one command, written next to its outputs."""

    command: str
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def to_json(self):
        return json.dumps(
            {"command": self.command, "params": self.params, "seed": self.seed},
            indent=1,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["command"], d.get("params", {}), d.get("seed"))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_NUM = re.compile(r"(\d+)(?!.*\d)")


def _index_dir(directory, suffix):
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"not a directory: {d}")
    out = {}
    for p in sorted(d.iterdir()):
        if p.suffix.lower() != suffix or not p.is_file():
            continue
        m = _NUM.search(p.stem)
        if not m:
            raise DataError(f"no frame number in file name: {p}")
        k = int(m.group(1))
        if k in out:
            raise DataError(f"duplicate frame number {k}: {out[k]} and {p}")
        out[k] = p
    if not out:
        raise DataError(f"no *{suffix} files in {d}")
    return out


def _pair(a, b, a_name, b_name):
    missing_b = sorted(set(a) - set(b))
    missing_a = sorted(set(b) - set(a))
    if missing_a or missing_b:
        lines = [f"{a_name} / {b_name} frames do not line up:"]
        lines += [f"  missing in {b_name}: {a[k]}" for k in missing_b]
        lines += [f"  missing in {a_name}: {b[k]}" for k in missing_a]
        raise DataError("\n".join(lines))
    return sorted(a)


def _read_pts_files(paths):
    try:
        return [read_pts(p) for p in paths]
    except ValueError as exc:
        raise DataError(f"{exc}") from exc


def _load_json(path_or_none, what):
    if path_or_none is None:
        return {}
    try:
        return json.loads(Path(path_or_none).read_text())
    except FileNotFoundError:
        raise UsageError(f"{what} config not found: {path_or_none}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} config is not valid JSON: {exc}") from None


def _write_run(out, cfg):
    atomic_write(Path(out) / "run.json", cfg.to_json() + "\n")


# --------------------------------------------------------------------------

def cmd_metrics(args):
    pred = _index_dir(args.pred, ".pts")
    gt = _index_dir(args.gt, ".pts")
    keys = _pair(pred, gt, "pred", "gt")
    pred_track = _read_pts_files([pred[k] for k in keys])
    gt_track = _read_pts_files([gt[k] for k in keys])
    try:
        rep = noise_report(pred_track, gt_track, bins=args.bins)
    except ValueError as exc:
        raise DataError(str(exc)) from exc

    out = Path(args.out)
    if args.format in (None, "csv"):
        atomic_write(out / "report.csv", rep.to_csv())
    if args.format in (None, "json"):
        atomic_write(out / "report.json", rep.to_json() + "\n")
    for i in range(rep.n_landmarks):
        atomic_write(out / "histograms" / f"landmark_{i + 1:02d}.csv", rep.histogram_csv(i))
    atomic_write(out / "noise.svg", noise_bar_svg(rep))
    _write_run(out, RunConfig("metrics", {"pred": str(args.pred), "gt": str(args.gt), "bins": args.bins}))
    log.info("mean NME %.6f, mean SDD %.6f", float(np.mean(rep.nme)), float(np.mean(rep.sdd)))
    return EXIT_OK


def cmd_inject(args):
    cfg = _load_json(args.config, "noise")
    try:
        spec = NoiseSpec.from_dict(cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid noise spec: {exc}") from None
    files = _index_dir(args.gt, ".pts")
    out = Path(args.out)
    mask_rows = ["file,landmark,valid"]
    for k in sorted(files):
        src = files[k]
        lms = _read_pts_files([src])[0]
        frame_seed = int(np.random.SeedSequence([args.seed, k]).generate_state(1)[0])
        try:
            noisy = inject(lms, spec.with_seed(frame_seed))
        except ValueError as exc:
            raise DataError(f"{src}: {exc}") from exc
        atomic_write(out / src.name, serialize_pts(noisy.points) + "\n")
        mask_rows += [f"{src.name},{i + 1},{int(v)}" for i, v in enumerate(noisy.mask)]
    atomic_write(out / "mask.csv", "\n".join(mask_rows) + "\n")
    _write_run(out, RunConfig("inject", {"gt": str(args.gt), "noise": spec.to_dict()}, args.seed))
    return EXIT_OK


def cmd_augment(args):
    cfg = _load_json(args.config, "storyboard")
    try:
        img = read_png(args.image)
        lms = read_pts(args.pts)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    cfg = dict(cfg, seed=args.seed)
    try:
        sb = Storyboard.from_dict(cfg, img.size)
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"invalid storyboard: {exc}") from None
    try:
        video = generate_pseudo_video_full(img, lms, sb)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    write_pseudo_video(video, args.out, sb)
    for j, idx in enumerate(video.outside, start=1):
        if idx:
            log.warning("frame %d: landmarks %s left the image", j, [i + 1 for i in idx])
    _write_run(
        args.out,
        RunConfig("augment", {"image": str(args.image), "pts": str(args.pts), "storyboard": sb.to_dict()}, args.seed),
    )
    return EXIT_OK


def _fusion_params(path):
    cfg = _load_json(path, "fusion")
    try:
        return FusionParams.from_dict(cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid fusion parameters: {exc}") from None


def _fuse_dirs(args, track_dir, label, command):
    params = _fusion_params(args.config)
    frames = _index_dir(args.frames, ".png")
    anns = _index_dir(track_dir, ".pts")
    keys = _pair(frames, anns, "frames", label)
    track = _read_pts_files([anns[k] for k in keys])
    try:
        images = [read_png(frames[k]) for k in keys]
        seq = FrameSequence(tuple(images), {label: tuple(track)})
        fn = correct_dataset if command == "correct" else stabilize_sequence
        fused = fn(seq, label, params)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    fused.write(args.out, names=[anns[k].name for k in keys])
    _write_run(
        args.out,
        RunConfig(command, {"frames": str(args.frames), label: str(track_dir), "fusion": params.to_dict()}),
    )
    return EXIT_OK


def cmd_stabilize(args):
    return _fuse_dirs(args, args.detections, "detected", "stabilize")


def cmd_correct(args):
    return _fuse_dirs(args, args.annotations, "annotations", "correct")


SWEEP_DEFAULTS = {
    "sigmas": [0.0, 0.01, 0.02, 0.03],
    "seeds": [0, 1, 2],
    "n_frames": 100,
    "pixel_noise_sigma": 0.01,
    "width": 256,
    "height": 256,
    "ocular": 100.0,
    "fusion": {},
}


def cmd_sweep(args):
    cfg = dict(SWEEP_DEFAULTS)
    user = _load_json(args.config, "sweep")
    unknown = set(user) - set(SWEEP_DEFAULTS) - {"image", "pts", "storyboard"}
    if unknown:
        raise UsageError(f"unknown sweep config fields: {sorted(unknown)}")
    cfg.update(user)
    try:
        sigmas = [float(s) for s in cfg["sigmas"]]
        seeds = [int(s) for s in cfg["seeds"]]
        params = FusionParams.from_dict(cfg["fusion"])
        if not sigmas or not seeds or min(sigmas) < 0:
            raise ValueError("need non-empty sigmas (>= 0) and seeds")
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid sweep config: {exc}") from None

    if "image" in cfg:
        try:
            img, lms = read_png(cfg["image"]), read_pts(cfg["pts"])
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"cannot load sweep face: {exc}") from exc
    else:
        img, lms = synthetic_face(int(cfg["width"]), int(cfg["height"]), float(cfg["ocular"]), seed=args.seed)
    try:
        if "storyboard" in cfg:
            sb = Storyboard.from_dict(dict(cfg["storyboard"], seed=args.seed), img.size)
        else:
            sb = static_storyboard(int(cfg["n_frames"]), float(cfg["pixel_noise_sigma"]), seed=args.seed)
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"invalid sweep storyboard: {exc}") from None

    seq = generate_pseudo_video_full(img, lms, sb).sequence
    rep = run_noise_sweep(seq, sigmas, params, seeds)

    out = Path(args.out)
    atomic_write(out / "sweep.csv", rep.to_csv())
    for c in rep.cells:
        atomic_write(out / "cells" / f"sigma_{c.sigma:g}_seed_{c.seed}.csv", SweepReport.landmark_csv(c))
    top = max(sigmas)
    raw, fused = rep.mean_landmark_sdd(top)
    atomic_write(
        out / "sweep.svg",
        sdd_comparison_svg([raw, fused], ["raw", "fused"], title=f"SDD per landmark, sigma={top:g}"),
    )
    _write_run(out, RunConfig("sweep", {k: cfg[k] for k in sorted(cfg)} | {"fusion": params.to_dict()}, args.seed))
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="landmark-stab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("metrics", help="NME / STD / SDD report of predicted vs ground-truth pts")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--bins", type=int, default=21)
    s.add_argument("--format", choices=("csv", "json"), default=None, help="default: both")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("inject", help="add configured noise to a directory of pts files")
    s.add_argument("--gt", required=True)
    s.add_argument("--config", required=True, help="NoiseSpec JSON")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_inject)

    s = sub.add_parser("augment", help="render a storyboard pseudo-video from one image")
    s.add_argument("--image", required=True)
    s.add_argument("--pts", required=True)
    s.add_argument("--config", required=True, help="storyboard JSON")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_augment)

    for name, track, helptext in (
        ("stabilize", "--detections", "fuse per-frame detections with optical flow"),
        ("correct", "--annotations", "correct jittery video annotations"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--frames", required=True)
        s.add_argument(track, required=True)
        s.add_argument("--config", default=None, help="fusion parameters JSON")
        s.add_argument("--out", required=True)
        s.set_defaults(func=cmd_stabilize if name == "stabilize" else cmd_correct)

    s = sub.add_parser("sweep", help="raw vs fused NME/SDD over detector noise levels")
    s.add_argument("--config", default=None, help="sweep JSON")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"landmark-stab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"landmark-stab: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
