"""Landmark jitter metrics, annotation-noise models and detection/tracking fusion."""

__version__ = "0.1.0"

from .augmentation import (
    Storyboard,
    StoryboardState,
    generate_pseudo_video,
    interpolate_state,
    render_frame,
)
from .detector import DetectorSpec, run_noise_sweep, simulate_detections
from .flow import FlowParams, TrackResult, build_pyramid, forward_backward, track_points
from .fusion import (
    FusedTrack,
    FusionParams,
    alpha_weight,
    correct_dataset,
    fuse_frame,
    stabilize_sequence,
)
from .geometry import (
    FrameSequence,
    Homography,
    ImageBuffer,
    LandmarkSet,
    Point2,
    apply_homography,
    outer_ocular_distance,
    parse_pts,
    serialize_pts,
    warp_image,
)
from .metrics import StabilityReport, nme, noise_report, per_point_std, sdd
from .noise import (
    NoiseSpec,
    NoisySample,
    estimator_mean,
    estimator_median,
    estimator_mode,
    inject,
    zero_mean_test,
)
