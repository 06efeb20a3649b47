import json
import math

import numpy as np
import pytest

from landmark_stab.augmentation import (
    Storyboard,
    StoryboardState,
    generate_pseudo_video,
    generate_pseudo_video_full,
    geometric_homography,
    interpolate_state,
    motion_blur_kernel,
    render_frame,
    static_storyboard,
    write_pseudo_video,
)
from landmark_stab.geometry import Homography, apply_homography, read_png, read_pts
from landmark_stab.metrics import per_point_std

PHOTOMETRIC = Storyboard(
    StoryboardState(brightness_gain=0.8, brightness_offset=-0.05, blur_sigma=0.0),
    StoryboardState(
        brightness_gain=1.2,
        brightness_offset=0.1,
        pixel_noise_sigma=0.03,
        blur_sigma=1.5,
        motion_blur_length=5.0,
        motion_blur_angle=0.7,
    ),
    n_frames=8,
    seed=4,
)


def _translation_board(n=11):
    return Storyboard(
        StoryboardState(),
        StoryboardState(geometric=Homography.translation(10.0, 0.0)),
        n_frames=n,
    )


class TestStates:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"brightness_gain": 0.0},
            {"brightness_offset": 2.0},
            {"pixel_noise_sigma": -0.1},
            {"blur_sigma": -1.0},
            {"motion_blur_length": -2.0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            StoryboardState(**kwargs)

    @pytest.mark.parametrize("kwargs", [{"n_frames": 0}, {"n_frames": 3, "fps": 0.0}])
    def test_invalid_storyboard(self, kwargs):
        with pytest.raises(ValueError):
            Storyboard(StoryboardState(), StoryboardState(), **kwargs)

    def test_json_round_trip(self):
        sb = Storyboard(
            StoryboardState(blur_sigma=1.0),
            StoryboardState(geometric=Homography.rotation(0.1, (10, 10))),
            n_frames=5,
            seed=9,
        )
        back = Storyboard.from_json(sb.to_json())
        assert back.to_json() == sb.to_json()

    def test_parametric_geometry(self):
        d = {"geometric": {"scale": 1.1, "rotation": 0.2, "translation": [3, -1]}}
        st = StoryboardState.from_dict(d, size=(64, 48))
        H = geometric_homography((64, 48), scale=1.1, rotation=0.2, translation=(3, -1))
        np.testing.assert_allclose(st.geometric.matrix, H.matrix, rtol=1e-12)
        with pytest.raises(ValueError):
            StoryboardState.from_dict(d)

    def test_unknown_field(self):
        with pytest.raises(ValueError):
            StoryboardState.from_dict({"gamma": 2.0})

    def test_endpoints_exact(self):
        sb = PHOTOMETRIC
        assert interpolate_state(sb, 1) == sb.start
        assert interpolate_state(sb, sb.n_frames) == sb.end

    def test_midpoint_scalars(self):
        sb = Storyboard(StoryboardState(blur_sigma=0.0), StoryboardState(blur_sigma=2.0), n_frames=3)
        assert interpolate_state(sb, 2).blur_sigma == 1.0

    def test_single_frame(self):
        sb = Storyboard(StoryboardState(), StoryboardState(blur_sigma=2.0), n_frames=1)
        assert interpolate_state(sb, 1) == sb.start

    def test_shortest_arc(self):
        sb = Storyboard(
            StoryboardState(motion_blur_angle=math.radians(170)),
            StoryboardState(motion_blur_angle=math.radians(-170)),
            n_frames=3,
        )
        angle = interpolate_state(sb, 2).motion_blur_angle
        assert math.cos(angle) == pytest.approx(-1.0, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            interpolate_state(PHOTOMETRIC, 0)


class TestRender:
    def test_motion_kernel(self):
        k = motion_blur_kernel(5.0, 0.0)
        assert k.sum() == pytest.approx(1.0)
        c = k.shape[0] // 2
        # horizontal line: only the center row carries weight
        assert np.count_nonzero(k[c]) == np.count_nonzero(k)
        np.testing.assert_allclose(motion_blur_kernel(5.0, math.pi / 2), k.T, atol=1e-12)

    def test_photometric_keeps_landmarks(self, face):
        img, lms = face
        st = interpolate_state(PHOTOMETRIC, PHOTOMETRIC.n_frames)
        r = render_frame(img, lms, st, frame_seed=0)
        assert r.landmarks == lms
        assert r.image != img

    def test_identity_state(self, face):
        img, lms = face
        r = render_frame(img, lms, StoryboardState(), 0)
        assert r.image == img and r.landmarks == lms and r.outside == ()

    def test_outside_flagged(self, face):
        img, lms = face
        r = render_frame(img, lms, StoryboardState(geometric=Homography.translation(200, 0)), 0)
        assert len(r.outside) > 0
        assert all(r.landmarks.points[i, 0] > img.width - 1 for i in r.outside)


class TestPseudoVideo:
    def test_single_identity_frame(self, face):
        img, lms = face
        seq = generate_pseudo_video(img, lms, static_storyboard(1))
        assert seq.frames == (img,)
        assert seq.track("gt") == (lms,)

    def test_photometric_gt_constant(self, face):
        img, lms = face
        seq = generate_pseudo_video(img, lms, PHOTOMETRIC)
        assert all(g == lms for g in seq.track("gt"))
        assert np.all(per_point_std(seq.track("gt"), 100.0) == 0.0)

    def test_translation_linear(self, face):
        img, lms = face
        seq = generate_pseudo_video(img, lms, _translation_board())
        gt = seq.track("gt")
        for j, g in enumerate(gt):
            np.testing.assert_allclose(g.points[:, 0], lms.points[:, 0] + j, rtol=0, atol=1e-9)
            np.testing.assert_allclose(g.points[:, 1], lms.points[:, 1], rtol=0, atol=1e-9)

    def test_gt_matches_state_homography(self, face):
        img, lms = face
        sb = Storyboard(
            StoryboardState(geometric=Homography.rotation(-0.1, (128, 128))),
            StoryboardState(geometric=geometric_homography((256, 256), 1.2, 0.3, (5, -4))),
            n_frames=6,
        )
        video = generate_pseudo_video_full(img, lms, sb)
        for g, st in zip(video.sequence.track("gt"), video.states):
            np.testing.assert_allclose(g.points, apply_homography(lms, st.geometric).points, atol=1e-9)

    def test_deterministic(self, face):
        img, lms = face
        a = generate_pseudo_video(img, lms, PHOTOMETRIC)
        b = generate_pseudo_video(img, lms, PHOTOMETRIC)
        assert all(x == y for x, y in zip(a.frames, b.frames))

    def test_seed_changes_noise(self, face):
        img, lms = face
        a = generate_pseudo_video(img, lms, static_storyboard(2, 0.02, seed=0))
        b = generate_pseudo_video(img, lms, static_storyboard(2, 0.02, seed=1))
        assert a.frames[0] != b.frames[0]
        assert a.frames[0] != a.frames[1]

    def test_write(self, face, tmp_path):
        img, lms = face
        sb = _translation_board(3)
        video = generate_pseudo_video_full(img, lms, sb)
        write_pseudo_video(video, tmp_path, sb)
        manifest = json.loads((tmp_path / "sequence.json").read_text())
        assert manifest["n_frames"] == 3
        assert [f["image"] for f in manifest["frames"]] == [f"frame_{j:05d}.png" for j in (1, 2, 3)]
        back = read_pts(tmp_path / "frame_00003.pts")
        np.testing.assert_allclose(back.points, video.sequence.track("gt")[2].points, atol=1e-6)
        assert read_png(tmp_path / "frame_00001.png").size == img.size
