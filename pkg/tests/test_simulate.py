"""Scene simulator: physics, labeling, lifespan filtering, determinism."""

import math

import numpy as np
import pytest

from radar_egoseg import (
    NO_INSTANCE,
    EgoMotionState,
    GroundTruthLabels,
    PointClass,
    RadarExtrinsics,
    RadarFrame,
    SceneConfig,
    apply_lifespan_filter,
    generate_gt_labels,
    observe_point,
    simulate_sequence,
    validate_sequence,
    vehicle_to_radar,
)


class TestObservePoint:
    def test_dead_ahead_landmark_from_moving_radar(self):
        r, az, vr = observe_point(
            radar_xy=np.array([0.0, 0.0]),
            radar_heading_rad=0.0,
            point_xy=np.array([10.0, 0.0]),
            point_vel_xy=(0.0, 0.0),
            radar_vel_xy=np.array([4.0, 0.0]),
        )
        assert r == pytest.approx(10.0)
        assert az == pytest.approx(0.0)
        assert vr == pytest.approx(-4.0)

    def test_stationary_everything_zero_doppler(self):
        r, az, vr = observe_point(
            np.array([1.0, 2.0]), 0.5, np.array([5.0, -3.0]),
            (0.0, 0.0), np.array([0.0, 0.0]),
        )
        assert vr == 0.0

    def test_azimuth_measured_in_radar_frame(self):
        r, az, vr = observe_point(
            np.array([0.0, 0.0]), math.pi / 2, np.array([0.0, 7.0]),
            (0.0, 0.0), np.array([0.0, 0.0]),
        )
        assert az == pytest.approx(0.0)
        assert r == pytest.approx(7.0)

    def test_doppler_equals_range_rate_oracle(self):
        # Independent route: differentiate the distance between moving
        # radar and moving point numerically.
        rng = np.random.default_rng(3)
        for _ in range(20):
            radar0 = rng.uniform(-10, 10, 2)
            point0 = rng.uniform(-30, 30, 2)
            radar_vel = rng.uniform(-10, 10, 2)
            point_vel = rng.uniform(-10, 10, 2)
            heading = rng.uniform(-math.pi, math.pi)
            _, _, vr = observe_point(radar0, heading, point0, point_vel, radar_vel)
            h = 1e-6

            def dist(t):
                return float(
                    np.linalg.norm((point0 + np.asarray(point_vel) * t)
                                   - (radar0 + radar_vel * t))
                )

            rate = (dist(h) - dist(-h)) / (2 * h)
            assert vr == pytest.approx(rate, abs=1e-6)


class TestSceneConfig:
    def test_defaults(self):
        cfg = SceneConfig()
        assert cfg.frame_count == round(8.0 * 16.7)
        assert cfg.static_threshold_mps == pytest.approx(3 * 0.013)
        assert cfg.extrinsics == RadarExtrinsics(3.5, 0.0, 0.0)

    def test_threshold_override(self):
        cfg = SceneConfig(gt_static_threshold_mps=0.2)
        assert cfg.static_threshold_mps == 0.2

    def test_negative_duration_names_field(self):
        with pytest.raises(ValueError, match="duration"):
            SceneConfig(duration_s=-1.0)

    def test_bad_speed_range_names_field(self):
        with pytest.raises(ValueError, match="moving_speed_range"):
            SceneConfig(moving_speed_range_mps=(5.0, 1.0))

    def test_ego_state_piecewise(self):
        cfg = SceneConfig(ego_profile=((4.0, 10.0, 0.0), (4.0, 10.0, 0.12)))
        assert cfg.ego_state_at(2.0) == EgoMotionState(10.0, 0.0)
        assert cfg.ego_state_at(5.0) == EgoMotionState(10.0, 0.12)
        # Past the profile the last segment holds.
        assert cfg.ego_state_at(100.0) == EgoMotionState(10.0, 0.12)


class TestSimulateSequence:
    def test_deterministic_rerun(self, small_scene):
        a = simulate_sequence(small_scene, seed=42)
        b = simulate_sequence(small_scene, seed=42)
        assert len(a.frames) == len(b.frames)
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa.ranges, fb.ranges)
            assert np.array_equal(fa.azimuths, fb.azimuths)
            assert np.array_equal(fa.radial_velocities, fb.radial_velocities)
            assert np.array_equal(fa.rcs, fb.rcs)
            assert np.array_equal(fa.gt.classes, fb.gt.classes)
            assert np.array_equal(fa.gt.instance_ids, fb.gt.instance_ids)

    def test_different_seeds_differ(self, small_scene):
        a = simulate_sequence(small_scene, seed=1)
        b = simulate_sequence(small_scene, seed=2)
        assert not np.array_equal(a.frames[0].ranges, b.frames[0].ranges)

    def test_frames_valid_and_counted(self, small_scene, short_sequence):
        assert len(short_sequence.frames) == small_scene.frame_count
        assert validate_sequence(short_sequence.frames) == []

    def test_odometry_attached(self, small_scene, short_sequence):
        for k, frame in enumerate(short_sequence.frames):
            t = k / small_scene.frame_rate_hz
            assert frame.odom == small_scene.ego_state_at(t)

    def test_fov_respected(self, small_scene, short_sequence):
        for frame in short_sequence.frames:
            assert np.all(frame.ranges <= small_scene.fov_max_range_m + 1.0)
            assert np.all(np.abs(frame.azimuths)
                          <= small_scene.fov_half_angle_rad + 0.05)

    def test_stationary_scene_zero_noise_all_static_zero_doppler(self):
        cfg = SceneConfig(
            duration_s=0.5,
            moving_object_count=0,
            false_positive_rate_per_frame=0.0,
            noise_sigma_vr_mps=0.0,
            noise_sigma_range_m=0.0,
            noise_sigma_azimuth_rad=0.0,
            ego_profile=((0.5, 0.0, 0.0),),
        )
        sim = simulate_sequence(cfg, seed=4)
        for frame in sim.frames:
            assert np.all(frame.gt.classes == PointClass.STATIC)
            assert np.allclose(frame.radial_velocities, 0.0, atol=1e-12)

    def test_static_points_lie_on_doppler_profile(self):
        cfg = SceneConfig(
            duration_s=1.0,
            moving_object_count=2,
            noise_sigma_vr_mps=0.0,
            noise_sigma_range_m=0.0,
            noise_sigma_azimuth_rad=0.0,
        )
        sim = simulate_sequence(cfg, seed=5)
        checked = 0
        for frame in sim.frames:
            motion = vehicle_to_radar(frame.odom, cfg.extrinsics)
            profile = -(motion.v_x_mps * np.cos(frame.azimuths)
                        + motion.v_y_mps * np.sin(frame.azimuths))
            static = frame.gt.classes == PointClass.STATIC
            residual = frame.radial_velocities[static] - profile[static]
            assert np.all(np.abs(residual) <= cfg.static_threshold_mps + 1e-9)
            checked += int(static.sum())
        assert checked > 100

    def test_moving_points_leave_profile(self):
        cfg = SceneConfig(
            duration_s=1.0,
            moving_object_count=3,
            noise_sigma_vr_mps=0.0,
            noise_sigma_range_m=0.0,
            noise_sigma_azimuth_rad=0.0,
        )
        sim = simulate_sequence(cfg, seed=6)
        moving_seen = 0
        for frame in sim.frames:
            motion = vehicle_to_radar(frame.odom, cfg.extrinsics)
            profile = -(motion.v_x_mps * np.cos(frame.azimuths)
                        + motion.v_y_mps * np.sin(frame.azimuths))
            moving = frame.gt.classes == PointClass.MOVING
            residual = frame.radial_velocities[moving] - profile[moving]
            assert np.all(np.abs(residual) > cfg.static_threshold_mps)
            moving_seen += int(moving.sum())
        assert moving_seen > 0

    def test_moving_points_carry_instance_ids(self, short_sequence):
        for frame in short_sequence.frames:
            moving = frame.gt.classes == PointClass.MOVING
            assert np.all(frame.gt.instance_ids[moving] >= 0)
            assert np.all(frame.gt.instance_ids[~moving] == NO_INSTANCE)

    def test_landmarks_returned(self, short_sequence):
        assert short_sequence.landmarks_xy.shape[1] == 2
        assert short_sequence.landmarks_xy.shape[0] > 10


class TestGenerateGtLabels:
    @staticmethod
    def _frame(azimuths, vr):
        az = np.asarray(azimuths, dtype=float)
        return RadarFrame(
            0.0, 0, np.full(az.shape, 10.0), az,
            np.asarray(vr, dtype=float), None, None, None,
        )

    def test_on_profile_unannotated_is_static(self):
        ego = EgoMotionState(5.0, 0.0)
        ext = RadarExtrinsics(1.0, 0.0, 0.0)
        frame = self._frame([0.0], [-5.0])
        gt = generate_gt_labels(frame, ego, ext, 0.1, [False])
        assert gt.classes[0] == PointClass.STATIC

    def test_annotated_off_profile_is_moving(self):
        ego = EgoMotionState(5.0, 0.0)
        ext = RadarExtrinsics(1.0, 0.0, 0.0)
        frame = self._frame([0.0], [-2.0])
        gt = generate_gt_labels(frame, ego, ext, 0.1, [True], [7])
        assert gt.classes[0] == PointClass.MOVING
        assert gt.instance_ids[0] == 7

    def test_annotated_on_profile_downgraded_to_static(self):
        # A mover whose radial velocity matches the static profile is
        # indistinguishable in Doppler, so truth calls it static.
        ego = EgoMotionState(5.0, 0.0)
        ext = RadarExtrinsics(1.0, 0.0, 0.0)
        frame = self._frame([0.0], [-5.0])
        gt = generate_gt_labels(frame, ego, ext, 0.1, [True], [7])
        assert gt.classes[0] == PointClass.STATIC
        assert gt.instance_ids[0] == NO_INSTANCE

    def test_off_profile_unannotated_is_false_positive(self):
        ego = EgoMotionState(5.0, 0.0)
        ext = RadarExtrinsics(1.0, 0.0, 0.0)
        frame = self._frame([0.0], [3.0])
        gt = generate_gt_labels(frame, ego, ext, 0.1, [False])
        assert gt.classes[0] == PointClass.FALSE_POSITIVE

    def test_moving_needs_instance_ids(self):
        ego = EgoMotionState(5.0, 0.0)
        ext = RadarExtrinsics(1.0, 0.0, 0.0)
        frame = self._frame([0.0], [-2.0])
        with pytest.raises(ValueError):
            generate_gt_labels(frame, ego, ext, 0.1, [True])

    def test_threshold_boundary_inclusive(self):
        ego = EgoMotionState(0.0, 0.0)
        ext = RadarExtrinsics(1.0, 0.0, 0.0)
        frame = self._frame([0.0], [0.1])
        gt = generate_gt_labels(frame, ego, ext, 0.1, [False])
        assert gt.classes[0] == PointClass.STATIC

    def test_negative_threshold_rejected(self):
        ego = EgoMotionState(0.0, 0.0)
        ext = RadarExtrinsics(1.0, 0.0, 0.0)
        frame = self._frame([0.0], [0.0])
        with pytest.raises(ValueError):
            generate_gt_labels(frame, ego, ext, -0.1, [False])


def _labeled_frame(t, classes, inst):
    n = len(classes)
    return RadarFrame(
        t, 0,
        np.full(n, 10.0), np.zeros(n), np.zeros(n), None,
        GroundTruthLabels(
            np.asarray(classes, dtype=np.int8), np.asarray(inst, dtype=np.int64)
        ),
        None,
    )


class TestLifespanFilter:
    def test_short_instance_relabeled(self):
        frames = [
            _labeled_frame(0.1 * k, [PointClass.MOVING], [3]) for k in range(3)
        ]
        out = apply_lifespan_filter(frames, min_frames=5)
        for frame in out:
            assert frame.gt.classes[0] == PointClass.FALSE_POSITIVE
            assert frame.gt.instance_ids[0] == NO_INSTANCE

    def test_exact_lifespan_kept(self):
        frames = [
            _labeled_frame(0.1 * k, [PointClass.MOVING], [3]) for k in range(5)
        ]
        out = apply_lifespan_filter(frames, min_frames=5)
        for frame in out:
            assert frame.gt.classes[0] == PointClass.MOVING

    def test_min_one_is_identity(self):
        frames = [_labeled_frame(0.0, [PointClass.MOVING], [3])]
        out = apply_lifespan_filter(frames, min_frames=1)
        assert out[0].gt.classes[0] == PointClass.MOVING

    def test_mixed_instances(self):
        # Instance 1 lives 5 frames, instance 2 only 2.
        frames = []
        for k in range(5):
            if k < 2:
                frames.append(
                    _labeled_frame(
                        0.1 * k,
                        [PointClass.MOVING, PointClass.MOVING, PointClass.STATIC],
                        [1, 2, NO_INSTANCE],
                    )
                )
            else:
                frames.append(
                    _labeled_frame(
                        0.1 * k,
                        [PointClass.MOVING, PointClass.FALSE_POSITIVE,
                         PointClass.STATIC],
                        [1, NO_INSTANCE, NO_INSTANCE],
                    )
                )
        out = apply_lifespan_filter(frames, min_frames=5)
        for k, frame in enumerate(out):
            assert frame.gt.classes[0] == PointClass.MOVING
            assert frame.gt.instance_ids[0] == 1
            if k < 2:
                assert frame.gt.classes[1] == PointClass.FALSE_POSITIVE
                assert frame.gt.instance_ids[1] == NO_INSTANCE
            # Static labels untouched.
            assert frame.gt.classes[2] == PointClass.STATIC

    def test_requires_gt(self):
        frame = RadarFrame(
            0.0, 0, np.array([1.0]), np.array([0.0]), np.array([0.0]),
            None, None, None,
        )
        with pytest.raises(ValueError):
            apply_lifespan_filter([frame], min_frames=5)

    def test_lifespan_counts_frames_not_points(self):
        # Two points of the same instance in one frame count once.
        frames = [
            _labeled_frame(0.0, [PointClass.MOVING, PointClass.MOVING], [4, 4]),
            _labeled_frame(0.1, [PointClass.MOVING, PointClass.MOVING], [4, 4]),
        ]
        out = apply_lifespan_filter(frames, min_frames=3)
        assert np.all(out[0].gt.classes == PointClass.FALSE_POSITIVE)


class TestGhosts:
    @staticmethod
    def _ghost_scene(**overrides):
        base = dict(
            duration_s=1.2,
            landmark_density_per_m=0.0,
            moving_object_count=0,
            false_positive_rate_per_frame=0.0,
            ghost_rate_per_frame=1.5,
            ghost_points_mean=4.0,
            ghost_extent_m=0.2,
            noise_sigma_vr_mps=0.0,
            noise_sigma_range_m=0.0,
            noise_sigma_azimuth_rad=0.0,
        )
        base.update(overrides)
        return SceneConfig(**base)

    @staticmethod
    def _residuals(frame, cfg):
        motion = vehicle_to_radar(frame.odom, cfg.extrinsics)
        profile = -(motion.v_x_mps * np.cos(frame.azimuths)
                    + motion.v_y_mps * np.sin(frame.azimuths))
        return frame.radial_velocities - profile

    def test_zero_rate_is_draw_for_draw_identical(self):
        # Ghost parameters must not touch the random stream while the
        # rate is zero, or every archived scene would change.
        a = simulate_sequence(SceneConfig(duration_s=1.0), seed=11)
        b = simulate_sequence(
            SceneConfig(
                duration_s=1.0,
                ghost_rate_per_frame=0.0,
                ghost_points_mean=9.0,
                ghost_extent_m=0.3,
                ghost_lifetime_frames=(3, 4),
                ghost_offset_mps=(0.5, 0.6),
            ),
            seed=11,
        )
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa.ranges, fb.ranges)
            assert np.array_equal(fa.azimuths, fb.azimuths)
            assert np.array_equal(fa.radial_velocities, fb.radial_velocities)
            assert np.array_equal(fa.rcs, fb.rcs)
            assert np.array_equal(fa.gt.classes, fb.gt.classes)

    def test_ghosts_labeled_clutter_without_instances(self):
        cfg = self._ghost_scene()
        sim = simulate_sequence(cfg, seed=3)
        seen = 0
        for frame in sim.frames:
            assert np.all(frame.gt.classes == PointClass.FALSE_POSITIVE)
            assert np.all(frame.gt.instance_ids == NO_INSTANCE)
            seen += len(frame.ranges)
        assert seen > 50

    def test_ghost_residual_within_configured_band(self):
        cfg = self._ghost_scene(ghost_offset_mps=(0.4, 1.1))
        sim = simulate_sequence(cfg, seed=8)
        for frame in sim.frames:
            resid = np.abs(self._residuals(frame, cfg))
            assert np.all(resid >= 0.4 - 1e-9)
            assert np.all(resid <= 1.1 + 1e-9)

    def test_lifetime_bounded_and_coherent(self):
        # A ghost keeps one offset for its whole life, so with noise
        # off the residual identifies it across frames.
        cfg = self._ghost_scene(ghost_lifetime_frames=(2, 2))
        sim = simulate_sequence(cfg, seed=5)
        appearances = {}
        for k, frame in enumerate(sim.frames):
            for resid in np.round(self._residuals(frame, cfg), 6):
                appearances.setdefault(resid, set()).add(k)
        assert appearances
        spans = [(min(ks), max(ks), len(ks)) for ks in appearances.values()]
        assert all(hi - lo <= 1 and n <= 2 for lo, hi, n in spans)
        assert any(n == 2 for _, _, n in spans)

    def test_single_frame_lifetime(self):
        cfg = self._ghost_scene(ghost_lifetime_frames=(1, 1))
        sim = simulate_sequence(cfg, seed=5)
        appearances = {}
        for k, frame in enumerate(sim.frames):
            for resid in np.round(self._residuals(frame, cfg), 6):
                appearances.setdefault(resid, set()).add(k)
        assert appearances
        assert all(len(ks) == 1 for ks in appearances.values())

    def test_offset_below_threshold_labels_static(self):
        cfg = self._ghost_scene(
            ghost_offset_mps=(0.005, 0.01), gt_static_threshold_mps=0.05
        )
        sim = simulate_sequence(cfg, seed=2)
        seen = 0
        for frame in sim.frames:
            assert np.all(frame.gt.classes == PointClass.STATIC)
            seen += len(frame.ranges)
        assert seen > 0

    def test_ghost_rcs_matches_movers(self):
        # No reflectivity tell: same distribution family as objects.
        cfg = self._ghost_scene(ghost_rate_per_frame=4.0)
        sim = simulate_sequence(cfg, seed=1)
        rcs = np.concatenate([f.rcs for f in sim.frames])
        assert rcs.size > 200
        assert 10.0 < np.mean(rcs) < 14.0

    def test_bad_ghost_params_name_field(self):
        with pytest.raises(ValueError, match="ghost_rate_per_frame"):
            SceneConfig(ghost_rate_per_frame=-0.1)
        with pytest.raises(ValueError, match="ghost_lifetime_frames"):
            SceneConfig(ghost_lifetime_frames=(0, 2))
        with pytest.raises(ValueError, match="ghost_offset_mps"):
            SceneConfig(ghost_offset_mps=(0.0, 1.0))
        with pytest.raises(ValueError, match="ghost_extent_m"):
            SceneConfig(ghost_extent_m=0.0)
        with pytest.raises(ValueError, match="ghost_clearance_m"):
            SceneConfig(ghost_clearance_m=-1.0)

    def test_ghost_range_support_matches_drifted_movers(self):
        # Anchors reuse the mover recipe (cone at a random reference
        # frame plus velocity backdating), so over a long scene ghost
        # ranges spill outside the fixed spawn annulus [min+4, 0.75max]
        # exactly as drifted mover positions do.
        cfg = self._ghost_scene(
            duration_s=8.0, ghost_rate_per_frame=4.0, ghost_points_mean=6.0
        )
        sim = simulate_sequence(cfg, seed=9)
        ranges = np.concatenate([f.ranges for f in sim.frames])
        assert ranges.size > 500
        assert ranges.min() < cfg.fov_min_range_m + 4.0
        assert ranges.max() > 0.75 * cfg.fov_max_range_m

    def test_ghost_clearance_from_movers(self):
        # Ghost clusters never spawn inside the clearance radius of a
        # live mover, so the two kinds of blob stay separable in space.
        cfg = self._ghost_scene(
            duration_s=6.0,
            moving_object_count=4,
            moving_points_mean=6.0,
            moving_extent_m=0.15,
            ghost_rate_per_frame=3.0,
            ghost_extent_m=0.15,
            ghost_clearance_m=6.0,
        )
        sim = simulate_sequence(cfg, seed=21)
        checked = 0
        for frame in sim.frames:
            moving = frame.gt.classes == PointClass.MOVING
            clutter = frame.gt.classes == PointClass.FALSE_POSITIVE
            if not (np.any(moving) and np.any(clutter)):
                continue
            xy = np.stack(
                [
                    frame.ranges * np.cos(frame.azimuths),
                    frame.ranges * np.sin(frame.azimuths),
                ],
                axis=1,
            )
            for inst in np.unique(frame.gt.instance_ids[moving]):
                centroid = xy[frame.gt.instance_ids == inst].mean(axis=0)
                gaps = np.hypot(*(xy[clutter] - centroid).T)
                assert gaps.min() > 4.0
                checked += 1
        assert checked > 20
