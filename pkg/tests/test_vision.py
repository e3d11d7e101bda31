"""Vision chain tests: gimbal, projection, extraction, guidance, closed loop."""

import math

import numpy as np
import pytest

from hexsim.autopilot import Autopilot, ControlInputs, TrackGuidance
from hexsim.control import FlightMode
from hexsim.dynamics import Hexacopter, VehicleParams, WindState
from hexsim.estimator import NavEstimate
from hexsim.rotations import euler_from_quat, quat_from_euler, rotate
from hexsim.vision import (
    CameraModel,
    CircleTarget,
    Gimbal,
    GuidanceParams,
    ImageFrame,
    LockThresholds,
    PathTarget,
    VisionTracker,
    camera_orientation,
    extract_centroid,
    guidance_step,
    project_point,
    ray_ground_intersection,
    render_frame,
)

from util_loop import perfect_estimate

CAMERA = CameraModel()


def frame_of(pixels, seq=0, t_us=0):
    return ImageFrame.wrap(np.asarray(pixels, dtype=np.uint8), seq, t_us)


class TestCameraModel:
    def test_default_focal_length(self):
        assert CAMERA.focal_px == pytest.approx(320.0, rel=1e-12)
        assert CAMERA.principal_point == (320.0, 240.0)


class TestGimbal:
    def test_two_axis_cancels_roll_pitch(self):
        gimbal = Gimbal(tilt_rad=math.radians(35.0))
        vehicle_q = quat_from_euler(math.radians(10.0), math.radians(-5.0),
                                    math.radians(30.0))
        cam_q = gimbal.orientation(vehicle_q)
        expected = camera_orientation(math.radians(30.0), math.radians(35.0))
        # same rotation regardless of vehicle roll/pitch
        assert min(np.linalg.norm(cam_q - expected),
                   np.linalg.norm(cam_q + expected)) < 1e-9

    def test_level_vehicle_gives_mount_orientation(self):
        gimbal = Gimbal(tilt_rad=math.radians(20.0))
        cam_q = gimbal.orientation(quat_from_euler(0.0, 0.0, 0.0))
        expected = camera_orientation(0.0, math.radians(20.0))
        assert min(np.linalg.norm(cam_q - expected),
                   np.linalg.norm(cam_q + expected)) < 1e-9

    def test_three_axis_rate_limit(self):
        gimbal = Gimbal(mode="3-axis", yaw_rate_limit=math.radians(60.0))
        gimbal.orientation(quat_from_euler(0.0, 0.0, 0.0), dt=0.01)  # init at 0
        q_step = quat_from_euler(0.0, 0.0, math.radians(90.0))
        for _ in range(150):  # 1.5 s at 60 deg/s covers the 90 deg step
            gimbal.orientation(q_step, dt=0.01)
        assert gimbal._yaw == pytest.approx(math.radians(90.0), abs=1e-6)
        # and it was rate-limited on the way: half way at ~0.75 s
        gimbal2 = Gimbal(mode="3-axis", yaw_rate_limit=math.radians(60.0))
        gimbal2.orientation(quat_from_euler(0.0, 0.0, 0.0), dt=0.01)
        for _ in range(75):
            gimbal2.orientation(q_step, dt=0.01)
        assert gimbal2._yaw == pytest.approx(math.radians(45.0), abs=math.radians(1.0))

    def test_camera_axes_geometry(self):
        # looking straight north with 45 deg tilt: optical axis north-down
        cam_q = camera_orientation(0.0, math.radians(45.0))
        optical_ned = rotate(np.array([cam_q[0], -cam_q[1], -cam_q[2], -cam_q[3]]),
                             np.array([0.0, 0.0, 1.0]))
        s = math.sqrt(0.5)
        assert np.allclose(optical_ned, [s, 0.0, s], atol=1e-9)


class TestProjectionRendering:
    def test_target_on_axis_centered(self):
        cam_q = camera_orientation(0.0, 0.0)
        for depth in (3.0, 10.0, 40.0):
            frame = render_frame(CAMERA, cam_q, (0.0, 0.0, -5.0),
                                 (depth, 0.0, -5.0), 0.4, 0, 0)
            track = extract_centroid(frame)
            assert track.pixel_mass > 0
            assert track.centroid_px[0] + 0.5 == pytest.approx(320.0, abs=0.2)
            assert track.centroid_px[1] + 0.5 == pytest.approx(240.0, abs=0.2)

    def test_one_meter_right_at_ten_meters(self):
        cam_q = camera_orientation(0.0, 0.0)
        uvd = project_point(CAMERA, cam_q, (0.0, 0.0, -5.0), (10.0, 1.0, -5.0))
        assert uvd is not None
        u, v, depth = uvd
        assert u == pytest.approx(320.0 + 32.0, rel=1e-9)
        assert depth == pytest.approx(10.0)
        frame = render_frame(CAMERA, cam_q, (0.0, 0.0, -5.0), (10.0, 1.0, -5.0),
                             0.4, 0, 0)
        track = extract_centroid(frame)
        assert track.centroid_px[0] + 0.5 == pytest.approx(352.0, abs=0.3)

    def test_target_behind_camera_background_only(self):
        cam_q = camera_orientation(0.0, 0.0)
        frame = render_frame(CAMERA, cam_q, (0.0, 0.0, -5.0), (-10.0, 0.0, -5.0),
                             0.4, 0, 0)
        assert frame.pixels.max() == 0
        track = extract_centroid(frame)
        assert not track.locked and track.pixel_mass == 0.0

    def test_frame_checksum_detects_tampering(self):
        frame = render_frame(CAMERA, camera_orientation(0.0, 0.3),
                             (0.0, 0.0, -5.0), (10.0, 0.0, 0.0), 0.4, 0, 0)
        assert frame.verify()
        frame.pixels[0, 0] ^= 0xFF
        assert not frame.verify()

    def test_projection_extraction_consistency(self):
        """Noiseless full-disk frames agree with the analytic projection
        within 0.5 px."""
        rng = np.random.default_rng(8)
        cases = 0
        while cases < 40:
            yaw = rng.uniform(-math.pi, math.pi)
            tilt = rng.uniform(math.radians(15), math.radians(70))
            cam_pos = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5),
                                -rng.uniform(5, 12)])
            cam_q = camera_orientation(yaw, tilt)
            # target somewhere in front of the camera on the ground
            d = rng.uniform(6.0, 25.0)
            target = cam_pos + d * rotate(
                np.array([cam_q[0], -cam_q[1], -cam_q[2], -cam_q[3]]),
                np.array([rng.uniform(-0.25, 0.25), rng.uniform(-0.2, 0.2), 1.0]))
            uvd = project_point(CAMERA, cam_q, cam_pos, target)
            if uvd is None:
                continue
            u, v, depth = uvd
            r_px = CAMERA.focal_px * 0.4 / depth
            if not (r_px + 2 < u < 638 - r_px and r_px + 2 < v < 478 - r_px):
                continue  # disk must be fully in view
            frame = render_frame(CAMERA, cam_q, cam_pos, target, 0.4, 0, 0)
            track = extract_centroid(frame)
            assert track.pixel_mass > 0
            err = math.hypot(track.centroid_px[0] + 0.5 - u,
                             track.centroid_px[1] + 0.5 - v)
            assert err < 0.5
            cases += 1


class TestExtraction:
    def test_single_bright_pixel(self):
        pixels = np.zeros((480, 640), dtype=np.uint8)
        pixels[20, 10] = 255
        track = extract_centroid(frame_of(pixels))
        assert track.centroid_px == (10.0, 20.0)

    def test_uniform_3x3_blob(self):
        pixels = np.zeros((480, 640), dtype=np.uint8)
        pixels[4:7, 4:7] = 200
        track = extract_centroid(frame_of(pixels))
        assert track.centroid_px == (5.0, 5.0)

    def test_weighted_mean_hand_case(self):
        # weights 1:3 at u=0 and u=2 -> mean 1.5
        pixels = np.zeros((8, 8), dtype=np.uint8)
        pixels[0, 0] = 64
        pixels[0, 2] = 192
        track = extract_centroid(frame_of(pixels))
        assert track.centroid_px[0] == pytest.approx(1.5, rel=1e-12)
        assert track.centroid_px[1] == 0.0

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(5)
        pixels = (rng.uniform(0, 255, size=(60, 80))).astype(np.uint8)
        thr = LockThresholds(intensity=60)
        track = extract_centroid(frame_of(pixels), thr)
        num_u = num_v = mass = 0.0
        for v in range(60):
            for u in range(80):
                w = float(pixels[v, u])
                if w > 60:
                    mass += w
                    num_u += u * w
                    num_v += v * w
        assert track.pixel_mass == pytest.approx(mass)
        assert track.centroid_px[0] == pytest.approx(num_u / mass, rel=1e-12)
        assert track.centroid_px[1] == pytest.approx(num_v / mass, rel=1e-12)

    def test_lock_hysteresis(self):
        thr = LockThresholds(intensity=60, mass_on=4000.0, mass_off=1500.0)
        pixels = np.zeros((480, 640), dtype=np.uint8)
        pixels[10:13, 10:13] = 255  # mass 2295: between off and on
        frame = frame_of(pixels)
        assert not extract_centroid(frame, thr, prev_locked=False).locked
        assert extract_centroid(frame, thr, prev_locked=True).locked

    def test_no_pixels_above_threshold(self):
        track = extract_centroid(frame_of(np.full((480, 640), 30, dtype=np.uint8)))
        assert not track.locked
        assert math.isnan(track.centroid_px[0])


def centered_setup(height=8.0, slant=14.0):
    """Camera posed so the principal ray hits the ground at the standoff."""
    d_h = math.sqrt(slant ** 2 - height ** 2)
    tilt = math.atan2(height, d_h)
    pos = np.array([0.0, 0.0, -height])
    cam_q = camera_orientation(0.0, tilt)
    est = NavEstimate.initial()
    est.position_ned_m = pos
    return cam_q, est, d_h


class TestGuidance:
    def test_zero_error_zero_velocity(self):
        cam_q, est, _ = centered_setup()
        track = TargetTrack_centered()
        guidance, _ = guidance_step(track, CAMERA, cam_q, est)
        assert np.allclose(guidance["velocity_ned_mps"], 0.0, atol=1e-6)
        assert guidance["locked"]
        assert guidance["slant_range_m"] == pytest.approx(14.0, abs=0.01)

    def test_centroid_right_gives_camera_right_velocity(self):
        cam_q, est, _ = centered_setup()
        track = TargetTrack_centered(du=40.0)
        guidance, _ = guidance_step(track, CAMERA, cam_q, est)
        assert guidance["velocity_ned_mps"][1] > 0.05  # camera right = east here

    def test_lateral_gain_chain(self):
        """32 px at ~10 m range with gain 0.5 -> ~0.5 m/s lateral."""
        cam_q, est, _ = centered_setup(height=6.0, slant=10.0)
        track = TargetTrack_centered(du=32.0)
        params = GuidanceParams(gain=0.5, standoff_slant_m=10.0, min_standoff_m=5.0)
        guidance, _ = guidance_step(track, CAMERA, cam_q, est, params)
        vel = np.array(guidance["velocity_ned_mps"])
        bearing = guidance["yaw_sp"]
        right = np.array([-math.sin(bearing), math.cos(bearing), 0.0])
        lateral = float(np.dot(vel, right))
        slant = guidance["slant_range_m"]
        assert lateral == pytest.approx(0.5 * (32.0 / 320.0) * slant, rel=0.05)
        assert lateral == pytest.approx(0.5, abs=0.06)

    def test_unlocked_zero_setpoint(self):
        cam_q, est, _ = centered_setup()
        track = extract_centroid(frame_of(np.zeros((480, 640), dtype=np.uint8)))
        guidance, _ = guidance_step(track, CAMERA, cam_q, est)
        assert guidance["velocity_ned_mps"] == (0.0, 0.0, 0.0)
        assert not guidance["locked"]

    def test_never_commands_below_min_standoff(self):
        """Approach command reverses inside the floor radius."""
        cam_q, est, _ = centered_setup(height=6.0, slant=9.0)  # already inside 10
        track = TargetTrack_centered()
        params = GuidanceParams(standoff_slant_m=14.0, min_standoff_m=10.0)
        guidance, _ = guidance_step(track, CAMERA, cam_q, est, params)
        vel = np.array(guidance["velocity_ned_mps"])
        bearing = guidance["yaw_sp"]
        fwd = np.array([math.cos(bearing), math.sin(bearing), 0.0])
        assert float(np.dot(vel, fwd)) < 0.0  # backing off


def TargetTrack_centered(du=0.0, dv=0.0):
    from hexsim.vision import TargetTrack
    cx, cy = CAMERA.principal_point
    return TargetTrack((cx - 0.5 + du, cy - 0.5 + dv), 50_000.0, True)


class TestTrajectories:
    def test_circle_kinematics(self):
        target = CircleTarget(center_ne=(0.0, 0.0), radius_m=8.0, speed_mps=5.0)
        p0 = target.position(0.0)
        assert np.allclose(p0, [8.0, 0.0, 0.0])
        quarter = (math.pi / 2) / (5.0 / 8.0)
        p_quarter = target.position(quarter)
        assert np.allclose(p_quarter, [0.0, 8.0, 0.0], atol=1e-9)
        # speed check via finite difference
        d = np.linalg.norm(target.position(1.001) - target.position(1.0))
        assert d / 0.001 == pytest.approx(5.0, rel=1e-3)

    def test_speed_cap(self):
        with pytest.raises(ValueError):
            CircleTarget(speed_mps=9.0)
        with pytest.raises(ValueError):
            PathTarget(points_ne=((0, 0), (5, 5)), speed_mps=8.5)

    def test_path_target_loops(self):
        target = PathTarget(points_ne=((0.0, 0.0), (10.0, 0.0)), speed_mps=5.0)
        assert np.allclose(target.position(0.0), [0.0, 0.0, 0.0])
        assert np.allclose(target.position(1.0), [5.0, 0.0, 0.0])
        assert np.allclose(target.position(3.0), [5.0, 0.0, 0.0])  # coming back
        assert np.allclose(target.position(4.0), [0.0, 0.0, 0.0])


class TestClosedLoopTracking:
    def test_circle_pursuit_centroid_and_standoff(self):
        """Target on an 8 m circle at 5 m/s: after 10 s the centroid stays in
        the central 20% of the image >= 90% of frames; slant range never
        drops below 10 m."""
        density = 0.947
        vehicle = VehicleParams()
        target = CircleTarget(center_ne=(20.0, 0.0), radius_m=8.0, speed_mps=5.0,
                              start_bearing_rad=math.pi)  # starts at (12, 0)
        height = 8.0
        d_h0 = math.sqrt(14.0 ** 2 - height ** 2)
        start = np.array([12.0 - d_h0, 0.0, -height])

        world = Hexacopter(vehicle, density=density)
        world.state.position_ned_m = start.copy()
        ap = Autopilot(vehicle, density)
        ap.command_arm(perfect_estimate(world, 0))
        ap.airborne = True
        ap.hold_position = start.copy()

        tilt0 = math.atan2(height, d_h0)
        tracker = VisionTracker(
            camera=CAMERA, gimbal=Gimbal(tilt_rad=tilt0),
            params=GuidanceParams(), ground_down=0.0)

        calm = WindState(np.zeros(3), np.zeros(3))
        dt = 0.002
        steps = int(25.0 / dt)
        cmds = np.zeros(6)
        guidance = None
        in_box = []
        min_slant = math.inf
        switched = False

        for k in range(steps):
            t_s = k * dt
            t_us = int(t_s * 1e6)
            est = perfect_estimate(world, t_us)
            if k % 20 == 0:  # vision at 25 Hz
                cam_q_truth = tracker.gimbal.orientation(world.state.attitude_q)
                frame = render_frame(
                    CAMERA, cam_q_truth, world.state.position_ned_m,
                    target.position(t_s), target.radius_body_m, k // 20, t_us)
                track, g = tracker.process(frame, est)
                guidance = TrackGuidance(
                    velocity_ned_mps=g["velocity_ned_mps"], yaw_sp=g["yaw_sp"],
                    locked=g["locked"], slant_range_m=g["slant_range_m"],
                    target_ned_est=g["target_ned_est"],
                    yaw_rate_ff=g["yaw_rate_ff"], age_s=0.0)
                if t_s > 10.0 and track.pixel_mass > 0:
                    cx, cy = CAMERA.principal_point
                    in_box.append(
                        abs(track.centroid_px[0] + 0.5 - cx) <= 0.1 * CAMERA.width_px
                        and abs(track.centroid_px[1] + 0.5 - cy) <= 0.1 * CAMERA.height_px)
                if not switched and guidance.locked:
                    ok, why = ap.request_mode(
                        FlightMode.TRACK,
                        ControlInputs(estimate=est, battery_voltage_V=15.5,
                                      now_s=t_s, track=guidance))
                    assert ok, why
                    switched = True
            if k % 2 == 0:  # control at 250 Hz
                inputs = ControlInputs(estimate=est, battery_voltage_V=15.5,
                                       now_s=t_s, track=guidance)
                out = ap.update(inputs, 0.004)
                cmds = out.motor_cmds
            world.step(cmds, calm, dt)
            truth_range = float(np.linalg.norm(
                world.state.position_ned_m - target.position(t_s)))
            min_slant = min(min_slant, truth_range)

        assert switched
        assert ap.failsafe.name == "NONE"
        assert min_slant >= 10.0
        assert len(in_box) > 300
        assert sum(in_box) / len(in_box) >= 0.90
