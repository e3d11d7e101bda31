"""Controller, mixer, mission and failsafe tests with geometry oracles."""

import math

import numpy as np
import pytest

from hexsim.autopilot import Autopilot, ControlInputs, TrackGuidance
from hexsim.control import (
    AttitudeController,
    AttitudeSetpoint,
    ControlGains,
    FailsafeAction,
    FlightMode,
    Mission,
    MissionProgress,
    PositionController,
    SafetyLimits,
    Waypoint,
    failsafe_check,
    manual_setpoints,
    mission_step,
    validate_mission,
)
from hexsim.dynamics import MotorBank, RotorParams, VehicleParams, allocation_matrix
from hexsim.estimator import NavEstimate
from hexsim.mixer import Mixer
from hexsim.rotations import euler_from_quat, quat_from_euler

from util_loop import TruthLoop, perfect_estimate

DENSITY = 0.947
VEHICLE = VehicleParams()


def make_mixer():
    return Mixer(MotorBank(arm_length_m=VEHICLE.arm_length_m), VEHICLE.rotor, DENSITY)


def level_estimate(**overrides):
    est = NavEstimate.initial()
    est.attitude_valid = est.horizontal_valid = est.vertical_valid = True
    for key, value in overrides.items():
        setattr(est, key, value)
    return est


class TestMixer:
    def test_pure_thrust_equal_commands(self):
        mixer = make_mixer()
        res = mixer.mix(20.0, np.zeros(3))
        assert not res.saturated
        assert np.allclose(res.commands, res.commands[0], atol=1e-12)

    def test_zero_wrench_zero_commands(self):
        mixer = make_mixer()
        res = mixer.mix(0.0, np.zeros(3))
        assert np.allclose(res.commands, 0.0)

    def test_random_unsaturated_wrench_reconstruction(self):
        mixer = make_mixer()
        rng = np.random.default_rng(17)
        for _ in range(1000):
            w = np.array([
                rng.uniform(20.0, 35.0),       # collective thrust, N
                rng.uniform(-0.6, 0.6),        # roll torque, N*m
                rng.uniform(-0.6, 0.6),
                rng.uniform(-0.12, 0.12),      # yaw is authority-limited
            ])
            res = mixer.mix(w[0], w[1:])
            assert not res.saturated
            got = mixer.wrench_of(res.commands)
            assert np.allclose(got, w, rtol=1e-9, atol=1e-12)

    def test_saturation_sheds_yaw_first(self):
        mixer = make_mixer()
        hover = VEHICLE.weight_N
        res = mixer.mix(hover, np.array([0.0, 0.0, 5.0]))  # absurd yaw demand
        assert res.saturated
        assert res.yaw_shed_fraction > 0.0
        got = mixer.wrench_of(res.commands)
        assert got[0] == pytest.approx(hover, rel=1e-6)  # thrust preserved
        assert abs(got[3]) < 5.0  # yaw reduced
        assert np.allclose(got[1:3], 0.0, atol=1e-9)  # roll/pitch untouched

    def test_commands_always_in_box(self):
        mixer = make_mixer()
        rng = np.random.default_rng(3)
        for _ in range(500):
            thrust = rng.uniform(0.0, 80.0)
            torque = rng.uniform(-8.0, 8.0, size=3)
            res = mixer.mix(thrust, torque)
            assert np.all(res.commands >= 0.0)
            assert np.all(res.commands <= 1.0 + 1e-12)

    def test_hover_command_matches_weight(self):
        mixer = make_mixer()
        cmd = mixer.hover_command(VEHICLE.mass_kg)
        w = mixer.wrench_of(np.full(6, cmd))
        assert w[0] == pytest.approx(VEHICLE.weight_N, rel=1e-9)


class TestAttitudeControl:
    def test_zero_error_zero_torque(self):
        ctrl = AttitudeController(ControlGains(), VEHICLE.inertia_diag)
        q = quat_from_euler(0.2, -0.1, 0.7)
        sp = AttitudeSetpoint(q.copy(), 20.0)
        torque = ctrl.update(q, np.zeros(3), sp, 0.004)
        assert np.allclose(torque, 0.0, atol=1e-9)

    def test_pure_yaw_error_positive_z_torque(self):
        ctrl = AttitudeController(ControlGains(), VEHICLE.inertia_diag)
        q = quat_from_euler(0.0, 0.0, 0.0)
        sp = AttitudeSetpoint(quat_from_euler(0.0, 0.0, math.radians(10.0)), 20.0)
        torque = ctrl.update(q, np.zeros(3), sp, 0.004)
        assert torque[2] > 0.0
        assert abs(torque[0]) < 1e-6 * abs(torque[2])
        assert abs(torque[1]) < 1e-6 * abs(torque[2])

    def test_roll_step_response(self):
        """10 deg roll step in closed loop: settle <= 1 s, overshoot < 20%."""
        loop = TruthLoop(density=DENSITY, start_ned=(0.0, 0.0, -30.0))
        ctrl = AttitudeController(ControlGains(), VEHICLE.inertia_diag)
        mixer = make_mixer()
        target = math.radians(10.0)
        q_sp = quat_from_euler(target, 0.0, 0.0)
        hover_n = VEHICLE.weight_N
        rolls = []

        def control(loop_, inputs):
            est = inputs.estimate
            torque = ctrl.update(est.attitude_q, est.body_rates_radps,
                                 AttitudeSetpoint(q_sp, hover_n), 0.004)
            return mixer.mix(hover_n, torque).commands

        loop.run(2.0, on_control=control,
                 on_step=lambda lp: rolls.append(
                     (lp.t_s, euler_from_quat(lp.world.state.attitude_q)[0])))
        overshoot = max(r for _, r in rolls) - target
        assert overshoot < 0.2 * target
        late = [abs(r - target) for t, r in rolls if t > 1.0]
        assert max(late) < math.radians(0.5)


class TestPositionControl:
    def test_at_setpoint_hover_thrust_level_attitude(self):
        ctrl = PositionController(ControlGains(), VEHICLE.mass_kg)
        est = level_estimate()
        sp = ctrl.update_position(est, np.zeros(3), 0.0, 0.004)
        assert sp.thrust_N == pytest.approx(VEHICLE.weight_N, rel=1e-4)
        roll, pitch, _ = euler_from_quat(sp.attitude_q)
        assert abs(roll) < 1e-6 and abs(pitch) < 1e-6

    def test_north_setpoint_pitches_forward(self):
        ctrl = PositionController(ControlGains(), VEHICLE.mass_kg)
        est = level_estimate()
        sp = ctrl.update_position(est, np.array([5.0, 0.0, 0.0]), 0.0, 0.004)
        _, pitch, _ = euler_from_quat(sp.attitude_q)
        assert pitch < -math.radians(1.0)  # nose down toward north

    def test_tilt_limit_respected(self):
        gains = ControlGains()
        ctrl = PositionController(gains, VEHICLE.mass_kg)
        est = level_estimate(velocity_ned_mps=np.array([-20.0, 0.0, 0.0]))
        sp = ctrl.update_velocity(est, np.array([20.0, 0.0, 0.0]), 0.0, 0.004)
        roll, pitch, _ = euler_from_quat(sp.attitude_q)
        tilt = math.sqrt(roll * roll + pitch * pitch)
        assert tilt <= gains.tilt_max_rad + 1e-6

    def test_steady_wind_tilts_into_wind(self):
        """Force-balance oracle: tilt = atan(drag/weight) at Table-max wind."""
        from hexsim.dynamics import WindState
        wind_speed = 12.0 / 3.6  # 12 km/h
        wind = WindState(np.array([wind_speed, 0.0, 0.0]), np.zeros(3))
        loop = TruthLoop(density=DENSITY, wind=wind, start_ned=(0.0, 0.0, -30.0))
        ap = loop.autopilot
        ap.command_arm(perfect_estimate(loop.world, 0))
        ap.airborne = True
        ap.hold_position = np.array([0.0, 0.0, -30.0])
        positions = []
        tilts = []

        def record(lp):
            positions.append(lp.world.state.position_ned_m.copy())
            if lp.t_s > 20.0:
                roll, pitch, _ = euler_from_quat(lp.world.state.attitude_q)
                tilts.append(math.sqrt(roll ** 2 + pitch ** 2))

        loop.run(30.0, on_step=record)
        drag = VEHICLE.drag_lin_h * wind_speed
        expected_tilt = math.atan(drag / VEHICLE.weight_N)
        assert np.mean(tilts) == pytest.approx(expected_tilt, abs=math.radians(0.3))
        # Table-I max wind controllability: excursion from hold point < 1.5 m
        excursions = [np.linalg.norm(p - np.array([0.0, 0.0, -30.0]))
                      for p in positions]
        assert max(excursions) < 1.5


class TestHoverClosedLoop:
    def test_calm_hover_position_std(self):
        loop = TruthLoop(density=DENSITY, start_ned=(0.0, 0.0, -30.0))
        ap = loop.autopilot
        ap.command_arm(perfect_estimate(loop.world, 0))
        ap.airborne = True
        ap.hold_position = np.array([0.0, 0.0, -30.0])
        trace = []
        loop.run(60.0, on_step=lambda lp: trace.append(
            lp.world.state.position_ned_m.copy()))
        arr = np.array(trace[5000:])
        std = np.linalg.norm(np.std(arr, axis=0))
        assert std < 0.3


class TestManualSetpoints:
    def test_centered_sticks(self):
        gains = ControlGains()
        roll, pitch, yaw_rate, thrust = manual_setpoints(
            (1500, 1500, 1500, 1500), FlightMode.MANUAL, gains,
            VEHICLE.weight_N, 0.0)
        assert roll == pitch == yaw_rate == 0.0
        assert thrust == pytest.approx(VEHICLE.weight_N)

    def test_full_right_roll_hits_tilt_limit(self):
        gains = ControlGains()
        roll, _, _, _ = manual_setpoints(
            (2000, 1500, 1500, 1500), FlightMode.MANUAL, gains,
            VEHICLE.weight_N, 0.0)
        assert roll == pytest.approx(math.radians(35.0))

    def test_altitude_hold_deadband(self):
        gains = ControlGains()
        _, _, _, climb = manual_setpoints(
            (1500, 1500, 1530, 1500), FlightMode.ALTITUDE_HOLD, gains, 0.0, 0.0)
        assert climb == 0.0
        _, _, _, climb = manual_setpoints(
            (1500, 1500, 2000, 1500), FlightMode.ALTITUDE_HOLD, gains, 0.0, 0.0)
        assert climb == pytest.approx(gains.manual_climb_max)


class TestFailsafeCheck:
    LIMITS = SafetyLimits()

    def check(self, **kw):
        args = dict(position_ned=(0.0, 0.0, -20.0), home_ned=(0.0, 0.0, 0.0),
                    mode=FlightMode.POSITION_HOLD, battery_voltage_V=15.5,
                    battery_cells=4, link_age_s=0.1, target_range_m=None,
                    obstacles=(), limits=self.LIMITS)
        args.update(kw)
        return failsafe_check(**args)

    def test_nominal_none(self):
        assert self.check() is FailsafeAction.NONE

    def test_horizontal_geofence(self):
        assert self.check(position_ned=(201.0, 0.0, -20.0)) \
            is FailsafeAction.RTL_GEOFENCE
        assert self.check(position_ned=(199.0, 0.0, -20.0)) is FailsafeAction.NONE

    def test_vertical_geofence(self):
        assert self.check(position_ned=(0.0, 0.0, -101.0)) \
            is FailsafeAction.RTL_GEOFENCE

    def test_battery_threshold(self):
        assert self.check(battery_voltage_V=4 * 3.39) is FailsafeAction.LAND_BATTERY
        assert self.check(battery_voltage_V=4 * 3.41) is FailsafeAction.NONE

    def test_link_loss_only_in_piloted_modes(self):
        assert self.check(mode=FlightMode.MANUAL, link_age_s=3.1) \
            is FailsafeAction.RTL_LINK
        assert self.check(mode=FlightMode.AUTO_MISSION, link_age_s=3.1) \
            is FailsafeAction.NONE

    def test_track_standoff(self):
        assert self.check(mode=FlightMode.TRACK, target_range_m=9.0) \
            is FailsafeAction.BACKOFF_STANDOFF
        assert self.check(mode=FlightMode.TRACK, target_range_m=11.0) \
            is FailsafeAction.NONE

    def test_obstacle_standoff(self):
        obstacle = (((0.0, 3.0, -20.0), 1.0),)  # 3 m away, 1 m radius -> 2 m clear
        assert self.check(obstacles=obstacle) is FailsafeAction.BACKOFF_OBSTACLE

    def test_battery_outranks_geofence(self):
        got = self.check(position_ned=(500.0, 0.0, -20.0), battery_voltage_V=13.0)
        assert got is FailsafeAction.LAND_BATTERY


class TestMission:
    def test_waypoint_outside_fence_rejected(self):
        mission = Mission((Waypoint((250.0, 0.0, -20.0)),))
        with pytest.raises(ValueError, match="geofence"):
            validate_mission(mission, SafetyLimits(), (0.0, 0.0, 0.0))

    def test_empty_mission_rejected(self):
        with pytest.raises(ValueError):
            Mission(())

    def test_single_waypoint_at_position_loiters(self):
        mission = Mission((Waypoint((0.0, 0.0, -20.0), hold_s=0.0),))
        progress = MissionProgress()
        wp, progress = mission_step((0.0, 0.0, -20.0), mission, progress, 0.0)
        assert progress.complete
        assert wp.position_ned_m == (0.0, 0.0, -20.0)

    def test_two_waypoints_visited_in_order(self):
        loop = TruthLoop(density=DENSITY, start_ned=(0.0, 0.0, -20.0))
        ap = loop.autopilot
        ap.command_arm(perfect_estimate(loop.world, 0))
        ap.airborne = True
        ap.hold_position = np.array([0.0, 0.0, -20.0])
        ok, _ = ap.set_mission(Mission((
            Waypoint((10.0, 0.0, -20.0), hold_s=0.5, acceptance_radius_m=1.5),
            Waypoint((10.0, 20.0, -20.0), hold_s=0.0, acceptance_radius_m=1.5),
        )))
        assert ok
        ok, _ = ap.request_mode(FlightMode.AUTO_MISSION, loop.inputs())
        assert ok
        path = []
        loop.run(40.0, on_step=lambda lp: path.append(
            lp.world.state.position_ned_m.copy()))
        assert ap.progress.complete
        final = loop.world.state.position_ned_m
        assert np.linalg.norm(final - np.array([10.0, 20.0, -20.0])) < 1.5
        length = sum(float(np.linalg.norm(b - a))
                     for a, b in zip(path, path[1:]))
        assert length >= 20.0


class TestModeGraph:
    def test_arming_only_from_disarmed(self):
        ap = Autopilot(VEHICLE, DENSITY)
        est = level_estimate()
        ok, _ = ap.command_arm(est)
        assert ok
        ok, reason = ap.command_arm(est)
        assert not ok and "armed" in reason

    def test_track_requires_lock(self):
        ap = Autopilot(VEHICLE, DENSITY)
        est = level_estimate()
        ap.command_arm(est)
        inputs = ControlInputs(estimate=est, battery_voltage_V=15.5, now_s=0.0)
        ok, reason = ap.request_mode(FlightMode.TRACK, inputs)
        assert not ok and "lock" in reason
        inputs.track = TrackGuidance((0.0, 0.0, 0.0), 0.0, True, 14.0,
                                     (10.0, 0.0, 0.0), 0.0)
        ok, _ = ap.request_mode(FlightMode.TRACK, inputs)
        assert ok

    def test_rtl_and_land_reachable_from_any_armed_mode(self):
        for target in (FlightMode.RETURN_TO_LAUNCH, FlightMode.LAND):
            for start in (FlightMode.MANUAL, FlightMode.ALTITUDE_HOLD,
                          FlightMode.POSITION_HOLD, FlightMode.AUTO_MISSION,
                          FlightMode.TRACK):
                ap = Autopilot(VEHICLE, DENSITY)
                est = level_estimate()
                ap.command_arm(est)
                ap.mode = start  # force; entry requirements tested elsewhere
                ap.airborne = True
                inputs = ControlInputs(estimate=est, battery_voltage_V=15.5,
                                       now_s=0.0)
                ok, _ = ap.request_mode(target, inputs)
                assert ok
                assert ap.mode in (target, FlightMode.LAND)

    def test_disarmed_rejects_flight_modes(self):
        ap = Autopilot(VEHICLE, DENSITY)
        inputs = ControlInputs(estimate=level_estimate(), battery_voltage_V=15.5,
                               now_s=0.0)
        for mode in (FlightMode.MANUAL, FlightMode.POSITION_HOLD,
                     FlightMode.TRACK, FlightMode.LAND):
            ok, reason = ap.request_mode(mode, inputs)
            assert not ok and "armed" in reason


class TestFailsafeLatching:
    def make_airborne(self):
        ap = Autopilot(VEHICLE, DENSITY)
        est = level_estimate(position_ned_m=np.array([0.0, 0.0, -20.0]))
        ap.command_arm(est)
        ap.airborne = True
        return ap, est

    def test_geofence_latches_and_blocks_mode_changes(self):
        ap, est = self.make_airborne()
        est.position_ned_m = np.array([205.0, 0.0, -20.0])
        inputs = ControlInputs(estimate=est, battery_voltage_V=15.5, now_s=1.0)
        ap.update(inputs, 0.004)
        assert ap.failsafe is FailsafeAction.RTL_GEOFENCE
        assert ap.mode is FlightMode.RETURN_TO_LAUNCH
        ok, reason = ap.request_mode(FlightMode.POSITION_HOLD, inputs)
        assert not ok and "latched" in reason
        # operator reset is the only way out
        ap.command_failsafe_reset()
        assert ap.failsafe is FailsafeAction.NONE
        ok, _ = ap.request_mode(FlightMode.POSITION_HOLD, inputs)
        assert ok

    def test_battery_escalates_over_geofence(self):
        ap, est = self.make_airborne()
        est.position_ned_m = np.array([205.0, 0.0, -20.0])
        ap.update(ControlInputs(estimate=est, battery_voltage_V=15.5, now_s=1.0),
                  0.004)
        assert ap.mode is FlightMode.RETURN_TO_LAUNCH
        ap.update(ControlInputs(estimate=est, battery_voltage_V=13.0, now_s=2.0),
                  0.004)
        assert ap.failsafe is FailsafeAction.LAND_BATTERY
        assert ap.mode is FlightMode.LAND

    def test_geofence_rtl_within_one_second_and_returns(self):
        loop = TruthLoop(density=DENSITY, start_ned=(0.0, 0.0, -30.0))
        ap = loop.autopilot
        ap.command_arm(perfect_estimate(loop.world, 0))
        ap.airborne = True
        ap.hold_position = np.array([0.0, 0.0, -30.0])
        loop.run(3.0)  # settle
        loop.world.state.position_ned_m[0] = 204.0  # dragged out of the fence
        ap.hold_position = np.array([204.0, 0.0, -30.0])
        t_breach = loop.t_s
        trigger_time = {}

        def watch(lp):
            if ap.failsafe is FailsafeAction.RTL_GEOFENCE and "t" not in trigger_time:
                trigger_time["t"] = lp.t_s

        loop.run(1.5, on_step=watch)
        assert trigger_time["t"] - t_breach < 1.0
        start_dist = 204.0
        loop.run(20.0)
        dist_now = float(np.linalg.norm(loop.world.state.position_ned_m[:2]))
        assert dist_now < start_dist - 30.0  # demonstrably flying home

    def test_stale_rc_in_manual_triggers_rtl(self):
        loop = TruthLoop(density=DENSITY, start_ned=(0.0, 0.0, -20.0))
        ap = loop.autopilot
        ap.command_arm(perfect_estimate(loop.world, 0))
        ap.airborne = True
        rc = (1500, 1500, 1500, 1500)

        def feed(lp):
            age = 0.1 if lp.t_s < 2.0 else lp.t_s - 2.0
            return lp.inputs(rc_channels=rc, rc_age_s=age, link_age_s=age)

        ok, _ = ap.request_mode(FlightMode.MANUAL,
                                loop.inputs(rc_channels=rc, rc_age_s=0.0))
        assert ok
        loop.run(6.0, input_fn=feed)
        assert ap.failsafe is FailsafeAction.RTL_LINK
        assert ap.mode in (FlightMode.RETURN_TO_LAUNCH, FlightMode.LAND)


class TestTakeoffLand:
    def test_arm_takeoff_climb_land_disarm(self):
        loop = TruthLoop(density=DENSITY)
        ap = loop.autopilot
        ok, _ = ap.command_arm(perfect_estimate(loop.world, 0))
        assert ok
        ok, _ = ap.command_takeoff(perfect_estimate(loop.world, 0), 10.0)
        assert ok
        loop.run(12.0)
        alt = -loop.world.state.position_ned_m[2]
        assert alt == pytest.approx(10.0, abs=0.5)
        ap.command_land()
        loop.run(20.0)
        assert ap.mode is FlightMode.DISARMED
        assert -loop.world.state.position_ned_m[2] < 0.1
