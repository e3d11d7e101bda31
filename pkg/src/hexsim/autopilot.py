"""Mode supervision: arming, transitions, failsafe latching, sequencing.

One Autopilot owns the controllers and advances at the control rate. A
triggered failsafe latches: no mode command except an operator reset can
change the resulting action, and higher-priority events may still escalate
(battery land overrides an active RTL).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .atmosphere import G_MPS2
from .control import (
    AttitudeController,
    AttitudeSetpoint,
    ControlGains,
    FailsafeAction,
    FlightMode,
    Mission,
    MissionProgress,
    PositionController,
    SafetyLimits,
    attitude_from_thrust,
    failsafe_check,
    manual_setpoints,
    mission_step,
    validate_mission,
)
from .dynamics import MotorBank, VehicleParams
from .estimator import NavEstimate
from .mixer import Mixer
from .rotations import euler_from_quat, quat_from_euler, wrap_angle

TAKEOFF_DEFAULT_AGL_M = 10.0
RTL_MIN_ALTITUDE_M = 15.0
LAND_DESCENT_MPS = 0.7
LAND_CONTACT_AGL_M = 0.25
LAND_CONTACT_HOLD_S = 1.0
BACKOFF_SPEED_MPS = 1.2
IDLE_COMMAND = 0.08


@dataclass(frozen=True)
class TrackGuidance:
    """Velocity guidance published by the vision tracker."""
    velocity_ned_mps: tuple
    yaw_sp: float
    locked: bool
    slant_range_m: float
    target_ned_est: tuple
    yaw_rate_ff: float = 0.0
    age_s: float = 0.0


@dataclass
class ControlInputs:
    estimate: NavEstimate
    battery_voltage_V: float
    now_s: float
    rc_channels: tuple = None
    rc_age_s: float = math.inf
    link_age_s: float = math.inf
    track: TrackGuidance = None


@dataclass
class ControlOutput:
    motor_cmds: np.ndarray
    mode: FlightMode
    failsafe: FailsafeAction
    events: list
    thrust_N: float = 0.0
    saturated: bool = False


class Autopilot:
    def __init__(self, vehicle: VehicleParams, density: float,
                 limits: SafetyLimits = SafetyLimits(),
                 gains: ControlGains = ControlGains(),
                 obstacles=()):
        self.vehicle = vehicle
        self.limits = limits
        self.gains = gains
        self.obstacles = list(obstacles)
        self.mixer = Mixer(MotorBank(arm_length_m=vehicle.arm_length_m),
                           vehicle.rotor, density)
        self.att_ctrl = AttitudeController(gains, vehicle.inertia_diag)
        self.pos_ctrl = PositionController(gains, vehicle.mass_kg)

        self.mode = FlightMode.DISARMED
        self.failsafe = FailsafeAction.NONE
        self.home_ned = np.zeros(3)
        self.hold_position = np.zeros(3)
        self.yaw_sp = 0.0
        self.mission = None
        self.progress = MissionProgress()
        self.airborne = False
        self._rtl_phase = "climb"
        self._rtl_altitude = RTL_MIN_ALTITUDE_M
        self._was_saturated = False
        self._ground_contact_s = None
        self._events = []

    # -- commands ----------------------------------------------------------

    def command_arm(self, estimate: NavEstimate) -> tuple:
        if self.mode is not FlightMode.DISARMED:
            return False, "already armed"
        if not estimate.attitude_valid:
            return False, "no attitude estimate"
        if self.failsafe is not FailsafeAction.NONE:
            return False, "failsafe latched; reset first"
        self.home_ned = estimate.position_ned_m.copy()
        self.hold_position = estimate.position_ned_m.copy()
        self.yaw_sp = euler_from_quat(estimate.attitude_q)[2]
        self.att_ctrl.reset()
        self.pos_ctrl.reset()
        self.airborne = False
        self.progress = MissionProgress()
        self.mode = FlightMode.POSITION_HOLD
        self._event("armed")
        return True, "armed"

    def command_disarm(self) -> tuple:
        self.mode = FlightMode.DISARMED
        self.airborne = False
        self._event("disarmed")
        return True, "disarmed"

    def command_takeoff(self, estimate: NavEstimate,
                        altitude_agl_m: float = TAKEOFF_DEFAULT_AGL_M) -> tuple:
        if self.mode is FlightMode.DISARMED:
            return False, "not armed"
        if self.failsafe is not FailsafeAction.NONE:
            return False, "failsafe latched"
        self.hold_position = estimate.position_ned_m.copy()
        self.hold_position[2] = self.home_ned[2] - altitude_agl_m
        self.mode = FlightMode.POSITION_HOLD
        self.airborne = True
        self._event(f"takeoff to {altitude_agl_m:.0f} m")
        return True, "takeoff"

    def command_land(self, estimate=None) -> tuple:
        if self.mode is FlightMode.DISARMED:
            return False, "not armed"
        self._enter_land(estimate)
        return True, "landing"

    def command_rtl(self) -> tuple:
        if self.mode is FlightMode.DISARMED:
            return False, "not armed"
        self._enter_rtl(None)
        return True, "returning"

    def command_failsafe_reset(self) -> tuple:
        self.failsafe = FailsafeAction.NONE
        self._event("failsafe reset")
        return True, "failsafe cleared"

    def set_mission(self, mission: Mission) -> tuple:
        try:
            validate_mission(mission, self.limits, self.home_ned)
        except ValueError as exc:
            return False, str(exc)
        self.mission = mission
        self.progress = MissionProgress()
        self._event(f"mission accepted ({len(mission.waypoints)} waypoints)")
        return True, "mission accepted"

    def request_mode(self, mode: FlightMode, inputs: ControlInputs) -> tuple:
        if self.failsafe is not FailsafeAction.NONE:
            return False, "failsafe latched; reset first"
        if self.mode is FlightMode.DISARMED and mode is not FlightMode.DISARMED:
            return False, "not armed"
        if mode is FlightMode.DISARMED:
            return self.command_disarm()
        if mode in (FlightMode.MANUAL, FlightMode.ALTITUDE_HOLD):
            if inputs.rc_channels is None or inputs.rc_age_s > 1.0:
                return False, "no fresh RC input"
        if mode is FlightMode.POSITION_HOLD and not inputs.estimate.horizontal_valid:
            return False, "no horizontal fix"
        if mode is FlightMode.AUTO_MISSION:
            if self.mission is None:
                return False, "no mission uploaded"
        if mode is FlightMode.TRACK:
            track = inputs.track
            if track is None or not track.locked or track.age_s > 1.0:
                return False, "no vision lock"
        if mode is FlightMode.RETURN_TO_LAUNCH:
            self._enter_rtl(inputs.estimate)
            return True, "mode RETURN_TO_LAUNCH"
        if mode is FlightMode.LAND:
            self._enter_land(inputs.estimate)
            return True, "mode LAND"
        if mode is FlightMode.POSITION_HOLD:
            self.hold_position = inputs.estimate.position_ned_m.copy()
            self.yaw_sp = euler_from_quat(inputs.estimate.attitude_q)[2]
        if mode is FlightMode.ALTITUDE_HOLD:
            self.hold_position = inputs.estimate.position_ned_m.copy()
        self.mode = mode
        self._event(f"mode {mode.name}")
        return True, f"mode {mode.name}"

    # -- main loop ---------------------------------------------------------

    def update(self, inputs: ControlInputs, dt: float) -> ControlOutput:
        if self.mode is FlightMode.DISARMED:
            return self._output(np.zeros(6), 0.0, False)

        est = inputs.estimate
        self._latch_failsafe(inputs)

        setpoint = self._setpoint_for_mode(inputs, dt)
        if setpoint is None:  # grounded idle: armed but not flying yet
            return self._output(np.full(6, IDLE_COMMAND), 0.0, False)

        torque = self.att_ctrl.update(
            est.attitude_q, est.body_rates_radps, setpoint, dt,
            freeze_integral=self._was_saturated)
        return self._output(*self._mix(setpoint, torque))

    def _mix(self, setpoint, torque):
        res = self.mixer.mix(setpoint.thrust_N, torque)
        self._was_saturated = res.saturated
        return res.commands, setpoint.thrust_N, res.saturated

    def _output(self, cmds, thrust, saturated):
        events = self._events
        self._events = []
        return ControlOutput(cmds, self.mode, self.failsafe, events,
                             thrust, saturated)

    # -- internals ---------------------------------------------------------

    def _event(self, detail: str):
        self._events.append(detail)

    def _latch_failsafe(self, inputs: ControlInputs) -> None:
        track_range = None
        if inputs.track is not None and inputs.track.locked:
            track_range = inputs.track.slant_range_m
        # in piloted modes the stick stream is the command link
        link_age = inputs.rc_age_s if self.mode in (
            FlightMode.MANUAL, FlightMode.ALTITUDE_HOLD) else inputs.link_age_s
        action = failsafe_check(
            inputs.estimate.position_ned_m, self.home_ned, self.mode,
            inputs.battery_voltage_V, self.vehicle.battery.cells,
            link_age, track_range, self.obstacles, self.limits)
        if action > self.failsafe and self.airborne:
            self.failsafe = action
            self._event(f"failsafe {action.name}")
            if action is FailsafeAction.LAND_BATTERY:
                self._enter_land(inputs.estimate)
            elif action in (FailsafeAction.RTL_GEOFENCE, FailsafeAction.RTL_LINK):
                self._enter_rtl(inputs.estimate)
            # backoff actions keep the mode; velocity is overridden below

    def _enter_rtl(self, estimate) -> None:
        if self.mode is not FlightMode.RETURN_TO_LAUNCH:
            self.mode = FlightMode.RETURN_TO_LAUNCH
            self._rtl_phase = "climb"
            current_agl = 0.0
            if estimate is not None:
                current_agl = float(self.home_ned[2] - estimate.position_ned_m[2])
            self._rtl_altitude = max(current_agl, RTL_MIN_ALTITUDE_M)
            self._event("mode RETURN_TO_LAUNCH")

    def _enter_land(self, estimate=None) -> None:
        if self.mode is not FlightMode.LAND:
            if estimate is not None:
                self.hold_position = estimate.position_ned_m.copy()
            self.mode = FlightMode.LAND
            self._ground_contact_s = None
            self._event("mode LAND")

    def _setpoint_for_mode(self, inputs: ControlInputs, dt: float):
        est = inputs.estimate
        mode = self.mode

        if self.failsafe in (FailsafeAction.BACKOFF_STANDOFF,
                             FailsafeAction.BACKOFF_OBSTACLE):
            return self._backoff_setpoint(inputs, dt)

        if mode is FlightMode.MANUAL:
            return self._manual(inputs, dt)
        if mode is FlightMode.ALTITUDE_HOLD:
            return self._altitude_hold(inputs, dt)
        if mode is FlightMode.POSITION_HOLD:
            if not self.airborne:
                return None
            return self.pos_ctrl.update_position(
                est, self.hold_position, self.yaw_sp, dt,
                freeze_integral=self._was_saturated)
        if mode is FlightMode.AUTO_MISSION:
            wp, self.progress = mission_step(
                est.position_ned_m, self.mission, self.progress, inputs.now_s)
            return self.pos_ctrl.update_position(
                est, np.asarray(wp.position_ned_m), self.yaw_sp, dt,
                freeze_integral=self._was_saturated)
        if mode is FlightMode.TRACK:
            return self._track(inputs, dt)
        if mode is FlightMode.RETURN_TO_LAUNCH:
            return self._rtl(inputs, dt)
        if mode is FlightMode.LAND:
            return self._land(inputs, dt)
        return None

    def _manual(self, inputs: ControlInputs, dt: float):
        if inputs.rc_channels is None or inputs.rc_age_s > 0.5:
            rc = (1500, 1500, 1500, 1500)  # stale sticks re-center
        else:
            rc = inputs.rc_channels
        hover = self.vehicle.weight_N
        roll, pitch, yaw_rate, thrust = manual_setpoints(
            rc, FlightMode.MANUAL, self.gains, hover, self.yaw_sp)
        if thrust > 0.15 * hover:
            self.airborne = True
        if not self.airborne:
            return None
        self.yaw_sp = wrap_angle(self.yaw_sp + yaw_rate * dt)
        q_sp = quat_from_euler(roll, pitch, self.yaw_sp)
        return AttitudeSetpoint(q_sp, thrust, yaw_rate)

    def _altitude_hold(self, inputs: ControlInputs, dt: float):
        if not self.airborne:
            return None
        rc = (1500, 1500, 1500, 1500) \
            if inputs.rc_channels is None or inputs.rc_age_s > 0.5 \
            else inputs.rc_channels
        roll, pitch, yaw_rate, climb = manual_setpoints(
            rc, FlightMode.ALTITUDE_HOLD, self.gains, 0.0, self.yaw_sp)
        self.yaw_sp = wrap_angle(self.yaw_sp + yaw_rate * dt)
        est = inputs.estimate
        # vertical velocity loop only; horizontal follows the sticks
        vel_sp = np.array([est.velocity_ned_mps[0], est.velocity_ned_mps[1],
                           -climb])
        sp = self.pos_ctrl.update_velocity(est, vel_sp, self.yaw_sp, dt,
                                           freeze_integral=self._was_saturated)
        q_manual = quat_from_euler(roll, pitch, self.yaw_sp)
        return AttitudeSetpoint(q_manual, sp.thrust_N, yaw_rate)

    def _track(self, inputs: ControlInputs, dt: float):
        est = inputs.estimate
        track = inputs.track
        if track is None or not track.locked or track.age_s > 1.0:
            # lock lost: hold position and report
            return self.pos_ctrl.update_position(
                est, self.hold_position, self.yaw_sp, dt,
                freeze_integral=self._was_saturated)
        self.hold_position = est.position_ned_m.copy()
        if track.yaw_sp is not None:
            self.yaw_sp = track.yaw_sp
        sp = self.pos_ctrl.update_velocity(
            est, np.asarray(track.velocity_ned_mps), self.yaw_sp, dt,
            freeze_integral=self._was_saturated)
        sp.yaw_rate_ff = track.yaw_rate_ff
        return sp

    def _rtl(self, inputs: ControlInputs, dt: float):
        est = inputs.estimate
        pos = est.position_ned_m
        cruise_down = self.home_ned[2] - self._rtl_altitude
        if self._rtl_phase == "climb":
            target = np.array([pos[0], pos[1], cruise_down])
            if pos[2] <= cruise_down + 1.0:
                self._rtl_phase = "home"
        if self._rtl_phase == "home":
            target = np.array([self.home_ned[0], self.home_ned[1], cruise_down])
            if np.linalg.norm(pos[:2] - self.home_ned[:2]) < 1.5:
                self._rtl_phase = "descend"
        if self._rtl_phase == "descend":
            self._enter_land(inputs.estimate)
            return self._land(inputs, dt)
        return self.pos_ctrl.update_position(
            est, target, self.yaw_sp, dt, freeze_integral=self._was_saturated)

    def _land(self, inputs: ControlInputs, dt: float):
        est = inputs.estimate
        agl = float(self.home_ned[2] - est.position_ned_m[2])
        if agl < LAND_CONTACT_AGL_M and abs(est.velocity_ned_mps[2]) < 0.3:
            if self._ground_contact_s is None:
                self._ground_contact_s = inputs.now_s
            elif inputs.now_s - self._ground_contact_s > LAND_CONTACT_HOLD_S:
                self.command_disarm()
                return None
        else:
            self._ground_contact_s = None
        vel_sp = self.pos_ctrl.velocity_setpoint_for(
            est.position_ned_m,
            np.array([self.hold_position[0], self.hold_position[1],
                      est.position_ned_m[2]]))
        vel_sp[2] = LAND_DESCENT_MPS
        return self.pos_ctrl.update_velocity(est, vel_sp, self.yaw_sp, dt,
                                             freeze_integral=self._was_saturated)

    def _backoff_setpoint(self, inputs: ControlInputs, dt: float):
        """Hold altitude and move away from whatever got too close."""
        est = inputs.estimate
        away = np.zeros(3)
        if self.failsafe is FailsafeAction.BACKOFF_STANDOFF \
                and inputs.track is not None:
            delta = est.position_ned_m - np.asarray(inputs.track.target_ned_est)
        else:
            nearest = min(
                self.obstacles,
                key=lambda o: np.linalg.norm(est.position_ned_m - np.asarray(o[0])),
                default=None)
            delta = est.position_ned_m - np.asarray(nearest[0]) \
                if nearest else np.array([1.0, 0.0, 0.0])
        h = delta[:2]
        h_norm = float(np.linalg.norm(h))
        if h_norm > 1e-6:
            away[:2] = h / h_norm * BACKOFF_SPEED_MPS
        slack = self._backoff_cleared(inputs)
        if slack:
            away[:] = 0.0  # safe distance restored: hold until operator reset
        return self.pos_ctrl.update_velocity(est, away, self.yaw_sp, dt,
                                             freeze_integral=self._was_saturated)

    def _backoff_cleared(self, inputs: ControlInputs) -> bool:
        est = inputs.estimate
        if self.failsafe is FailsafeAction.BACKOFF_STANDOFF:
            if inputs.track is None:
                return True
            margin = self.limits.min_target_standoff_m + 1.0
            return inputs.track.slant_range_m >= margin
        margin = self.limits.min_obstacle_standoff_m + 1.0
        return all(
            np.linalg.norm(est.position_ned_m - np.asarray(center)) - radius
            >= margin
            for center, radius in self.obstacles)
