"""Flight modes, cascaded control, waypoint navigation and failsafes.

Cascade: position error -> clamped velocity setpoint -> acceleration ->
tilt + collective thrust -> quaternion attitude error -> body rate
setpoint -> rate PI -> torques -> mixer. Failsafe actions latch until an
operator reset; battery outranks geofence outranks link outranks standoff.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum

import numpy as np

from .atmosphere import G_MPS2
from .mixer import Mixer
from .rotations import (
    euler_from_quat,
    quat_conj,
    quat_from_matrix,
    quat_mul,
    rotvec_from_quat,
    wrap_angle,
)


class FlightMode(Enum):
    DISARMED = 0
    MANUAL = 1
    ALTITUDE_HOLD = 2
    POSITION_HOLD = 3
    AUTO_MISSION = 4
    TRACK = 5
    RETURN_TO_LAUNCH = 6
    LAND = 7


class FailsafeAction(IntEnum):
    """Ordered by priority; higher value wins."""
    NONE = 0
    BACKOFF_OBSTACLE = 1
    BACKOFF_STANDOFF = 2
    RTL_LINK = 3
    RTL_GEOFENCE = 4
    LAND_BATTERY = 5


@dataclass(frozen=True)
class SafetyLimits:
    geofence_horizontal_m: float = 200.0
    geofence_vertical_m: float = 100.0
    min_target_standoff_m: float = 10.0
    min_obstacle_standoff_m: float = 5.0
    battery_land_voltage_per_cell: float = 3.4
    link_timeout_s: float = 3.0

    def __post_init__(self):
        if min(self.geofence_horizontal_m, self.geofence_vertical_m,
               self.min_target_standoff_m, self.min_obstacle_standoff_m,
               self.battery_land_voltage_per_cell, self.link_timeout_s) <= 0:
            raise ValueError("safety limits must be positive")
        if self.min_target_standoff_m >= self.geofence_horizontal_m:
            raise ValueError("standoff must sit inside the geofence")


@dataclass(frozen=True)
class Waypoint:
    position_ned_m: tuple
    hold_s: float = 0.0
    acceptance_radius_m: float = 2.0


@dataclass(frozen=True)
class Mission:
    waypoints: tuple

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("mission needs at least one waypoint")


def validate_mission(mission: Mission, limits: SafetyLimits, home_ned) -> None:
    """Reject waypoints outside the geofence (horizontal and ceiling)."""
    home = np.asarray(home_ned, dtype=float)
    for i, wp in enumerate(mission.waypoints):
        pos = np.asarray(wp.position_ned_m, dtype=float)
        horizontal = float(np.linalg.norm(pos[:2] - home[:2]))
        altitude = float(home[2] - pos[2])
        if horizontal > limits.geofence_horizontal_m:
            raise ValueError(
                f"waypoint {i} at {horizontal:.0f} m exceeds the "
                f"{limits.geofence_horizontal_m:.0f} m horizontal geofence")
        if altitude > limits.geofence_vertical_m:
            raise ValueError(
                f"waypoint {i} at {altitude:.0f} m exceeds the "
                f"{limits.geofence_vertical_m:.0f} m ceiling")


@dataclass
class MissionProgress:
    index: int = 0
    inside_since_s: float = None
    complete: bool = False


def mission_step(position_ned, mission: Mission, progress: MissionProgress,
                 now_s: float) -> tuple:
    """Current target waypoint plus advanced progress."""
    wp = mission.waypoints[min(progress.index, len(mission.waypoints) - 1)]
    if progress.complete:
        return wp, progress
    dist = float(np.linalg.norm(
        np.asarray(wp.position_ned_m) - np.asarray(position_ned)))
    if dist <= wp.acceptance_radius_m:
        if progress.inside_since_s is None:
            progress.inside_since_s = now_s
        if now_s - progress.inside_since_s >= wp.hold_s:
            if progress.index + 1 < len(mission.waypoints):
                progress.index += 1
                progress.inside_since_s = None
            else:
                progress.complete = True  # loiter at the final waypoint
    else:
        progress.inside_since_s = None
    wp = mission.waypoints[min(progress.index, len(mission.waypoints) - 1)]
    return wp, progress


def failsafe_check(position_ned, home_ned, mode: FlightMode,
                   battery_voltage_V: float, battery_cells: int,
                   link_age_s: float, target_range_m,
                   obstacles, limits: SafetyLimits) -> FailsafeAction:
    """Highest-priority safety action warranted right now (NONE if safe).

    Link silence only matters in pilot-in-the-loop modes; the standoff check
    only applies while tracking; obstacles are scenario-declared spheres
    (position + radius).
    """
    pos = np.asarray(position_ned, dtype=float)
    home = np.asarray(home_ned, dtype=float)
    if battery_voltage_V < battery_cells * limits.battery_land_voltage_per_cell:
        return FailsafeAction.LAND_BATTERY
    horizontal = float(np.linalg.norm(pos[:2] - home[:2]))
    altitude = float(home[2] - pos[2])
    if horizontal > limits.geofence_horizontal_m \
            or altitude > limits.geofence_vertical_m:
        return FailsafeAction.RTL_GEOFENCE
    if mode in (FlightMode.MANUAL, FlightMode.ALTITUDE_HOLD) \
            and link_age_s > limits.link_timeout_s:
        return FailsafeAction.RTL_LINK
    if mode is FlightMode.TRACK and target_range_m is not None \
            and target_range_m < limits.min_target_standoff_m:
        return FailsafeAction.BACKOFF_STANDOFF
    for center, radius in obstacles:
        clearance = float(np.linalg.norm(pos - np.asarray(center))) - radius
        if clearance < limits.min_obstacle_standoff_m:
            return FailsafeAction.BACKOFF_OBSTACLE
    return FailsafeAction.NONE


@dataclass(frozen=True)
class ControlGains:
    att_kp: tuple = (7.0, 7.0, 3.5)
    rate_kp: tuple = (15.0, 15.0, 8.0)
    rate_ki: tuple = (8.0, 8.0, 4.0)
    rate_int_limit: float = 2.0
    pos_kp: float = 0.7
    vel_kp: float = 1.6
    vel_ki: float = 0.4
    vel_int_limit: float = 3.0
    vmax_horizontal: float = 5.0
    vmax_up: float = 2.5
    vmax_down: float = 1.5
    amax_horizontal: float = 5.0
    tilt_max_rad: float = math.radians(35.0)
    yaw_rate_max: float = math.radians(90.0)
    manual_climb_max: float = 2.0


@dataclass
class AttitudeSetpoint:
    attitude_q: np.ndarray  # body<-NED
    thrust_N: float
    yaw_rate_ff: float = 0.0


class AttitudeController:
    """Quaternion error -> rate setpoint -> rate PI -> body torques."""

    def __init__(self, gains: ControlGains, inertia_diag):
        self.gains = gains
        self.inertia = np.asarray(inertia_diag, dtype=float)
        self.rate_integral = np.zeros(3)

    def reset(self):
        self.rate_integral[:] = 0.0

    def update(self, q_est, rates, setpoint: AttitudeSetpoint, dt: float,
               freeze_integral: bool = False) -> np.ndarray:
        # rotation (in body axes) taking the current attitude to the setpoint
        error_vec = rotvec_from_quat(quat_mul(q_est, quat_conj(setpoint.attitude_q)))
        rate_sp = np.asarray(self.gains.att_kp) * error_vec
        rate_sp[2] += setpoint.yaw_rate_ff
        rate_err = rate_sp - rates
        if not freeze_integral:
            self.rate_integral = np.clip(
                self.rate_integral + rate_err * dt,
                -self.gains.rate_int_limit, self.gains.rate_int_limit)
        alpha = (np.asarray(self.gains.rate_kp) * rate_err
                 + np.asarray(self.gains.rate_ki) * self.rate_integral)
        return self.inertia * alpha


def attitude_from_thrust(f_ned, yaw: float) -> np.ndarray:
    """Body<-NED setpoint whose -z axis carries the specific-force vector."""
    z_b = -np.asarray(f_ned, dtype=float)
    norm = float(np.linalg.norm(z_b))
    if norm < 1e-9:
        z_b = np.array([0.0, 0.0, 1.0])
    else:
        z_b = z_b / norm
    x_c = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    y_b = np.cross(z_b, x_c)
    y_norm = float(np.linalg.norm(y_b))
    if y_norm < 1e-6:  # thrust almost horizontal; fall back to level yaw frame
        y_b = np.array([-math.sin(yaw), math.cos(yaw), 0.0])
    else:
        y_b = y_b / y_norm
    x_b = np.cross(y_b, z_b)
    r_nb = np.column_stack([x_b, y_b, z_b])
    return quat_conj(quat_from_matrix(r_nb))


class PositionController:
    """Position/velocity cascade producing an attitude setpoint + thrust."""

    def __init__(self, gains: ControlGains, mass_kg: float):
        self.gains = gains
        self.mass_kg = mass_kg
        self.vel_integral = np.zeros(3)

    def reset(self):
        self.vel_integral[:] = 0.0

    def velocity_setpoint_for(self, position_est, position_sp) -> np.ndarray:
        g = self.gains
        vel_sp = g.pos_kp * (np.asarray(position_sp) - position_est)
        h_norm = float(np.linalg.norm(vel_sp[:2]))
        if h_norm > g.vmax_horizontal:
            vel_sp[:2] *= g.vmax_horizontal / h_norm
        vel_sp[2] = float(np.clip(vel_sp[2], -g.vmax_up, g.vmax_down))
        return vel_sp

    def update_velocity(self, estimate, vel_sp, yaw_sp: float, dt: float,
                        freeze_integral: bool = False) -> AttitudeSetpoint:
        g = self.gains
        vel_sp = np.asarray(vel_sp, dtype=float)
        h_norm = float(np.linalg.norm(vel_sp[:2]))
        if h_norm > g.vmax_horizontal:
            vel_sp = vel_sp.copy()
            vel_sp[:2] *= g.vmax_horizontal / h_norm
        err = vel_sp - estimate.velocity_ned_mps
        if not freeze_integral:
            self.vel_integral = np.clip(self.vel_integral + err * dt,
                                        -g.vel_int_limit, g.vel_int_limit)
        accel_sp = g.vel_kp * err + g.vel_ki * self.vel_integral
        a_h = float(np.linalg.norm(accel_sp[:2]))
        if a_h > g.amax_horizontal:
            accel_sp[:2] *= g.amax_horizontal / a_h
        f_ned = accel_sp - np.array([0.0, 0.0, G_MPS2])
        # tilt limit: horizontal specific force vs vertical component
        max_h = abs(f_ned[2]) * math.tan(g.tilt_max_rad)
        f_h = float(np.linalg.norm(f_ned[:2]))
        if f_h > max_h:
            f_ned = f_ned.copy()
            f_ned[:2] *= max_h / f_h
        thrust = self.mass_kg * float(np.linalg.norm(f_ned))
        return AttitudeSetpoint(attitude_from_thrust(f_ned, yaw_sp), thrust)

    def update_position(self, estimate, position_sp, yaw_sp: float, dt: float,
                        vel_ff=None, freeze_integral: bool = False) -> AttitudeSetpoint:
        vel_sp = self.velocity_setpoint_for(estimate.position_ned_m, position_sp)
        if vel_ff is not None:
            vel_sp = vel_sp + np.asarray(vel_ff)
        return self.update_velocity(estimate, vel_sp, yaw_sp, dt, freeze_integral)


def manual_setpoints(rc_channels, mode: FlightMode, gains: ControlGains,
                     hover_thrust_N: float, current_yaw: float) -> tuple:
    """Stick mapping. Returns (roll, pitch, yaw_rate, thrust_N or climb_rate).

    Channels are PWM microseconds (1000..2000, centered 1500): 1 roll,
    2 pitch (forward = high = nose down), 3 throttle, 4 yaw.
    """
    def norm(ch):  # -> [-1, 1]
        return max(-1.0, min(1.0, (ch - 1500.0) / 500.0))

    roll = norm(rc_channels[0]) * gains.tilt_max_rad
    pitch = -norm(rc_channels[1]) * gains.tilt_max_rad
    yaw_rate = norm(rc_channels[3]) * gains.yaw_rate_max
    throttle = max(0.0, min(1.0, (rc_channels[2] - 1000.0) / 1000.0))
    if mode is FlightMode.MANUAL:
        vertical = 2.0 * hover_thrust_N * throttle  # mid stick hovers
    else:
        climb = (throttle - 0.5) * 2.0 * gains.manual_climb_max
        vertical = 0.0 if abs(climb) < 0.1 * gains.manual_climb_max else climb
    return roll, pitch, yaw_rate, vertical
