"""Navigation estimator: attitude, altitude and position from raw sensors.

An explicit complementary (Mahony-style) attitude filter integrates bias-
corrected gyro rates and steers toward the accelerometer gravity direction
and the magnetometer heading. Translation blends accelerometer dead
reckoning with baro altitude (vertical) and GPS position/velocity
(horizontal); the newest measurement of each kind is held and applied every
step until it goes stale. Single-owner; published snapshots are copies.
"""

import math
from dataclasses import dataclass

import numpy as np

from .atmosphere import G_MPS2
from .rotations import integrate_body_rates, quat_conj, rotate

GRAVITY_NED = np.array([0.0, 0.0, G_MPS2])


@dataclass(frozen=True)
class EstimatorGains:
    kp_acc: float = 1.0
    ki_bias: float = 0.1
    kp_mag: float = 0.5
    bias_gate_rad: float = 0.08    # no bias integration during large transients
    bias_clamp_radps: float = 0.05
    # vertical complementary loop, ~0.5 Hz crossover
    kp_alt: float = 4.4
    kv_alt: float = 9.9
    # horizontal GPS blending
    kp_pos: float = 0.55
    kv_pos: float = 0.32
    kv_vel: float = 1.6
    accel_gate: float = 0.2  # skip accel correction if ||a|-g| exceeds this * g
    accel_comp_alpha: float = 0.2  # LPF on the GPS-derived kinematic accel
    gps_hold_s: float = 0.4  # a held fix corrects until this old
    baro_hold_s: float = 0.2
    stale_s: float = 0.5


@dataclass
class NavEstimate:
    attitude_q: np.ndarray
    position_ned_m: np.ndarray
    velocity_ned_mps: np.ndarray
    gyro_bias_radps: np.ndarray
    body_rates_radps: np.ndarray = None  # bias-corrected gyro passthrough
    attitude_valid: bool = False
    horizontal_valid: bool = False
    vertical_valid: bool = False
    degraded: bool = False
    timestamp_us: int = 0

    @classmethod
    def initial(cls) -> "NavEstimate":
        return cls(
            attitude_q=np.array([1.0, 0.0, 0.0, 0.0]),
            position_ned_m=np.zeros(3),
            velocity_ned_mps=np.zeros(3),
            gyro_bias_radps=np.zeros(3),
            body_rates_radps=np.zeros(3),
        )

    def snapshot(self) -> "NavEstimate":
        return NavEstimate(
            self.attitude_q.copy(), self.position_ned_m.copy(),
            self.velocity_ned_mps.copy(), self.gyro_bias_radps.copy(),
            self.body_rates_radps.copy(), self.attitude_valid,
            self.horizontal_valid, self.vertical_valid,
            self.degraded, self.timestamp_us)


@dataclass(frozen=True)
class SensorBatch:
    imu: object = None
    mag: object = None
    baro: object = None
    gps: object = None
    timestamp_us: int = 0


class NavigationFilter:
    """Single owner of one NavEstimate; call step() at the IMU rate."""

    def __init__(self, gains: EstimatorGains = EstimatorGains(),
                 base_altitude_m: float = 0.0,
                 mag_declination_rad: float = 0.0):
        self.gains = gains
        self.base_altitude_m = base_altitude_m
        self._mag_ref_ned = np.array([math.cos(mag_declination_rad),
                                      math.sin(mag_declination_rad), 0.0])
        self.estimate = NavEstimate.initial()
        self._held_gps = None
        self._held_baro = None
        self._prev_gps_vel = None
        self._prev_gps_t_us = None
        self._accel_comp_ned = np.zeros(3)  # vehicle acceleration, GPS-derived

    # -- attitude ---------------------------------------------------------

    def attitude_update(self, imu, mag, dt: float) -> None:
        est = self.estimate
        gains = self.gains
        q = est.attitude_q
        error = np.zeros(3)

        geometric = 0.0  # unscaled misalignment, gates bias integration
        # subtract the vehicle's own (GPS-observed) acceleration so maneuvers
        # don't masquerade as tilt; at rest this is a no-op
        accel = imu.accel_body_mps2 - rotate(q, self._accel_comp_ned)
        a_norm = float(np.linalg.norm(accel))
        if a_norm > 1e-6 and abs(a_norm - G_MPS2) <= gains.accel_gate * G_MPS2:
            measured = accel / a_norm
            predicted = rotate(q, np.array([0.0, 0.0, -1.0]))
            cross = np.cross(measured, predicted)
            geometric += float(np.linalg.norm(cross))
            error = error + gains.kp_acc * cross

        if mag is not None:
            m_norm = float(np.linalg.norm(mag.field_body))
            if m_norm > 1e-6:
                measured = mag.field_body / m_norm
                predicted = rotate(q, self._mag_ref_ned)
                cross = np.cross(measured, predicted)
                geometric += float(np.linalg.norm(cross))
                error = error + gains.kp_mag * cross

        if 0.0 < geometric < gains.bias_gate_rad:
            bias = est.gyro_bias_radps - gains.ki_bias * error * dt
            est.gyro_bias_radps = np.clip(
                bias, -gains.bias_clamp_radps, gains.bias_clamp_radps)

        est.body_rates_radps = imu.gyro_body_radps - est.gyro_bias_radps
        omega = est.body_rates_radps + error
        est.attitude_q = integrate_body_rates(q, omega, dt)
        est.attitude_valid = True

    # -- translation ------------------------------------------------------

    def position_update(self, gps, baro, imu, dt: float) -> None:
        est = self.estimate
        gains = self.gains
        now_us = imu.timestamp_us
        if gps is not None and gps.fix_ok:
            if self._prev_gps_vel is not None \
                    and gps.timestamp_us > self._prev_gps_t_us:
                dt_gps = (gps.timestamp_us - self._prev_gps_t_us) * 1e-6
                raw = (gps.velocity_ned_mps - self._prev_gps_vel) / dt_gps
                a = gains.accel_comp_alpha
                self._accel_comp_ned = (1.0 - a) * self._accel_comp_ned + a * raw
            self._prev_gps_vel = gps.velocity_ned_mps.copy()
            self._prev_gps_t_us = gps.timestamp_us
            self._held_gps = gps
        if baro is not None:
            self._held_baro = baro

        accel_ned = rotate(quat_conj(est.attitude_q),
                           imu.accel_body_mps2) + GRAVITY_NED
        est.velocity_ned_mps = est.velocity_ned_mps + accel_ned * dt
        est.position_ned_m = est.position_ned_m + est.velocity_ned_mps * dt

        baro_m = self._held_baro
        if baro_m is not None \
                and (now_us - baro_m.timestamp_us) * 1e-6 <= gains.baro_hold_s:
            down_meas = -(baro_m.derived_altitude_m - self.base_altitude_m)
            err = down_meas - est.position_ned_m[2]
            est.position_ned_m[2] += gains.kp_alt * err * dt
            est.velocity_ned_mps[2] += gains.kv_alt * err * dt
            est.vertical_valid = True

        gps_m = self._held_gps
        fresh_fix = gps_m is not None \
            and (now_us - gps_m.timestamp_us) * 1e-6 <= gains.gps_hold_s
        if fresh_fix:
            err_p = gps_m.position_ned_m[:2] - est.position_ned_m[:2]
            err_v = gps_m.velocity_ned_mps[:2] - est.velocity_ned_mps[:2]
            est.position_ned_m[:2] += gains.kp_pos * err_p * dt
            est.velocity_ned_mps[:2] += (gains.kv_pos * err_p
                                         + gains.kv_vel * err_v) * dt
        est.horizontal_valid = fresh_fix

    # -- composition ------------------------------------------------------

    def step(self, batch: SensorBatch, dt: float) -> NavEstimate:
        """Apply attitude then translation updates; returns a snapshot."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        est = self.estimate
        if batch.imu is not None:
            self.attitude_update(batch.imu, batch.mag, dt)
            self.position_update(batch.gps, batch.baro, batch.imu, dt)
            est.timestamp_us = batch.imu.timestamp_us
        age_s = (batch.timestamp_us - est.timestamp_us) * 1e-6
        est.degraded = bool(age_s > self.gains.stale_s)
        return est.snapshot()
