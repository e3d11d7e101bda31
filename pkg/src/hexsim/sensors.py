"""Simulated sensor suite: IMU, magnetometer, barometer, GPS.

Samplers are pure given (truth, params, rng state); stream scheduling and
timestamping belong to the runtime. GPS accuracy follows the satellite
count: 1 m at nine or more satellites, (9/sats)^2 m down to six, no fix
below six.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import atmosphere
from .rotations import rotate

GPS_FIX_MIN_SATS = 6
GPS_FULL_ACCURACY_SATS = 9


@dataclass(frozen=True)
class ImuParams:
    accel_noise_std: float = 0.05      # m/s^2 per axis
    gyro_noise_std: float = 0.002      # rad/s per axis
    accel_bias: tuple = (0.0, 0.0, 0.0)
    gyro_bias: tuple = (0.0, 0.0, 0.0)
    vibration_mps2: float = 0.0        # sinusoid at the rotor rev rate


@dataclass(frozen=True)
class GpsParams:
    velocity_noise_factor: float = 0.1   # sigma_vel = factor * sigma_h
    vertical_factor: float = 1.5         # sigma_alt = factor * sigma_h


@dataclass(frozen=True)
class BaroParams:
    pressure_noise_std_pa: float = 3.0


@dataclass(frozen=True)
class MagParams:
    declination_rad: float = 0.0
    noise_std: float = 0.0


@dataclass(frozen=True)
class ImuSample:
    accel_body_mps2: np.ndarray
    gyro_body_radps: np.ndarray
    timestamp_us: int


@dataclass(frozen=True)
class GpsSample:
    position_ned_m: np.ndarray
    velocity_ned_mps: np.ndarray
    num_satellites: int
    h_accuracy_m: float
    fix_ok: bool
    timestamp_us: int


@dataclass(frozen=True)
class BaroSample:
    pressure_Pa: float
    derived_altitude_m: float
    timestamp_us: int


@dataclass(frozen=True)
class MagSample:
    field_body: np.ndarray
    timestamp_us: int


def sample_imu(state, specific_force_body, motor_rev_s: float,
               params: ImuParams, rng: np.random.Generator,
               timestamp_us: int = 0) -> ImuSample:
    """Accelerometer/gyro reading for the current truth step.

    specific_force_body is the kinematic specific force (acceleration minus
    gravity in body axes) from the dynamics diagnostics. Rotor vibration is
    a shared sinusoid at the mean rotor rev rate on all three accel axes.
    """
    accel = specific_force_body + np.asarray(params.accel_bias, dtype=float)
    gyro = state.body_rates_radps + np.asarray(params.gyro_bias, dtype=float)
    if params.vibration_mps2 > 0.0 and motor_rev_s > 0.0:
        phase = 2.0 * math.pi * motor_rev_s * (timestamp_us * 1e-6)
        accel = accel + params.vibration_mps2 * math.sin(phase)
    if params.accel_noise_std > 0.0:
        accel = accel + params.accel_noise_std * rng.standard_normal(3)
    if params.gyro_noise_std > 0.0:
        gyro = gyro + params.gyro_noise_std * rng.standard_normal(3)
    return ImuSample(accel, gyro, timestamp_us)


def gps_accuracy_m(num_satellites: int):
    """1-sigma horizontal accuracy for a satellite count; None below fix."""
    if num_satellites < GPS_FIX_MIN_SATS:
        return None
    if num_satellites >= GPS_FULL_ACCURACY_SATS:
        return 1.0
    return (GPS_FULL_ACCURACY_SATS / num_satellites) ** 2


def sample_gps(state, num_satellites: int, params: GpsParams,
               rng: np.random.Generator, timestamp_us: int = 0) -> GpsSample:
    sigma = gps_accuracy_m(num_satellites)
    if sigma is None:
        nan3 = np.full(3, np.nan)
        return GpsSample(nan3, nan3.copy(), num_satellites, math.inf, False,
                         timestamp_us)
    noise_pos = rng.standard_normal(3) * np.array(
        [sigma, sigma, params.vertical_factor * sigma])
    noise_vel = rng.standard_normal(3) * (params.velocity_noise_factor * sigma)
    return GpsSample(
        position_ned_m=state.position_ned_m + noise_pos,
        velocity_ned_mps=state.velocity_ned_mps + noise_vel,
        num_satellites=num_satellites,
        h_accuracy_m=sigma,
        fix_ok=True,
        timestamp_us=timestamp_us,
    )


def sample_baro(state, base_altitude_m: float, params: BaroParams,
                rng: np.random.Generator, timestamp_us: int = 0) -> BaroSample:
    """Pressure at the vehicle's true altitude (NED origin sits at base)."""
    true_alt = base_altitude_m - float(state.position_ned_m[2])
    p = atmosphere.pressure(true_alt)
    if params.pressure_noise_std_pa > 0.0:
        p += params.pressure_noise_std_pa * float(rng.standard_normal())
    return BaroSample(p, atmosphere.altitude_from_pressure(p), timestamp_us)


def sample_mag(state, params: MagParams, rng: np.random.Generator,
               timestamp_us: int = 0) -> MagSample:
    """Unit horizontal earth field (north rotated by declination) in body axes."""
    field_ned = np.array([math.cos(params.declination_rad),
                          math.sin(params.declination_rad), 0.0])
    field_body = rotate(state.attitude_q, field_ned)
    if params.noise_std > 0.0:
        field_body = field_body + params.noise_std * rng.standard_normal(3)
    return MagSample(field_body, timestamp_us)


@dataclass(frozen=True)
class SensorParams:
    imu: ImuParams = ImuParams()
    gps: GpsParams = GpsParams()
    baro: BaroParams = BaroParams()
    mag: MagParams = MagParams()
    num_satellites: int = 10
    imu_hz: float = 500.0
    mag_hz: float = 100.0
    baro_hz: float = 50.0
    gps_hz: float = 10.0
