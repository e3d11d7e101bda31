"""Estimator convergence, bias observability and blending behavior.

Closed-loop oracles here are scripted truths: a static vehicle, a constant
velocity flight, analytic quaternion propagation.
"""

import math

import numpy as np
import pytest

from hexsim.dynamics import RigidBodyState
from hexsim.estimator import EstimatorGains, NavigationFilter, SensorBatch
from hexsim.rotations import (
    integrate_body_rates,
    quat_angle_to,
    quat_from_euler,
)
from hexsim.sensors import (
    BaroParams,
    GpsParams,
    ImuParams,
    ImuSample,
    MagParams,
    MagSample,
    sample_baro,
    sample_gps,
    sample_imu,
    sample_mag,
)

G = 9.80665
STATIC_ACCEL = np.array([0.0, 0.0, -G])
NORTH = np.array([1.0, 0.0, 0.0])


def noiseless_gps(state, t_us):
    from hexsim.sensors import GpsSample
    return GpsSample(state.position_ned_m.copy(), state.velocity_ned_mps.copy(),
                     10, 1.0, True, t_us)


def static_batch(t_us, q_true=None):
    """Noise-free sensors for a static, level (or tilted-truth) vehicle."""
    state = RigidBodyState.at_rest()
    if q_true is not None:
        state.attitude_q = q_true
    rng = np.random.default_rng(0)
    imu = sample_imu(state, _specific_force(state), 0.0,
                     ImuParams(accel_noise_std=0.0, gyro_noise_std=0.0),
                     rng, t_us)
    mag = sample_mag(state, MagParams(), rng, t_us)
    baro = sample_baro(state, 0.0, BaroParams(pressure_noise_std_pa=0.0), rng, t_us)
    return SensorBatch(imu=imu, mag=mag, baro=baro, gps=noiseless_gps(state, t_us),
                       timestamp_us=t_us)


def _specific_force(state):
    from hexsim.rotations import rotate
    return rotate(state.attitude_q, np.array([0.0, 0.0, -G]))


class TestAttitude:
    @pytest.mark.parametrize("tilt_deg", [5.0, 15.0, 30.0])
    def test_converges_from_initial_tilt(self, tilt_deg):
        nav = NavigationFilter()
        nav.estimate.attitude_q = quat_from_euler(math.radians(tilt_deg), 0.0, 0.0)
        dt = 0.002
        t_us = 0
        for k in range(int(5.0 / dt)):
            t_us = int(k * dt * 1e6)
            nav.step(static_batch(t_us), dt)
        err = math.degrees(quat_angle_to(nav.estimate.attitude_q,
                                         quat_from_euler(0, 0, 0)))
        assert err < 1.0

    def test_pure_integration_matches_analytic_propagation(self):
        gains = EstimatorGains(kp_acc=0.0, ki_bias=0.0, kp_mag=0.0)
        nav = NavigationFilter(gains)
        omega = np.array([0.3, -0.2, 0.5])
        q_oracle = np.array([1.0, 0.0, 0.0, 0.0])
        dt = 0.002
        for k in range(2000):
            imu = ImuSample(STATIC_ACCEL, omega, int(k * dt * 1e6))
            nav.step(SensorBatch(imu=imu, timestamp_us=imu.timestamp_us), dt)
            q_oracle = integrate_body_rates(q_oracle, omega, dt)
            assert quat_angle_to(nav.estimate.attitude_q, q_oracle) < 1e-9

    def test_identity_forever_at_rest(self):
        nav = NavigationFilter()
        dt = 0.002
        for k in range(1000):
            nav.step(static_batch(int(k * dt * 1e6)), dt)
        assert quat_angle_to(nav.estimate.attitude_q,
                             np.array([1.0, 0.0, 0.0, 0.0])) < 1e-6

    def test_quaternion_norm_preserved(self):
        nav = NavigationFilter()
        nav.estimate.attitude_q = quat_from_euler(0.3, 0.2, -1.0)
        dt = 0.002
        for k in range(5000):
            nav.step(static_batch(int(k * dt * 1e6)), dt)
            assert abs(np.linalg.norm(nav.estimate.attitude_q) - 1.0) < 1e-9

    def test_gyro_bias_estimated_within_ten_percent(self):
        nav = NavigationFilter()
        bias = np.array([0.02, -0.01, 0.015])
        dt = 0.002
        rng = np.random.default_rng(5)
        state = RigidBodyState.at_rest()
        params = ImuParams(accel_noise_std=0.0, gyro_noise_std=0.0,
                           gyro_bias=tuple(bias))
        for k in range(int(30.0 / dt)):
            t_us = int(k * dt * 1e6)
            imu = sample_imu(state, STATIC_ACCEL, 0.0, params, rng, t_us)
            mag = sample_mag(state, MagParams(), rng, t_us)
            nav.step(SensorBatch(imu=imu, mag=mag, timestamp_us=t_us), dt)
        assert np.linalg.norm(nav.estimate.gyro_bias_radps - bias) \
            < 0.1 * np.linalg.norm(bias)

    def test_rate_independence(self):
        """Halving dt changes the 60 s attitude trace by < 0.2 deg RMS."""
        def run(dt):
            nav = NavigationFilter()
            nav.estimate.attitude_q = quat_from_euler(0.2, -0.1, 0.4)
            out = []
            steps = int(60.0 / dt)
            sample_every = int(0.5 / dt)
            for k in range(steps):
                nav.step(static_batch(int(k * dt * 1e6)), dt)
                if k % sample_every == 0:
                    out.append(nav.estimate.attitude_q.copy())
            return out

        coarse = run(0.004)
        fine = run(0.002)
        diffs = [math.degrees(quat_angle_to(a, b)) for a, b in zip(coarse, fine)]
        rms = math.sqrt(sum(d * d for d in diffs) / len(diffs))
        assert rms < 0.2


class TestTranslation:
    def test_static_noiseless_error_goes_to_zero(self):
        nav = NavigationFilter()
        nav.estimate.position_ned_m = np.array([4.0, -3.0, 2.0])
        nav.estimate.velocity_ned_mps = np.array([1.0, 1.0, -1.0])
        dt = 0.002
        for k in range(int(20.0 / dt)):
            nav.step(static_batch(int(k * dt * 1e6)), dt)
        assert np.linalg.norm(nav.estimate.position_ned_m) < 0.02
        assert np.linalg.norm(nav.estimate.velocity_ned_mps) < 0.02

    def test_gps_noise_filtered_below_raw_sigma(self):
        """Stationary truth, GPS sigma 1 m: estimate RMS must beat 1 m."""
        nav = NavigationFilter()
        dt = 0.002
        rng_gps = np.random.default_rng(42)
        state = RigidBodyState.at_rest()
        sq_sum = 0.0
        count = 0
        gps = None
        for k in range(int(60.0 / dt)):
            t_us = int(k * dt * 1e6)
            if k % 50 == 0:  # 10 Hz GPS
                gps = sample_gps(state, 10, GpsParams(), rng_gps, t_us)
            batch = static_batch(t_us)
            nav.step(SensorBatch(imu=batch.imu, mag=batch.mag, baro=batch.baro,
                                 gps=gps if k % 50 == 0 else None,
                                 timestamp_us=t_us), dt)
            if t_us > 20_000_000:
                sq_sum += float(np.dot(nav.estimate.position_ned_m[:2],
                                       nav.estimate.position_ned_m[:2]))
                count += 1
        rms = math.sqrt(sq_sum / count)
        assert rms < 1.0

    def test_gps_outage_bounded_drift_and_recovery(self):
        """Constant-velocity truth; 5 s fix loss mid-flight."""
        nav = NavigationFilter()
        dt = 0.002
        vel = np.array([3.0, 0.0, 0.0])
        rng = np.random.default_rng(3)
        worst_outage_err = 0.0
        final_err = None
        for k in range(int(30.0 / dt)):
            t_us = int(k * dt * 1e6)
            t_s = k * dt
            state = RigidBodyState.at_rest()
            state.position_ned_m = vel * t_s
            state.velocity_ned_mps = vel.copy()
            imu = sample_imu(state, STATIC_ACCEL, 0.0,
                             ImuParams(accel_noise_std=0.0, gyro_noise_std=0.0),
                             rng, t_us)
            mag = sample_mag(state, MagParams(), rng, t_us)
            baro = sample_baro(state, 0.0, BaroParams(pressure_noise_std_pa=0.0),
                               rng, t_us)
            gps = None
            if k % 50 == 0:
                sats = 4 if 15.0 <= t_s < 20.0 else 10
                gps = sample_gps(state, sats, GpsParams(), rng, t_us)
            nav.step(SensorBatch(imu=imu, mag=mag, baro=baro, gps=gps,
                                 timestamp_us=t_us), dt)
            err = np.linalg.norm(nav.estimate.position_ned_m[:2]
                                 - state.position_ned_m[:2])
            if 15.0 <= t_s < 20.0:
                worst_outage_err = max(worst_outage_err, err)
            final_err = err
        assert worst_outage_err < 2.5  # dead-reckoning keeps drift bounded
        assert final_err < 0.5  # recovered after fix returns


class TestComposition:
    def test_empty_batch_changes_nothing_but_age(self):
        nav = NavigationFilter()
        nav.step(static_batch(0), 0.002)
        before = nav.estimate.snapshot()
        nav.step(SensorBatch(timestamp_us=100_000), 0.002)
        after = nav.estimate
        assert np.array_equal(before.attitude_q, after.attitude_q)
        assert np.array_equal(before.position_ned_m, after.position_ned_m)
        assert not after.degraded

    def test_degraded_when_sensors_silent(self):
        nav = NavigationFilter()
        nav.step(static_batch(0), 0.002)
        nav.step(SensorBatch(timestamp_us=600_000), 0.002)
        assert nav.estimate.degraded
        nav.step(static_batch(700_000), 0.002)
        assert not nav.estimate.degraded

    def test_full_nominal_run_error_budget(self):
        """60 s with default sensor noise: attitude < 2 deg, horizontal < 1.5 m RMS."""
        nav = NavigationFilter()
        dt = 0.002
        state = RigidBodyState.at_rest()
        rng = np.random.default_rng(9)
        rng_gps = np.random.default_rng(10)
        imu_params = ImuParams()  # default noise levels
        att_sq = pos_sq = 0.0
        count = 0
        for k in range(int(60.0 / dt)):
            t_us = int(k * dt * 1e6)
            imu = sample_imu(state, STATIC_ACCEL, 100.0, imu_params, rng, t_us)
            mag = sample_mag(state, MagParams(noise_std=0.02), rng, t_us) \
                if k % 5 == 0 else None
            baro = sample_baro(state, 0.0, BaroParams(), rng, t_us) \
                if k % 10 == 0 else None
            gps = sample_gps(state, 10, GpsParams(), rng_gps, t_us) \
                if k % 50 == 0 else None
            nav.step(SensorBatch(imu=imu, mag=mag, baro=baro, gps=gps,
                                 timestamp_us=t_us), dt)
            if t_us > 10_000_000:
                att_sq += quat_angle_to(nav.estimate.attitude_q,
                                        state.attitude_q) ** 2
                pos_sq += float(np.dot(nav.estimate.position_ned_m[:2],
                                       nav.estimate.position_ned_m[:2]))
                count += 1
        att_rms_deg = math.degrees(math.sqrt(att_sq / count))
        pos_rms = math.sqrt(pos_sq / count)
        assert att_rms_deg < 2.0
        assert pos_rms < 1.5
