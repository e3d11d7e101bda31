"""6-DOF hexacopter truth model: rotors, rigid body, battery, wind.

World frame NED, body frame FRD, thrust along body -z. Integration is
semi-implicit Euler at the scenario physics rate; motor speeds follow a
first-order lag toward their commands. The model is deterministic given
(parameters, seed, command log).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .atmosphere import G_MPS2
from .rotations import integrate_body_rates, quat_conj, rotate

GRAVITY_NED = np.array([0.0, 0.0, G_MPS2])


class IntegrationFault(RuntimeError):
    """Raised when the truth state stops being finite."""


@dataclass
class RigidBodyState:
    position_ned_m: np.ndarray
    velocity_ned_mps: np.ndarray
    attitude_q: np.ndarray  # body<-NED, scalar first
    body_rates_radps: np.ndarray

    @classmethod
    def at_rest(cls, position=(0.0, 0.0, 0.0)) -> "RigidBodyState":
        return cls(
            position_ned_m=np.array(position, dtype=float),
            velocity_ned_mps=np.zeros(3),
            attitude_q=np.array([1.0, 0.0, 0.0, 0.0]),
            body_rates_radps=np.zeros(3),
        )

    def copy(self) -> "RigidBodyState":
        return RigidBodyState(
            self.position_ned_m.copy(), self.velocity_ned_mps.copy(),
            self.attitude_q.copy(), self.body_rates_radps.copy())


@dataclass(frozen=True)
class RotorParams:
    thrust_coeff_Ct: float = 0.11
    power_coeff_Cp: float = 0.045
    diameter_m: float = 0.254
    # yaw reaction torque per newton of thrust; plausible small-hexacopter value
    k_ratio_m: float = 0.016
    time_constant_s: float = 0.05
    max_rpm: float = 8530.0


@dataclass
class MotorBank:
    """Six rotors on a ring: azimuth 30 + 60*i degrees, alternating spin."""

    arm_length_m: float
    rpm: np.ndarray = field(default_factory=lambda: np.zeros(6))
    spin_dir: np.ndarray = field(
        default_factory=lambda: np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0]))
    azimuth_rad: np.ndarray = field(
        default_factory=lambda: np.radians(30.0 + 60.0 * np.arange(6)))

    def __post_init__(self):
        if len(self.rpm) != 6:
            raise ValueError("hexacopter bank needs 6 rotors")
        if float(np.sum(self.spin_dir)) != 0.0 or np.any(
                self.spin_dir[:-1] * self.spin_dir[1:] != -1.0):
            raise ValueError("spin directions must alternate (3 CW, 3 CCW)")


def motor_thrusts(bank: MotorBank, rotor: RotorParams, density: float) -> np.ndarray:
    n = bank.rpm / 60.0
    return rotor.thrust_coeff_Ct * density * n * n * rotor.diameter_m ** 4


def allocation_matrix(bank: MotorBank, rotor: RotorParams) -> np.ndarray:
    """4x6 map from per-motor thrusts to (total thrust, roll, pitch, yaw)."""
    x = bank.arm_length_m * np.cos(bank.azimuth_rad)
    y = bank.arm_length_m * np.sin(bank.azimuth_rad)
    return np.vstack([
        np.ones(6),
        -y,                       # roll torque about body x from lift at offset y
        x,                        # pitch torque about body y
        rotor.k_ratio_m * bank.spin_dir,
    ])


def wrench_from_motors(bank: MotorBank, rotor: RotorParams, density: float) -> tuple:
    """(total thrust N, body torque 3-vector) produced by the rotor set.

    Components are compensated sums so that symmetric rotor sets cancel
    exactly (equal rpm -> yaw torque is exactly zero).
    """
    f = motor_thrusts(bank, rotor, density)
    x = bank.arm_length_m * np.cos(bank.azimuth_rad)
    y = bank.arm_length_m * np.sin(bank.azimuth_rad)
    thrust = math.fsum(f)
    torque = np.array([
        math.fsum(-y * f),
        math.fsum(x * f),
        math.fsum(rotor.k_ratio_m * bank.spin_dir * f),
    ])
    return thrust, torque


@dataclass(frozen=True)
class BatteryParams:
    cells: int = 4
    capacity_mAh: float = 5000.0
    internal_resistance_ohm: float = 0.012
    # per-cell open-circuit curve vs charge fraction: full / mid / empty
    curve: tuple = ((1.0, 4.2), (0.5, 3.7), (0.0, 3.3))


@dataclass(frozen=True)
class BatteryState:
    params: BatteryParams
    consumed_mAh: float = 0.0
    voltage_V: float = 0.0

    @classmethod
    def fresh(cls, params: BatteryParams) -> "BatteryState":
        return cls(params=params, voltage_V=open_circuit_voltage(params, 0.0))


def open_circuit_voltage(params: BatteryParams, consumed_mAh: float) -> float:
    charge = 1.0 - consumed_mAh / params.capacity_mAh
    pts = params.curve
    charge = min(max(charge, pts[-1][0]), pts[0][0])
    for (c1, v1), (c0, v0) in zip(pts, pts[1:]):
        if charge >= c0:
            t = (charge - c0) / (c1 - c0)
            per_cell = v0 + t * (v1 - v0)
            return params.cells * per_cell
    return params.cells * pts[-1][1]


def battery_step(battery: BatteryState, current_A: float, dt: float) -> BatteryState:
    """Integrate draw and sag terminal voltage; empty is reported, not raised."""
    if current_A < 0.0:
        raise ValueError("current must be >= 0")
    consumed = battery.consumed_mAh + current_A * dt * 1000.0 / 3600.0
    v_oc = open_circuit_voltage(battery.params, consumed)
    v = v_oc - current_A * battery.params.internal_resistance_ohm
    return replace(battery, consumed_mAh=consumed, voltage_V=v)


@dataclass(frozen=True)
class WindParams:
    mean_ned_mps: tuple = (0.0, 0.0, 0.0)
    max_mps: float = 0.0
    gust_std_mps: float = None  # None -> derived from the max/mean gap
    gust_tau_s: float = 2.0

    def resolved_gust_std(self) -> float:
        if self.gust_std_mps is not None:
            return self.gust_std_mps
        gap = self.max_mps - float(np.linalg.norm(self.mean_ned_mps))
        # 3-axis Gaussian gust: P(|gust| > 3.7 sigma_axis) ~ 0.3%
        return max(gap, 0.0) / 3.7


@dataclass
class WindState:
    mean_ned_mps: np.ndarray
    gust_ned_mps: np.ndarray

    @property
    def total_ned_mps(self) -> np.ndarray:
        return self.mean_ned_mps + self.gust_ned_mps


class WindModel:
    """First-order (OU) colored gusts around a fixed mean."""

    def __init__(self, params: WindParams, rng: np.random.Generator):
        self.params = params
        self._rng = rng
        self._gust = np.zeros(3)

    def sample(self, dt: float) -> WindState:
        sigma = self.params.resolved_gust_std()
        if sigma > 0.0:
            decay = math.exp(-dt / self.params.gust_tau_s)
            kick = sigma * math.sqrt(1.0 - decay * decay)
            self._gust = decay * self._gust + kick * self._rng.standard_normal(3)
        return WindState(np.asarray(self.params.mean_ned_mps, dtype=float),
                         self._gust.copy())


@dataclass(frozen=True)
class VehicleParams:
    mass_kg: float = 2.7
    inertia_diag: tuple = (0.06, 0.06, 0.11)
    arm_length_m: float = 0.35
    rotor: RotorParams = RotorParams()
    battery: BatteryParams = BatteryParams()
    drivetrain_efficiency: float = 0.7
    drag_lin_h: float = 0.3   # N per m/s of horizontal airspeed
    drag_lin_v: float = 0.45
    angular_damping: float = 0.02  # N*m per rad/s
    ground_plane: bool = True  # rigid floor at down = 0

    @property
    def weight_N(self) -> float:
        return self.mass_kg * G_MPS2

    def hover_thrust_per_motor(self, density: float) -> float:
        return self.weight_N / 6.0

    def thrust_at_command(self, cmd: float, density: float) -> float:
        n = cmd * self.rotor.max_rpm / 60.0
        return self.rotor.thrust_coeff_Ct * density * n * n * self.rotor.diameter_m ** 4


@dataclass
class StepDiagnostics:
    accel_ned_mps2: np.ndarray
    specific_force_body: np.ndarray
    thrust_N: float
    torque_body_Nm: np.ndarray
    current_A: float
    motor_rev_s_mean: float


class Hexacopter:
    """Owns the truth state and advances it; never step one world concurrently."""

    def __init__(self, params: VehicleParams, density: float,
                 state: RigidBodyState = None, initial_rpm: float = 0.0):
        self.params = params
        self.density = density
        self.state = state if state is not None else RigidBodyState.at_rest()
        self.motors = MotorBank(arm_length_m=params.arm_length_m)
        self.motors.rpm[:] = initial_rpm
        self.battery = BatteryState.fresh(params.battery)
        self._inertia = np.array(params.inertia_diag)

    def step(self, motor_cmds, wind: WindState, dt: float) -> StepDiagnostics:
        if not 0.0 < dt <= 0.01:
            raise ValueError("dt must be in (0, 0.01] s")
        p = self.params
        rotor = p.rotor

        cmds = np.clip(np.asarray(motor_cmds, dtype=float), 0.0, 1.0)
        target_rpm = cmds * rotor.max_rpm
        decay = math.exp(-dt / rotor.time_constant_s)
        self.motors.rpm = target_rpm + (self.motors.rpm - target_rpm) * decay

        thrust, torque = wrench_from_motors(self.motors, rotor, self.density)

        st = self.state
        q = st.attitude_q
        thrust_ned = rotate(quat_conj(q), np.array([0.0, 0.0, -thrust]))
        v_air = st.velocity_ned_mps - wind.total_ned_mps
        drag = -np.array([p.drag_lin_h, p.drag_lin_h, p.drag_lin_v]) * v_air
        force_ned = p.mass_kg * GRAVITY_NED + thrust_ned + drag
        accel = force_ned / p.mass_kg

        omega = st.body_rates_radps
        gyro_torque = -np.cross(omega, self._inertia * omega)
        torque_total = torque + gyro_torque - p.angular_damping * omega
        omega = omega + torque_total / self._inertia * dt

        v_prev = st.velocity_ned_mps
        v_new = st.velocity_ned_mps + accel * dt
        st.position_ned_m = st.position_ned_m + v_new * dt
        st.velocity_ned_mps = v_new
        st.body_rates_radps = omega
        st.attitude_q = integrate_body_rates(q, omega, dt)

        if p.ground_plane and st.position_ned_m[2] > 0.0:
            st.position_ned_m[2] = 0.0
            if st.velocity_ned_mps[2] > 0.0:  # settling, not departing
                st.velocity_ned_mps = np.zeros(3)
                st.body_rates_radps = np.zeros(3)
        # contact forces show up in the realized velocity change, so the
        # accelerometer must see them too (support force on the ground)
        accel = (st.velocity_ned_mps - v_prev) / dt

        current = self._electrical_current()
        self.battery = battery_step(self.battery, current, dt)

        if not (np.isfinite(st.position_ned_m).all()
                and np.isfinite(st.velocity_ned_mps).all()
                and np.isfinite(st.attitude_q).all()
                and np.isfinite(st.body_rates_radps).all()):
            raise IntegrationFault("non-finite truth state")

        specific_force = rotate(q, accel - GRAVITY_NED)
        return StepDiagnostics(
            accel_ned_mps2=accel,
            specific_force_body=specific_force,
            thrust_N=thrust,
            torque_body_Nm=torque,
            current_A=current,
            motor_rev_s_mean=float(np.mean(self.motors.rpm)) / 60.0,
        )

    def _electrical_current(self) -> float:
        rotor = self.params.rotor
        n = self.motors.rpm / 60.0
        p_mech = float(np.sum(
            rotor.power_coeff_Cp * self.density * n ** 3 * rotor.diameter_m ** 5))
        p_elec = p_mech / self.params.drivetrain_efficiency
        if p_elec <= 0.0:
            return 0.0
        v_oc = open_circuit_voltage(self.battery.params, self.battery.consumed_mAh)
        r = self.battery.params.internal_resistance_ohm
        # solve I*(v_oc - I*r) = p_elec; fall back to the power-limit current
        disc = v_oc * v_oc - 4.0 * r * p_elec
        if disc <= 0.0:
            return v_oc / (2.0 * r)
        return (v_oc - math.sqrt(disc)) / (2.0 * r)
