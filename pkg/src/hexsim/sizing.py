"""Pre-flight powertrain sizing: hover point, currents and flight time.

The propeller is modeled with momentum-theory scaling
    thrust = Ct * rho * n^2 * D^4      [N, n in rev/s]
    power  = Cp * rho * n^3 * D^5      [W]
with fixed coefficients per propeller. The attainable rpm ceiling comes from
the battery's continuous discharge budget pushed through the drivetrain.
All estimates carry a fixed +/-10% tolerance band.
"""

import configparser
import math
from dataclasses import asdict, dataclass

from .atmosphere import G_MPS2, air_density

NOMINAL_CELL_V = 3.7
SIZING_TOLERANCE = 0.10


class InfeasibleConfigurationError(ValueError):
    """Raised when the powertrain cannot lift the vehicle."""


@dataclass(frozen=True)
class Environment:
    """Operating conditions the vehicle is sized against."""

    altitude_m: float = 0.0
    temperature_offset_K: float = 0.0
    wind_mean_mps: float = 0.0
    wind_max_mps: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.wind_mean_mps <= self.wind_max_mps:
            raise ValueError("require 0 <= wind_mean <= wind_max")

    @property
    def air_density_kgm3(self) -> float:
        return air_density(self.altitude_m, self.temperature_offset_K)


@dataclass(frozen=True)
class PowertrainSpec:
    prop_diameter_m: float
    prop_pitch_m: float
    thrust_coeff_Ct: float
    power_coeff_Cp: float
    battery_cells: int
    capacity_mAh: float
    discharge_C: float
    total_mass_kg: float
    motor_count: int = 6
    cell_voltage_nominal_V: float = NOMINAL_CELL_V
    drivetrain_efficiency: float = 0.7
    usable_capacity_fraction: float = 0.8

    def __post_init__(self):
        if self.motor_count != 6:
            raise ValueError("hexacopter powertrain requires exactly 6 motors")
        if self.battery_cells not in (3, 4):
            raise ValueError("battery_cells must be 3 or 4")
        for name in ("prop_diameter_m", "prop_pitch_m", "thrust_coeff_Ct",
                     "power_coeff_Cp", "capacity_mAh", "discharge_C",
                     "total_mass_kg", "cell_voltage_nominal_V"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("drivetrain_efficiency", "usable_capacity_fraction"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")

    @property
    def pack_voltage_V(self) -> float:
        return self.battery_cells * self.cell_voltage_nominal_V


@dataclass(frozen=True)
class SizingReport:
    hover_rpm: float
    hover_throttle_fraction: float
    hover_current_A: float
    flight_time_min: float
    thrust_to_weight: float
    max_rpm: float
    air_density_kgm3: float
    tolerance_fraction: float = SIZING_TOLERANCE

    def as_dict(self) -> dict:
        return asdict(self)


def static_thrust(spec: PowertrainSpec, rpm: float, density: float) -> float:
    """Static thrust of one propeller in newtons."""
    if rpm < 0.0:
        raise ValueError("rpm must be >= 0")
    if density <= 0.0:
        raise ValueError("density must be positive")
    n = rpm / 60.0
    return spec.thrust_coeff_Ct * density * n * n * spec.prop_diameter_m ** 4


def prop_power(spec: PowertrainSpec, rpm: float, density: float) -> float:
    """Mechanical shaft power of one propeller in watts."""
    if rpm < 0.0:
        raise ValueError("rpm must be >= 0")
    if density <= 0.0:
        raise ValueError("density must be positive")
    n = rpm / 60.0
    return spec.power_coeff_Cp * density * n ** 3 * spec.prop_diameter_m ** 5


def max_rpm(spec: PowertrainSpec, density: float) -> float:
    """Rpm ceiling where the pack's continuous discharge budget is exhausted.

    Budget per motor: pack_V * capacity_Ah * discharge_C * efficiency / 6
    mechanical watts, inverted through the cubic power law.
    """
    p_elec_max = spec.pack_voltage_V * (spec.capacity_mAh / 1000.0) * spec.discharge_C
    p_mech_per_motor = p_elec_max * spec.drivetrain_efficiency / spec.motor_count
    n = (p_mech_per_motor / (spec.power_coeff_Cp * density * spec.prop_diameter_m ** 5)) ** (1.0 / 3.0)
    return n * 60.0


def hover_point(spec: PowertrainSpec, env: Environment) -> tuple:
    """(hover_rpm, hover_current_A, hover_throttle_fraction) at equilibrium.

    Solves 6 * Ct * rho * n^2 * D^4 = m * g exactly; current follows from
    mechanical power through the drivetrain at nominal pack voltage.
    """
    rho = env.air_density_kgm3
    weight = spec.total_mass_kg * G_MPS2
    rpm_ceiling = max_rpm(spec, rho)
    if spec.motor_count * static_thrust(spec, rpm_ceiling, rho) <= weight:
        raise InfeasibleConfigurationError(
            f"thrust-to-weight <= 1 at max rpm ({rpm_ceiling:.0f})"
        )
    n_hover = math.sqrt(
        weight / (spec.motor_count * spec.thrust_coeff_Ct * rho * spec.prop_diameter_m ** 4)
    )
    rpm_hover = n_hover * 60.0
    p_mech = spec.motor_count * prop_power(spec, rpm_hover, rho)
    p_elec = p_mech / spec.drivetrain_efficiency
    current = p_elec / spec.pack_voltage_V
    return rpm_hover, current, rpm_hover / rpm_ceiling


def estimate_flight_time(spec: PowertrainSpec, env: Environment) -> float:
    """Hover endurance in minutes from the usable pack energy."""
    _, current, _ = hover_point(spec, env)
    usable_ah = spec.capacity_mAh / 1000.0 * spec.usable_capacity_fraction
    return usable_ah / current * 60.0


def build_sizing_report(spec: PowertrainSpec, env: Environment) -> SizingReport:
    rho = env.air_density_kgm3
    rpm_hover, current, throttle = hover_point(spec, env)
    rpm_ceiling = max_rpm(spec, rho)
    weight = spec.total_mass_kg * G_MPS2
    t2w = spec.motor_count * static_thrust(spec, rpm_ceiling, rho) / weight
    return SizingReport(
        hover_rpm=rpm_hover,
        hover_throttle_fraction=throttle,
        hover_current_A=current,
        flight_time_min=estimate_flight_time(spec, env),
        thrust_to_weight=t2w,
        max_rpm=rpm_ceiling,
        air_density_kgm3=rho,
    )


def load_sizing_config(path: str) -> tuple:
    """Read a [powertrain]/[environment] key-value config file."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(path)
    if "powertrain" not in parser:
        raise ValueError(f"{path}: missing [powertrain] section")
    pt = parser["powertrain"]
    spec = PowertrainSpec(
        prop_diameter_m=pt.getfloat("prop_diameter_m"),
        prop_pitch_m=pt.getfloat("prop_pitch_m"),
        thrust_coeff_Ct=pt.getfloat("thrust_coeff_Ct"),
        power_coeff_Cp=pt.getfloat("power_coeff_Cp"),
        motor_count=pt.getint("motor_count", fallback=6),
        battery_cells=pt.getint("battery_cells"),
        cell_voltage_nominal_V=pt.getfloat("cell_voltage_nominal_V", fallback=NOMINAL_CELL_V),
        capacity_mAh=pt.getfloat("capacity_mAh"),
        discharge_C=pt.getfloat("discharge_C"),
        drivetrain_efficiency=pt.getfloat("drivetrain_efficiency", fallback=0.7),
        usable_capacity_fraction=pt.getfloat("usable_capacity_fraction", fallback=0.8),
        total_mass_kg=pt.getfloat("total_mass_kg"),
    )
    ev = parser["environment"] if "environment" in parser else {}
    env = Environment(
        altitude_m=float(ev.get("altitude_m", 0.0)),
        temperature_offset_K=float(ev.get("temperature_offset_K", 0.0)),
        wind_mean_mps=float(ev.get("wind_mean_mps", 0.0)),
        wind_max_mps=float(ev.get("wind_max_mps", 0.0)),
    )
    return spec, env


def format_report(report: SizingReport) -> str:
    """Human-readable sizing summary."""
    band = report.tolerance_fraction
    lines = [
        "Powertrain sizing report",
        f"  air density        : {report.air_density_kgm3:8.3f} kg/m^3",
        f"  hover rpm          : {report.hover_rpm:8.0f} rpm "
        f"(throttle {report.hover_throttle_fraction:.2f})",
        f"  hover current      : {report.hover_current_A:8.1f} A",
        f"  flight time        : {report.flight_time_min:8.1f} min "
        f"(+/-{band * 100:.0f}%: {report.flight_time_min * (1 - band):.1f}"
        f"-{report.flight_time_min * (1 + band):.1f})",
        f"  thrust-to-weight   : {report.thrust_to_weight:8.2f} at full throttle",
        f"  rpm ceiling        : {report.max_rpm:8.0f} rpm",
    ]
    return "\n".join(lines)
