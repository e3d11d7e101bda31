"""Scenario files: schema, validation and construction of run inputs.

Scenarios are YAML documents with a mandatory seed; every block has
conservative defaults so a minimal scenario is just a name, a seed and a
duration. The loader validates rate divisibility, geofence consistency of
missions and wind ordering before anything runs.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .control import Mission, SafetyLimits, Waypoint, validate_mission
from .dynamics import BatteryParams, RotorParams, VehicleParams, WindParams
from .sensors import BaroParams, GpsParams, ImuParams, MagParams, SensorParams
from .sizing import Environment
from .vision import CircleTarget, GuidanceParams, LockThresholds, PathTarget


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Rates:
    physics_hz: float = 500.0
    control_hz: float = 250.0
    vision_hz: float = 25.0
    telemetry_hz: float = 10.0

    def divisor(self, sub_hz: float) -> int:
        ratio = self.physics_hz / sub_hz
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ScenarioError(
                f"rate {sub_hz} Hz must integer-divide physics {self.physics_hz} Hz")
        return int(round(ratio))

    def validate(self):
        for hz in (self.control_hz, self.vision_hz, self.telemetry_hz):
            self.divisor(hz)


@dataclass(frozen=True)
class ScriptedAction:
    t_s: float
    action: str  # arm|disarm|takeoff|land|rtl|mode|mission|rc|rc_release|sats|reset
    params: dict = field(default_factory=dict)


@dataclass
class Scenario:
    name: str
    seed: int
    duration_s: float
    environment: Environment = Environment()
    rates: Rates = Rates()
    vehicle: VehicleParams = VehicleParams()
    sensors: SensorParams = SensorParams()
    wind: WindParams = WindParams()
    limits: SafetyLimits = SafetyLimits()
    guidance: GuidanceParams = GuidanceParams()
    lock: LockThresholds = LockThresholds()
    mission: Mission = None
    target: object = None  # CircleTarget | PathTarget | None
    obstacles: tuple = ()
    initial_position_ned: tuple = (0.0, 0.0, 0.0)
    initial_yaw_rad: float = 0.0
    start_airborne: bool = False
    gimbal_tilt_rad: float = math.radians(35.0)
    commands: tuple = ()
    vision_enabled: bool = False
    stream_vision: bool = False

    def validate(self):
        self.rates.validate()
        if self.seed is None:
            raise ScenarioError("scenario seed is mandatory")
        if self.duration_s <= 0:
            raise ScenarioError("duration must be positive")
        if self.mission is not None:
            try:
                validate_mission(self.mission, self.limits,
                                 np.asarray(self.initial_position_ned) * 0.0)
            except ValueError as exc:
                raise ScenarioError(str(exc)) from exc
        mean = float(np.linalg.norm(self.wind.mean_ned_mps))
        if self.wind.max_mps and mean > self.wind.max_mps + 1e-9:
            raise ScenarioError("wind mean exceeds configured max")


def _build(section, cls, **renames):
    if section is None:
        return cls()
    kwargs = {}
    for key, value in section.items():
        kwargs[renames.get(key, key)] = value
    return cls(**kwargs)


def _tupled(value):
    return tuple(value) if isinstance(value, list) else value


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return scenario_from_dict(doc, name_hint=str(path))


def scenario_from_dict(doc: dict, name_hint: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError(f"{name_hint}: scenario must be a mapping")
    try:
        return _parse(doc, name_hint)
    except (TypeError, KeyError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"{name_hint}: {exc}") from exc


def _parse(doc: dict, name_hint: str) -> Scenario:
    env = _build(doc.get("environment"), Environment)

    vehicle_doc = dict(doc.get("vehicle") or {})
    rotor = _build(vehicle_doc.pop("rotor", None), RotorParams)
    battery = _build(vehicle_doc.pop("battery", None), BatteryParams)
    if "inertia_diag" in vehicle_doc:
        vehicle_doc["inertia_diag"] = tuple(vehicle_doc["inertia_diag"])
    vehicle = VehicleParams(rotor=rotor, battery=battery, **vehicle_doc)

    sensors_doc = dict(doc.get("sensors") or {})
    sensors = SensorParams(
        imu=_build(sensors_doc.pop("imu", None), ImuParams),
        gps=_build(sensors_doc.pop("gps", None), GpsParams),
        baro=_build(sensors_doc.pop("baro", None), BaroParams),
        mag=_build(sensors_doc.pop("mag", None), MagParams),
        **sensors_doc)

    wind_doc = dict(doc.get("wind") or {})
    if "mean_ned_mps" in wind_doc:
        wind_doc["mean_ned_mps"] = tuple(wind_doc["mean_ned_mps"])
    if "max_mps" not in wind_doc:
        wind_doc["max_mps"] = env.wind_max_mps
    wind = WindParams(**wind_doc)

    mission = None
    if doc.get("mission"):
        mission = Mission(tuple(
            Waypoint(position_ned_m=tuple(wp["position_ned"]),
                     hold_s=float(wp.get("hold_s", 0.0)),
                     acceptance_radius_m=float(wp.get("acceptance_radius_m", 2.0)))
            for wp in doc["mission"]))

    target = None
    target_doc = doc.get("target")
    if target_doc:
        kind = target_doc.get("kind", "circle")
        params = {k: _tupled(v) for k, v in target_doc.items() if k != "kind"}
        if kind == "circle":
            target = CircleTarget(**params)
        elif kind == "path":
            target = PathTarget(**params)
        else:
            raise ScenarioError(f"unknown target kind {kind!r}")

    commands = tuple(sorted(
        (ScriptedAction(t_s=float(c["t"]), action=str(c["action"]),
                        params={k: _tupled(v) for k, v in c.items()
                                if k not in ("t", "action")})
         for c in doc.get("commands") or ()),
        key=lambda a: a.t_s))

    initial = doc.get("initial") or {}
    scenario = Scenario(
        name=str(doc.get("name", name_hint)),
        seed=doc["seed"] if "seed" in doc else None,
        duration_s=float(doc.get("duration_s", 0.0)),
        environment=env,
        rates=_build(doc.get("rates"), Rates),
        vehicle=vehicle,
        sensors=sensors,
        wind=wind,
        limits=_build(doc.get("limits"), SafetyLimits),
        guidance=_build(doc.get("guidance"), GuidanceParams),
        lock=_build(doc.get("lock"), LockThresholds),
        mission=mission,
        target=target,
        obstacles=tuple((tuple(o["position_ned"]), float(o.get("radius_m", 0.5)))
                        for o in doc.get("obstacles") or ()),
        initial_position_ned=tuple(initial.get("position_ned", (0.0, 0.0, 0.0))),
        initial_yaw_rad=math.radians(float(initial.get("yaw_deg", 0.0))),
        start_airborne=bool(initial.get("airborne", False)),
        gimbal_tilt_rad=math.radians(float(initial.get("gimbal_tilt_deg", 35.0))),
        commands=commands,
        vision_enabled=bool(doc.get("vision", {}).get("enabled",
                                                      target is not None)),
        stream_vision=bool(doc.get("vision", {}).get("stream", False)),
    )
    scenario.validate()
    return scenario
