"""Deterministic scenario runtime: scheduler, telemetry, session logs.

One SimSession advances physics, sensing, estimation, control and vision at
their configured rates from a single fixed-step loop. All randomness comes
from named child seeds of the scenario seed, so a (scenario, seed, command
timeline) triple reproduces bit-identical truth traces and telemetry logs.
Live clients talk to the loop exclusively through queues.
"""

import io
import math
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .autopilot import Autopilot, ControlInputs, TrackGuidance
from .bus import Bus, ImageHub
from .control import FailsafeAction, FlightMode, Mission, Waypoint
from .dynamics import Hexacopter, WindModel, WindState
from .estimator import NavigationFilter, SensorBatch
from .messages import (
    CMD_ARM,
    CMD_DISARM,
    CMD_FAILSAFE_RESET,
    CMD_LAND,
    CMD_RTL,
    CMD_TAKEOFF,
    COMP_AUTOPILOT,
    MODE_IDS,
    MODES_BY_ID,
    SEV_ERROR,
    SEV_INFO,
    SEV_WARNING,
    SYSTEM_ID,
    VISION_CHUNK_BYTES,
)
from .rotations import euler_from_quat, quat_from_euler
from .scenario import Scenario
from .sensors import sample_baro, sample_gps, sample_imu, sample_mag
from .vision import Gimbal, VisionTracker, render_frame
from .wire import FrameEncoder, encode_text, load_dialect, unpack_payload
from .wire.tlog import TlogWriter


def child_rng(seed: int, name: str) -> np.random.Generator:
    """Deterministic named stream derived from the scenario seed."""
    return np.random.default_rng(
        np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


@dataclass
class SessionLog:
    scenario_name: str
    duration_s: float
    truth: np.ndarray          # rows: t, p(3), v(3), q(4), w(3), volt, mAh
    events: list               # (t_s, text)
    tlog_bytes: bytes
    frames_emitted: int
    final_mode: str
    failsafe: str

    TRUTH_COLUMNS = ("t_s", "north_m", "east_m", "down_m", "vn_mps", "ve_mps",
                     "vd_mps", "qw", "qx", "qy", "qz", "p_radps", "q_radps",
                     "r_radps", "battery_V", "consumed_mAh")

    def truth_csv(self) -> str:
        lines = [",".join(self.TRUTH_COLUMNS)]
        for row in self.truth:
            lines.append(",".join(repr(float(x)) for x in row))
        return "\n".join(lines) + "\n"


class SimSession:
    """Single-owner simulation loop; network I/O stays behind queues."""

    def __init__(self, scenario: Scenario, registry=None):
        self.scenario = scenario
        self.registry = registry or load_dialect()
        sc = scenario
        self.density = sc.environment.air_density_kgm3

        self.world = Hexacopter(sc.vehicle, density=self.density)
        self.world.state.position_ned_m = np.array(sc.initial_position_ned,
                                                   dtype=float)
        self.world.state.attitude_q = quat_from_euler(0.0, 0.0, sc.initial_yaw_rad)

        self.autopilot = Autopilot(sc.vehicle, self.density, sc.limits,
                                   obstacles=sc.obstacles)
        self.nav = NavigationFilter(base_altitude_m=sc.environment.altitude_m,
                                    mag_declination_rad=sc.sensors.mag.declination_rad)
        self.wind_model = WindModel(sc.wind, child_rng(sc.seed, "wind"))
        self._rngs = {name: child_rng(sc.seed, name)
                      for name in ("imu", "gps", "baro", "mag", "vision")}

        self.bus = Bus()
        self.hub = ImageHub()
        self._node_sensors = self.bus.node("sensors")
        self._node_estimator = self.bus.node("estimator")
        self._node_control = self.bus.node("control")
        self._node_vision = self.bus.node("vision")
        self._sub_estimate = self._node_control.subscribe("nav/estimate", maxlen=4)
        self._sub_track = self._node_control.subscribe("vision/track", maxlen=4)
        self._sub_motors = self.bus.node("plant").subscribe("actuators/motors",
                                                            maxlen=4)

        self.tracker = None
        if sc.vision_enabled and sc.target is not None:
            self.tracker = VisionTracker(
                gimbal=Gimbal(tilt_rad=sc.gimbal_tilt_rad),
                params=sc.guidance, thresholds=sc.lock)

        self.encoder = FrameEncoder(self.registry, SYSTEM_ID, COMP_AUTOPILOT)
        self._tlog_buf = io.BytesIO()
        self._tlog = TlogWriter(self._tlog_buf)
        self.events = []
        self.frames_emitted = 0

        # live I/O (optional): inbound raw frames, outbound frame fanout
        self.inbound = None      # queue.Queue of raw frame bytes
        self.broadcast = None    # callable(bytes)
        self.authority_age_s = lambda: math.inf

        self._num_sats = sc.sensors.num_satellites
        self._rc_channels = None
        self._rc_held = False      # scripted sticks count as continuously fresh
        self._rc_last_s = None
        self._estimate = None
        self._guidance = None
        self._guidance_t = -math.inf
        self._last_diag = None
        self._cmds = np.zeros(6)
        self._mission_rx = {}
        self._script_idx = 0
        self.t_s = 0.0

        if sc.start_airborne:
            self._start_airborne()

    # -- setup -------------------------------------------------------------

    def _start_airborne(self):
        sc = self.scenario
        est0 = self.nav.estimate
        est0.position_ned_m = np.array(sc.initial_position_ned, dtype=float)
        est0.attitude_q = quat_from_euler(0.0, 0.0, sc.initial_yaw_rad)
        est0.attitude_valid = True
        ap = self.autopilot
        ap.home_ned = np.array([sc.initial_position_ned[0],
                                sc.initial_position_ned[1], 0.0])
        ap.hold_position = np.array(sc.initial_position_ned, dtype=float)
        ap.yaw_sp = sc.initial_yaw_rad
        ap.mode = FlightMode.POSITION_HOLD
        ap.airborne = True
        hover_cmd = ap.mixer.hover_command(sc.vehicle.mass_kg)
        self.world.motors.rpm[:] = hover_cmd * sc.vehicle.rotor.max_rpm
        self._cmds[:] = hover_cmd

    # -- event + telemetry helpers ------------------------------------------

    def _event(self, text: str, severity: int = SEV_INFO):
        self.events.append((round(self.t_s, 4), text))
        self._emit("STATUSTEXT", {"severity": severity,
                                  "text": encode_text(text, 50)})

    def _emit(self, message: str, values: dict):
        raw = self.encoder.encode(message, values)
        self._tlog.write(int(self.t_s * 1e6), raw)
        self.frames_emitted += 1
        if self.broadcast is not None:
            self.broadcast(raw)

    # -- main loop -----------------------------------------------------------

    def run(self, pace_to_wall: bool = False, stop=None) -> SessionLog:
        sc = self.scenario
        rates = sc.rates
        dt = 1.0 / rates.physics_hz
        steps = int(round(sc.duration_s * rates.physics_hz))
        every_control = rates.divisor(rates.control_hz)
        every_vision = rates.divisor(rates.vision_hz)
        every_telemetry = rates.divisor(rates.telemetry_hz)
        every_heartbeat = int(rates.physics_hz)  # 1 Hz
        imu_div = rates.divisor(sc.sensors.imu_hz)
        mag_div = rates.divisor(sc.sensors.mag_hz)
        baro_div = rates.divisor(sc.sensors.baro_hz)
        gps_div = rates.divisor(sc.sensors.gps_hz)

        truth_rows = np.empty((steps, 16))
        wall_start = time.monotonic()

        for k in range(steps):
            self.t_s = k * dt
            t_us = int(round(self.t_s * 1e6))

            wind = self.wind_model.sample(dt)

            batch = self._sample_sensors(k, t_us, imu_div, mag_div, baro_div,
                                         gps_div)
            estimate = self.nav.step(batch, dt)
            self._estimate = estimate
            self._node_estimator.publish("nav/estimate", estimate, t_us)

            # commands act on the freshly published estimate
            self._apply_scripted_commands()
            if self.inbound is not None:
                self._drain_inbound()

            if self.tracker is not None and k % every_vision == 0:
                self._vision_step(t_us, k // every_vision)

            if k % every_control == 0:
                self._control_step(t_us, every_control * dt)

            diag = self.world.step(self._cmds, wind, dt)
            self._last_diag = diag

            st = self.world.state
            truth_rows[k] = (
                self.t_s, *st.position_ned_m, *st.velocity_ned_mps,
                *st.attitude_q, *st.body_rates_radps,
                self.world.battery.voltage_V, self.world.battery.consumed_mAh)

            if k % every_heartbeat == 0:
                self._emit_heartbeat(t_us)
                self._emit_sys_status(t_us)
            if k % every_telemetry == 0:
                self._emit_telemetry(t_us)

            if pace_to_wall:
                lag = (self.t_s + dt) - (time.monotonic() - wall_start)
                if lag > 0.0:
                    time.sleep(lag)
            if stop is not None and stop.is_set():
                truth_rows = truth_rows[:k + 1]
                break

        return SessionLog(
            scenario_name=sc.name,
            duration_s=self.t_s + dt,
            truth=truth_rows,
            events=self.events,
            tlog_bytes=self._tlog_buf.getvalue(),
            frames_emitted=self.frames_emitted,
            final_mode=self.autopilot.mode.name,
            failsafe=self.autopilot.failsafe.name,
        )

    # -- subsystem steps ------------------------------------------------------

    def _sample_sensors(self, k, t_us, imu_div, mag_div, baro_div, gps_div):
        sc = self.scenario
        st = self.world.state
        imu = mag = baro = gps = None
        if k % imu_div == 0:
            specific = self._last_diag.specific_force_body if self._last_diag \
                else np.array([0.0, 0.0, -9.80665])
            rev_s = self._last_diag.motor_rev_s_mean if self._last_diag else 0.0
            imu = sample_imu(st, specific, rev_s, sc.sensors.imu,
                             self._rngs["imu"], t_us)
            self._node_sensors.publish("sensors/imu", imu, t_us)
        if k % mag_div == 0:
            mag = sample_mag(st, sc.sensors.mag, self._rngs["mag"], t_us)
            self._node_sensors.publish("sensors/mag", mag, t_us)
        if k % baro_div == 0:
            baro = sample_baro(st, sc.environment.altitude_m, sc.sensors.baro,
                               self._rngs["baro"], t_us)
            self._node_sensors.publish("sensors/baro", baro, t_us)
        if k % gps_div == 0:
            gps = sample_gps(st, self._num_sats, sc.sensors.gps,
                             self._rngs["gps"], t_us)
            self._node_sensors.publish("sensors/gps", gps, t_us)
        return SensorBatch(imu=imu, mag=mag, baro=baro, gps=gps, timestamp_us=t_us)

    def _vision_step(self, t_us, frame_seq):
        sc = self.scenario
        target_pos = sc.target.position(self.t_s)
        cam_q_truth = self.tracker.gimbal.orientation(self.world.state.attitude_q)
        frame = render_frame(
            self.tracker.camera, cam_q_truth, self.world.state.position_ned_m,
            target_pos, sc.target.radius_body_m, frame_seq, t_us,
            rng=self._rngs["vision"])
        self.hub.put("main", frame, writer="renderer")
        latest = self.hub.get_latest("main")
        track, g = self.tracker.process(latest[0], self._estimate)
        self._guidance = TrackGuidance(
            velocity_ned_mps=g["velocity_ned_mps"], yaw_sp=g["yaw_sp"],
            locked=g["locked"], slant_range_m=g["slant_range_m"],
            target_ned_est=g["target_ned_est"], yaw_rate_ff=g["yaw_rate_ff"])
        self._guidance_t = self.t_s
        self._node_vision.publish("vision/track", self._guidance, t_us)
        self._emit("TRACK_STATUS", {
            "time_boot_ms": t_us // 1000,
            "locked": int(track.locked),
            "centroid_u": 0.0 if math.isnan(track.centroid_px[0])
            else track.centroid_px[0],
            "centroid_v": 0.0 if math.isnan(track.centroid_px[1])
            else track.centroid_px[1],
            "pixel_mass": track.pixel_mass,
            "range_m": track.estimated_range_m,
        })
        if sc.stream_vision and frame_seq % 10 == 0:
            self._stream_frame(frame, t_us)

    def _stream_frame(self, frame, t_us):
        small = frame.pixels[::20, ::20]  # 640x480 -> 32x24
        data = small.tobytes()
        chunks = [data[i:i + VISION_CHUNK_BYTES]
                  for i in range(0, len(data), VISION_CHUNK_BYTES)]
        for idx, chunk in enumerate(chunks):
            padded = chunk.ljust(VISION_CHUNK_BYTES, b"\x00")
            self._emit("VISION_FRAME", {
                "frame_seq": frame.frame_seq & 0xFFFF,
                "chunk_index": idx, "chunk_count": len(chunks),
                "width_px": small.shape[1], "height_px": small.shape[0],
                "data": tuple(padded),
            })

    def _control_step(self, t_us, dt_control):
        # consume bus inputs the way a separate node would: newest wins
        estimate = self._estimate
        for env in self._sub_estimate.poll():
            estimate = env.payload
        guidance = self._guidance
        for env in self._sub_track.poll():
            guidance = env.payload
        if guidance is not None:
            age = self.t_s - self._guidance_t
            guidance = TrackGuidance(
                guidance.velocity_ned_mps, guidance.yaw_sp, guidance.locked,
                guidance.slant_range_m, guidance.target_ned_est,
                guidance.yaw_rate_ff, age)
        rc_age = self._rc_age()
        link_age = min(rc_age, self.authority_age_s())
        inputs = ControlInputs(
            estimate=estimate,
            battery_voltage_V=self.world.battery.voltage_V,
            now_s=self.t_s,
            rc_channels=self._rc_channels,
            rc_age_s=rc_age,
            link_age_s=link_age,
            track=guidance,
        )
        before_failsafe = self.autopilot.failsafe
        out = self.autopilot.update(inputs, dt_control)
        self._cmds = out.motor_cmds
        self._node_control.publish("actuators/motors", out.motor_cmds, t_us)
        for text in out.events:
            self._event(text, SEV_WARNING if "failsafe" in text else SEV_INFO)
        if out.failsafe is not before_failsafe:
            self._node_control.publish("status/failsafe", out.failsafe.name, t_us)

    # -- commands --------------------------------------------------------------

    def _apply_scripted_commands(self):
        sc = self.scenario
        while self._script_idx < len(sc.commands) \
                and sc.commands[self._script_idx].t_s <= self.t_s:
            action = sc.commands[self._script_idx]
            self._script_idx += 1
            self._run_action(action.action, action.params)

    def _run_action(self, action: str, params: dict):
        ap = self.autopilot
        if action == "arm":
            ok, msg = ap.command_arm(self._estimate or self.nav.estimate)
        elif action == "disarm":
            ok, msg = ap.command_disarm()
        elif action == "takeoff":
            ok, msg = ap.command_takeoff(self._estimate or self.nav.estimate,
                                         float(params.get("altitude", 10.0)))
        elif action == "land":
            ok, msg = ap.command_land()
        elif action == "rtl":
            ok, msg = ap.command_rtl()
        elif action == "reset":
            ok, msg = ap.command_failsafe_reset()
        elif action == "mode":
            mode = FlightMode[params["mode"]]
            rc_age = self._rc_age()
            guidance = self._guidance
            if guidance is not None:
                guidance = TrackGuidance(
                    guidance.velocity_ned_mps, guidance.yaw_sp, guidance.locked,
                    guidance.slant_range_m, guidance.target_ned_est,
                    guidance.yaw_rate_ff, self.t_s - self._guidance_t)
            ok, msg = ap.request_mode(mode, ControlInputs(
                estimate=self._estimate or self.nav.estimate,
                battery_voltage_V=self.world.battery.voltage_V,
                now_s=self.t_s, rc_channels=self._rc_channels, rc_age_s=rc_age,
                track=guidance))
        elif action == "rc":
            self._rc_channels = tuple(params["channels"])
            self._rc_held = True
            self._rc_last_s = self.t_s
            ok, msg = True, "rc updated"
        elif action == "rc_release":
            self._rc_held = False
            self._rc_last_s = self.t_s
            ok, msg = True, "rc released"
        elif action == "sats":
            self._num_sats = int(params["count"])
            ok, msg = True, f"satellites {self._num_sats}"
        elif action == "mission":
            items = params.get("waypoints", ())
            mission = Mission(tuple(
                Waypoint(tuple(wp["position_ned"]),
                         float(wp.get("hold_s", 0.0)),
                         float(wp.get("acceptance_radius_m", 2.0)))
                for wp in items))
            ok, msg = ap.set_mission(mission)
        else:
            ok, msg = False, f"unknown scripted action {action!r}"
        severity = SEV_INFO if ok else SEV_ERROR
        self._event(f"script {action}: {msg}", severity)

    def _rc_age(self) -> float:
        if self._rc_channels is None:
            return math.inf
        if self._rc_held:
            return 0.0
        return self.t_s - self._rc_last_s if self._rc_last_s is not None \
            else math.inf

    def _drain_inbound(self):
        """Apply frames a live client pushed since the last step."""
        from queue import Empty
        while True:
            try:
                frame = self.inbound.get_nowait()
            except Empty:
                return
            self._handle_client_frame(frame)

    def _handle_client_frame(self, frame) -> None:
        self._tlog.write(int(self.t_s * 1e6), frame.raw)
        schema = self.registry.by_id.get(frame.msg_id)
        if schema is None:
            return
        values = unpack_payload(schema, frame.payload)
        name = schema.name
        if name == "COMMAND":
            self._client_command(values)
        elif name == "SET_MODE":
            self._run_action("mode",
                             {"mode": MODES_BY_ID[values["mode"]].name})
        elif name == "RC_CHANNELS":
            self._rc_channels = tuple(values[f"chan{i}_raw"]
                                      for i in range(1, 9))[:4]
            self._rc_held = False
            self._rc_last_s = self.t_s
        elif name == "MISSION_ITEM":
            self._mission_item(values)
        elif name == "HEARTBEAT":
            pass  # presence already tracked by the server's authority clock

    def _client_command(self, values):
        command = values["command"]
        actions = {CMD_ARM: "arm", CMD_DISARM: "disarm", CMD_TAKEOFF: "takeoff",
                   CMD_LAND: "land", CMD_RTL: "rtl", CMD_FAILSAFE_RESET: "reset"}
        if command not in actions:
            self._event(f"rejected unknown command {command}", SEV_ERROR)
            return
        params = {}
        if command == CMD_TAKEOFF and values["param1"] > 0:
            params["altitude"] = float(values["param1"])
        self._run_action(actions[command], params)

    def _mission_item(self, values):
        self._mission_rx[values["seq"]] = values
        count = values["count"]
        if count and len(self._mission_rx) == count:
            waypoints = []
            for i in range(count):
                if i not in self._mission_rx:
                    self._event("mission upload incomplete", SEV_ERROR)
                    self._mission_rx.clear()
                    return
                wp = self._mission_rx[i]
                waypoints.append({
                    "position_ned": (wp["north_m"], wp["east_m"], wp["down_m"]),
                    "hold_s": wp["hold_s"],
                    "acceptance_radius_m": wp["acceptance_radius_m"]})
            self._mission_rx.clear()
            self._run_action("mission", {"waypoints": waypoints})

    # -- telemetry ---------------------------------------------------------------

    def _emit_heartbeat(self, t_us):
        ap = self.autopilot
        self._emit("HEARTBEAT", {
            "time_boot_ms": t_us // 1000,
            "mode": MODE_IDS[ap.mode],
            "armed": int(ap.mode is not FlightMode.DISARMED),
            "failsafe": int(ap.failsafe),
            "authority": int(self.authority_age_s() < math.inf),
        })

    def _emit_sys_status(self, t_us):
        batt = self.world.battery
        remaining = max(0.0, 1.0 - batt.consumed_mAh / batt.params.capacity_mAh)
        current = self._last_diag.current_A if self._last_diag else 0.0
        self._emit("SYS_STATUS", {
            "time_boot_ms": t_us // 1000,
            "voltage_mV": int(batt.voltage_V * 1000) & 0xFFFF,
            "current_cA": int(current * 100),
            "consumed_mAh": int(batt.consumed_mAh) & 0xFFFF,
            "battery_remaining_pct": int(remaining * 100),
        })

    def _emit_telemetry(self, t_us):
        est = self._estimate
        if est is None:
            return
        roll, pitch, yaw = euler_from_quat(est.attitude_q)
        rates = est.body_rates_radps
        self._emit("ATTITUDE", {
            "time_boot_ms": t_us // 1000, "roll": roll, "pitch": pitch,
            "yaw": yaw, "rollspeed": rates[0], "pitchspeed": rates[1],
            "yawspeed": rates[2]})
        pos = est.position_ned_m
        vel = est.velocity_ned_mps
        self._emit("LOCAL_POSITION", {
            "time_boot_ms": t_us // 1000, "north_m": pos[0], "east_m": pos[1],
            "down_m": pos[2], "vn_mps": vel[0], "ve_mps": vel[1],
            "vd_mps": vel[2]})
        gps_sigma = 1.0 if self._num_sats >= 9 else (
            (9.0 / self._num_sats) ** 2 if self._num_sats >= 6 else 0.0)
        self._emit("GPS_RAW", {
            "time_usec": t_us, "num_satellites": self._num_sats,
            "fix_ok": int(self._num_sats >= 6), "h_accuracy_m": gps_sigma,
            "north_m": pos[0], "east_m": pos[1],
            "alt_m": self.scenario.environment.altitude_m - pos[2]})
        if self._guidance is not None:
            pass  # TRACK_STATUS already emitted at the vision rate


def run_scenario(scenario: Scenario, tlog_path=None, truth_csv_path=None,
                 pace_to_wall: bool = False) -> SessionLog:
    session = SimSession(scenario)
    log = session.run(pace_to_wall=pace_to_wall)
    if tlog_path:
        with open(tlog_path, "wb") as fh:
            fh.write(log.tlog_bytes)
    if truth_csv_path:
        with open(truth_csv_path, "w", encoding="utf-8") as fh:
            fh.write(log.truth_csv())
    return log
