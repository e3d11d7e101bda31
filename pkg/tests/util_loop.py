"""Closed-loop test harness: truth dynamics + autopilot, perfect estimate."""

import numpy as np

from hexsim.autopilot import Autopilot, ControlInputs
from hexsim.dynamics import Hexacopter, VehicleParams, WindState
from hexsim.estimator import NavEstimate

PHYSICS_DT = 0.002
CONTROL_EVERY = 2  # 250 Hz


def perfect_estimate(world: Hexacopter, t_us: int) -> NavEstimate:
    st = world.state
    return NavEstimate(
        attitude_q=st.attitude_q.copy(),
        position_ned_m=st.position_ned_m.copy(),
        velocity_ned_mps=st.velocity_ned_mps.copy(),
        gyro_bias_radps=np.zeros(3),
        body_rates_radps=st.body_rates_radps.copy(),
        attitude_valid=True, horizontal_valid=True, vertical_valid=True,
        degraded=False, timestamp_us=t_us)


class TruthLoop:
    """Steps a world at 500 Hz with the autopilot in the loop at 250 Hz."""

    def __init__(self, density=0.947, vehicle=None, autopilot=None, wind=None,
                 start_ned=(0.0, 0.0, 0.0)):
        self.vehicle = vehicle or VehicleParams()
        self.world = Hexacopter(self.vehicle, density=density)
        self.world.state.position_ned_m = np.array(start_ned, dtype=float)
        self.autopilot = autopilot or Autopilot(self.vehicle, density)
        self.wind = wind if wind is not None else WindState(np.zeros(3), np.zeros(3))
        self.t_s = 0.0
        self._cmds = np.zeros(6)
        self._step = 0

    def inputs(self, **overrides) -> ControlInputs:
        base = dict(
            estimate=perfect_estimate(self.world, int(self.t_s * 1e6)),
            battery_voltage_V=self.world.battery.voltage_V,
            now_s=self.t_s,
        )
        base.update(overrides)
        return ControlInputs(**base)

    def run(self, duration_s, on_control=None, on_step=None, input_fn=None):
        """Advance; on_control may mutate inputs, on_step records state."""
        steps = int(round(duration_s / PHYSICS_DT))
        for _ in range(steps):
            if self._step % CONTROL_EVERY == 0:
                inputs = input_fn(self) if input_fn else self.inputs()
                override = on_control(self, inputs) if on_control else None
                if override is not None:
                    self._cmds = np.asarray(override)
                else:
                    out = self.autopilot.update(inputs, PHYSICS_DT * CONTROL_EVERY)
                    self._cmds = out.motor_cmds
                    self.last_output = out
            self.world.step(self._cmds, self.wind, PHYSICS_DT)
            self._step += 1
            self.t_s = self._step * PHYSICS_DT
            if on_step:
                on_step(self)
