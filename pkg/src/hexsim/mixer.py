"""Hexacopter control allocation with yaw-first desaturation.

Maps a commanded wrench (collective thrust + body torques) to six motor
commands in [0, 1] (rpm fraction). The pseudo-inverse solution is exact for
unsaturated wrenches; on saturation, yaw authority is shed first, then
roll/pitch, and collective thrust is preserved throughout (torque columns
of the pseudo-inverse are thrust-neutral).
"""

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import MotorBank, RotorParams, allocation_matrix


@dataclass
class MixResult:
    commands: np.ndarray          # six rpm fractions in [0, 1]
    thrusts_N: np.ndarray
    saturated: bool
    yaw_shed_fraction: float      # 0 = full yaw authority kept


class Mixer:
    def __init__(self, bank: MotorBank, rotor: RotorParams, density: float):
        self.rotor = rotor
        self.density = density
        self.matrix = allocation_matrix(bank, rotor)
        self.pinv = np.linalg.pinv(self.matrix)
        n_max = rotor.max_rpm / 60.0
        self.f_max = rotor.thrust_coeff_Ct * density * n_max * n_max * rotor.diameter_m ** 4

    def mix(self, thrust_N: float, torque_Nm) -> MixResult:
        w = np.array([max(thrust_N, 0.0), torque_Nm[0], torque_Nm[1], torque_Nm[2]])
        f_base = self.pinv[:, 0] * w[0]
        f_rp = self.pinv[:, 1] * w[1] + self.pinv[:, 2] * w[2]
        f_yaw = self.pinv[:, 3] * w[3]

        f = f_base + f_rp + f_yaw
        saturated = self._outside(f)
        yaw_scale = 1.0
        if saturated:
            yaw_scale = self._max_feasible_scale(f_base + f_rp, f_yaw)
            f = f_base + f_rp + yaw_scale * f_yaw
            if self._outside(f):
                rp_scale = self._max_feasible_scale(f_base + yaw_scale * f_yaw, f_rp)
                f = f_base + rp_scale * f_rp + yaw_scale * f_yaw
            f = np.clip(f, 0.0, self.f_max)

        commands = np.sqrt(np.clip(f, 0.0, self.f_max) / self.f_max)
        return MixResult(commands, f, saturated, 1.0 - yaw_scale)

    def wrench_of(self, commands) -> np.ndarray:
        """Forward map for verification: wrench produced by rpm-fraction commands."""
        f = self.f_max * np.asarray(commands) ** 2
        return self.matrix @ f

    def _outside(self, f: np.ndarray) -> bool:
        return bool(np.any(f < -1e-12) or np.any(f > self.f_max + 1e-12))

    def _max_feasible_scale(self, base: np.ndarray, delta: np.ndarray) -> float:
        """Largest s in [0,1] with base + s*delta inside [0, f_max]^6."""
        scale = 1.0
        for b, d in zip(base, delta):
            if d > 1e-15:
                scale = min(scale, (self.f_max - b) / d)
            elif d < -1e-15:
                scale = min(scale, (0.0 - b) / d)
        return max(0.0, min(1.0, scale))

    def hover_command(self, mass_kg: float) -> float:
        """Equal-motor rpm fraction that balances weight at this density."""
        f_hover = mass_kg * 9.80665 / 6.0
        if f_hover >= self.f_max:
            raise ValueError("vehicle cannot hover at this density")
        return math.sqrt(f_hover / self.f_max)
