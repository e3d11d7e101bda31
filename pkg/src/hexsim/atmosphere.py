"""International Standard Atmosphere (troposphere) relations.

Used by the sizing calculator, the barometer model and the truth dynamics.
Valid from sea level to the 11 km tropopause; calls outside that band raise.
"""

# Sea-level ISA constants
RHO0_KGM3 = 1.225
P0_PA = 101325.0
T0_K = 288.15
LAPSE_K_PER_M = 0.0065
G_MPS2 = 9.80665
R_SPECIFIC_JKGK = 287.053

TROPOPAUSE_M = 11000.0


def _check_altitude(altitude_m: float) -> None:
    if not 0.0 <= altitude_m <= TROPOPAUSE_M:
        raise ValueError(
            f"altitude {altitude_m} m outside troposphere range [0, {TROPOPAUSE_M:.0f}] m"
        )


def air_density(altitude_m: float, temperature_offset_k: float = 0.0) -> float:
    """Air density in kg/m^3 at a geometric altitude.

    Troposphere power law rho = rho0 * (1 - L*h/T0)^(g/(Rs*L) - 1) with the
    base temperature shifted by temperature_offset_k.
    """
    _check_altitude(altitude_m)
    t0 = T0_K + temperature_offset_k
    exponent = G_MPS2 / (R_SPECIFIC_JKGK * LAPSE_K_PER_M) - 1.0
    return RHO0_KGM3 * (1.0 - LAPSE_K_PER_M * altitude_m / t0) ** exponent


def pressure(altitude_m: float, temperature_offset_k: float = 0.0) -> float:
    """Static pressure in Pa at a geometric altitude."""
    _check_altitude(altitude_m)
    t0 = T0_K + temperature_offset_k
    exponent = G_MPS2 / (R_SPECIFIC_JKGK * LAPSE_K_PER_M)
    return P0_PA * (1.0 - LAPSE_K_PER_M * altitude_m / t0) ** exponent


def altitude_from_pressure(pressure_pa: float, temperature_offset_k: float = 0.0) -> float:
    """Inverse of pressure(): geometric altitude in m for a static pressure."""
    if pressure_pa <= 0.0:
        raise ValueError("pressure must be positive")
    t0 = T0_K + temperature_offset_k
    exponent = R_SPECIFIC_JKGK * LAPSE_K_PER_M / G_MPS2
    return t0 / LAPSE_K_PER_M * (1.0 - (pressure_pa / P0_PA) ** exponent)
