"""Symbolic ids shared by the simulator, the CLI and external clients."""

from .control import FlightMode

SYSTEM_ID = 1
COMP_AUTOPILOT = 1
COMP_GCS = 255

# COMMAND.command values
CMD_ARM = 1
CMD_DISARM = 2
CMD_TAKEOFF = 3  # param1 = altitude AGL (m), 0 -> default
CMD_LAND = 4
CMD_RTL = 5
CMD_FAILSAFE_RESET = 6

# STATUSTEXT.severity
SEV_INFO = 0
SEV_WARNING = 1
SEV_ERROR = 2

MODE_IDS = {
    FlightMode.DISARMED: 0,
    FlightMode.MANUAL: 1,
    FlightMode.ALTITUDE_HOLD: 2,
    FlightMode.POSITION_HOLD: 3,
    FlightMode.AUTO_MISSION: 4,
    FlightMode.TRACK: 5,
    FlightMode.RETURN_TO_LAUNCH: 6,
    FlightMode.LAND: 7,
}
MODES_BY_ID = {v: k for k, v in MODE_IDS.items()}

VISION_CHUNK_BYTES = 192
