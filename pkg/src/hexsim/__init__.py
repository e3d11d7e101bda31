"""Deterministic hexacopter flight-stack simulator for sports aerial filming.

Subsystems: ISA atmosphere + powertrain sizing, 6-DOF truth dynamics,
sensor models, complementary-filter navigation, cascaded flight control
with failsafes, a compact telemetry wire protocol, a brokerless message
bus with an image hub, a synthetic vision tracking loop, and a scenario
runtime with a GCS-facing telemetry/command server.
"""

__version__ = "0.1.0"
