#!/usr/bin/env python3
"""Regenerate the frontend's golden wire fixtures from the primary codec.

Writes frontend/tests/fixtures/golden.json (frames the UI must reproduce
byte-for-byte) and sample.tlog (a short recorded session the UI must decode
with zero CRC failures). Run from the repo root; commit the outputs.
"""

import json
import pathlib

from hexsim.runtime import run_scenario
from hexsim.scenario import load_scenario
from hexsim.wire import FrameEncoder, encode_text, load_dialect

OUT = pathlib.Path("frontend/tests/fixtures")

GOLDEN_MESSAGES = [
    ("COMMAND", {"command": 1, "param1": 0.0, "param2": 0.0, "param3": 0.0,
                 "param4": 0.0, "confirmation": 0}),                  # ARM
    ("SET_MODE", {"target_system": 1, "mode": 5}),                    # TRACK
    ("MISSION_ITEM", {"seq": 0, "count": 2, "north_m": 30.0, "east_m": 0.0,
                      "down_m": -15.0, "hold_s": 1.0,
                      "acceptance_radius_m": 2.0}),
    ("MISSION_ITEM", {"seq": 1, "count": 2, "north_m": 30.0, "east_m": 30.0,
                      "down_m": -15.0, "hold_s": 0.5,
                      "acceptance_radius_m": 2.0}),
    ("RC_CHANNELS", {"time_boot_ms": 123456, **{f"chan{i}_raw": 1500
                                                for i in range(1, 9)}}),
    ("STATUSTEXT", {"severity": 1, "text": encode_text("fence breach: rtl", 50)}),
    ("GPS_RAW", {"time_usec": 9_876_543_210, "num_satellites": 10, "fix_ok": 1,
                 "h_accuracy_m": 1.0, "north_m": 12.5, "east_m": -3.25,
                 "alt_m": 2608.0}),
]


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    registry = load_dialect()
    encoder = FrameEncoder(registry, sys_id=255, comp_id=255)

    frames = []
    for name, values in GOLDEN_MESSAGES:
        seq = encoder._seq
        raw = encoder.encode(name, values)
        frames.append({
            "name": name, "seq": seq, "sys_id": 255, "comp_id": 255,
            "values": {k: (str(v) if isinstance(v, int) and abs(v) > 2**52
                           else list(v) if isinstance(v, tuple) else v)
                       for k, v in values.items()},
            "hex": raw.hex(),
        })

    goldens = {
        "crc_check_value": "6f91",
        "crc_extra": {name: registry.schema(name).crc_extra
                      for name in registry.by_name},
        "payload_len": {name: registry.schema(name).payload_len
                        for name in registry.by_name},
        "frames": frames,
    }
    (OUT / "golden.json").write_text(json.dumps(goldens, indent=2) + "\n")

    scenario = load_scenario("fixtures/scenarios/calm_hover.yaml")
    scenario.duration_s = 3.0
    log = run_scenario(scenario)
    (OUT / "sample.tlog").write_bytes(log.tlog_bytes)
    print(f"wrote {OUT / 'golden.json'} ({len(frames)} frames) and "
          f"sample.tlog ({log.frames_emitted} frames)")


if __name__ == "__main__":
    main()
