/** Latest-telemetry store with explicit staleness; rendering reads this. */

import { DecodedFrame, decodeText } from "./codec.js";

export const STALE_AFTER_MS = 2000;

export interface Attitude {
  rollRad: number;
  pitchRad: number;
  yawRad: number;
  receivedMs: number;
}

export interface LocalPosition {
  northM: number;
  eastM: number;
  downM: number;
  vnMps: number;
  veMps: number;
  vdMps: number;
  receivedMs: number;
}

export interface Heartbeat {
  modeId: number;
  armed: boolean;
  failsafeId: number;
  receivedMs: number;
}

export interface BatteryStatus {
  voltageV: number;
  currentA: number;
  remainingPct: number;
  receivedMs: number;
}

export interface GpsStatus {
  satellites: number;
  fixOk: boolean;
  accuracyM: number;
  receivedMs: number;
}

export interface TrackStatus {
  locked: boolean;
  centroidU: number;
  centroidV: number;
  rangeM: number;
  receivedMs: number;
}

export interface StatusMessage {
  severity: number;
  text: string;
  receivedMs: number;
}

export const MODE_NAMES: Record<number, string> = {
  0: "DISARMED", 1: "MANUAL", 2: "ALTITUDE_HOLD", 3: "POSITION_HOLD",
  4: "AUTO_MISSION", 5: "TRACK", 6: "RTL", 7: "LAND",
};

export const FAILSAFE_NAMES: Record<number, string> = {
  0: "NONE", 1: "OBSTACLE BACKOFF", 2: "STANDOFF BACKOFF",
  3: "LINK LOST: RTL", 4: "GEOFENCE: RTL", 5: "BATTERY: LAND",
};

export class UiState {
  connected = false;
  authority = false;
  crcErrors = 0;
  attitude: Attitude | null = null;
  position: LocalPosition | null = null;
  heartbeat: Heartbeat | null = null;
  battery: BatteryStatus | null = null;
  gps: GpsStatus | null = null;
  track: TrackStatus | null = null;
  statuses: StatusMessage[] = [];

  apply(frame: DecodedFrame, nowMs: number): void {
    const v = frame.values as Record<string, number>;
    switch (frame.name) {
      case "ATTITUDE":
        this.attitude = {
          rollRad: v.roll, pitchRad: v.pitch, yawRad: v.yaw, receivedMs: nowMs,
        };
        break;
      case "LOCAL_POSITION":
        this.position = {
          northM: v.north_m, eastM: v.east_m, downM: v.down_m,
          vnMps: v.vn_mps, veMps: v.ve_mps, vdMps: v.vd_mps, receivedMs: nowMs,
        };
        break;
      case "HEARTBEAT":
        this.heartbeat = {
          modeId: v.mode, armed: v.armed !== 0, failsafeId: v.failsafe,
          receivedMs: nowMs,
        };
        break;
      case "SYS_STATUS":
        this.battery = {
          voltageV: v.voltage_mV / 1000,
          currentA: v.current_cA / 100,
          remainingPct: v.battery_remaining_pct,
          receivedMs: nowMs,
        };
        break;
      case "GPS_RAW":
        this.gps = {
          satellites: v.num_satellites, fixOk: v.fix_ok !== 0,
          accuracyM: v.h_accuracy_m, receivedMs: nowMs,
        };
        break;
      case "TRACK_STATUS":
        this.track = {
          locked: v.locked !== 0, centroidU: v.centroid_u,
          centroidV: v.centroid_v, rangeM: v.range_m, receivedMs: nowMs,
        };
        break;
      case "STATUSTEXT": {
        const text = decodeText(frame.values.text as number[]);
        if (text.includes("control authority granted")) {
          this.authority = true;
        }
        this.statuses.push({ severity: v.severity as number, text, receivedMs: nowMs });
        if (this.statuses.length > 200) {
          this.statuses.shift();
        }
        break;
      }
      default:
        break;
    }
  }

  /** Newest telemetry age; Infinity before anything arrived. */
  dataAgeMs(nowMs: number): number {
    const stamps = [this.attitude, this.position, this.heartbeat]
      .filter((x): x is Attitude => x !== null)
      .map((x) => x.receivedMs);
    if (stamps.length === 0) {
      return Infinity;
    }
    return nowMs - Math.max(...stamps);
  }

  isStale(nowMs: number): boolean {
    return this.dataAgeMs(nowMs) > STALE_AFTER_MS;
  }

  modeName(): string {
    if (!this.heartbeat) return "?";
    return MODE_NAMES[this.heartbeat.modeId] ?? `mode ${this.heartbeat.modeId}`;
  }

  failsafeBanner(): string | null {
    if (!this.heartbeat || this.heartbeat.failsafeId === 0) return null;
    return FAILSAFE_NAMES[this.heartbeat.failsafeId]
      ?? `failsafe ${this.heartbeat.failsafeId}`;
  }
}
