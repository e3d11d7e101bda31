/**
 * GCS network client: one WebSocket of binary protocol frames each way.
 *
 * The socket factory is injectable so the same class drives the browser UI
 * and Node-based scripted sessions. Reconnects with exponential backoff;
 * CRC failures are counted, never fatal. Commands go through COMMAND /
 * SET_MODE / MISSION_ITEM frames; virtual sticks stream RC_CHANNELS.
 */

import {
  DecodedFrame,
  FrameDecoder,
  FrameEncoder,
  MessageValues,
  Registry,
  parseDialect,
} from "./codec.js";

export const CMD = {
  ARM: 1, DISARM: 2, TAKEOFF: 3, LAND: 4, RTL: 5, FAILSAFE_RESET: 6,
} as const;

export const MODE_IDS = {
  MANUAL: 1, ALTITUDE_HOLD: 2, POSITION_HOLD: 3, AUTO_MISSION: 4,
  TRACK: 5, RTL: 6, LAND: 7,
} as const;

export interface SocketLike {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: ArrayBuffer }) => void) | null;
  send(data: Uint8Array): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface Waypoint {
  northM: number;
  eastM: number;
  downM: number;
  holdS: number;
  acceptanceRadiusM: number;
}

export interface GcsClientOptions {
  socketFactory?: SocketFactory;
  heartbeatMs?: number;
  reconnectBaseMs?: number;
  now?: () => number;
}

export class GcsClient {
  registry: Registry;
  readonly decoder: FrameDecoder;
  private encoder: FrameEncoder;
  private socket: SocketLike | null = null;
  private url = "";
  private closed = false;
  private backoffMs: number;
  private heartbeatTimer: ReturnType<typeof setInterval> | null = null;
  private listeners: Array<(frame: DecodedFrame) => void> = [];
  private connectionListeners: Array<(up: boolean) => void> = [];
  connected = false;

  constructor(dialectXml: string, private options: GcsClientOptions = {}) {
    this.registry = parseDialect(dialectXml);
    this.decoder = new FrameDecoder(this.registry);
    this.encoder = new FrameEncoder(this.registry, 255, 255);
    this.backoffMs = options.reconnectBaseMs ?? 500;
  }

  onFrame(listener: (frame: DecodedFrame) => void): void {
    this.listeners.push(listener);
  }

  onConnection(listener: (up: boolean) => void): void {
    this.connectionListeners.push(listener);
  }

  connect(url: string): void {
    this.url = url;
    this.closed = false;
    this.open();
  }

  private open(): void {
    const factory = this.options.socketFactory
      ?? ((u: string) => new WebSocket(u) as unknown as SocketLike);
    const socket = factory(this.url);
    socket.binaryType = "arraybuffer";
    socket.onopen = () => {
      this.connected = true;
      this.backoffMs = this.options.reconnectBaseMs ?? 500;
      this.connectionListeners.forEach((fn) => fn(true));
      this.startHeartbeat();
    };
    socket.onmessage = (ev) => {
      for (const frame of this.decoder.feed(new Uint8Array(ev.data))) {
        this.listeners.forEach((fn) => fn(frame));
      }
    };
    socket.onclose = () => this.dropped();
    socket.onerror = () => { /* close follows; the feed must never throw */ };
    this.socket = socket;
  }

  private dropped(): void {
    if (this.connected) {
      this.connected = false;
      this.connectionListeners.forEach((fn) => fn(false));
    }
    this.stopHeartbeat();
    if (!this.closed) {
      const delay = this.backoffMs;
      this.backoffMs = Math.min(this.backoffMs * 2, 8000);
      setTimeout(() => { if (!this.closed) this.open(); }, delay);
    }
  }

  close(): void {
    this.closed = true;
    this.stopHeartbeat();
    this.socket?.close();
  }

  get crcErrors(): number {
    return this.decoder.stats.framesBadCrc;
  }

  // -- outgoing ------------------------------------------------------------

  send(message: string, values: MessageValues): void {
    if (!this.socket || !this.connected) {
      return;
    }
    this.socket.send(this.encoder.encode(message, values));
  }

  command(cmd: number, param1 = 0): void {
    this.send("COMMAND", {
      command: cmd, param1, param2: 0, param3: 0, param4: 0, confirmation: 0,
    });
  }

  arm(): void { this.command(CMD.ARM); }
  disarm(): void { this.command(CMD.DISARM); }
  takeoff(altitudeM = 10): void { this.command(CMD.TAKEOFF, altitudeM); }
  land(): void { this.command(CMD.LAND); }
  rtl(): void { this.command(CMD.RTL); }
  resetFailsafe(): void { this.command(CMD.FAILSAFE_RESET); }

  setMode(modeId: number): void {
    this.send("SET_MODE", { target_system: 1, mode: modeId });
  }

  uploadMission(waypoints: Waypoint[]): void {
    waypoints.forEach((wp, i) => {
      this.send("MISSION_ITEM", {
        seq: i, count: waypoints.length, north_m: wp.northM, east_m: wp.eastM,
        down_m: wp.downM, hold_s: wp.holdS,
        acceptance_radius_m: wp.acceptanceRadiusM,
      });
    });
  }

  sendSticks(roll: number, pitch: number, throttle: number, yaw: number): void {
    const pwm = (x: number) => Math.round(1500 + 500 * Math.max(-1, Math.min(1, x)));
    this.send("RC_CHANNELS", {
      time_boot_ms: (this.options.now?.() ?? Date.now()) & 0xffffffff,
      chan1_raw: pwm(roll), chan2_raw: pwm(pitch),
      chan3_raw: Math.round(1000 + 1000 * Math.max(0, Math.min(1, throttle))),
      chan4_raw: pwm(yaw), chan5_raw: 1500, chan6_raw: 1500,
      chan7_raw: 1500, chan8_raw: 1500,
    });
  }

  // -- heartbeat -------------------------------------------------------------

  private startHeartbeat(): void {
    this.stopHeartbeat();
    const period = this.options.heartbeatMs ?? 1000;
    this.heartbeatTimer = setInterval(() => {
      this.send("HEARTBEAT", {
        time_boot_ms: (this.options.now?.() ?? Date.now()) & 0xffffffff,
        mode: 0, armed: 0, failsafe: 0, authority: 0,
      });
    }, period);
  }

  private stopHeartbeat(): void {
    if (this.heartbeatTimer !== null) {
      clearInterval(this.heartbeatTimer);
      this.heartbeatTimer = null;
    }
  }
}

/** Fetch the dialect from the running simulator and build a client. */
export async function connectToSim(baseUrl: string,
                                   options: GcsClientOptions = {}): Promise<GcsClient> {
  const response = await fetch(`${baseUrl}/dialect.xml`);
  if (!response.ok) {
    throw new Error(`dialect fetch failed: ${response.status}`);
  }
  const client = new GcsClient(await response.text(), options);
  const wsUrl = baseUrl.replace(/^http/, "ws") + "/ws";
  client.connect(wsUrl);
  return client;
}
