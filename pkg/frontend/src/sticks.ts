/**
 * Virtual sticks: pointer drag on two pads plus WASD/arrow keys, streamed
 * as RC_CHANNELS at 20 Hz while engaged. Releasing a pad re-centers it
 * (throttle holds its last value, like a real throttle stick).
 */

import { GcsClient } from "./client.js";

const RATE_MS = 50; // 20 Hz

interface PadState {
  x: number; // -1..1
  y: number; // -1..1
  active: boolean;
}

export class VirtualSticks {
  left: PadState = { x: 0, y: 0, active: false };   // yaw / throttle
  right: PadState = { x: 0, y: 0, active: false };  // roll / pitch
  throttle = 0.5;
  engaged = false;
  private timer: ReturnType<typeof setInterval> | null = null;
  private keys = new Set<string>();

  constructor(private client: GcsClient,
              leftPad: HTMLElement, rightPad: HTMLElement) {
    this.bindPad(leftPad, this.left);
    this.bindPad(rightPad, this.right);
    window.addEventListener("keydown", (ev) => this.keys.add(ev.key));
    window.addEventListener("keyup", (ev) => this.keys.delete(ev.key));
  }

  engage(on: boolean): void {
    this.engaged = on;
    if (on && this.timer === null) {
      this.timer = setInterval(() => this.tick(), RATE_MS);
    } else if (!on && this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private bindPad(el: HTMLElement, pad: PadState): void {
    const update = (ev: PointerEvent) => {
      const rect = el.getBoundingClientRect();
      pad.x = ((ev.clientX - rect.left) / rect.width) * 2 - 1;
      pad.y = ((ev.clientY - rect.top) / rect.height) * 2 - 1;
      pad.x = Math.max(-1, Math.min(1, pad.x));
      pad.y = Math.max(-1, Math.min(1, pad.y));
    };
    el.addEventListener("pointerdown", (ev) => {
      pad.active = true;
      el.setPointerCapture(ev.pointerId);
      update(ev);
    });
    el.addEventListener("pointermove", (ev) => {
      if (pad.active) update(ev);
    });
    const release = () => {
      pad.active = false;
      pad.x = 0;
      pad.y = 0; // release re-centers
    };
    el.addEventListener("pointerup", release);
    el.addEventListener("pointercancel", release);
  }

  private keyboardAxes(): { roll: number; pitch: number; yaw: number; climb: number } {
    const k = this.keys;
    const axis = (neg: string[], pos: string[]) =>
      (pos.some((key) => k.has(key)) ? 1 : 0) - (neg.some((key) => k.has(key)) ? 1 : 0);
    return {
      roll: axis(["ArrowLeft"], ["ArrowRight"]),
      pitch: axis(["ArrowDown"], ["ArrowUp"]),
      yaw: axis(["a", "A"], ["d", "D"]),
      climb: axis(["s", "S"], ["w", "W"]),
    };
  }

  private tick(): void {
    const keys = this.keyboardAxes();
    const roll = this.right.active ? this.right.x : keys.roll;
    const pitch = this.right.active ? -this.right.y : keys.pitch;
    const yaw = this.left.active ? this.left.x : keys.yaw;
    if (this.left.active) {
      this.throttle = Math.max(0, Math.min(1, 0.5 - this.left.y * 0.5));
    } else if (keys.climb !== 0) {
      this.throttle = Math.max(0, Math.min(1, this.throttle + keys.climb * 0.02));
    }
    this.client.sendSticks(roll, pitch, this.throttle, yaw);
  }
}
