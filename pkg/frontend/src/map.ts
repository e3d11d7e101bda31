/**
 * Top-down local-NED map: vehicle, home, 200 m geofence ring, target track,
 * mission line, obstacles. Click to append mission waypoints.
 */

import { Waypoint } from "./client.js";
import { LocalPosition, TrackStatus, UiState } from "./state.js";

export const GEOFENCE_RADIUS_M = 200;
export const CEILING_M = 100;

export interface Obstacle {
  northM: number;
  eastM: number;
  radiusM: number;
}

export class MapView {
  scalePxPerM = 1.6;
  draft: Waypoint[] = [];
  obstacles: Obstacle[] = [];
  invalidDraftIndex: number | null = null;
  private trail: Array<[number, number]> = [];

  constructor(private canvas: HTMLCanvasElement) {}

  /** (east, north) meters -> canvas pixels, NED north-up display. */
  toPx(northM: number, eastM: number): [number, number] {
    return [this.canvas.width / 2 + eastM * this.scalePxPerM,
            this.canvas.height / 2 - northM * this.scalePxPerM];
  }

  toNed(xPx: number, yPx: number): [number, number] {
    return [(this.canvas.height / 2 - yPx) / this.scalePxPerM,
            (xPx - this.canvas.width / 2) / this.scalePxPerM];
  }

  addDraftWaypoint(northM: number, eastM: number, downM: number): void {
    this.draft.push({
      northM, eastM, downM, holdS: 1.0, acceptanceRadiusM: 2.0,
    });
    this.validateDraft();
  }

  validateDraft(): void {
    this.invalidDraftIndex = null;
    this.draft.forEach((wp, i) => {
      const horizontal = Math.hypot(wp.northM, wp.eastM);
      if (horizontal > GEOFENCE_RADIUS_M || -wp.downM > CEILING_M) {
        this.invalidDraftIndex = this.invalidDraftIndex ?? i;
      }
    });
  }

  clearDraft(): void {
    this.draft = [];
    this.invalidDraftIndex = null;
  }

  render(state: UiState): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width: w, height: h } = this.canvas;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#0c1018";
    ctx.fillRect(0, 0, w, h);

    this.drawGrid(ctx);
    this.drawGeofence(ctx);
    this.drawObstacles(ctx);
    this.drawMission(ctx);
    this.drawTarget(ctx, state.track, state.position);
    this.drawVehicle(ctx, state.position);
  }

  private drawGrid(ctx: CanvasRenderingContext2D): void {
    ctx.strokeStyle = "#1b2435";
    ctx.lineWidth = 1;
    const step = 50 * this.scalePxPerM;
    for (let x = this.canvas.width / 2 % step; x < this.canvas.width; x += step) {
      ctx.beginPath(); ctx.moveTo(x, 0); ctx.lineTo(x, this.canvas.height); ctx.stroke();
    }
    for (let y = this.canvas.height / 2 % step; y < this.canvas.height; y += step) {
      ctx.beginPath(); ctx.moveTo(0, y); ctx.lineTo(this.canvas.width, y); ctx.stroke();
    }
  }

  private drawGeofence(ctx: CanvasRenderingContext2D): void {
    const [cx, cy] = this.toPx(0, 0);
    ctx.strokeStyle = "#c43";
    ctx.setLineDash([8, 6]);
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(cx, cy, GEOFENCE_RADIUS_M * this.scalePxPerM, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.setLineDash([]);
    // home
    ctx.strokeStyle = "#8f8";
    ctx.beginPath();
    ctx.moveTo(cx - 7, cy); ctx.lineTo(cx + 7, cy);
    ctx.moveTo(cx, cy - 7); ctx.lineTo(cx, cy + 7);
    ctx.stroke();
  }

  private drawObstacles(ctx: CanvasRenderingContext2D): void {
    ctx.fillStyle = "rgba(200,120,40,0.5)";
    for (const ob of this.obstacles) {
      const [x, y] = this.toPx(ob.northM, ob.eastM);
      ctx.beginPath();
      ctx.arc(x, y, Math.max(ob.radiusM * this.scalePxPerM, 3), 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  private drawMission(ctx: CanvasRenderingContext2D): void {
    if (this.draft.length === 0) return;
    ctx.strokeStyle = "#4af";
    ctx.lineWidth = 2;
    ctx.beginPath();
    this.draft.forEach((wp, i) => {
      const [x, y] = this.toPx(wp.northM, wp.eastM);
      if (i === 0) ctx.moveTo(x, y); else ctx.lineTo(x, y);
    });
    ctx.stroke();
    this.draft.forEach((wp, i) => {
      const [x, y] = this.toPx(wp.northM, wp.eastM);
      ctx.fillStyle = i === this.invalidDraftIndex ? "#f44" : "#4af";
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillStyle = "#ccc";
      ctx.font = "10px monospace";
      ctx.fillText(`${i + 1}`, x + 7, y - 7);
    });
  }

  private drawTarget(ctx: CanvasRenderingContext2D, track: TrackStatus | null,
                     position: LocalPosition | null): void {
    if (!track || !track.locked || !position) return;
    // place the target along the vehicle's ground range ring (bearing from
    // telemetry would need TRACK_STATUS extension; range ring is honest)
    const [x, y] = this.toPx(position.northM, position.eastM);
    ctx.strokeStyle = "#fa4";
    ctx.setLineDash([3, 4]);
    ctx.beginPath();
    ctx.arc(x, y, track.rangeM * this.scalePxPerM, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  private drawVehicle(ctx: CanvasRenderingContext2D,
                      position: LocalPosition | null): void {
    if (!position) return;
    this.trail.push([position.northM, position.eastM]);
    if (this.trail.length > 600) this.trail.shift();
    ctx.strokeStyle = "rgba(120,220,120,0.5)";
    ctx.lineWidth = 1;
    ctx.beginPath();
    this.trail.forEach(([n, e], i) => {
      const [x, y] = this.toPx(n, e);
      if (i === 0) ctx.moveTo(x, y); else ctx.lineTo(x, y);
    });
    ctx.stroke();

    const [x, y] = this.toPx(position.northM, position.eastM);
    const heading = Math.atan2(position.veMps, position.vnMps);
    ctx.save();
    ctx.translate(x, y);
    ctx.rotate(heading);
    ctx.fillStyle = "#7e7";
    ctx.beginPath();
    ctx.moveTo(0, -9);
    ctx.lineTo(6, 7);
    ctx.lineTo(-6, 7);
    ctx.closePath();
    ctx.fill();
    ctx.restore();
    ctx.fillStyle = "#9d9";
    ctx.font = "11px monospace";
    ctx.fillText(`${(-position.downM).toFixed(1)} m AGL`, x + 10, y + 4);
  }
}
