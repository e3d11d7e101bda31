/** Canvas artificial horizon: bank/pitch from ATTITUDE, plus readouts. */

import { Attitude } from "./state.js";

const SKY = "#2d64a8";
const GROUND = "#6b4a2b";
const PITCH_PX_PER_RAD = 240;

export function drawHorizon(canvas: HTMLCanvasElement,
                            attitude: Attitude | null,
                            stale: boolean): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  ctx.save();
  ctx.clearRect(0, 0, w, h);

  if (!attitude) {
    ctx.fillStyle = "#111";
    ctx.fillRect(0, 0, w, h);
    ctx.fillStyle = "#888";
    ctx.font = "14px monospace";
    ctx.textAlign = "center";
    ctx.fillText("no attitude", w / 2, h / 2);
    ctx.restore();
    return;
  }

  // positive roll (right wing down) banks the horizon line the other way
  ctx.translate(w / 2, h / 2);
  ctx.rotate(-attitude.rollRad);
  const pitchShift = attitude.pitchRad * PITCH_PX_PER_RAD;
  const span = Math.hypot(w, h);
  ctx.fillStyle = SKY;
  ctx.fillRect(-span, -span + pitchShift, 2 * span, span);
  ctx.fillStyle = GROUND;
  ctx.fillRect(-span, pitchShift, 2 * span, span);
  ctx.strokeStyle = "#eee";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(-span, pitchShift);
  ctx.lineTo(span, pitchShift);
  ctx.stroke();

  // pitch ladder every 10 degrees
  ctx.font = "10px monospace";
  ctx.fillStyle = "#eee";
  ctx.textAlign = "left";
  for (let deg = -30; deg <= 30; deg += 10) {
    if (deg === 0) continue;
    const y = pitchShift - (deg * Math.PI / 180) * PITCH_PX_PER_RAD;
    ctx.beginPath();
    ctx.moveTo(-30, y);
    ctx.lineTo(30, y);
    ctx.stroke();
    ctx.fillText(`${deg}`, 34, y + 3);
  }
  ctx.restore();

  // fixed aircraft symbol
  ctx.save();
  ctx.translate(w / 2, h / 2);
  ctx.strokeStyle = "#ffd400";
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(-34, 0);
  ctx.lineTo(-10, 0);
  ctx.lineTo(-4, 7);
  ctx.lineTo(2, 0);
  ctx.lineTo(26, 0);
  ctx.stroke();
  ctx.restore();

  ctx.save();
  ctx.font = "12px monospace";
  ctx.fillStyle = stale ? "#f66" : "#cfc";
  ctx.textAlign = "left";
  const deg = (r: number) => (r * 180 / Math.PI).toFixed(1);
  ctx.fillText(`R ${deg(attitude.rollRad)}  P ${deg(attitude.pitchRad)}  ` +
    `Y ${deg(attitude.yawRad)}`, 8, h - 8);
  if (stale) {
    ctx.fillStyle = "#f66";
    ctx.textAlign = "center";
    ctx.font = "bold 14px monospace";
    ctx.fillText("STALE", canvas.width / 2, 18);
  }
  ctx.restore();
}
