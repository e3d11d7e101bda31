/** Browser GCS: wiring between the socket client, state and panels. */

import { connectToSim, GcsClient, MODE_IDS } from "./client.js";
import { drawHorizon } from "./hud.js";
import { GEOFENCE_RADIUS_M, MapView } from "./map.js";
import { UiState } from "./state.js";
import { VirtualSticks } from "./sticks.js";
import { VisionPanel } from "./vision.js";

const state = new UiState();
let client: GcsClient | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setText(id: string, text: string): void {
  el(id).textContent = text;
}

async function boot(): Promise<void> {
  const base = `${location.protocol}//${location.host}`;
  client = await connectToSim(base);
  const mapView = new MapView(el<HTMLCanvasElement>("map"));
  const vision = new VisionPanel(el<HTMLCanvasElement>("vision"));
  const sticks = new VirtualSticks(client, el("pad-left"), el("pad-right"));

  client.onFrame((frame) => {
    state.apply(frame, performance.now());
    vision.apply(frame);
  });
  client.onConnection((up) => {
    state.connected = up;
    setText("conn", up ? "connected" : "reconnecting…");
  });

  el("btn-arm").onclick = () => client?.arm();
  el("btn-disarm").onclick = () => client?.disarm();
  el("btn-takeoff").onclick = () => client?.takeoff(10);
  el("btn-land").onclick = () => client?.land();
  el("btn-rtl").onclick = () => client?.rtl();
  el("btn-reset").onclick = () => client?.resetFailsafe();
  for (const [name, id] of Object.entries(MODE_IDS)) {
    const button = document.getElementById(`mode-${name.toLowerCase()}`);
    if (button) (button as HTMLButtonElement).onclick = () => client?.setMode(id);
  }
  el<HTMLInputElement>("sticks-engage").onchange = (ev) =>
    sticks.engage((ev.target as HTMLInputElement).checked);

  const mapCanvas = el<HTMLCanvasElement>("map");
  mapCanvas.onclick = (ev) => {
    const rect = mapCanvas.getBoundingClientRect();
    const [n, e] = mapView.toNed(ev.clientX - rect.left, ev.clientY - rect.top);
    mapView.addDraftWaypoint(Math.round(n), Math.round(e), -15);
    renderMissionList(mapView);
  };
  el("btn-mission-send").onclick = () => {
    mapView.validateDraft();
    if (mapView.invalidDraftIndex !== null) {
      setText("mission-status",
        `waypoint ${mapView.invalidDraftIndex + 1} outside the ` +
        `${GEOFENCE_RADIUS_M} m fence`);
      return;
    }
    client?.uploadMission(mapView.draft);
    setText("mission-status", `${mapView.draft.length} waypoints sent`);
  };
  el("btn-mission-clear").onclick = () => {
    mapView.clearDraft();
    renderMissionList(mapView);
    setText("mission-status", "");
  };

  const hud = el<HTMLCanvasElement>("horizon");
  const statusLog = el("status-log");

  function renderLoop(): void {
    const now = performance.now();
    const stale = state.isStale(now);
    drawHorizon(hud, state.attitude, stale);
    mapView.render(state);

    setText("mode", state.modeName());
    setText("authority", state.authority ? "pilot" : "monitor");
    const banner = el("banner");
    const failsafe = state.failsafeBanner();
    if (failsafe) {
      banner.textContent = `FAILSAFE: ${failsafe}`;
      banner.classList.add("active");
    } else if (stale && state.connected) {
      banner.textContent = "TELEMETRY STALE";
      banner.classList.add("active");
    } else {
      banner.textContent = "";
      banner.classList.remove("active");
    }
    if (state.battery) {
      setText("battery", `${state.battery.voltageV.toFixed(2)} V  ` +
        `${state.battery.currentA.toFixed(1)} A  ${state.battery.remainingPct}%`);
    }
    if (state.gps) {
      setText("gps", `${state.gps.satellites} sats  ` +
        `${state.gps.fixOk ? state.gps.accuracyM.toFixed(1) + " m" : "NO FIX"}`);
    }
    if (state.position) {
      setText("pos", `N ${state.position.northM.toFixed(1)}  ` +
        `E ${state.position.eastM.toFixed(1)}  ` +
        `AGL ${(-state.position.downM).toFixed(1)}`);
    }
    if (state.track) {
      setText("track", state.track.locked
        ? `locked @ ${state.track.rangeM.toFixed(1)} m` : "no lock");
    }
    setText("crc", `${client?.crcErrors ?? 0}`);
    const recent = state.statuses.slice(-8);
    statusLog.textContent = recent
      .map((s) => `${s.severity > 0 ? "! " : "  "}${s.text}`)
      .join("\n");
    requestAnimationFrame(renderLoop);
  }
  requestAnimationFrame(renderLoop);
}

function renderMissionList(mapView: MapView): void {
  const list = el("mission-list");
  list.textContent = mapView.draft
    .map((wp, i) => `${i + 1}: N${wp.northM} E${wp.eastM} alt ${-wp.downM}`)
    .join("\n");
}

boot().catch((err) => {
  document.body.innerHTML = `<pre class="boot-error">GCS boot failed: ${err}</pre>`;
});
