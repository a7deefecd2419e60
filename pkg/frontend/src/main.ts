// Console wiring: session workflow, telemetry feed, rendering loop.

import { ApiClient, ApiError } from "./api.js";
import { LocalFrame } from "./geoconvert.js";
import { Joystick } from "./joystick.js";
import { MapView } from "./mapview.js";
import { renderGasChart, renderMetrics, renderStateBadge } from "./panels.js";
import { decodeRaster } from "./raster.js";
import { ConsoleStore } from "./store.js";
import { TelemetryFeed } from "./telemetry.js";

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

const params = new URLSearchParams(location.search);
const apiBase = params.get("api") ?? location.origin;
const api = new ApiClient(apiBase);
const store = new ConsoleStore();
const map = new MapView($("map") as HTMLCanvasElement, store);
const joystick = new Joystick($("joystick"), $("joystick-knob"));

let sessionId = params.get("session") ?? "";
let frame: LocalFrame | null = null;
let graphDoc: { origin: { lat: number; lon: number } } | null = null;
let feed: TelemetryFeed | null = null;
let teleopTimer: number | null = null;

function notice(text: string, isError = false): void {
  const el = $("notices");
  const line = document.createElement("div");
  line.className = isError ? "notice error" : "notice";
  line.textContent = text;
  el.prepend(line);
  while (el.childElementCount > 6) el.lastElementChild?.remove();
}

async function guard<T>(work: () => Promise<T>): Promise<T | undefined> {
  try {
    return await work();
  } catch (err) {
    if (err instanceof ApiError) {
      const detail = (err.body as { detail?: string })?.detail ?? JSON.stringify(err.body);
      notice(detail, true);
    } else {
      notice(String(err), true);
    }
    return undefined;
  }
}

async function refreshTerrain(): Promise<void> {
  if (!sessionId) return;
  try {
    map.setTerrain(decodeRaster(await api.raster(sessionId, "terrain")));
  } catch {
    // terrain appears once a world is uploaded
  }
}

function connectFeed(): void {
  feed?.close();
  feed = new TelemetryFeed(
    (since) => api.telemetryUrl(sessionId, since),
    {
      onMessage: (msg) => store.apply(msg),
      onStatus: (s) => {
        $("link-status").textContent = s;
      },
      onReconnected: () => {
        // a dropped channel mid-intervention must not leave the robot
        // under stale operator control
        if (store.state === "intervention") {
          notice("link restored during intervention: sending intervention stop", true);
          void guard(() => api.interveneStop(sessionId));
        }
      },
    },
  );
  feed.connect();
}

async function createSession(): Promise<void> {
  const s = await guard(() => api.createSession());
  if (!s) return;
  sessionId = s.session_id;
  ($("session-id") as HTMLInputElement).value = sessionId;
  store.reset();
  notice(`session ${sessionId} created`);
  connectFeed();
}

async function attachSession(): Promise<void> {
  sessionId = ($("session-id") as HTMLInputElement).value.trim();
  const s = await guard(() => api.sessionInfo(sessionId));
  if (!s) return;
  notice(`attached to ${sessionId} (${s.state})`);
  await refreshTerrain();
  connectFeed();
}

function fileInput(id: string, onDoc: (doc: unknown) => void): void {
  ($(id) as HTMLInputElement).addEventListener("change", async (e) => {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (!file) return;
    onDoc(JSON.parse(await file.text()));
  });
}

const pendingGeoTargets: { lat: number; lon: number }[] = [];

map.onPlaceTarget = (east, north) => {
  if (!frame) {
    notice("upload a road graph first (it declares the origin)", true);
    map.pendingTargets.pop();
    return;
  }
  pendingGeoTargets.push(frame.enuToGeo(east, north));
  $("target-count").textContent = String(pendingGeoTargets.length);
};

async function planMission(): Promise<void> {
  if (!pendingGeoTargets.length) {
    notice("place at least one target first", true);
    return;
  }
  const returnToStart = ($("return-to-start") as HTMLInputElement).checked;
  const res = await guard(() => api.planMission(sessionId, pendingGeoTargets, returnToStart));
  if (!res) return;
  store.path = res.path;
  store.targetIndices = res.target_indices;
  notice(`planned ${res.length.toFixed(0)} m over ${res.vertices} vertices`);
  map.pendingTargets = [];
  pendingGeoTargets.length = 0;
  $("target-count").textContent = "0";
}

async function start(): Promise<void> {
  const seed = parseInt(($("seed") as HTMLInputElement).value || "0", 10);
  const res = await guard(() => api.start(sessionId, seed));
  if (res) notice(`mission started (seed ${seed})`);
}

function setIntervention(on: boolean): void {
  void guard(() => (on ? api.interveneStart(sessionId) : api.interveneStop(sessionId)));
}

function teleopLoop(): void {
  if (teleopTimer !== null) return;
  teleopTimer = window.setInterval(() => {
    if (store.state === "intervention" && joystick.engaged) {
      const { vx, vy, omega } = joystick.twist;
      void api.teleop(sessionId, vx, vy, omega).catch(() => undefined);
    }
  }, 100);
}

$("btn-create").addEventListener("click", () => void createSession());
$("btn-attach").addEventListener("click", () => void attachSession());
fileInput("world-file", (doc) => {
  void guard(async () => {
    await api.uploadWorld(sessionId, doc);
    notice("world accepted");
    await refreshTerrain();
  });
});
fileInput("graph-file", (doc) => {
  void guard(async () => {
    await api.uploadGraph(sessionId, doc);
    graphDoc = doc as typeof graphDoc;
    frame = new LocalFrame(graphDoc!.origin.lat, graphDoc!.origin.lon);
    notice("road graph accepted");
  });
});
$("btn-place").addEventListener("click", () => {
  map.placing = !map.placing;
  $("btn-place").classList.toggle("active", map.placing);
});
$("btn-plan").addEventListener("click", () => void planMission());
$("btn-start").addEventListener("click", () => void start());
$("btn-pause").addEventListener("click", () => void guard(() => api.pause(sessionId)));
$("btn-resume").addEventListener("click", () => void guard(() => api.resume(sessionId)));
$("btn-stop").addEventListener("click", () => void guard(() => api.stop(sessionId)));
$("btn-intervene").addEventListener("click", () => {
  setIntervention(store.state !== "intervention");
});

teleopLoop();

function frameLoop(): void {
  map.draw();
  renderStateBadge($("state-badge"), store);
  renderMetrics($("metrics"), store);
  renderGasChart($("gas-chart") as HTMLCanvasElement, store);
  const intervene = $("btn-intervene") as HTMLButtonElement;
  intervene.disabled = !store.interventionControlEnabled;
  intervene.textContent = store.state === "intervention" ? "end intervention" : "intervene";
  while (store.notices.length) notice(store.notices.shift()!);
  requestAnimationFrame(frameLoop);
}
frameLoop();

if (sessionId) {
  void attachSession();
}
