// Side panels: mission state badge, live metrics, and the gas time series.

import { gasColor } from "./colormap.js";
import type { ConsoleStore } from "./store.js";

const STATE_COLORS: Record<string, string> = {
  idle: "#8a8f98",
  planning: "#3d7bdd",
  running: "#2fae4e",
  intervention: "#e0662f",
  paused: "#c9a227",
  finished: "#3ace8a",
  faulted: "#d5383d",
};

export function renderStateBadge(el: HTMLElement, store: ConsoleStore): void {
  el.textContent = store.state.toUpperCase();
  el.style.background = STATE_COLORS[store.state] ?? "#666";
}

export function renderMetrics(el: HTMLElement, store: ConsoleStore): void {
  const m = store.metrics;
  const mmss = (s: number) => {
    const mm = Math.floor(s / 60);
    const ss = Math.floor(s % 60);
    return `${mm}:${ss.toString().padStart(2, "0")}`;
  };
  el.innerHTML = `
    <div class="metric"><span>duration</span><b>${mmss(m.durationS)}</b></div>
    <div class="metric"><span>interventions</span><b>${m.interventions}</b></div>
    <div class="metric"><span>intervention time</span><b>${mmss(m.interventionTimeS)}</b></div>
    <div class="metric"><span>attention demand</span><b>${m.rad.toFixed(4)}</b></div>
    <div class="metric"><span>autonomy rate</span><b>${m.autonomyRate.toFixed(1)}%</b></div>
    <div class="metric"><span>targets reached</span><b>${store.targetsReached.length}</b></div>
    <div class="metric"><span>status</span><b>${m.terminal}</b></div>
  `;
}

export function renderGasChart(canvas: HTMLCanvasElement, store: ConsoleStore, windowS = 120): void {
  const ctx = canvas.getContext("2d")!;
  ctx.fillStyle = "#101116";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (store.gasSeries.size === 0) {
    ctx.fillStyle = "#555";
    ctx.fillText("no gas samples yet", 12, 20);
    return;
  }
  const tEnd = store.clock;
  const tStart = Math.max(0, tEnd - windowS);
  let vMax = 1e-6;
  let vMin = Infinity;
  for (const series of store.gasSeries.values()) {
    for (const s of series) {
      if (s.t >= tStart) {
        vMax = Math.max(vMax, s.value);
        vMin = Math.min(vMin, s.value);
      }
    }
  }
  if (!isFinite(vMin)) vMin = 1e-3;
  const lo = Math.log10(Math.max(vMin, 1e-6));
  const hi = Math.log10(vMax * 1.5);
  const x = (t: number) => ((t - tStart) / Math.max(tEnd - tStart, 1)) * (canvas.width - 46) + 40;
  const y = (v: number) =>
    canvas.height - 18 - ((Math.log10(Math.max(v, 1e-6)) - lo) / Math.max(hi - lo, 1e-6)) * (canvas.height - 30);

  ctx.strokeStyle = "#333";
  ctx.strokeRect(40, 6, canvas.width - 46, canvas.height - 24);
  let row = 0;
  for (const [amu, series] of [...store.gasSeries.entries()].sort((a, b) => a[0] - b[0])) {
    const visible = series.filter((s) => s.t >= tStart);
    if (!visible.length) continue;
    const peak = visible.reduce((acc, s) => Math.max(acc, s.value), 0);
    ctx.strokeStyle = gasColor(peak);
    ctx.lineWidth = 1.4;
    ctx.beginPath();
    visible.forEach((s, i) => {
      if (i === 0) ctx.moveTo(x(s.t), y(s.value));
      else ctx.lineTo(x(s.t), y(s.value));
    });
    ctx.stroke();
    ctx.fillStyle = gasColor(peak);
    ctx.fillText(`${amu} amu`, 46, 18 + 14 * row);
    row += 1;
  }
  ctx.fillStyle = "#888";
  ctx.fillText(`${tStart.toFixed(0)}s`, 40, canvas.height - 4);
  ctx.fillText(`${tEnd.toFixed(0)}s`, canvas.width - 36, canvas.height - 4);
}
