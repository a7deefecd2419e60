// Canvas map: terrain underlay, road graph, planned path, live trajectory,
// gas markers colored by reading, the robot, and click-to-place targets.

import { gasColor } from "./colormap.js";
import { terrainColor } from "./colormap.js";
import type { Raster } from "./raster.js";
import type { ConsoleStore } from "./store.js";
import { Viewport } from "./viewport.js";

export class MapView {
  viewport: Viewport;
  placing = false;
  pendingTargets: [number, number][] = [];
  onPlaceTarget: ((east: number, north: number) => void) | null = null;
  private ctx: CanvasRenderingContext2D;
  private terrain: Raster | null = null;
  private terrainCanvas: HTMLCanvasElement | null = null;
  private dragging = false;
  private lastPointer: [number, number] = [0, 0];
  private moved = 0;

  constructor(private canvas: HTMLCanvasElement, private store: ConsoleStore) {
    this.ctx = canvas.getContext("2d")!;
    this.viewport = new Viewport(canvas.width, canvas.height);
    canvas.addEventListener("pointerdown", (e) => {
      this.dragging = true;
      this.moved = 0;
      this.lastPointer = [e.offsetX, e.offsetY];
      canvas.setPointerCapture(e.pointerId);
    });
    canvas.addEventListener("pointermove", (e) => {
      if (!this.dragging) return;
      const dx = e.offsetX - this.lastPointer[0];
      const dy = e.offsetY - this.lastPointer[1];
      this.moved += Math.abs(dx) + Math.abs(dy);
      this.viewport.panPixels(dx, dy);
      this.lastPointer = [e.offsetX, e.offsetY];
    });
    canvas.addEventListener("pointerup", (e) => {
      this.dragging = false;
      if (this.moved < 4 && this.placing && this.onPlaceTarget) {
        const [east, north] = this.viewport.pixelToWorld(e.offsetX, e.offsetY);
        this.pendingTargets.push([east, north]);
        this.onPlaceTarget(east, north);
      }
    });
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.viewport.zoomAt(e.offsetX, e.offsetY, e.deltaY < 0 ? 1.15 : 1 / 1.15);
    });
  }

  setTerrain(raster: Raster): void {
    this.terrain = raster;
    const img = new ImageData(raster.width, raster.height);
    let min = Infinity;
    let max = -Infinity;
    for (const v of raster.cells) {
      if (v > -0.5) {
        min = Math.min(min, v);
        max = Math.max(max, v);
      }
    }
    for (let j = 0; j < raster.height; j++) {
      for (let i = 0; i < raster.width; i++) {
        const v = raster.cells[j * raster.width + i];
        const [r, g, b] = terrainColor(v, min, max);
        // canvas rows run top-down, grid rows run south-north
        const k = ((raster.height - 1 - j) * raster.width + i) * 4;
        img.data[k] = r;
        img.data[k + 1] = g;
        img.data[k + 2] = b;
        img.data[k + 3] = 255;
      }
    }
    const off = document.createElement("canvas");
    off.width = raster.width;
    off.height = raster.height;
    off.getContext("2d")!.putImageData(img, 0, 0);
    this.terrainCanvas = off;
    this.viewport.fit([
      [raster.originEast, raster.originNorth],
      [raster.originEast + raster.width * raster.resolution, raster.originNorth + raster.height * raster.resolution],
    ]);
  }

  draw(): void {
    const { ctx, viewport: vp } = this;
    ctx.fillStyle = "#14151a";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);

    if (this.terrain && this.terrainCanvas) {
      const r = this.terrain;
      const [x0, y0] = vp.worldToPixel(r.originEast, r.originNorth + r.height * r.resolution);
      const w = r.width * r.resolution * vp.pixelsPerMeter;
      const h = r.height * r.resolution * vp.pixelsPerMeter;
      ctx.imageSmoothingEnabled = false;
      ctx.drawImage(this.terrainCanvas, x0, y0, w, h);
    }

    if (this.store.graph) {
      ctx.strokeStyle = "rgba(230, 230, 240, 0.35)";
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      for (const [a, b] of this.store.graph.edges) {
        const pa = this.store.graph.nodes[a];
        const pb = this.store.graph.nodes[b];
        if (!pa || !pb) continue;
        ctx.moveTo(...vp.worldToPixel(pa[0], pa[1]));
        ctx.lineTo(...vp.worldToPixel(pb[0], pb[1]));
      }
      ctx.stroke();
    }

    if (this.store.path.length > 1) {
      ctx.strokeStyle = "#18c7b8";
      ctx.lineWidth = 2.5;
      this.polyline(this.store.path.map((p) => [p[0], p[1]]));
      ctx.fillStyle = "#ff5050";
      for (const idx of this.store.targetIndices) {
        const p = this.store.path[idx];
        this.star(vp.worldToPixel(p[0], p[1]), 7);
      }
    }

    if (this.store.trueTrajectory.length > 1) {
      ctx.strokeStyle = "rgba(255,255,255,0.5)";
      ctx.lineWidth = 1;
      this.polyline(this.store.trueTrajectory.map((p) => [p.east, p.north]));
    }
    if (this.store.trajectory.length > 1) {
      ctx.strokeStyle = "#3ace3d";
      ctx.lineWidth = 1.6;
      this.polyline(this.store.trajectory.map((p) => [p.east, p.north]));
    }

    for (const g of this.store.gasMarkers) {
      const [px, py] = vp.worldToPixel(g.east, g.north);
      this.ctx.fillStyle = gasColor(g.value);
      this.ctx.beginPath();
      this.ctx.arc(px, py, 2.5, 0, 2 * Math.PI);
      this.ctx.fill();
    }

    if (this.store.goal) {
      const [px, py] = vp.worldToPixel(this.store.goal[0], this.store.goal[1]);
      ctx.strokeStyle = "#e36c5e";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(px, py, 6, 0, 2 * Math.PI);
      ctx.stroke();
    }

    const pose = this.store.trajectory[this.store.trajectory.length - 1];
    if (pose) {
      const [px, py] = vp.worldToPixel(pose.east, pose.north);
      ctx.fillStyle = "#ffd23e";
      ctx.beginPath();
      ctx.arc(px, py, 5, 0, 2 * Math.PI);
      ctx.fill();
      ctx.strokeStyle = "#ffd23e";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(px, py);
      ctx.lineTo(px + 12 * Math.cos(-pose.yaw), py + 12 * Math.sin(-pose.yaw));
      ctx.stroke();
    }

    ctx.fillStyle = "#f6a821";
    for (const [e, n] of this.pendingTargets) {
      this.star(vp.worldToPixel(e, n), 6);
    }
  }

  private polyline(points: [number, number][]): void {
    this.ctx.beginPath();
    points.forEach((p, i) => {
      const [px, py] = this.viewport.worldToPixel(p[0], p[1]);
      if (i === 0) this.ctx.moveTo(px, py);
      else this.ctx.lineTo(px, py);
    });
    this.ctx.stroke();
  }

  private star([px, py]: [number, number], r: number): void {
    const ctx = this.ctx;
    ctx.beginPath();
    for (let k = 0; k < 10; k++) {
      const rad = k % 2 === 0 ? r : r / 2.4;
      const a = (Math.PI / 5) * k - Math.PI / 2;
      const x = px + rad * Math.cos(a);
      const y = py + rad * Math.sin(a);
      if (k === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.closePath();
    ctx.fill();
  }
}
