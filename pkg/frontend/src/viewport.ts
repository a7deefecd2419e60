// World (ENU meters) <-> canvas pixel transform with pan and zoom.
// North is up: pixel y grows downward, north grows upward.

export class Viewport {
  centerEast = 0;
  centerNorth = 0;
  pixelsPerMeter = 4;

  constructor(public widthPx: number, public heightPx: number) {}

  worldToPixel(east: number, north: number): [number, number] {
    return [
      this.widthPx / 2 + (east - this.centerEast) * this.pixelsPerMeter,
      this.heightPx / 2 - (north - this.centerNorth) * this.pixelsPerMeter,
    ];
  }

  pixelToWorld(px: number, py: number): [number, number] {
    return [
      this.centerEast + (px - this.widthPx / 2) / this.pixelsPerMeter,
      this.centerNorth - (py - this.heightPx / 2) / this.pixelsPerMeter,
    ];
  }

  panPixels(dx: number, dy: number): void {
    this.centerEast -= dx / this.pixelsPerMeter;
    this.centerNorth += dy / this.pixelsPerMeter;
  }

  zoomAt(px: number, py: number, factor: number): void {
    const [we, wn] = this.pixelToWorld(px, py);
    this.pixelsPerMeter = Math.min(200, Math.max(0.2, this.pixelsPerMeter * factor));
    // keep the world point under the cursor fixed
    const [qx, qy] = this.worldToPixel(we, wn);
    this.panPixels(px - qx, py - qy);
  }

  fit(points: number[][], marginPx = 30): void {
    if (!points.length) return;
    let minE = Infinity, maxE = -Infinity, minN = Infinity, maxN = -Infinity;
    for (const p of points) {
      minE = Math.min(minE, p[0]);
      maxE = Math.max(maxE, p[0]);
      minN = Math.min(minN, p[1]);
      maxN = Math.max(maxN, p[1]);
    }
    this.centerEast = (minE + maxE) / 2;
    this.centerNorth = (minN + maxN) / 2;
    const spanE = Math.max(maxE - minE, 1);
    const spanN = Math.max(maxN - minN, 1);
    this.pixelsPerMeter = Math.min(
      (this.widthPx - 2 * marginPx) / spanE,
      (this.heightPx - 2 * marginPx) / spanN,
    );
  }
}
