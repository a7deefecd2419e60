import { describe, expect, it } from "vitest";
import { Viewport } from "../src/viewport.js";
import { LocalFrame } from "../src/geoconvert.js";

describe("viewport transform", () => {
  it("world -> pixel -> world is exact", () => {
    const vp = new Viewport(900, 700);
    vp.centerEast = 12.5;
    vp.centerNorth = -3.25;
    vp.pixelsPerMeter = 6.4;
    for (const [e, n] of [[0, 0], [55.1, -20.7], [-31.9, 44.4]]) {
      const [px, py] = vp.worldToPixel(e, n);
      const [be, bn] = vp.pixelToWorld(px, py);
      expect(be).toBeCloseTo(e, 9);
      expect(bn).toBeCloseTo(n, 9);
    }
  });

  it("north is up on screen", () => {
    const vp = new Viewport(400, 400);
    const [, yLow] = vp.worldToPixel(0, 10);
    const [, yHigh] = vp.worldToPixel(0, -10);
    expect(yLow).toBeLessThan(yHigh);
  });

  it("zoom keeps the cursor's world point fixed", () => {
    const vp = new Viewport(800, 600);
    vp.pixelsPerMeter = 3;
    const [we, wn] = vp.pixelToWorld(200, 150);
    vp.zoomAt(200, 150, 1.7);
    const [pe, pn] = vp.worldToPixel(we, wn);
    expect(pe).toBeCloseTo(200, 6);
    expect(pn).toBeCloseTo(150, 6);
  });

  it("fit frames the given extent", () => {
    const vp = new Viewport(600, 600);
    vp.fit([[-50, -50], [50, 50]]);
    const [px] = vp.worldToPixel(-50, 0);
    expect(px).toBeGreaterThanOrEqual(25);
    expect(px).toBeLessThanOrEqual(60);
  });
});

describe("target placement round trip", () => {
  it("click -> geo -> enu -> pixel lands on the same pixel", () => {
    const vp = new Viewport(900, 700);
    vp.centerEast = 5;
    vp.centerNorth = 9;
    vp.pixelsPerMeter = 4.2;
    const frame = new LocalFrame(37.73, 15.004);
    const clicks: [number, number][] = [[450, 350], [123, 456], [880, 20]];
    for (const [px, py] of clicks) {
      const [e, n] = vp.pixelToWorld(px, py);
      const geo = frame.enuToGeo(e, n);
      const [be, bn] = frame.geoToEnu(geo.lat, geo.lon);
      const [qx, qy] = vp.worldToPixel(be, bn);
      expect(Math.abs(qx - px)).toBeLessThanOrEqual(1);
      expect(Math.abs(qy - py)).toBeLessThanOrEqual(1);
    }
  });
});
