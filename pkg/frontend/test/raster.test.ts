import { describe, expect, it } from "vitest";
import { decodeRaster, rasterValue } from "../src/raster.js";

function encode(width: number, height: number, resolution: number, origin: [number, number], cells: number[]): ArrayBuffer {
  const buf = new ArrayBuffer(24 + 4 * cells.length);
  const view = new DataView(buf);
  view.setUint8(0, "V".charCodeAt(0));
  view.setUint8(1, "R".charCodeAt(0));
  view.setUint8(2, "A".charCodeAt(0));
  view.setUint8(3, "S".charCodeAt(0));
  view.setUint32(4, width, true);
  view.setUint32(8, height, true);
  view.setFloat32(12, resolution, true);
  view.setFloat32(16, origin[0], true);
  view.setFloat32(20, origin[1], true);
  cells.forEach((v, i) => view.setFloat32(24 + 4 * i, v, true));
  return buf;
}

describe("raster decoding", () => {
  it("round-trips header and cells", () => {
    const cells = [0, 1, 2, 3, 4, 5];
    const r = decodeRaster(encode(3, 2, 0.5, [-4, 7], cells));
    expect(r.width).toBe(3);
    expect(r.height).toBe(2);
    expect(r.resolution).toBeCloseTo(0.5);
    expect(r.originEast).toBeCloseTo(-4);
    expect(r.originNorth).toBeCloseTo(7);
    expect([...r.cells]).toEqual(cells);
  });

  it("looks up values by world coordinate", () => {
    const r = decodeRaster(encode(3, 2, 1.0, [0, 0], [0, 1, 2, 3, 4, 5]));
    expect(rasterValue(r, 2, 1)).toBe(5);
    expect(rasterValue(r, -1, 0)).toBeUndefined();
  });

  it("rejects bad magic and truncated payloads", () => {
    const corrupted = encode(2, 2, 1, [0, 0], [1, 2, 3, 4]);
    new DataView(corrupted).setUint8(0, "X".charCodeAt(0));
    expect(() => decodeRaster(corrupted)).toThrow(/magic/);
    const truncated = encode(2, 2, 1, [0, 0], [1, 2, 3, 4]).slice(0, 30);
    expect(() => decodeRaster(truncated)).toThrow(/expected/);
  });
});
