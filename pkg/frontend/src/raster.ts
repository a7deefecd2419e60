// Decoder for the service's binary raster snapshots: 24-byte little-endian
// header (magic "VRAS", width, height, resolution, origin east/north)
// followed by row-major float32 cells.

export interface Raster {
  width: number;
  height: number;
  resolution: number;
  originEast: number;
  originNorth: number;
  cells: Float32Array;
}

export function decodeRaster(buffer: ArrayBuffer): Raster {
  if (buffer.byteLength < 24) {
    throw new Error(`raster blob too short: ${buffer.byteLength} bytes`);
  }
  const view = new DataView(buffer);
  const magic = String.fromCharCode(view.getUint8(0), view.getUint8(1), view.getUint8(2), view.getUint8(3));
  if (magic !== "VRAS") {
    throw new Error(`bad raster magic: ${magic}`);
  }
  const width = view.getUint32(4, true);
  const height = view.getUint32(8, true);
  const resolution = view.getFloat32(12, true);
  const originEast = view.getFloat32(16, true);
  const originNorth = view.getFloat32(20, true);
  const expected = 24 + 4 * width * height;
  if (buffer.byteLength !== expected) {
    throw new Error(`raster payload ${buffer.byteLength} != expected ${expected}`);
  }
  // slice: the payload may not be 4-byte aligned within the original buffer
  const cells = new Float32Array(buffer.slice(24));
  return { width, height, resolution, originEast, originNorth, cells };
}

export function rasterValue(r: Raster, east: number, north: number): number | undefined {
  const i = Math.round((east - r.originEast) / r.resolution);
  const j = Math.round((north - r.originNorth) / r.resolution);
  if (i < 0 || i >= r.width || j < 0 || j >= r.height) return undefined;
  return r.cells[j * r.width + i];
}
