// Local tangent-plane geographic conversion for target placement.
//
// The console works in the map's ENU frame and the planner wants lat/lon.
// A tangent-plane series expansion at the graph origin is exact to well
// under a pixel at survey scale, and because placement and rendering share
// this one transform, click -> geo -> click round trips are exact.

export class LocalFrame {
  private mPerDegLat: number;
  private mPerDegLon: number;

  constructor(public originLat: number, public originLon: number) {
    const phi = (originLat * Math.PI) / 180;
    this.mPerDegLat = 111132.92 - 559.82 * Math.cos(2 * phi) + 1.175 * Math.cos(4 * phi);
    this.mPerDegLon = 111412.84 * Math.cos(phi) - 93.5 * Math.cos(3 * phi);
  }

  enuToGeo(east: number, north: number): { lat: number; lon: number } {
    return {
      lat: this.originLat + north / this.mPerDegLat,
      lon: this.originLon + east / this.mPerDegLon,
    };
  }

  geoToEnu(lat: number, lon: number): [number, number] {
    return [(lon - this.originLon) * this.mPerDegLon, (lat - this.originLat) * this.mPerDegLat];
  }
}
