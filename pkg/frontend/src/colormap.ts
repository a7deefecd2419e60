// Color scales. Gas markers map reading -> hue on a log scale spanning the
// instrument's six-order-of-magnitude dynamic range above its floor; a
// reading at the floor is cold blue, saturation is deep red. The mapping is
// a pure function so rendered colors are reproducible from the log alone.

export const GAS_FLOOR = 0.05;
export const GAS_DECADES = 6;

export function gasFraction(value: number, floor = GAS_FLOOR, decades = GAS_DECADES): number {
  if (!(value > 0)) return 0;
  const f = Math.log10(Math.max(value, floor) / floor) / decades;
  return Math.min(1, Math.max(0, f));
}

export function gasColor(value: number, floor = GAS_FLOOR): string {
  const f = gasFraction(value, floor);
  const hue = 240 - 240 * f; // blue (240) -> red (0)
  return `hsl(${hue.toFixed(0)}, 90%, ${Math.round(40 + 15 * f)}%)`;
}

export function terrainColor(height: number, min: number, max: number): [number, number, number] {
  if (!isFinite(height)) return [24, 24, 28];
  const f = Math.min(1, Math.max(0, (height - min) / Math.max(max - min, 1e-9)));
  // dark basalt -> ochre -> light ash
  const r = Math.round(46 + 160 * f);
  const g = Math.round(40 + 120 * f);
  const b = Math.round(44 + 70 * f);
  return [r, g, b];
}

export function traversabilityColor(score: number): [number, number, number] {
  if (!isFinite(score) || score < 0) return [40, 40, 40];
  const f = Math.min(1, Math.max(0, score));
  return [Math.round(200 * (1 - f) + 30 * f), Math.round(60 + 150 * f), 60];
}
