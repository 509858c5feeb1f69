// Shared scene math: per-point colormap, the fixed 3-D camera and the
// world-to-pixel transform used by every frame of a set.

import type { Matrix } from "./data.js";
import type { Color } from "./raster.js";

export function hsvToRgb(h: number, s: number, v: number): Color {
  const i = Math.floor(h * 6);
  const f = h * 6 - i;
  const p = v * (1 - s);
  const q = v * (1 - f * s);
  const t = v * (1 - (1 - f) * s);
  const pick = [
    [v, t, p], [q, v, p], [p, v, t], [p, q, v], [t, p, v], [v, p, q],
  ][((i % 6) + 6) % 6];
  return [Math.round(pick[0] * 255), Math.round(pick[1] * 255), Math.round(pick[2] * 255), 255];
}

/**
 * Colors fixed at t=0: hue from the angular position around the centroid in
 * 2-D, from the first principal coordinate in 3-D, so the chromatic order
 * of the moved points can be followed through time.
 */
export function pointColors(frame0: Matrix): Color[] {
  const d = frame0[0].length;
  const n = frame0.length;
  const mean = new Array(d).fill(0);
  for (const row of frame0) for (let k = 0; k < d; k++) mean[k] += row[k] / n;
  if (d === 2) {
    return frame0.map((row) => {
      const angle = Math.atan2(row[1] - mean[1], row[0] - mean[0]);
      return hsvToRgb((angle + Math.PI) / (2 * Math.PI), 0.85, 0.95);
    });
  }
  const coord = firstPrincipalCoordinate(frame0, mean);
  const lo = Math.min(...coord);
  const hi = Math.max(...coord);
  const span = hi - lo || 1;
  return coord.map((c) => hsvToRgb(0.75 * (c - lo) / span, 0.85, 0.95));
}

function firstPrincipalCoordinate(points: Matrix, mean: number[]): number[] {
  const d = mean.length;
  const cov: number[][] = Array.from({ length: d }, () => new Array(d).fill(0));
  for (const row of points) {
    for (let a = 0; a < d; a++) {
      for (let b = 0; b < d; b++) {
        cov[a][b] += (row[a] - mean[a]) * (row[b] - mean[b]);
      }
    }
  }
  // deterministic power iteration
  let v = new Array(d).fill(1 / Math.sqrt(d));
  for (let it = 0; it < 100; it++) {
    const w = v.map((_, a) => cov[a].reduce((acc, c, b) => acc + c * v[b], 0));
    const norm = Math.hypot(...w) || 1;
    v = w.map((x) => x / norm);
  }
  return points.map((row) => row.reduce((acc, x, k) => acc + (x - mean[k]) * v[k], 0));
}

export interface Camera {
  azimuthDeg: number;
  elevationDeg: number;
}

export const DEFAULT_CAMERA: Camera = { azimuthDeg: 35, elevationDeg: 25 };

/** Orthographic view: returns [u, v, depth] for painter's ordering. */
export function project(row: number[], camera: Camera): [number, number, number] {
  if (row.length === 2) return [row[0], row[1], 0];
  const az = (camera.azimuthDeg * Math.PI) / 180;
  const el = (camera.elevationDeg * Math.PI) / 180;
  const [x, y, z] = row;
  const x1 = x * Math.cos(az) + y * Math.sin(az);
  const y1 = -x * Math.sin(az) + y * Math.cos(az);
  const u = y1;
  const v = z * Math.cos(el) - x1 * Math.sin(el);
  const depth = x1 * Math.cos(el) + z * Math.sin(el);
  return [u, v, depth];
}

export interface Viewport {
  scale: number;
  offsetU: number;
  offsetV: number;
  size: number;
}

/** One viewport per frame set so every image shares the same axes. */
export function fitViewport(projected: Matrix[], size: number, margin = 0.06): Viewport {
  let uMin = Infinity, uMax = -Infinity, vMin = Infinity, vMax = -Infinity;
  for (const cloud of projected) {
    for (const [u, v] of cloud) {
      if (u < uMin) uMin = u;
      if (u > uMax) uMax = u;
      if (v < vMin) vMin = v;
      if (v > vMax) vMax = v;
    }
  }
  const span = Math.max(uMax - uMin, vMax - vMin) || 1;
  const scale = (size * (1 - 2 * margin)) / span;
  return {
    scale,
    offsetU: (uMin + uMax) / 2,
    offsetV: (vMin + vMax) / 2,
    size,
  };
}

export function toPixel(u: number, v: number, vp: Viewport): [number, number] {
  return [
    vp.size / 2 + (u - vp.offsetU) * vp.scale,
    vp.size / 2 - (v - vp.offsetV) * vp.scale,
  ];
}
