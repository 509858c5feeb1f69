// Interpolation-frame renderer: one PNG per time node of a saved run.

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { readCsv, readFrameSet, type Matrix } from "./data.js";
import { encodePng } from "./png.js";
import { Raster, type Color } from "./raster.js";
import {
  DEFAULT_CAMERA, fitViewport, pointColors, project, toPixel, type Camera,
} from "./scene.js";

const TARGET_COLOR: Color = [70, 110, 180, 255]; // contrasting steel blue
const SIZE = 512;
const RADIUS = 2.5;

export interface RenderFramesResult {
  files: string[];
}

export function renderFrames(framesDir: string, targetCsv: string,
                             outDir: string): RenderFramesResult {
  const { manifest, frames } = readFrameSet(framesDir);
  const target = readCsv(targetCsv);
  const d = frames[0][0].length;
  if (d < 2 || d > 3) {
    throw new Error(`can only render 2-D or 3-D clouds, got d=${d}`);
  }
  if (target[0].length !== d) {
    throw new Error(`target dimension ${target[0].length} != frame dimension ${d}`);
  }
  const camera: Camera = {
    azimuthDeg: manifest.camera?.azimuthDeg ?? DEFAULT_CAMERA.azimuthDeg,
    elevationDeg: manifest.camera?.elevationDeg ?? DEFAULT_CAMERA.elevationDeg,
  };

  const projectedFrames = frames.map((f) => f.map((row) => project(row, camera)));
  const projectedTarget = target.map((row) => project(row, camera));
  const viewport = fitViewport(
    [...projectedFrames.map((f) => f as Matrix), projectedTarget as Matrix], SIZE);
  const colors = pointColors(frames[0]);

  mkdirSync(outDir, { recursive: true });
  const files: string[] = [];
  for (let t = 0; t < frames.length; t++) {
    const raster = new Raster(SIZE, SIZE);
    drawCloud(raster, projectedTarget, viewport, () => TARGET_COLOR);
    drawCloud(raster, projectedFrames[t], viewport, (i) => colors[i]);
    const path = join(outDir, `frame_${t}.png`);
    writeFileSync(path, encodePng(SIZE, SIZE, raster.data));
    files.push(path);
  }
  return { files };
}

function drawCloud(raster: Raster, projected: [number, number, number][],
                   viewport: ReturnType<typeof fitViewport>,
                   colorOf: (index: number) => Color): void {
  // painter's order: far points first
  const order = projected.map((_, i) => i)
    .sort((a, b) => projected[a][2] - projected[b][2] || a - b);
  for (const i of order) {
    const [x, y] = toPixel(projected[i][0], projected[i][1], viewport);
    raster.disc(x, y, RADIUS, colorOf(i));
  }
}
