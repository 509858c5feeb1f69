// Readers for the primary component's artifacts: numeric CSVs and the run
// manifest.  These are the only inputs the renderer touches.

import { readFileSync } from "node:fs";
import { join } from "node:path";

export type Matrix = number[][];

export function readCsv(path: string): Matrix {
  const text = readFileSync(path, "utf8");
  const rows: Matrix = [];
  let width = -1;
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    const values = line.split(",").map(Number);
    if (values.some(Number.isNaN)) {
      throw new Error(`${path}: non-numeric entry at line ${i + 1}`);
    }
    if (width < 0) width = values.length;
    else if (values.length !== width) {
      throw new Error(`${path}: inconsistent column count at line ${i + 1}`);
    }
    rows.push(values);
  }
  if (rows.length === 0) throw new Error(`${path}: empty CSV`);
  return rows;
}

export interface Manifest {
  tau: number;
  n: number;
  d: number;
  camera?: { azimuthDeg?: number; elevationDeg?: number };
  [key: string]: unknown;
}

export function readManifest(framesDir: string): Manifest {
  const raw = JSON.parse(readFileSync(join(framesDir, "manifest.json"), "utf8"));
  if (typeof raw.tau !== "number") {
    throw new Error(`${framesDir}/manifest.json: missing tau`);
  }
  return raw as Manifest;
}

export interface FrameSet {
  manifest: Manifest;
  frames: Matrix[]; // tau+1 frames with constant shape
}

export function readFrameSet(framesDir: string): FrameSet {
  const manifest = readManifest(framesDir);
  const frames: Matrix[] = [];
  for (let t = 0; t <= manifest.tau; t++) {
    const frame = readCsv(join(framesDir, `frame_${t}.csv`));
    if (frames.length > 0) {
      const first = frames[0];
      if (frame.length !== first.length || frame[0].length !== first[0].length) {
        throw new Error(`frame_${t}.csv: inconsistent shape across frames`);
      }
    }
    frames.push(frame);
  }
  return { manifest, frames };
}
