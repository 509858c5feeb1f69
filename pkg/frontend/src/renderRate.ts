// Rate-report renderer: log-log scatter of mean errors with a fitted line
// and the slope written into the image.

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

import { encodePng } from "./png.js";
import { Raster, type Color } from "./raster.js";

const SIZE = 512;
const MARGIN = 56;
const POINT: Color = [200, 60, 40, 255];
const LINE: Color = [60, 60, 60, 255];
const AXIS: Color = [140, 140, 140, 255];
const TEXT: Color = [20, 20, 20, 255];

export interface RateRenderResult {
  slope: number;
  intercept: number;
  label: string;
}

export function fitLogLog(ns: number[], errs: number[]): { slope: number; intercept: number } {
  const xs = ns.map(Math.log);
  const ys = errs.map(Math.log);
  const n = xs.length;
  const mx = xs.reduce((a, b) => a + b, 0) / n;
  const my = ys.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (xs[i] - mx) ** 2;
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx === 0) throw new Error("all sample sizes identical: cannot fit a slope");
  const slope = sxy / sxx;
  return { slope, intercept: my - slope * mx };
}

/** Parse `n,mean_abs_err[,sem]` rows, skipping the header line. */
export function parseReport(path: string): { ns: number[]; errs: number[] } {
  const lines = readFileSync(path, "utf8").split("\n")
    .map((l) => l.trim()).filter(Boolean);
  const ns: number[] = [];
  const errs: number[] = [];
  for (const line of lines) {
    const parts = line.split(",");
    const n = Number(parts[0]);
    const e = Number(parts[1]);
    if (Number.isNaN(n) || Number.isNaN(e)) continue; // header row
    ns.push(n);
    errs.push(e);
  }
  if (ns.length === 0) throw new Error(`${path}: no data rows in rate report`);
  return { ns, errs };
}

export function renderRate(reportCsv: string, outPng: string): RateRenderResult {
  const { ns, errs } = parseReport(reportCsv);
  if (ns.length < 2 || new Set(ns).size < 2) {
    throw new Error("rate report needs at least two distinct sample sizes");
  }
  if (errs.some((e) => e <= 0)) {
    throw new Error("rate report has non-positive mean errors");
  }
  const { slope, intercept } = fitLogLog(ns, errs);

  const raster = new Raster(SIZE, SIZE);
  const xs = ns.map(Math.log);
  const ys = errs.map(Math.log);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yLo = Math.min(...ys);
  const yHi = Math.max(...ys);
  const toX = (x: number) =>
    MARGIN + ((x - xLo) / (xHi - xLo || 1)) * (SIZE - 2 * MARGIN);
  const toY = (y: number) =>
    SIZE - MARGIN - ((y - yLo) / (yHi - yLo || 1)) * (SIZE - 2 * MARGIN);

  raster.line(MARGIN, SIZE - MARGIN, SIZE - MARGIN, SIZE - MARGIN, AXIS);
  raster.line(MARGIN, MARGIN, MARGIN, SIZE - MARGIN, AXIS);
  raster.line(Math.round(toX(xLo)), Math.round(toY(intercept + slope * xLo)),
              Math.round(toX(xHi)), Math.round(toY(intercept + slope * xHi)), LINE);
  for (let i = 0; i < xs.length; i++) {
    raster.disc(toX(xs[i]), toY(ys[i]), 4, POINT);
  }
  const label = `slope = ${slope.toFixed(2)}`;
  raster.text(MARGIN + 8, MARGIN - 36, label, TEXT, 2);

  mkdirSync(dirname(outPng), { recursive: true });
  writeFileSync(outPng, encodePng(SIZE, SIZE, raster.data));
  return { slope, intercept, label };
}
