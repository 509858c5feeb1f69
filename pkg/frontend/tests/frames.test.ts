import { mkdtempSync, readFileSync, readdirSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { renderFrames } from "../src/renderFrames.js";

function writeFrameSet(dir: string, frames: number[][][], extra: object = {}) {
  const tau = frames.length - 1;
  writeFileSync(join(dir, "manifest.json"), JSON.stringify({
    tau, n: frames[0].length, d: frames[0][0].length, ...extra,
  }));
  frames.forEach((frame, t) => {
    writeFileSync(join(dir, `frame_${t}.csv`),
      frame.map((row) => row.join(",")).join("\n") + "\n");
  });
}

function grid(n: number, d: number, shift = 0): number[][] {
  return Array.from({ length: n }, (_, i) =>
    Array.from({ length: d }, (_, k) => Math.sin(i * (k + 1)) + shift));
}

describe("renderFrames", () => {
  it("writes tau+1 images", () => {
    const dir = mkdtempSync(join(tmpdir(), "frames-"));
    const out = join(dir, "png");
    const frames = [0, 1, 2, 3].map((t) => grid(40, 2, t * 0.1));
    writeFrameSet(dir, frames);
    writeFileSync(join(dir, "target.csv"),
      grid(30, 2, 1).map((r) => r.join(",")).join("\n"));
    const result = renderFrames(dir, join(dir, "target.csv"), out);
    expect(result.files.length).toBe(4);
    expect(readdirSync(out).filter((f) => f.endsWith(".png")).length).toBe(4);
  });

  it("zero-momentum runs give pixel-identical frames", () => {
    const dir = mkdtempSync(join(tmpdir(), "frames-"));
    const out = join(dir, "png");
    const still = grid(25, 2);
    writeFrameSet(dir, [still, still, still]);
    writeFileSync(join(dir, "target.csv"),
      grid(25, 2, 0.5).map((r) => r.join(",")).join("\n"));
    renderFrames(dir, join(dir, "target.csv"), out);
    const first = readFileSync(join(out, "frame_0.png"));
    for (const t of [1, 2]) {
      expect(readFileSync(join(out, `frame_${t}.png`)).equals(first)).toBe(true);
    }
  });

  it("renders 3-D clouds with the fixed camera", () => {
    const dir = mkdtempSync(join(tmpdir(), "frames3d-"));
    const out = join(dir, "png");
    writeFrameSet(dir, [grid(30, 3), grid(30, 3, 0.2)],
      { camera: { azimuthDeg: 10, elevationDeg: 40 } });
    writeFileSync(join(dir, "target.csv"),
      grid(20, 3, 1).map((r) => r.join(",")).join("\n"));
    const result = renderFrames(dir, join(dir, "target.csv"), out);
    expect(result.files.length).toBe(2);
  });

  it("rejects dimensions above 3", () => {
    const dir = mkdtempSync(join(tmpdir(), "frames4d-"));
    writeFrameSet(dir, [grid(10, 4)]);
    writeFileSync(join(dir, "target.csv"),
      grid(10, 4).map((r) => r.join(",")).join("\n"));
    expect(() => renderFrames(dir, join(dir, "target.csv"), join(dir, "png")))
      .toThrow(/2-D or 3-D/);
  });

  it("errors on missing frames", () => {
    const dir = mkdtempSync(join(tmpdir(), "missing-"));
    writeFileSync(join(dir, "manifest.json"), JSON.stringify({ tau: 2, n: 3, d: 2 }));
    writeFileSync(join(dir, "frame_0.csv"), "0,0\n1,1\n2,2\n");
    writeFileSync(join(dir, "target.csv"), "0,0\n");
    expect(() => renderFrames(dir, join(dir, "target.csv"), join(dir, "png")))
      .toThrow();
  });
});
