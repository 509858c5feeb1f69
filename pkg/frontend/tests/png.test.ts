import { inflateSync } from "node:zlib";
import { describe, expect, it } from "vitest";

import { crc32, encodePng } from "../src/png.js";

function readChunks(buf: Buffer) {
  const chunks: { type: string; data: Buffer }[] = [];
  let pos = 8;
  while (pos < buf.length) {
    const length = buf.readUInt32BE(pos);
    const type = buf.subarray(pos + 4, pos + 8).toString("ascii");
    const data = buf.subarray(pos + 8, pos + 8 + length);
    const crc = buf.readUInt32BE(pos + 8 + length);
    expect(crc).toBe(crc32(Buffer.concat([Buffer.from(type, "ascii"), data])));
    chunks.push({ type, data: Buffer.from(data) });
    pos += 12 + length;
  }
  return chunks;
}

describe("png encoder", () => {
  it("produces a structurally valid file that round-trips its pixels", () => {
    const w = 5, h = 3;
    const rgba = new Uint8Array(w * h * 4);
    for (let i = 0; i < rgba.length; i++) rgba[i] = (i * 37) % 256;
    const png = encodePng(w, h, rgba);
    expect(png.subarray(0, 8)).toEqual(
      Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]));
    const chunks = readChunks(png);
    expect(chunks.map((c) => c.type)).toEqual(["IHDR", "IDAT", "IEND"]);
    const ihdr = chunks[0].data;
    expect(ihdr.readUInt32BE(0)).toBe(w);
    expect(ihdr.readUInt32BE(4)).toBe(h);
    expect(ihdr[9]).toBe(6); // RGBA
    const raw = inflateSync(chunks[1].data);
    expect(raw.length).toBe(h * (w * 4 + 1));
    for (let y = 0; y < h; y++) {
      expect(raw[y * (w * 4 + 1)]).toBe(0); // filter byte
      const row = raw.subarray(y * (w * 4 + 1) + 1, (y + 1) * (w * 4 + 1));
      expect(Buffer.from(row)).toEqual(
        Buffer.from(rgba.subarray(y * w * 4, (y + 1) * w * 4)));
    }
  });

  it("is deterministic", () => {
    const rgba = new Uint8Array(16 * 16 * 4).fill(128);
    expect(encodePng(16, 16, rgba).equals(encodePng(16, 16, rgba))).toBe(true);
  });

  it("rejects wrong buffer sizes", () => {
    expect(() => encodePng(4, 4, new Uint8Array(3))).toThrow();
  });
});
