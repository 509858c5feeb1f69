// Tiny software rasterizer: an RGBA buffer plus the handful of primitives
// the renderers need (discs, lines, bitmap text).

import { GLYPHS } from "./font.js";

export type Color = [number, number, number, number];

export class Raster {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number, background: Color = [255, 255, 255, 255]) {
    this.width = width;
    this.height = height;
    this.data = new Uint8Array(width * height * 4);
    for (let i = 0; i < width * height; i++) {
      this.data.set(background, i * 4);
    }
  }

  set(x: number, y: number, color: Color): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    this.data.set(color, (y * this.width + x) * 4);
  }

  disc(cx: number, cy: number, radius: number, color: Color): void {
    const r2 = radius * radius;
    const x0 = Math.floor(cx - radius);
    const x1 = Math.ceil(cx + radius);
    const y0 = Math.floor(cy - radius);
    const y1 = Math.ceil(cy + radius);
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r2) this.set(x, y, color);
      }
    }
  }

  line(x0: number, y0: number, x1: number, y1: number, color: Color): void {
    const steps = Math.max(Math.abs(x1 - x0), Math.abs(y1 - y0), 1);
    for (let s = 0; s <= steps; s++) {
      const t = s / steps;
      this.set(Math.round(x0 + t * (x1 - x0)), Math.round(y0 + t * (y1 - y0)), color);
    }
  }

  /** Draw 5x7 bitmap text; scale multiplies the glyph pixels. */
  text(x: number, y: number, message: string, color: Color, scale = 2): void {
    let cx = x;
    for (const ch of message) {
      const glyph = GLYPHS[ch] ?? GLYPHS["?"];
      for (let row = 0; row < 7; row++) {
        for (let col = 0; col < 5; col++) {
          if ((glyph[row] >> (4 - col)) & 1) {
            for (let sy = 0; sy < scale; sy++) {
              for (let sx = 0; sx < scale; sx++) {
                this.set(cx + col * scale + sx, y + row * scale + sy, color);
              }
            }
          }
        }
      }
      cx += 6 * scale;
    }
  }
}
