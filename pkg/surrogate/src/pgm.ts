/**
 * Binary 8-bit PGM (P5): the interchange image format of the topology
 * engine. Row-major, top row = y-max, maxval 255.
 */

import * as fs from "node:fs";

export interface GrayImage {
  width: number;
  height: number;
  /** row-major pixels in [0, 1] */
  pixels: Float64Array;
}

export function readPgm(path: string): GrayImage {
  const data = fs.readFileSync(path);
  const tokens: string[] = [];
  let pos = 0;
  while (tokens.length < 4) {
    if (pos >= data.length) throw new Error(`${path}: truncated PGM header`);
    const ch = data[pos];
    if (ch === 0x23) {
      // '#' comment to end of line
      while (pos < data.length && data[pos] !== 0x0a) pos++;
      pos++;
    } else if (ch === 0x20 || ch === 0x0a || ch === 0x0d || ch === 0x09) {
      pos++;
    } else {
      let end = pos;
      while (end < data.length && !isSpace(data[end])) end++;
      tokens.push(data.subarray(pos, end).toString("ascii"));
      pos = end;
    }
  }
  if (tokens[0] !== "P5") throw new Error(`${path}: not a binary PGM (P5)`);
  const width = parseInt(tokens[1], 10);
  const height = parseInt(tokens[2], 10);
  const maxval = parseInt(tokens[3], 10);
  if (maxval !== 255) throw new Error(`${path}: only 8-bit PGM supported`);
  pos += 1; // single whitespace byte after maxval
  const n = width * height;
  if (data.length - pos < n) throw new Error(`${path}: truncated raster`);
  const pixels = new Float64Array(n);
  for (let i = 0; i < n; i++) pixels[i] = data[pos + i] / 255;
  return { width, height, pixels };
}

export function writePgm(path: string, img: GrayImage): void {
  const header = Buffer.from(`P5\n${img.width} ${img.height}\n255\n`, "ascii");
  const raster = Buffer.alloc(img.width * img.height);
  for (let i = 0; i < raster.length; i++) {
    raster[i] = Math.max(0, Math.min(255, Math.round(img.pixels[i] * 255)));
  }
  fs.writeFileSync(path, Buffer.concat([header, raster]));
}

export function meanPixel(img: GrayImage): number {
  let s = 0;
  for (let i = 0; i < img.pixels.length; i++) s += img.pixels[i];
  return s / img.pixels.length;
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x0a || b === 0x0d || b === 0x09;
}
